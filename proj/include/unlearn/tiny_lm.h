#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "unlearn/model.h"

namespace unlearn {

struct TinyLmSpec {
    std::size_t embed_dim = 128;
    std::size_t n_layers = 2;
    std::size_t n_heads = 4;
    std::size_t context_window = 128;
    // 0 selects 4 * embed_dim.
    std::size_t mlp_width = 0;
    std::uint64_t seed = 0;
    double init_std = 0.02;

    std::size_t mlp() const { return mlp_width == 0 ? 4 * embed_dim : mlp_width; }
    void validate() const;
};

// Pre-norm decoder-only transformer in double precision with learned
// absolute positions, tanh-GELU MLPs and an untied output head. Gradients are
// computed by explicit backpropagation.
class TinyLm final : public CausalLm {
public:
    TinyLm(TinyLmSpec spec, Tokenizer tokenizer);

    const TinyLmSpec& spec() const noexcept { return spec_; }

    const Tokenizer& tokenizer() const override { return tokenizer_; }
    std::size_t vocab_size() const override { return tokenizer_.size(); }
    std::size_t layer_count() const override { return spec_.n_layers; }
    std::size_t hidden_width() const override { return spec_.embed_dim; }
    std::size_t context_window() const override { return spec_.context_window; }
    std::span<const double> parameters() const override { return params_; }
    std::span<double> mutable_parameters() override { return params_; }

    std::unique_ptr<ForwardPass> forward(std::span<const TokenId> tokens,
                                         std::optional<std::size_t> depth = std::nullopt) const override;
    void backward(const ForwardPass& pass, const UpstreamGrad& upstream,
                  std::span<double> param_grad) const override;
    std::vector<TokenId> greedy_continue(std::span<const TokenId> prompt, std::size_t max_new,
                                         TokenId stop) const override;
    std::unique_ptr<CausalLm> clone() const override;
    void save(const std::filesystem::path& dir) const override;
    static std::unique_ptr<TinyLm> load(const std::filesystem::path& dir);

    // Named parameter tensor, e.g. "wte", "head.w", "layer0.qkv.w".
    std::span<double> tensor(std::string_view name);
    std::span<const double> tensor(std::string_view name) const;
    std::vector<std::string> tensor_names() const;

private:
    struct Slot {
        std::string name;
        std::size_t offset;
        std::size_t size;
    };
    struct LayerOffsets {
        std::size_t ln1_g, ln1_b, qkv_w, qkv_b, o_w, o_b, ln2_g, ln2_b, fc_w, fc_b, proj_w, proj_b;
    };

    std::size_t add_slot(const std::string& name, std::size_t size);
    void initialise();
    std::span<const double> view(std::size_t offset, std::size_t size) const {
        return {params_.data() + offset, size};
    }

    TinyLmSpec spec_;
    Tokenizer tokenizer_;
    std::vector<Slot> slots_;
    std::vector<double> params_;
    std::size_t wte_ = 0, wpe_ = 0, lnf_g_ = 0, lnf_b_ = 0, head_w_ = 0, head_b_ = 0;
    std::vector<LayerOffsets> layers_;
};

}  // namespace unlearn
