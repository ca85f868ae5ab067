#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "unlearn/tokenizer.h"

namespace unlearn {

// Tokens of one teacher-forced example. loss_mask[t] marks positions whose
// token is a training target (answer tokens and the closing <eos>); position
// t is predicted from tokens[0..t).
struct TokenSpan {
    std::vector<TokenId> tokens;
    std::vector<std::uint8_t> loss_mask;
    std::string example_id;

    std::size_t masked_count() const;
};

// Encodes prompt + response + <eos>, masking only the response side.
TokenSpan make_span(const Tokenizer& tokenizer, const std::string& prompt, const std::string& response,
                    std::string example_id = {});

// Activations of one forward pass.
class ForwardPass {
public:
    virtual ~ForwardPass() = default;
    virtual std::size_t length() const = 0;
    virtual bool has_logits() const = 0;
    // length x vocab, row t scores the token at t + 1.
    virtual std::span<const double> logits() const = 0;
    // Residual stream after block `layer`, length x width.
    virtual std::span<const double> hidden(std::size_t layer) const = 0;
};

// Gradient of a scalar with respect to a pass's outputs. Empty vectors mean
// zero; hidden may be shorter than the layer count.
struct UpstreamGrad {
    std::vector<double> logits;
    std::vector<std::vector<double>> hidden;
};

// Causal LM adapter surface. The TinyLM implements it; larger models plug in
// behind the same interface.
class CausalLm {
public:
    virtual ~CausalLm() = default;

    virtual const Tokenizer& tokenizer() const = 0;
    virtual std::size_t vocab_size() const = 0;
    virtual std::size_t layer_count() const = 0;
    virtual std::size_t hidden_width() const = 0;
    virtual std::size_t context_window() const = 0;
    virtual std::span<const double> parameters() const = 0;
    virtual std::span<double> mutable_parameters() = 0;
    std::size_t parameter_count() const { return parameters().size(); }

    // depth limits the pass to the first `depth` blocks (no logits then).
    virtual std::unique_ptr<ForwardPass> forward(std::span<const TokenId> tokens,
                                                 std::optional<std::size_t> depth = std::nullopt) const = 0;
    // Accumulates d(scalar)/d(parameters) into param_grad.
    virtual void backward(const ForwardPass& pass, const UpstreamGrad& upstream,
                          std::span<double> param_grad) const = 0;

    // Greedy continuation; stops after emitting `stop` (not returned), after
    // max_new tokens, or at the context window. Ties go to the lowest id.
    virtual std::vector<TokenId> greedy_continue(std::span<const TokenId> prompt, std::size_t max_new,
                                                 TokenId stop) const;

    virtual std::unique_ptr<CausalLm> clone() const = 0;
    virtual void save(const std::filesystem::path& dir) const = 0;
};

enum class ModelMode { trainable, frozen };

// Owning handle that enforces the trainable/frozen contract.
class ModelHandle {
public:
    explicit ModelHandle(std::unique_ptr<CausalLm> model, ModelMode mode = ModelMode::trainable);
    ModelHandle(ModelHandle&&) noexcept = default;
    ModelHandle& operator=(ModelHandle&&) noexcept = default;
    ModelHandle(const ModelHandle&) = delete;
    ModelHandle& operator=(const ModelHandle&) = delete;

    ModelMode mode() const noexcept { return mode_; }
    bool frozen() const noexcept { return mode_ == ModelMode::frozen; }
    const CausalLm& model() const { return *model_; }
    const CausalLm* operator->() const { return model_.get(); }

    // Parameter access for optimisers. Throws FrozenModelError on frozen handles.
    std::span<double> mutable_parameters();
    // Applies params += delta. Throws FrozenModelError on frozen handles.
    void update(std::span<const double> delta);

    // Deep copy that keeps the mode.
    ModelHandle clone() const;

private:
    std::unique_ptr<CausalLm> model_;
    ModelMode mode_;
};

ModelHandle snapshot_frozen_reference(const ModelHandle& model);

// One probability vector per masked position.
std::vector<std::vector<double>> per_token_distributions(const ModelHandle& model, const TokenSpan& span);
double sequence_log_prob(const ModelHandle& model, const TokenSpan& span);
// Layer-`layer` activations at the masked positions.
std::vector<std::vector<double>> hidden_states(const ModelHandle& model, const TokenSpan& span,
                                               std::size_t layer);
std::string greedy_decode(const ModelHandle& model, const std::string& prompt, std::size_t max_new_tokens);

// Throws LengthError / ContractError if the span cannot be fed to the model.
void validate_span(const CausalLm& model, const TokenSpan& span);

void save_checkpoint(const ModelHandle& model, const std::filesystem::path& dir);
ModelHandle load_checkpoint(const std::filesystem::path& dir, ModelMode mode = ModelMode::trainable);

}  // namespace unlearn
