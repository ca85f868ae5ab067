#include "unlearn/tiny_lm.h"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <random>

#include "json.hpp"
#include "unlearn/errors.h"
#include "unlearn/kernels.h"

namespace unlearn {

namespace {

constexpr char kParamsMagic[8] = {'T', 'I', 'N', 'Y', 'L', 'M', '0', '1'};

struct LayerCache {
    std::vector<double> ln1_hat, ln1_rstd, ln1_out;
    std::vector<double> qkv;
    std::vector<double> probs;  // heads x T x T, lower triangle used
    std::vector<double> att;
    std::vector<double> ln2_hat, ln2_rstd, ln2_out;
    std::vector<double> fc_pre, fc_act;
    std::vector<double> out;
};

class TinyForward final : public ForwardPass {
public:
    std::size_t length() const override { return tokens.size(); }
    bool has_logits() const override { return !logit_buf.empty(); }
    std::span<const double> logits() const override {
        if (logit_buf.empty()) {
            throw ContractError("forward pass was truncated before the output head");
        }
        return logit_buf;
    }
    std::span<const double> hidden(std::size_t layer) const override {
        if (layer >= layers.size()) {
            throw IndexError("layer " + std::to_string(layer) + " not computed by this pass");
        }
        return layers[layer].out;
    }

    const TinyLm* owner = nullptr;
    std::vector<TokenId> tokens;
    std::vector<LayerCache> layers;
    std::vector<double> lnf_hat, lnf_rstd, lnf_out;
    std::vector<double> logit_buf;
};

// Portable standard normal draws; std::normal_distribution differs across
// standard libraries.
class NormalSource {
public:
    explicit NormalSource(std::uint64_t seed) : rng_(seed) {}
    double next() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        while (u1 <= 0.0) {
            u1 = uniform();
        }
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        spare_ = r * std::sin(2.0 * std::numbers::pi * u2);
        has_spare_ = true;
        return r * std::cos(2.0 * std::numbers::pi * u2);
    }

private:
    double uniform() { return static_cast<double>(rng_() >> 11) * 0x1.0p-53; }
    std::mt19937_64 rng_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

void causal_attention(std::size_t T, std::size_t D, std::size_t heads, std::span<const double> qkv,
                      std::span<double> probs, std::span<double> att) {
    const std::size_t dh = D / heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    const std::size_t stride = 3 * D;
    for (std::size_t h = 0; h < heads; ++h) {
        for (std::size_t t = 0; t < T; ++t) {
            const double* q = qkv.data() + t * stride + h * dh;
            double* p = probs.data() + (h * T + t) * T;
            double mx = -std::numeric_limits<double>::infinity();
            for (std::size_t j = 0; j <= t; ++j) {
                const double* k = qkv.data() + j * stride + D + h * dh;
                double s = 0.0;
                for (std::size_t i = 0; i < dh; ++i) {
                    s += q[i] * k[i];
                }
                p[j] = s * scale;
                mx = std::max(mx, p[j]);
            }
            double sum = 0.0;
            for (std::size_t j = 0; j <= t; ++j) {
                p[j] = std::exp(p[j] - mx);
                sum += p[j];
            }
            double* out = att.data() + t * D + h * dh;
            for (std::size_t j = 0; j <= t; ++j) {
                p[j] /= sum;
                const double* v = qkv.data() + j * stride + 2 * D + h * dh;
                for (std::size_t i = 0; i < dh; ++i) {
                    out[i] += p[j] * v[i];
                }
            }
        }
    }
}

}  // namespace

void TinyLmSpec::validate() const {
    if (embed_dim == 0 || n_layers == 0 || n_heads == 0 || context_window == 0) {
        throw ValidationError("model", "embed_dim, n_layers, n_heads and context_window must be positive");
    }
    if (embed_dim % n_heads != 0) {
        throw ValidationError("model.embed_dim", "must be divisible by n_heads");
    }
    if (!(init_std > 0.0) || !std::isfinite(init_std)) {
        throw ValidationError("model.init_std", "must be positive");
    }
}

TinyLm::TinyLm(TinyLmSpec spec, Tokenizer tokenizer) : spec_(spec), tokenizer_(std::move(tokenizer)) {
    spec_.validate();
    const std::size_t D = spec_.embed_dim;
    const std::size_t F = spec_.mlp();
    const std::size_t V = tokenizer_.size();
    wte_ = add_slot("wte", V * D);
    wpe_ = add_slot("wpe", spec_.context_window * D);
    for (std::size_t l = 0; l < spec_.n_layers; ++l) {
        const std::string p = "layer" + std::to_string(l) + ".";
        LayerOffsets o{};
        o.ln1_g = add_slot(p + "ln1.g", D);
        o.ln1_b = add_slot(p + "ln1.b", D);
        o.qkv_w = add_slot(p + "qkv.w", D * 3 * D);
        o.qkv_b = add_slot(p + "qkv.b", 3 * D);
        o.o_w = add_slot(p + "attn_out.w", D * D);
        o.o_b = add_slot(p + "attn_out.b", D);
        o.ln2_g = add_slot(p + "ln2.g", D);
        o.ln2_b = add_slot(p + "ln2.b", D);
        o.fc_w = add_slot(p + "fc.w", D * F);
        o.fc_b = add_slot(p + "fc.b", F);
        o.proj_w = add_slot(p + "proj.w", F * D);
        o.proj_b = add_slot(p + "proj.b", D);
        layers_.push_back(o);
    }
    lnf_g_ = add_slot("lnf.g", D);
    lnf_b_ = add_slot("lnf.b", D);
    head_w_ = add_slot("head.w", D * V);
    head_b_ = add_slot("head.b", V);
    params_.assign(slots_.back().offset + slots_.back().size, 0.0);
    initialise();
}

std::size_t TinyLm::add_slot(const std::string& name, std::size_t size) {
    const std::size_t offset = slots_.empty() ? 0 : slots_.back().offset + slots_.back().size;
    slots_.push_back(Slot{name, offset, size});
    return offset;
}

void TinyLm::initialise() {
    NormalSource normal(spec_.seed);
    const double residual_std = spec_.init_std / std::sqrt(2.0 * static_cast<double>(spec_.n_layers));
    for (const auto& slot : slots_) {
        double* p = params_.data() + slot.offset;
        const bool is_gain = slot.name.ends_with(".g");
        const bool is_bias = slot.name.ends_with(".b");
        const bool residual = slot.name.ends_with("attn_out.w") || slot.name.ends_with("proj.w");
        for (std::size_t i = 0; i < slot.size; ++i) {
            if (is_gain) {
                p[i] = 1.0;
            } else if (is_bias) {
                p[i] = 0.0;
            } else {
                p[i] = normal.next() * (residual ? residual_std : spec_.init_std);
            }
        }
    }
}

std::span<double> TinyLm::tensor(std::string_view name) {
    for (const auto& slot : slots_) {
        if (slot.name == name) {
            return {params_.data() + slot.offset, slot.size};
        }
    }
    throw NotFoundError("no parameter tensor named " + std::string(name));
}

std::span<const double> TinyLm::tensor(std::string_view name) const {
    return const_cast<TinyLm*>(this)->tensor(name);
}

std::vector<std::string> TinyLm::tensor_names() const {
    std::vector<std::string> names;
    for (const auto& slot : slots_) {
        names.push_back(slot.name);
    }
    return names;
}

std::unique_ptr<ForwardPass> TinyLm::forward(std::span<const TokenId> tokens,
                                             std::optional<std::size_t> depth) const {
    const std::size_t T = tokens.size();
    const std::size_t D = spec_.embed_dim;
    const std::size_t F = spec_.mlp();
    const std::size_t V = tokenizer_.size();
    const std::size_t H = spec_.n_heads;
    if (T == 0) {
        throw LengthError("empty token sequence");
    }
    if (T > spec_.context_window) {
        throw LengthError("sequence of " + std::to_string(T) + " tokens exceeds context window " +
                          std::to_string(spec_.context_window));
    }
    const std::size_t n_blocks = std::min(depth.value_or(spec_.n_layers), spec_.n_layers);

    auto pass = std::make_unique<TinyForward>();
    pass->owner = this;
    pass->tokens.assign(tokens.begin(), tokens.end());

    std::vector<double> x(T * D);
    for (std::size_t t = 0; t < T; ++t) {
        const TokenId tok = tokens[t];
        if (tok < 0 || static_cast<std::size_t>(tok) >= V) {
            throw IndexError("token id " + std::to_string(tok) + " outside vocabulary");
        }
        const double* te = params_.data() + wte_ + static_cast<std::size_t>(tok) * D;
        const double* pe = params_.data() + wpe_ + t * D;
        for (std::size_t i = 0; i < D; ++i) {
            x[t * D + i] = te[i] + pe[i];
        }
    }

    pass->layers.resize(n_blocks);
    for (std::size_t l = 0; l < n_blocks; ++l) {
        const LayerOffsets& o = layers_[l];
        LayerCache& c = pass->layers[l];
        c.ln1_hat.resize(T * D);
        c.ln1_rstd.resize(T);
        c.ln1_out.resize(T * D);
        kernels::layernorm_forward(T, D, x, view(o.ln1_g, D), view(o.ln1_b, D), c.ln1_hat, c.ln1_rstd,
                                   c.ln1_out);
        c.qkv.assign(T * 3 * D, 0.0);
        kernels::gemm_nn(T, D, 3 * D, c.ln1_out, view(o.qkv_w, D * 3 * D), c.qkv);
        kernels::add_row_bias(T, 3 * D, view(o.qkv_b, 3 * D), c.qkv);
        c.probs.assign(H * T * T, 0.0);
        c.att.assign(T * D, 0.0);
        causal_attention(T, D, H, c.qkv, c.probs, c.att);
        kernels::gemm_nn(T, D, D, c.att, view(o.o_w, D * D), x);
        kernels::add_row_bias(T, D, view(o.o_b, D), x);

        c.ln2_hat.resize(T * D);
        c.ln2_rstd.resize(T);
        c.ln2_out.resize(T * D);
        kernels::layernorm_forward(T, D, x, view(o.ln2_g, D), view(o.ln2_b, D), c.ln2_hat, c.ln2_rstd,
                                   c.ln2_out);
        c.fc_pre.assign(T * F, 0.0);
        kernels::gemm_nn(T, D, F, c.ln2_out, view(o.fc_w, D * F), c.fc_pre);
        kernels::add_row_bias(T, F, view(o.fc_b, F), c.fc_pre);
        c.fc_act.resize(T * F);
        kernels::gelu_forward(c.fc_pre, c.fc_act);
        kernels::gemm_nn(T, F, D, c.fc_act, view(o.proj_w, F * D), x);
        kernels::add_row_bias(T, D, view(o.proj_b, D), x);
        c.out = x;
    }

    if (n_blocks == spec_.n_layers) {
        pass->lnf_hat.resize(T * D);
        pass->lnf_rstd.resize(T);
        pass->lnf_out.resize(T * D);
        kernels::layernorm_forward(T, D, x, view(lnf_g_, D), view(lnf_b_, D), pass->lnf_hat, pass->lnf_rstd,
                                   pass->lnf_out);
        pass->logit_buf.assign(T * V, 0.0);
        kernels::gemm_nn(T, D, V, pass->lnf_out, view(head_w_, D * V), pass->logit_buf);
        kernels::add_row_bias(T, V, view(head_b_, V), pass->logit_buf);
    }
    return pass;
}

void TinyLm::backward(const ForwardPass& base, const UpstreamGrad& upstream, std::span<double> grad) const {
    const auto* pass = dynamic_cast<const TinyForward*>(&base);
    if (pass == nullptr || pass->owner != this) {
        throw ContractError("backward called with a pass from another model");
    }
    if (grad.size() != params_.size()) {
        throw ContractError("gradient buffer size does not match parameter count");
    }
    const std::size_t T = pass->tokens.size();
    const std::size_t D = spec_.embed_dim;
    const std::size_t F = spec_.mlp();
    const std::size_t V = tokenizer_.size();
    const std::size_t H = spec_.n_heads;
    const std::size_t dh = D / H;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    auto g = [&](std::size_t offset, std::size_t size) { return grad.subspan(offset, size); };

    std::vector<double> dx(T * D, 0.0);
    std::size_t top = 0;
    bool any = false;
    if (!upstream.logits.empty()) {
        if (!pass->has_logits()) {
            throw ContractError("logit gradient supplied for a truncated pass");
        }
        if (upstream.logits.size() != T * V) {
            throw ContractError("logit gradient has the wrong shape");
        }
        std::vector<double> dn(T * D, 0.0);
        kernels::gemm_nt(T, V, D, upstream.logits, view(head_w_, D * V), dn);
        kernels::gemm_tn(T, D, V, pass->lnf_out, upstream.logits, g(head_w_, D * V));
        kernels::accumulate_column_sums(T, V, upstream.logits, g(head_b_, V));
        kernels::layernorm_backward(T, D, dn, pass->lnf_hat, pass->lnf_rstd, view(lnf_g_, D), dx, g(lnf_g_, D),
                                    g(lnf_b_, D));
        top = spec_.n_layers - 1;
        any = true;
    }
    for (std::size_t l = 0; l < upstream.hidden.size(); ++l) {
        if (!upstream.hidden[l].empty()) {
            if (l >= pass->layers.size()) {
                throw ContractError("hidden gradient for a layer the pass did not compute");
            }
            if (upstream.hidden[l].size() != T * D) {
                throw ContractError("hidden gradient has the wrong shape");
            }
            top = any ? std::max(top, l) : l;
            any = true;
        }
    }
    if (!any) {
        return;
    }

    std::vector<double> dact(T * F), dpre(T * F), dln(T * D), datt(T * D), dqkv(T * 3 * D);
    for (std::size_t li = top + 1; li-- > 0;) {
        const LayerOffsets& o = layers_[li];
        const LayerCache& c = pass->layers[li];
        if (li < upstream.hidden.size() && !upstream.hidden[li].empty()) {
            for (std::size_t i = 0; i < T * D; ++i) {
                dx[i] += upstream.hidden[li][i];
            }
        }

        // MLP branch.
        kernels::accumulate_column_sums(T, D, dx, g(o.proj_b, D));
        kernels::gemm_tn(T, F, D, c.fc_act, dx, g(o.proj_w, F * D));
        std::fill(dact.begin(), dact.end(), 0.0);
        kernels::gemm_nt(T, D, F, dx, view(o.proj_w, F * D), dact);
        std::fill(dpre.begin(), dpre.end(), 0.0);
        kernels::gelu_backward(c.fc_pre, dact, dpre);
        kernels::accumulate_column_sums(T, F, dpre, g(o.fc_b, F));
        kernels::gemm_tn(T, D, F, c.ln2_out, dpre, g(o.fc_w, D * F));
        std::fill(dln.begin(), dln.end(), 0.0);
        kernels::gemm_nt(T, F, D, dpre, view(o.fc_w, D * F), dln);
        kernels::layernorm_backward(T, D, dln, c.ln2_hat, c.ln2_rstd, view(o.ln2_g, D), dx, g(o.ln2_g, D),
                                    g(o.ln2_b, D));

        // Attention branch.
        kernels::accumulate_column_sums(T, D, dx, g(o.o_b, D));
        kernels::gemm_tn(T, D, D, c.att, dx, g(o.o_w, D * D));
        std::fill(datt.begin(), datt.end(), 0.0);
        kernels::gemm_nt(T, D, D, dx, view(o.o_w, D * D), datt);
        std::fill(dqkv.begin(), dqkv.end(), 0.0);
        const std::size_t stride = 3 * D;
        for (std::size_t h = 0; h < H; ++h) {
            for (std::size_t t = 0; t < T; ++t) {
                const double* p = c.probs.data() + (h * T + t) * T;
                const double* dout = datt.data() + t * D + h * dh;
                double weighted = 0.0;
                std::vector<double> dp(t + 1);
                for (std::size_t j = 0; j <= t; ++j) {
                    const double* v = c.qkv.data() + j * stride + 2 * D + h * dh;
                    double* dv = dqkv.data() + j * stride + 2 * D + h * dh;
                    double acc = 0.0;
                    for (std::size_t i = 0; i < dh; ++i) {
                        acc += dout[i] * v[i];
                        dv[i] += p[j] * dout[i];
                    }
                    dp[j] = acc;
                    weighted += p[j] * acc;
                }
                const double* q = c.qkv.data() + t * stride + h * dh;
                double* dq = dqkv.data() + t * stride + h * dh;
                for (std::size_t j = 0; j <= t; ++j) {
                    const double ds = p[j] * (dp[j] - weighted) * scale;
                    if (ds == 0.0) {
                        continue;
                    }
                    const double* k = c.qkv.data() + j * stride + D + h * dh;
                    double* dk = dqkv.data() + j * stride + D + h * dh;
                    for (std::size_t i = 0; i < dh; ++i) {
                        dq[i] += ds * k[i];
                        dk[i] += ds * q[i];
                    }
                }
            }
        }
        kernels::accumulate_column_sums(T, 3 * D, dqkv, g(o.qkv_b, 3 * D));
        kernels::gemm_tn(T, D, 3 * D, c.ln1_out, dqkv, g(o.qkv_w, D * 3 * D));
        std::fill(dln.begin(), dln.end(), 0.0);
        kernels::gemm_nt(T, 3 * D, D, dqkv, view(o.qkv_w, D * 3 * D), dln);
        kernels::layernorm_backward(T, D, dln, c.ln1_hat, c.ln1_rstd, view(o.ln1_g, D), dx, g(o.ln1_g, D),
                                    g(o.ln1_b, D));
    }

    for (std::size_t t = 0; t < T; ++t) {
        double* gte = grad.data() + wte_ + static_cast<std::size_t>(pass->tokens[t]) * D;
        double* gpe = grad.data() + wpe_ + t * D;
        for (std::size_t i = 0; i < D; ++i) {
            gte[i] += dx[t * D + i];
            gpe[i] += dx[t * D + i];
        }
    }
}

std::vector<TokenId> TinyLm::greedy_continue(std::span<const TokenId> prompt, std::size_t max_new,
                                             TokenId stop) const {
    const std::size_t D = spec_.embed_dim;
    const std::size_t F = spec_.mlp();
    const std::size_t V = tokenizer_.size();
    const std::size_t H = spec_.n_heads;
    const std::size_t dh = D / H;
    const std::size_t C = spec_.context_window;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    if (prompt.empty()) {
        throw LengthError("empty prompt");
    }
    if (prompt.size() > C) {
        throw LengthError("prompt of " + std::to_string(prompt.size()) + " tokens exceeds context window");
    }

    // Per-layer key/value cache, C x D each.
    std::vector<std::vector<double>> keys(spec_.n_layers, std::vector<double>(C * D));
    std::vector<std::vector<double>> values(spec_.n_layers, std::vector<double>(C * D));
    std::vector<double> x(D), hat(D), normed(D), qkv(3 * D), att(D), fc(F), act(F), logits(V), scores(C);
    double rstd = 0.0;

    auto step = [&](TokenId tok, std::size_t pos) {
        if (tok < 0 || static_cast<std::size_t>(tok) >= V) {
            throw IndexError("token id " + std::to_string(tok) + " outside vocabulary");
        }
        for (std::size_t i = 0; i < D; ++i) {
            x[i] = params_[wte_ + static_cast<std::size_t>(tok) * D + i] + params_[wpe_ + pos * D + i];
        }
        for (std::size_t l = 0; l < spec_.n_layers; ++l) {
            const LayerOffsets& o = layers_[l];
            kernels::layernorm_forward(1, D, x, view(o.ln1_g, D), view(o.ln1_b, D), hat, {&rstd, 1}, normed);
            std::fill(qkv.begin(), qkv.end(), 0.0);
            kernels::gemm_nn(1, D, 3 * D, normed, view(o.qkv_w, D * 3 * D), qkv);
            kernels::add_row_bias(1, 3 * D, view(o.qkv_b, 3 * D), qkv);
            std::copy(qkv.begin() + static_cast<long>(D), qkv.begin() + static_cast<long>(2 * D),
                      keys[l].begin() + static_cast<long>(pos * D));
            std::copy(qkv.begin() + static_cast<long>(2 * D), qkv.end(),
                      values[l].begin() + static_cast<long>(pos * D));
            std::fill(att.begin(), att.end(), 0.0);
            for (std::size_t h = 0; h < H; ++h) {
                double mx = -std::numeric_limits<double>::infinity();
                for (std::size_t j = 0; j <= pos; ++j) {
                    double s = 0.0;
                    for (std::size_t i = 0; i < dh; ++i) {
                        s += qkv[h * dh + i] * keys[l][j * D + h * dh + i];
                    }
                    scores[j] = s * scale;
                    mx = std::max(mx, scores[j]);
                }
                double sum = 0.0;
                for (std::size_t j = 0; j <= pos; ++j) {
                    scores[j] = std::exp(scores[j] - mx);
                    sum += scores[j];
                }
                for (std::size_t j = 0; j <= pos; ++j) {
                    const double p = scores[j] / sum;
                    for (std::size_t i = 0; i < dh; ++i) {
                        att[h * dh + i] += p * values[l][j * D + h * dh + i];
                    }
                }
            }
            kernels::gemm_nn(1, D, D, att, view(o.o_w, D * D), x);
            kernels::add_row_bias(1, D, view(o.o_b, D), x);
            kernels::layernorm_forward(1, D, x, view(o.ln2_g, D), view(o.ln2_b, D), hat, {&rstd, 1}, normed);
            std::fill(fc.begin(), fc.end(), 0.0);
            kernels::gemm_nn(1, D, F, normed, view(o.fc_w, D * F), fc);
            kernels::add_row_bias(1, F, view(o.fc_b, F), fc);
            kernels::gelu_forward(fc, act);
            kernels::gemm_nn(1, F, D, act, view(o.proj_w, F * D), x);
            kernels::add_row_bias(1, D, view(o.proj_b, D), x);
        }
        kernels::layernorm_forward(1, D, x, view(lnf_g_, D), view(lnf_b_, D), hat, {&rstd, 1}, normed);
        std::fill(logits.begin(), logits.end(), 0.0);
        kernels::gemm_nn(1, D, V, normed, view(head_w_, D * V), logits);
        kernels::add_row_bias(1, V, view(head_b_, V), logits);
    };

    std::vector<TokenId> out;
    if (prompt.size() == C) {
        return out;
    }
    for (std::size_t t = 0; t < prompt.size(); ++t) {
        step(prompt[t], t);
    }
    std::size_t pos = prompt.size();
    while (out.size() < max_new) {
        TokenId best = 0;
        for (std::size_t v = 1; v < V; ++v) {
            if (logits[v] > logits[static_cast<std::size_t>(best)]) {
                best = static_cast<TokenId>(v);
            }
        }
        if (best == stop) {
            break;
        }
        out.push_back(best);
        if (pos + 1 >= C || out.size() == max_new) {
            break;
        }
        step(best, pos);
        ++pos;
    }
    return out;
}

std::unique_ptr<CausalLm> TinyLm::clone() const { return std::make_unique<TinyLm>(*this); }

void TinyLm::save(const std::filesystem::path& dir) const {
    std::filesystem::create_directories(dir);
    {
        std::ofstream out(dir / "params.bin", std::ios::binary);
        if (!out) {
            throw NotFoundError("cannot write " + (dir / "params.bin").string());
        }
        const std::uint64_t count = params_.size();
        out.write(kParamsMagic, sizeof kParamsMagic);
        out.write(reinterpret_cast<const char*>(&count), sizeof count);
        out.write(reinterpret_cast<const char*>(params_.data()),
                  static_cast<std::streamsize>(params_.size() * sizeof(double)));
    }
    nlohmann::json spec{{"kind", "tiny_lm"},
                        {"embed_dim", spec_.embed_dim},
                        {"n_layers", spec_.n_layers},
                        {"n_heads", spec_.n_heads},
                        {"context_window", spec_.context_window},
                        {"mlp_width", spec_.mlp_width},
                        {"seed", spec_.seed},
                        {"init_std", spec_.init_std},
                        {"parameter_count", params_.size()}};
    std::ofstream(dir / "spec.json") << spec.dump(2) << "\n";
    tokenizer_.save(dir / "vocab.txt");
}

std::unique_ptr<TinyLm> TinyLm::load(const std::filesystem::path& dir) {
    std::ifstream spec_in(dir / "spec.json");
    if (!spec_in) {
        throw NotFoundError("no checkpoint spec at " + (dir / "spec.json").string());
    }
    const auto spec_json = nlohmann::json::parse(spec_in);
    if (spec_json.value("kind", "") != "tiny_lm") {
        throw ConfigError("checkpoint at " + dir.string() + " is not a tiny_lm checkpoint");
    }
    TinyLmSpec spec;
    spec.embed_dim = spec_json.at("embed_dim").get<std::size_t>();
    spec.n_layers = spec_json.at("n_layers").get<std::size_t>();
    spec.n_heads = spec_json.at("n_heads").get<std::size_t>();
    spec.context_window = spec_json.at("context_window").get<std::size_t>();
    spec.mlp_width = spec_json.value("mlp_width", std::size_t{0});
    spec.seed = spec_json.value("seed", std::uint64_t{0});
    spec.init_std = spec_json.value("init_std", 0.02);
    auto model = std::make_unique<TinyLm>(spec, Tokenizer::load(dir / "vocab.txt"));

    std::ifstream in(dir / "params.bin", std::ios::binary);
    if (!in) {
        throw NotFoundError("no parameter blob at " + (dir / "params.bin").string());
    }
    char magic[sizeof kParamsMagic];
    std::uint64_t count = 0;
    in.read(magic, sizeof magic);
    in.read(reinterpret_cast<char*>(&count), sizeof count);
    if (!in || std::memcmp(magic, kParamsMagic, sizeof magic) != 0 || count != model->params_.size()) {
        throw ConfigError("parameter blob at " + dir.string() + " does not match its spec");
    }
    in.read(reinterpret_cast<char*>(model->params_.data()),
            static_cast<std::streamsize>(count * sizeof(double)));
    if (!in) {
        throw ConfigError("truncated parameter blob at " + dir.string());
    }
    return model;
}

}  // namespace unlearn
