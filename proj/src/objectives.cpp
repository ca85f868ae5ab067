#include "unlearn/objectives.h"

#include <algorithm>
#include <cmath>
#include <random>

#include "unlearn/errors.h"
#include "unlearn/kernels.h"

namespace unlearn {

namespace {

bool finite_nonnegative(double x) { return std::isfinite(x) && x >= 0.0; }

// Masked positions and the log-softmax rows that predict them.
struct MaskedRows {
    std::unique_ptr<ForwardPass> pass;
    std::vector<std::size_t> positions;  // t such that loss_mask[t] is set
    std::vector<double> log_probs;       // positions.size() x vocab
};

MaskedRows forward_masked(const CausalLm& model, const TokenSpan& span) {
    validate_span(model, span);
    MaskedRows out;
    for (std::size_t t = 1; t < span.tokens.size(); ++t) {
        if (span.loss_mask[t] != 0) {
            out.positions.push_back(t);
        }
    }
    if (out.positions.empty()) {
        throw ContractError("example " + span.example_id + " has no answer positions");
    }
    out.pass = model.forward(span.tokens);
    const std::size_t V = model.vocab_size();
    const auto logits = out.pass->logits();
    out.log_probs.resize(out.positions.size() * V);
    for (std::size_t k = 0; k < out.positions.size(); ++k) {
        kernels::log_softmax(logits.subspan((out.positions[k] - 1) * V, V),
                             std::span<double>(out.log_probs).subspan(k * V, V));
    }
    return out;
}

// Scatters per-masked-position logit gradients into a full upstream and runs backward.
void backprop_masked(const CausalLm& model, const MaskedRows& rows, const std::vector<double>& dlogits,
                     std::span<double> grad) {
    const std::size_t V = model.vocab_size();
    UpstreamGrad up;
    up.logits.assign(rows.pass->length() * V, 0.0);
    for (std::size_t k = 0; k < rows.positions.size(); ++k) {
        std::copy_n(dlogits.begin() + static_cast<long>(k * V), V,
                    up.logits.begin() + static_cast<long>((rows.positions[k] - 1) * V));
    }
    model.backward(*rows.pass, up, grad);
}

double masked_sequence_log_prob(const MaskedRows& rows, const TokenSpan& span, std::size_t V) {
    double total = 0.0;
    for (std::size_t k = 0; k < rows.positions.size(); ++k) {
        total += rows.log_probs[k * V + static_cast<std::size_t>(span.tokens[rows.positions[k]])];
    }
    return total;
}

// dlogits += coeff * (onehot(y) - p) per masked row: the gradient of coeff * log pi(a|q).
void add_log_prob_grad(const MaskedRows& rows, const TokenSpan& span, std::size_t V, double coeff,
                       std::vector<double>& dlogits) {
    dlogits.resize(rows.positions.size() * V, 0.0);
    for (std::size_t k = 0; k < rows.positions.size(); ++k) {
        const auto y = static_cast<std::size_t>(span.tokens[rows.positions[k]]);
        for (std::size_t v = 0; v < V; ++v) {
            dlogits[k * V + v] -= coeff * std::exp(rows.log_probs[k * V + v]);
        }
        dlogits[k * V + y] += coeff;
    }
}

void require_batch(std::span<const TokenSpan> batch, const char* what) {
    if (batch.empty()) {
        throw ContractError(std::string(what) + " batch is empty");
    }
}

void require_finite(double value, const TokenSpan& span, const char* what) {
    if (!std::isfinite(value)) {
        throw NumericalError(span.example_id, std::string("non-finite ") + what);
    }
}

double nll_example(const CausalLm& model, const TokenSpan& span, std::span<double> grad, double coeff) {
    const auto rows = forward_masked(model, span);
    const std::size_t V = model.vocab_size();
    const double m = static_cast<double>(rows.positions.size());
    const double nll = -masked_sequence_log_prob(rows, span, V) / m;
    require_finite(nll, span, "answer log-probability");
    if (!grad.empty()) {
        std::vector<double> d;
        add_log_prob_grad(rows, span, V, -coeff / m, d);
        backprop_masked(model, rows, d, grad);
    }
    return nll;
}

// Activations after block `layer` at masked positions, with the pass kept for backward.
struct MaskedHidden {
    std::unique_ptr<ForwardPass> pass;
    std::vector<std::size_t> positions;
};

MaskedHidden forward_hidden(const CausalLm& model, const TokenSpan& span, std::size_t layer) {
    validate_span(model, span);
    MaskedHidden out;
    for (std::size_t t = 0; t < span.tokens.size(); ++t) {
        if (span.loss_mask[t] != 0) {
            out.positions.push_back(t);
        }
    }
    if (out.positions.empty()) {
        throw ContractError("example " + span.example_id + " has no answer positions");
    }
    out.pass = model.forward(span.tokens, layer + 1);
    return out;
}

// Mean over masked positions and dims of ||h_t - target_t||^2. target(k) gives
// the row for the k-th masked position.
template <class Target>
double activation_distance(const CausalLm& model, const TokenSpan& span, std::size_t layer, Target&& target,
                           std::span<double> grad, double coeff) {
    const auto hm = forward_hidden(model, span, layer);
    const std::size_t D = model.hidden_width();
    const auto h = hm.pass->hidden(layer);
    const double denom = static_cast<double>(hm.positions.size() * D);
    UpstreamGrad up;
    if (!grad.empty()) {
        up.hidden.resize(layer + 1);
        up.hidden[layer].assign(hm.pass->length() * D, 0.0);
    }
    double total = 0.0;
    for (std::size_t k = 0; k < hm.positions.size(); ++k) {
        const std::size_t t = hm.positions[k];
        const double* tgt = target(k);
        for (std::size_t i = 0; i < D; ++i) {
            const double diff = h[t * D + i] - tgt[i];
            total += diff * diff;
            if (!grad.empty()) {
                up.hidden[layer][t * D + i] = coeff * 2.0 * diff / denom;
            }
        }
    }
    const double value = total / denom;
    require_finite(value, span, "activation distance");
    if (!grad.empty()) {
        model.backward(*hm.pass, up, grad);
    }
    return value;
}

TokenSpan preferred_span(const CausalLm& model, const TokenSpan& rejected, const std::string& refusal) {
    TokenSpan out;
    out.example_id = rejected.example_id;
    for (std::size_t t = 0; t < rejected.tokens.size() && rejected.loss_mask[t] == 0; ++t) {
        out.tokens.push_back(rejected.tokens[t]);
        out.loss_mask.push_back(0);
    }
    const Tokenizer& tok = model.tokenizer();
    for (TokenId id : tok.encode(refusal)) {
        out.tokens.push_back(id);
        out.loss_mask.push_back(1);
    }
    out.tokens.push_back(tok.eos_id());
    out.loss_mask.push_back(1);
    return out;
}

std::uint64_t fnv1a(std::string_view text, std::uint64_t seed) {
    std::uint64_t h = 1469598103934665603ULL ^ seed;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

}  // namespace

// ------------------------------------------------------------------ configs --

void CompositeWeights::validate() const {
    if (!finite_nonnegative(lambda_f)) throw ConfigError("lambda_f must be finite and non-negative");
    if (!finite_nonnegative(lambda_r)) throw ConfigError("lambda_r must be finite and non-negative");
    if (!finite_nonnegative(lambda_c)) throw ConfigError("lambda_c must be finite and non-negative");
}

void NpoConfig::validate() const {
    if (!(tau > 0.0) || !std::isfinite(tau)) throw ConfigError("npo.tau must be positive");
}

void RmuConfig::validate(std::size_t hidden_width, std::size_t layer_count) const {
    if (layer >= layer_count) {
        throw ConfigError("rmu.layer " + std::to_string(layer) + " out of range for a " +
                          std::to_string(layer_count) + "-layer model");
    }
    if (steering_vector.size() != hidden_width) {
        throw ConfigError("rmu steering vector has width " + std::to_string(steering_vector.size()) +
                          ", model hidden width is " + std::to_string(hidden_width));
    }
    double norm = 0.0;
    for (double v : steering_vector) norm += v * v;
    if (std::abs(std::sqrt(norm) - 1.0) > 1e-6) {
        throw ConfigError("rmu steering vector must have unit L2 norm");
    }
    if (!(steering_coefficient > 0.0) || !std::isfinite(steering_coefficient)) {
        throw ConfigError("rmu.steering_coefficient must be positive");
    }
    if (!finite_nonnegative(retain_weight)) throw ConfigError("rmu.retain_weight must be non-negative");
}

std::vector<double> sample_steering_vector(std::uint64_t seed, std::size_t width) {
    if (width == 0) {
        throw ConfigError("steering vector width must be positive");
    }
    std::mt19937_64 rng(seed);
    std::vector<double> u(width);
    double norm = 0.0;
    do {
        norm = 0.0;
        for (auto& v : u) {
            v = static_cast<double>(rng() >> 11) * 0x1.0p-53;
            norm += v * v;
        }
    } while (norm == 0.0);
    norm = std::sqrt(norm);
    for (auto& v : u) v /= norm;
    return u;
}

void UndialConfig::validate() const {
    if (!finite_nonnegative(logit_penalty)) throw ConfigError("undial.logit_penalty must be non-negative");
}

void IdkDpoConfig::validate() const {
    if (!(beta > 0.0) || !std::isfinite(beta)) throw ConfigError("idk_dpo.beta must be positive");
    if (idk_pool.empty()) throw ConfigError("idk_dpo.idk_pool must not be empty");
}

std::string_view to_string(MethodName method) {
    switch (method) {
        case MethodName::grad_ascent: return "grad_ascent";
        case MethodName::grad_diff: return "grad_diff";
        case MethodName::npo: return "npo";
        case MethodName::rmu: return "rmu";
        case MethodName::undial: return "undial";
        case MethodName::idk_dpo: return "idk_dpo";
    }
    return "?";
}

MethodName parse_method_name(std::string_view text) {
    for (MethodName m : all_methods()) {
        if (to_string(m) == text) return m;
    }
    throw ValidationError("method.name", "unknown method '" + std::string(text) + "'");
}

const std::vector<MethodName>& all_methods() {
    static const std::vector<MethodName> methods = {MethodName::grad_ascent, MethodName::grad_diff, MethodName::npo,
                                                    MethodName::rmu,         MethodName::undial,    MethodName::idk_dpo};
    return methods;
}

bool method_uses_retain(MethodName method) { return method != MethodName::grad_ascent; }

// -------------------------------------------------------------- reference --

ReferenceOracle::ReferenceOracle(const ModelHandle& reference) : reference_(&reference) {
    if (!reference.frozen()) {
        throw ContractError("reference model must be frozen");
    }
}

ReferenceOracle::Entry& ReferenceOracle::entry(const TokenSpan& span) const {
    std::lock_guard lock(mutex_);
    return cache_[span.tokens];
}

void ReferenceOracle::fill_logits(const TokenSpan& span, Entry& e) const {
    {
        std::lock_guard lock(mutex_);
        if (e.has_logits) return;
    }
    const CausalLm& model = reference_->model();
    const auto rows = forward_masked(model, span);
    const std::size_t V = model.vocab_size();
    const auto logits = rows.pass->logits();
    std::vector<double> raw(rows.positions.size() * V);
    for (std::size_t k = 0; k < rows.positions.size(); ++k) {
        std::copy_n(logits.begin() + static_cast<long>((rows.positions[k] - 1) * V), V,
                    raw.begin() + static_cast<long>(k * V));
    }
    const double seq = masked_sequence_log_prob(rows, span, V);
    require_finite(seq, span, "reference log-probability");
    std::lock_guard lock(mutex_);
    if (!e.has_logits) {
        e.logits = std::move(raw);
        e.log_probs = rows.log_probs;
        e.seq_log_prob = seq;
        e.has_logits = true;
    }
}

const std::vector<double>& ReferenceOracle::masked_log_probs(const TokenSpan& span) const {
    Entry& e = entry(span);
    fill_logits(span, e);
    return e.log_probs;
}

const std::vector<double>& ReferenceOracle::masked_logits(const TokenSpan& span) const {
    Entry& e = entry(span);
    fill_logits(span, e);
    return e.logits;
}

double ReferenceOracle::sequence_log_prob(const TokenSpan& span) const {
    Entry& e = entry(span);
    fill_logits(span, e);
    return e.seq_log_prob;
}

const std::vector<double>& ReferenceOracle::masked_hidden(const TokenSpan& span, std::size_t layer) const {
    Entry& e = entry(span);
    {
        std::lock_guard lock(mutex_);
        const auto it = e.hidden.find(layer);
        if (it != e.hidden.end()) return it->second;
    }
    const auto rows = hidden_states(*reference_, span, layer);
    std::vector<double> flat;
    for (const auto& r : rows) flat.insert(flat.end(), r.begin(), r.end());
    std::lock_guard lock(mutex_);
    return e.hidden.emplace(layer, std::move(flat)).first->second;
}

std::size_t ReferenceOracle::cached_spans() const {
    std::lock_guard lock(mutex_);
    return cache_.size();
}

void ReferenceOracle::clear() {
    std::lock_guard lock(mutex_);
    cache_.clear();
}

// ------------------------------------------------------------------ losses --

double loss_nll(const ModelHandle& model, std::span<const TokenSpan> batch, std::span<double> grad, double scale,
                Execution exec) {
    require_batch(batch, "retain");
    const double inv_b = 1.0 / static_cast<double>(batch.size());
    return reduce_items(
        batch.size(), grad,
        [&](std::size_t i, std::span<double> g) { return nll_example(model.model(), batch[i], g, scale * inv_b) * inv_b; },
        exec);
}

double loss_grad_ascent(const ModelHandle& model, std::span<const TokenSpan> forget, std::span<double> grad,
                        double scale, Execution exec) {
    require_batch(forget, "forget");
    return -loss_nll(model, forget, grad, -scale, exec);
}

double loss_grad_diff(const ModelHandle& model, std::span<const TokenSpan> forget, std::span<const TokenSpan> retain,
                      std::span<double> grad, double scale, Execution exec) {
    require_batch(forget, "forget");
    require_batch(retain, "retain");
    return loss_grad_ascent(model, forget, grad, scale, exec) + loss_nll(model, retain, grad, scale, exec);
}

double loss_npo(const ModelHandle& model, const ReferenceOracle& reference, std::span<const TokenSpan> forget,
                const NpoConfig& config, std::span<double> grad, double scale, Execution exec) {
    require_batch(forget, "forget");
    config.validate();
    const double tau = config.tau;
    const double inv_b = 1.0 / static_cast<double>(forget.size());
    const CausalLm& m = model.model();
    const std::size_t V = m.vocab_size();
    return reduce_items(
        forget.size(), grad,
        [&](std::size_t i, std::span<double> g) {
            const TokenSpan& span = forget[i];
            const auto rows = forward_masked(m, span);
            const double norm = config.length_normalized ? 1.0 / static_cast<double>(rows.positions.size()) : 1.0;
            const double log_w = masked_sequence_log_prob(rows, span, V) * norm;
            const double log_ref = reference.sequence_log_prob(span) * norm;
            require_finite(log_w, span, "model log-probability");
            const double delta = log_ref - log_w;
            const double value = npo_from_log_ratio(tau, delta);
            if (!g.empty()) {
                // d value / d log_w = -(tau^2 / 2) * sigmoid(tau * delta)
                const double dlogw = -0.5 * tau * tau * sigmoid(tau * delta);
                std::vector<double> d;
                add_log_prob_grad(rows, span, V, scale * inv_b * dlogw * norm, d);
                backprop_masked(m, rows, d, g);
            }
            return value * inv_b;
        },
        exec);
}

double rmu_forget_term(const ModelHandle& model, std::span<const TokenSpan> forget, const RmuConfig& config,
                       std::span<double> grad, double scale, Execution exec) {
    require_batch(forget, "forget");
    config.validate(model->hidden_width(), model->layer_count());
    std::vector<double> target(config.steering_vector.size());
    for (std::size_t i = 0; i < target.size(); ++i) {
        target[i] = config.steering_coefficient * config.steering_vector[i];
    }
    const double inv_b = 1.0 / static_cast<double>(forget.size());
    return reduce_items(
        forget.size(), grad,
        [&](std::size_t i, std::span<double> g) {
            return activation_distance(
                       model.model(), forget[i], config.layer, [&](std::size_t) { return target.data(); }, g,
                       scale * inv_b) *
                   inv_b;
        },
        exec);
}

double rmu_retain_term(const ModelHandle& model, const ReferenceOracle& reference, std::span<const TokenSpan> retain,
                       const RmuConfig& config, std::span<double> grad, double scale, Execution exec) {
    require_batch(retain, "retain");
    config.validate(model->hidden_width(), model->layer_count());
    const std::size_t D = model->hidden_width();
    const double inv_b = 1.0 / static_cast<double>(retain.size());
    return reduce_items(
        retain.size(), grad,
        [&](std::size_t i, std::span<double> g) {
            const auto& ref = reference.masked_hidden(retain[i], config.layer);
            return activation_distance(
                       model.model(), retain[i], config.layer, [&](std::size_t k) { return ref.data() + k * D; }, g,
                       scale * inv_b) *
                   inv_b;
        },
        exec);
}

double loss_rmu(const ModelHandle& model, const ReferenceOracle& reference, std::span<const TokenSpan> forget,
                std::span<const TokenSpan> retain, const RmuConfig& config, std::span<double> grad, double scale,
                Execution exec) {
    const double f = rmu_forget_term(model, forget, config, grad, scale, exec);
    const double r = rmu_retain_term(model, reference, retain, config, grad, scale * config.retain_weight, exec);
    return f + config.retain_weight * r;
}

double loss_undial(const ModelHandle& model, const ReferenceOracle& reference, std::span<const TokenSpan> forget,
                   const UndialConfig& config, std::span<double> grad, double scale, Execution exec) {
    require_batch(forget, "forget");
    config.validate();
    const CausalLm& m = model.model();
    const std::size_t V = m.vocab_size();
    const double inv_b = 1.0 / static_cast<double>(forget.size());
    return reduce_items(
        forget.size(), grad,
        [&](std::size_t i, std::span<double> g) {
            const TokenSpan& span = forget[i];
            const auto rows = forward_masked(m, span);
            const auto& ref_logits = reference.masked_logits(span);
            const double inv_m = 1.0 / static_cast<double>(rows.positions.size());
            double total = 0.0;
            std::vector<double> d(g.empty() ? 0 : rows.positions.size() * V);
            for (std::size_t k = 0; k < rows.positions.size(); ++k) {
                const auto y = static_cast<std::size_t>(span.tokens[rows.positions[k]]);
                const auto target =
                    undial_target(std::span<const double>(ref_logits).subspan(k * V, V), y, config.logit_penalty);
                for (std::size_t v = 0; v < V; ++v) {
                    const double lp = rows.log_probs[k * V + v];
                    total -= target[v] * lp;
                    if (!g.empty()) {
                        d[k * V + v] = scale * inv_b * inv_m * (std::exp(lp) - target[v]);
                    }
                }
            }
            const double value = total * inv_m;
            require_finite(value, span, "distillation loss");
            if (!g.empty()) {
                backprop_masked(m, rows, d, g);
            }
            return value * inv_b;
        },
        exec);
}

const std::string& idk_choice(const IdkDpoConfig& config, const std::string& example_id) {
    config.validate();
    return config.idk_pool[fnv1a(example_id, config.seed) % config.idk_pool.size()];
}

double loss_idk_dpo(const ModelHandle& model, const ReferenceOracle& reference, std::span<const TokenSpan> forget,
                    const IdkDpoConfig& config, std::span<double> grad, double scale, Execution exec) {
    require_batch(forget, "forget");
    config.validate();
    const CausalLm& m = model.model();
    const std::size_t V = m.vocab_size();
    const double inv_b = 1.0 / static_cast<double>(forget.size());
    return reduce_items(
        forget.size(), grad,
        [&](std::size_t i, std::span<double> g) {
            const TokenSpan& rejected = forget[i];
            const TokenSpan preferred = preferred_span(m, rejected, idk_choice(config, rejected.example_id));
            const auto rows_p = forward_masked(m, preferred);
            const auto rows_r = forward_masked(m, rejected);
            const double w_p = masked_sequence_log_prob(rows_p, preferred, V);
            const double w_r = masked_sequence_log_prob(rows_r, rejected, V);
            const double margin =
                (w_p - reference.sequence_log_prob(preferred)) - (w_r - reference.sequence_log_prob(rejected));
            require_finite(margin, rejected, "preference margin");
            const double value = dpo_from_margin(config.beta, margin);
            if (!g.empty()) {
                // d value / d margin = -beta * sigmoid(-beta * margin)
                const double dmargin = -config.beta * sigmoid(-config.beta * margin);
                std::vector<double> dp, dr;
                add_log_prob_grad(rows_p, preferred, V, scale * inv_b * dmargin, dp);
                add_log_prob_grad(rows_r, rejected, V, -scale * inv_b * dmargin, dr);
                backprop_masked(m, rows_p, dp, g);
                backprop_masked(m, rows_r, dr, g);
            }
            return value * inv_b;
        },
        exec);
}

double context_kl_term(const ModelHandle& model, const ReferenceOracle& reference,
                       std::span<const TokenSpan> contextual, std::span<double> grad, double scale, Execution exec) {
    require_batch(contextual, "contextual");
    const CausalLm& m = model.model();
    const std::size_t V = m.vocab_size();
    const double inv_b = 1.0 / static_cast<double>(contextual.size());
    return reduce_items(
        contextual.size(), grad,
        [&](std::size_t i, std::span<double> g) {
            const TokenSpan& span = contextual[i];
            const auto rows = forward_masked(m, span);
            const auto& ref = reference.masked_log_probs(span);
            const double inv_m = 1.0 / static_cast<double>(rows.positions.size());
            double total = 0.0;
            std::vector<double> d(g.empty() ? 0 : rows.positions.size() * V);
            for (std::size_t k = 0; k < rows.positions.size(); ++k) {
                double kl = 0.0;
                for (std::size_t v = 0; v < V; ++v) {
                    const double lp = rows.log_probs[k * V + v];
                    kl += std::exp(lp) * (lp - ref[k * V + v]);
                }
                kl = std::max(kl, 0.0);
                total += kl;
                if (!g.empty()) {
                    for (std::size_t v = 0; v < V; ++v) {
                        const double lp = rows.log_probs[k * V + v];
                        d[k * V + v] = scale * inv_b * inv_m * std::exp(lp) * (lp - ref[k * V + v] - kl);
                    }
                }
            }
            const double value = total * inv_m;
            require_finite(value, span, "context KL");
            if (!g.empty()) {
                backprop_masked(m, rows, d, g);
            }
            return value * inv_b;
        },
        exec);
}

double composite_objective(double forget_signed, std::optional<double> retain, double context,
                           const CompositeWeights& weights) {
    weights.validate();
    double j = weights.lambda_f * forget_signed;
    if (retain) {
        j += weights.lambda_r * *retain;
    }
    if (weights.lambda_c != 0.0) {
        j += weights.lambda_c * context;
    }
    return j;
}

MethodTerms method_terms(const ModelHandle& model, const ReferenceOracle& reference, const MethodConfig& method,
                         const CompositeWeights& weights, std::span<const TokenSpan> forget,
                         std::span<const TokenSpan> retain, std::span<double> grad, double scale, Execution exec) {
    weights.validate();
    MethodTerms out;
    const double gf = scale * weights.lambda_f;
    switch (method.name) {
        case MethodName::grad_ascent:
        case MethodName::grad_diff:
            out.forget = loss_grad_ascent(model, forget, grad, gf, exec);
            out.forget_signed = out.forget;
            break;
        case MethodName::npo:
            out.forget = loss_npo(model, reference, forget, method.npo, grad, -gf, exec);
            out.forget_signed = -out.forget;
            break;
        case MethodName::rmu:
            out.forget = rmu_forget_term(model, forget, method.rmu, grad, gf, exec);
            out.forget_signed = out.forget;
            break;
        case MethodName::undial:
            out.forget = loss_undial(model, reference, forget, method.undial, grad, gf, exec);
            out.forget_signed = out.forget;
            break;
        case MethodName::idk_dpo:
            out.forget = loss_idk_dpo(model, reference, forget, method.idk_dpo, grad, gf, exec);
            out.forget_signed = out.forget;
            break;
    }
    if (method_uses_retain(method.name) && weights.lambda_r > 0.0) {
        if (retain.empty()) {
            throw ContractError(std::string(to_string(method.name)) + " needs a retain batch when lambda_r > 0");
        }
        const double gr = scale * weights.lambda_r;
        if (method.name == MethodName::rmu) {
            out.retain = method.rmu.retain_weight *
                         rmu_retain_term(model, reference, retain, method.rmu, grad, gr * method.rmu.retain_weight, exec);
        } else {
            out.retain = loss_nll(model, retain, grad, gr, exec);
        }
    }
    return out;
}

// --------------------------------------------------------------- scalars --

double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

double sigmoid(double x) {
    if (x >= 0.0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

double npo_from_log_ratio(double tau, double log_ref_minus_log_w) {
    return 0.5 * tau * softplus(tau * log_ref_minus_log_w);
}

double dpo_from_margin(double beta, double margin) { return softplus(-beta * margin); }

std::vector<double> undial_target(std::span<const double> reference_logits, std::size_t true_token, double penalty) {
    if (true_token >= reference_logits.size()) {
        throw IndexError("true token outside the reference distribution");
    }
    std::vector<double> target(reference_logits.begin(), reference_logits.end());
    target[true_token] -= penalty;
    kernels::softmax_rows(1, target.size(), target);
    return target;
}

double kl_divergence(std::span<const double> p, std::span<const double> q) {
    if (p.size() != q.size()) {
        throw ContractError("distributions differ in size");
    }
    double kl = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i] > 0.0) {
            kl += p[i] * (std::log(p[i]) - std::log(q[i]));
        }
    }
    return kl;
}

}  // namespace unlearn
