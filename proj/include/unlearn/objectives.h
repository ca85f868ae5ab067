#pragma once

// Unlearning losses over teacher-forced TokenSpans. Every loss returns its
// scalar value and, when `grad` is non-empty, accumulates scale * d(loss)/dθ
// into it. Per-example work runs through reduce_items, so results are the
// same under Execution::parallel and Execution::serial.

#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "unlearn/model.h"
#include "unlearn/parallel.h"

namespace unlearn {

struct CompositeWeights {
    double lambda_f = 1.0;
    double lambda_r = 1.0;
    double lambda_c = 0.0;

    void validate() const;
};

struct NpoConfig {
    double tau = 0.1;
    // Divide sequence log-probs by the answer length before taking the ratio.
    bool length_normalized = false;

    void validate() const;
};

struct RmuConfig {
    std::size_t layer = 1;
    std::vector<double> steering_vector;
    double steering_coefficient = 10.0;
    double retain_weight = 1.0;

    void validate(std::size_t hidden_width, std::size_t layer_count) const;
};

// Uniform draw in [0, 1)^width, L2-normalised. Portable across standard libraries.
std::vector<double> sample_steering_vector(std::uint64_t seed, std::size_t width);

struct UndialConfig {
    double logit_penalty = 10.0;

    void validate() const;
};

struct IdkDpoConfig {
    double beta = 0.1;
    std::vector<std::string> idk_pool = {"I don't know.", "I'm not sure about that.",
                                         "I have no information on that.", "That is not something I can answer.",
                                         "I cannot recall that."};
    std::uint64_t seed = 0;

    void validate() const;
};

enum class MethodName { grad_ascent, grad_diff, npo, rmu, undial, idk_dpo };

std::string_view to_string(MethodName method);
MethodName parse_method_name(std::string_view text);
const std::vector<MethodName>& all_methods();

struct MethodConfig {
    MethodName name = MethodName::grad_diff;
    NpoConfig npo;
    RmuConfig rmu;
    UndialConfig undial;
    IdkDpoConfig idk_dpo;
};

// True when the method has a retain term (everything but plain gradient ascent).
bool method_uses_retain(MethodName method);

// Reference-model quantities, computed once per span and cached. Safe for
// concurrent use; the reference handle must be frozen.
class ReferenceOracle {
public:
    explicit ReferenceOracle(const ModelHandle& reference);

    const ModelHandle& model() const noexcept { return *reference_; }
    // Log-softmax rows at the masked positions (masked_count x vocab).
    const std::vector<double>& masked_log_probs(const TokenSpan& span) const;
    // Raw logits at the masked positions (masked_count x vocab).
    const std::vector<double>& masked_logits(const TokenSpan& span) const;
    double sequence_log_prob(const TokenSpan& span) const;
    // Activations after block `layer` at masked positions (masked_count x width).
    const std::vector<double>& masked_hidden(const TokenSpan& span, std::size_t layer) const;

    std::size_t cached_spans() const;
    void clear();

private:
    struct Entry {
        bool has_logits = false;
        std::vector<double> logits;
        std::vector<double> log_probs;
        double seq_log_prob = 0.0;
        std::map<std::size_t, std::vector<double>> hidden;
    };
    Entry& entry(const TokenSpan& span) const;
    void fill_logits(const TokenSpan& span, Entry& e) const;

    const ModelHandle* reference_;
    mutable std::mutex mutex_;
    mutable std::map<std::vector<TokenId>, Entry> cache_;
};

// Mean over examples of the token-mean answer NLL.
double loss_nll(const ModelHandle& model, std::span<const TokenSpan> batch, std::span<double> grad = {},
                double scale = 1.0, Execution exec = Execution::parallel);

// -mean NLL over the forget batch; minimising it raises forget-set NLL.
double loss_grad_ascent(const ModelHandle& model, std::span<const TokenSpan> forget, std::span<double> grad = {},
                        double scale = 1.0, Execution exec = Execution::parallel);

double loss_grad_diff(const ModelHandle& model, std::span<const TokenSpan> forget,
                      std::span<const TokenSpan> retain, std::span<double> grad = {}, double scale = 1.0,
                      Execution exec = Execution::parallel);

// (tau / 2) * mean_i log(1 + (pi_ref / pi_w)^tau), computed as a softplus of
// tau * (log pi_ref - log pi_w).
double loss_npo(const ModelHandle& model, const ReferenceOracle& reference, std::span<const TokenSpan> forget,
                const NpoConfig& config, std::span<double> grad = {}, double scale = 1.0,
                Execution exec = Execution::parallel);

// Mean over examples of the mean over masked positions and hidden dims of
// ||h - c u||^2 at config.layer.
double rmu_forget_term(const ModelHandle& model, std::span<const TokenSpan> forget, const RmuConfig& config,
                       std::span<double> grad = {}, double scale = 1.0, Execution exec = Execution::parallel);
// Same aggregation of ||h - h_ref||^2 on the retain batch (unweighted).
double rmu_retain_term(const ModelHandle& model, const ReferenceOracle& reference,
                       std::span<const TokenSpan> retain, const RmuConfig& config, std::span<double> grad = {},
                       double scale = 1.0, Execution exec = Execution::parallel);
// forget term + retain_weight * retain term.
double loss_rmu(const ModelHandle& model, const ReferenceOracle& reference, std::span<const TokenSpan> forget,
                std::span<const TokenSpan> retain, const RmuConfig& config, std::span<double> grad = {},
                double scale = 1.0, Execution exec = Execution::parallel);

// Soft-target cross-entropy against softmax(reference logits with the true
// token's logit lowered by logit_penalty).
double loss_undial(const ModelHandle& model, const ReferenceOracle& reference, std::span<const TokenSpan> forget,
                   const UndialConfig& config, std::span<double> grad = {}, double scale = 1.0,
                   Execution exec = Execution::parallel);

// Preference loss with a refusal from idk_pool as the preferred response and
// the original answer as the rejected one.
double loss_idk_dpo(const ModelHandle& model, const ReferenceOracle& reference, std::span<const TokenSpan> forget,
                    const IdkDpoConfig& config, std::span<double> grad = {}, double scale = 1.0,
                    Execution exec = Execution::parallel);

// Mean over examples of the mean over masked positions of KL(p_w || p_ref).
double context_kl_term(const ModelHandle& model, const ReferenceOracle& reference,
                       std::span<const TokenSpan> contextual, std::span<double> grad = {}, double scale = 1.0,
                       Execution exec = Execution::parallel);

// lambda_f * forget_signed + lambda_r * retain + lambda_c * context, where
// forget_signed already carries the method's sign (e.g. -NLL for gradient
// ascent, -L_NPO for NPO).
double composite_objective(double forget_signed, std::optional<double> retain, double context,
                           const CompositeWeights& weights);

// Named components of one evaluation of the method's objective.
struct MethodTerms {
    double forget = 0.0;         // the method's own forget loss, as reported
    double forget_signed = 0.0;  // the value entering the composite
    std::optional<double> retain;
};

// Evaluates the method's forget (and retain) terms and accumulates
// scale * d(lambda_f * forget_signed + lambda_r * retain)/dθ into grad.
MethodTerms method_terms(const ModelHandle& model, const ReferenceOracle& reference, const MethodConfig& method,
                         const CompositeWeights& weights, std::span<const TokenSpan> forget,
                         std::span<const TokenSpan> retain, std::span<double> grad = {}, double scale = 1.0,
                         Execution exec = Execution::parallel);

// Refusal picked for an example by IdkDpoConfig's seed.
const std::string& idk_choice(const IdkDpoConfig& config, const std::string& example_id);

// Scalar building blocks, exposed for testing.
double npo_from_log_ratio(double tau, double log_ref_minus_log_w);
double dpo_from_margin(double beta, double margin);
std::vector<double> undial_target(std::span<const double> reference_logits, std::size_t true_token, double penalty);
double kl_divergence(std::span<const double> p, std::span<const double> q);
double softplus(double x);
double sigmoid(double x);

}  // namespace unlearn
