#include "unlearn/trainer.h"

#include <cmath>
#include <fstream>

#include "unlearn/errors.h"

namespace unlearn {

using nlohmann::json;
namespace fs = std::filesystem;

std::string_view to_string(Warmup warmup) {
    return warmup == Warmup::first_epoch_linear ? "first_epoch_linear" : "none";
}

Warmup parse_warmup(std::string_view text) {
    if (text == "first_epoch_linear") return Warmup::first_epoch_linear;
    if (text == "none") return Warmup::none;
    throw ValidationError("training.warmup", "unknown warmup '" + std::string(text) + "'");
}

void TrainingConfig::validate() const {
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
        throw ConfigError("training.learning_rate must be positive");
    }
    if (!(weight_decay >= 0.0)) throw ConfigError("training.weight_decay must be non-negative");
    if (epochs < 1) throw ConfigError("training.epochs must be at least 1");
    if (micro_batch < 1 || effective_batch < 1) throw ConfigError("training batch sizes must be at least 1");
    if (effective_batch % micro_batch != 0) {
        throw ConfigError("training.effective_batch must be divisible by training.micro_batch");
    }
    if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
        throw ConfigError("training adam betas must lie in [0, 1)");
    }
    if (!(adam_epsilon > 0.0)) throw ConfigError("training.adam_epsilon must be positive");
}

double learning_rate_at(std::size_t step, std::size_t total_steps_epoch1, const TrainingConfig& config) {
    if (config.warmup == Warmup::none || total_steps_epoch1 == 0 || step >= total_steps_epoch1) {
        return config.learning_rate;
    }
    return config.learning_rate * static_cast<double>(step) / static_cast<double>(total_steps_epoch1);
}

AdamW::AdamW(std::size_t size, double beta1, double beta2, double epsilon, double weight_decay)
    : m_(size, 0.0), v_(size, 0.0), beta1_(beta1), beta2_(beta2), epsilon_(epsilon), weight_decay_(weight_decay) {}

void AdamW::step(std::span<double> params, std::span<const double> grad, double learning_rate) {
    if (params.size() != m_.size() || grad.size() != m_.size()) {
        throw ContractError("AdamW step size does not match the optimizer state");
    }
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    const long n = static_cast<long>(params.size());
#pragma omp parallel for schedule(static) if (n > (1 << 15))
    for (long k = 0; k < n; ++k) {
        const auto i = static_cast<std::size_t>(k);
        m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grad[i];
        v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grad[i] * grad[i];
        const double mhat = m_[i] / c1;
        const double vhat = v_[i] / c2;
        params[i] -= learning_rate * (mhat / (std::sqrt(vhat) + epsilon_) + weight_decay_ * params[i]);
    }
}

std::vector<std::size_t> shuffled_indices(std::size_t n, std::mt19937_64& rng) {
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    for (std::size_t i = n; i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(rng() % i);
        std::swap(idx[i - 1], idx[j]);
    }
    return idx;
}

std::string_view to_string(RunStatus status) {
    switch (status) {
        case RunStatus::running: return "running";
        case RunStatus::complete: return "complete";
        case RunStatus::failed: return "failed";
    }
    return "failed";
}

RunStatus parse_run_status(std::string_view text) {
    if (text == "running") return RunStatus::running;
    if (text == "complete") return RunStatus::complete;
    if (text == "failed") return RunStatus::failed;
    throw ValidationError("status", "unknown run status '" + std::string(text) + "'");
}

json EpochRow::to_json() const {
    json j = {{"epoch", epoch},           {"steps", steps},         {"learning_rate", learning_rate},
              {"forget", forget},         {"forget_signed", forget_signed}, {"objective", objective}};
    j["retain"] = retain ? json(*retain) : json(nullptr);
    j["context"] = context ? json(*context) : json(nullptr);
    if (eval) j["eval"] = eval->to_json();
    return j;
}

EpochRow EpochRow::from_json(const json& j) {
    EpochRow r;
    r.epoch = j.at("epoch").get<std::size_t>();
    r.steps = j.at("steps").get<std::size_t>();
    r.learning_rate = j.at("learning_rate").get<double>();
    r.forget = j.at("forget").get<double>();
    r.forget_signed = j.at("forget_signed").get<double>();
    r.objective = j.at("objective").get<double>();
    if (j.contains("retain") && !j["retain"].is_null()) r.retain = j["retain"].get<double>();
    if (j.contains("context") && !j["context"].is_null()) r.context = j["context"].get<double>();
    if (j.contains("eval")) r.eval = EvalReport::from_json(j["eval"]);
    return r;
}

json RunRecord::summary_json() const {
    json cps = json::array();
    for (const auto& c : checkpoints) cps.push_back(c.lexically_relative(dir).generic_string());
    json j = {{"run_id", run_id}, {"status", to_string(status)}, {"checkpoints", cps}, {"epochs", rows.size()}};
    if (failed_step) j["failed_step"] = *failed_step;
    if (!failure.empty()) j["failure"] = failure;
    if (initial_eval) j["initial_eval"] = initial_eval->to_json();
    return j;
}

fs::path checkpoint_dir(const fs::path& run_dir, std::size_t epoch) {
    return run_dir / "checkpoints" / ("epoch-" + std::to_string(epoch));
}

RunRecord load_run_record(const fs::path& dir) {
    if (!fs::exists(dir / "run.json")) throw NotFoundError("no run.json under " + dir.string());
    RunRecord r;
    r.dir = dir;
    std::ifstream in(dir / "run.json");
    const auto j = json::parse(in);
    r.run_id = j.at("run_id").get<std::string>();
    r.status = parse_run_status(j.at("status").get<std::string>());
    for (const auto& c : j.at("checkpoints")) r.checkpoints.push_back(dir / c.get<std::string>());
    if (j.contains("failed_step")) r.failed_step = j["failed_step"].get<std::size_t>();
    r.failure = j.value("failure", "");
    if (j.contains("initial_eval")) r.initial_eval = EvalReport::from_json(j["initial_eval"]);
    if (fs::exists(dir / "config.json")) {
        std::ifstream cin(dir / "config.json");
        r.config = json::parse(cin);
    }
    std::ifstream metrics(dir / "metrics.jsonl");
    std::string line;
    while (std::getline(metrics, line)) {
        if (!line.empty()) r.rows.push_back(EpochRow::from_json(json::parse(line)));
    }
    return r;
}

std::vector<TokenSpan> direct_spans(const Tokenizer& tokenizer, const std::vector<QaExample>& examples,
                                    const PromptTemplateSet& templates) {
    std::vector<TokenSpan> out;
    out.reserve(examples.size());
    for (const auto& e : examples) {
        out.push_back(make_span(tokenizer, render_prompt(e, PromptMode::direct, templates), e.answer, e.id));
    }
    return out;
}

std::vector<TokenSpan> contextual_spans(const Tokenizer& tokenizer, const std::vector<ContextualExample>& examples,
                                        const PromptTemplateSet& templates) {
    std::vector<TokenSpan> out;
    out.reserve(examples.size());
    for (const auto& e : examples) {
        out.push_back(make_span(tokenizer, render_prompt(e, PromptMode::contextual, templates), e.target_response,
                                e.source_id + "#ctx"));
    }
    return out;
}

namespace {

// Persists run state and invokes per-epoch hooks.
class RunWriter {
public:
    RunWriter(RunRecord& record, const RunOptions& options) : record_(record), options_(options) {
        record_.run_id = options.run_id;
        record_.dir = options.dir;
        record_.config = options.config_snapshot;
        if (options.dir.empty()) return;
        fs::create_directories(options.dir);
        // The config snapshot is immutable once a run starts.
        if (!options.config_snapshot.is_null() && !fs::exists(options.dir / "config.json")) {
            std::ofstream(options.dir / "config.json") << options.config_snapshot.dump(2) << "\n";
        }
        std::ofstream(options.dir / "metrics.jsonl", std::ios::trunc);
        write_summary();
    }

    void initial(const ModelHandle& model) {
        if (!options_.evaluate_initial || !options_.on_epoch) return;
        const auto snapshot = snapshot_frozen_reference(model);
        record_.initial_eval = options_.on_epoch(0, snapshot);
        write_summary();
    }

    void epoch_done(const ModelHandle& model, EpochRow row) {
        if (options_.write_checkpoints && !options_.dir.empty()) {
            const auto dir = checkpoint_dir(options_.dir, row.epoch);
            fs::remove_all(dir);
            save_checkpoint(model, dir);
            record_.checkpoints.push_back(dir);
        }
        if (options_.on_epoch) {
            const auto snapshot = snapshot_frozen_reference(model);
            row.eval = options_.on_epoch(row.epoch, snapshot);
        }
        if (!options_.dir.empty()) {
            std::ofstream(options_.dir / "metrics.jsonl", std::ios::app) << row.to_json().dump() << "\n";
        }
        record_.rows.push_back(std::move(row));
        write_summary();
    }

    void fail(std::size_t step, const std::string& what) {
        record_.status = RunStatus::failed;
        record_.failed_step = step;
        record_.failure = what;
        write_summary();
    }

    void complete() {
        record_.status = RunStatus::complete;
        write_summary();
    }

private:
    void write_summary() {
        if (options_.dir.empty()) return;
        std::ofstream(options_.dir / "run.json") << record_.summary_json().dump(2) << "\n";
    }

    RunRecord& record_;
    const RunOptions& options_;
};

std::vector<TokenSpan> gather(std::span<const TokenSpan> pool, std::span<const std::size_t> idx) {
    std::vector<TokenSpan> out;
    out.reserve(idx.size());
    for (std::size_t i : idx) out.push_back(pool[i]);
    return out;
}

// Endless stream of examples drawn without replacement; reshuffled after
// each pass with its own generator.
class CyclingSampler {
public:
    CyclingSampler(std::size_t n, std::uint64_t seed) : n_(n), rng_(seed) {}

    std::vector<std::size_t> take(std::size_t count) {
        std::vector<std::size_t> out;
        while (out.size() < count) {
            if (pos_ >= order_.size()) {
                order_ = shuffled_indices(n_, rng_);
                pos_ = 0;
            }
            out.push_back(order_[pos_++]);
        }
        return out;
    }

private:
    std::size_t n_;
    std::mt19937_64 rng_;
    std::vector<std::size_t> order_;
    std::size_t pos_ = 0;
};

bool all_finite(std::span<const double> v) {
    for (double x : v) {
        if (!std::isfinite(x)) return false;
    }
    return true;
}

// Distinct generator streams per data source, so adding contextual batches
// does not perturb the forget/retain sampling.
constexpr std::uint64_t retain_stream = 0x9e3779b97f4a7c15ULL;
constexpr std::uint64_t context_stream = 0xc2b2ae3d27d4eb4fULL;

}  // namespace

RunRecord finetune(ModelHandle& model, std::span<const TokenSpan> examples, const TrainingConfig& config,
                   const RunOptions& options) {
    config.validate();
    if (model.frozen()) throw FrozenModelError("finetune needs a trainable model");
    if (examples.empty()) throw EmptyDatasetError("finetune needs at least one example");
    for (const auto& s : examples) validate_span(model.model(), s);

    RunRecord record;
    RunWriter writer(record, options);
    writer.initial(model);

    const std::size_t n = examples.size();
    const std::size_t steps_per_epoch = (n + config.effective_batch - 1) / config.effective_batch;
    const std::size_t P = model->parameter_count();
    AdamW opt(P, config.adam_beta1, config.adam_beta2, config.adam_epsilon, config.weight_decay);
    std::mt19937_64 rng(config.seed);
    std::vector<double> grad(P);
    std::size_t global_step = 0;

    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
        const auto order = shuffled_indices(n, rng);
        EpochRow row;
        row.epoch = epoch;
        for (std::size_t s = 0; s < steps_per_epoch; ++s) {
            const std::size_t begin = s * config.effective_batch;
            const std::size_t end = std::min(n, begin + config.effective_batch);
            const std::size_t count = end - begin;
            std::fill(grad.begin(), grad.end(), 0.0);
            double loss = 0.0;
            try {
                for (std::size_t mb = begin; mb < end; mb += config.micro_batch) {
                    const std::size_t me = std::min(end, mb + config.micro_batch);
                    const auto batch = gather(examples, std::span(order).subspan(mb, me - mb));
                    const double w = static_cast<double>(me - mb) / static_cast<double>(count);
                    loss += w * loss_nll(model, batch, grad, w, options.exec);
                }
                if (!std::isfinite(loss) || !all_finite(grad)) {
                    throw NumericalError("step " + std::to_string(global_step), "non-finite fine-tuning loss");
                }
            } catch (const NumericalError& e) {
                writer.fail(global_step, e.what());
                return record;
            }
            const double lr = learning_rate_at(global_step, steps_per_epoch - 1, config);
            opt.step(model.mutable_parameters(), grad, lr);
            row.forget += loss;
            row.learning_rate = lr;
            ++row.steps;
            ++global_step;
        }
        // Fine-tuning has a single NLL term; it is logged in the forget slot.
        row.forget /= static_cast<double>(row.steps);
        row.forget_signed = row.forget;
        row.objective = row.forget;
        writer.epoch_done(model, std::move(row));
    }
    writer.complete();
    return record;
}

ContextualBuildResult prepare_contextual_targets(const ModelHandle& reference,
                                                 const std::vector<ContextualExample>& examples,
                                                 TargetSource source, const PromptTemplateSet& templates,
                                                 std::size_t max_new_tokens) {
    if (source == TargetSource::reference_model_response && !reference.frozen()) {
        throw ContractError("contextual targets must come from a frozen reference");
    }
    ContextualBuildResult out;
    std::vector<std::string> targets;
    if (source == TargetSource::reference_model_response) {
        const Tokenizer& tok = reference->tokenizer();
        const std::size_t window = reference->context_window();
        targets = map_items<std::string>(examples.size(), [&](std::size_t i) {
            const auto prompt = tok.encode(render_prompt(examples[i], PromptMode::contextual, templates));
            // Leave room for the closing <eos> of the training span.
            const std::size_t room = prompt.size() + 1 < window ? window - prompt.size() - 1 : 0;
            const auto ids = reference->greedy_continue(prompt, std::min(max_new_tokens, room), tok.eos_id());
            return tok.decode(ids);
        });
    }
    for (std::size_t i = 0; i < examples.size(); ++i) {
        ContextualExample e = examples[i];
        if (source == TargetSource::gold_answer) {
            e.target_response = e.gold_answer.empty() ? e.context : e.gold_answer;
        } else {
            e.target_response = targets[i];
        }
        if (normalize_text(e.target_response).empty()) {
            ++out.excluded_empty;
            continue;
        }
        out.examples.push_back(std::move(e));
    }
    return out;
}

RunRecord run_unlearn(ModelHandle& model, const MethodConfig& method, const CompositeWeights& weights,
                      const DatasetBundle& bundle, const TrainingConfig& config, const UnlearnSetup& setup,
                      const RunOptions& options) {
    config.validate();
    weights.validate();
    if (model.frozen()) throw FrozenModelError("unlearning needs a trainable model");
    if (bundle.forget.empty()) throw EmptyDatasetError("unlearning needs a non-empty forget set");
    const bool use_context = setup.use_context.value_or(weights.lambda_c > 0.0);
    if (weights.lambda_c > 0.0 && !use_context) {
        throw ConfigError("lambda_c > 0 requires the context term to be enabled");
    }
    if (use_context && bundle.contextual_forget.empty()) {
        throw ConfigError("context term requested but the bundle has no contextual forget set");
    }
    const bool uses_retain = method_uses_retain(method.name);
    if (uses_retain && bundle.retain.empty()) {
        throw ConfigError(std::string(to_string(method.name)) + " needs a retain set");
    }
    if (method.name == MethodName::rmu) method.rmu.validate(model->hidden_width(), model->layer_count());

    RunRecord record;
    RunWriter writer(record, options);

    // Reference and contextual cache are fixed before the first update.
    const ModelHandle reference = snapshot_frozen_reference(model);
    ReferenceOracle oracle(reference);
    const Tokenizer& tok = model->tokenizer();
    const auto forget = direct_spans(tok, bundle.forget, setup.templates);
    const auto retain = uses_retain ? direct_spans(tok, bundle.retain, setup.templates) : std::vector<TokenSpan>{};
    std::vector<TokenSpan> contextual;
    if (use_context) {
        const auto prepared = prepare_contextual_targets(reference, bundle.contextual_forget, setup.context_target,
                                                         setup.templates, setup.max_target_tokens);
        if (prepared.examples.empty()) throw ConfigError("every contextual target was empty");
        contextual = contextual_spans(tok, prepared.examples, setup.templates);
        for (const auto& s : contextual) oracle.masked_log_probs(s);
        if (!options.dir.empty()) {
            const auto cache = options.dir / "cache";
            fs::create_directories(cache);
            write_context_variants(cache / "contextual_targets.jsonl", prepared.examples);
            std::ofstream dist(cache / "reference_distributions.jsonl");
            for (const auto& s : contextual) {
                dist << json{{"example_id", s.example_id}, {"vocab", model->vocab_size()},
                             {"log_probs", oracle.masked_log_probs(s)}}
                            .dump()
                     << "\n";
            }
            if (prepared.excluded_empty > 0) {
                std::ofstream(cache / "excluded.txt") << prepared.excluded_empty << "\n";
            }
        }
    }
    for (const auto& s : forget) validate_span(model.model(), s);
    for (const auto& s : retain) validate_span(model.model(), s);
    for (const auto& s : contextual) validate_span(model.model(), s);

    writer.initial(model);

    const std::size_t n = forget.size();
    const std::size_t steps_per_epoch = (n + config.effective_batch - 1) / config.effective_batch;
    const std::size_t P = model->parameter_count();
    AdamW opt(P, config.adam_beta1, config.adam_beta2, config.adam_epsilon, config.weight_decay);
    std::mt19937_64 forget_rng(config.seed);
    CyclingSampler retain_sampler(retain.size(), config.seed ^ retain_stream);
    CyclingSampler context_sampler(contextual.size(), config.seed ^ context_stream);
    std::vector<double> grad(P);
    std::size_t global_step = 0;

    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
        const auto order = shuffled_indices(n, forget_rng);
        EpochRow row;
        row.epoch = epoch;
        double retain_sum = 0.0, context_sum = 0.0;
        for (std::size_t s = 0; s < steps_per_epoch; ++s) {
            const std::size_t begin = s * config.effective_batch;
            const std::size_t end = std::min(n, begin + config.effective_batch);
            const std::size_t count = end - begin;
            const auto r_idx = uses_retain ? retain_sampler.take(count) : std::vector<std::size_t>{};
            const auto c_idx = use_context ? context_sampler.take(count) : std::vector<std::size_t>{};
            std::fill(grad.begin(), grad.end(), 0.0);
            double f_val = 0.0, f_signed = 0.0, r_val = 0.0, c_val = 0.0;
            try {
                for (std::size_t mb = begin; mb < end; mb += config.micro_batch) {
                    const std::size_t len = std::min(end, mb + config.micro_batch) - mb;
                    const std::size_t off = mb - begin;
                    const double w = static_cast<double>(len) / static_cast<double>(count);
                    const auto f_batch = gather(forget, std::span(order).subspan(mb, len));
                    const auto r_batch =
                        uses_retain ? gather(retain, std::span(r_idx).subspan(off, len)) : std::vector<TokenSpan>{};
                    const auto terms =
                        method_terms(model, oracle, method, weights, f_batch, r_batch, grad, w, options.exec);
                    f_val += w * terms.forget;
                    f_signed += w * terms.forget_signed;
                    if (terms.retain) r_val += w * *terms.retain;
                    if (use_context) {
                        const auto c_batch = gather(contextual, std::span(c_idx).subspan(off, len));
                        // With lambda_c = 0 the term is still logged but adds nothing to the update.
                        const std::span<double> c_grad = weights.lambda_c > 0.0 ? std::span<double>(grad)
                                                                                 : std::span<double>{};
                        c_val += w * context_kl_term(model, oracle, c_batch, c_grad, weights.lambda_c * w,
                                                     options.exec);
                    }
                }
                const double objective = composite_objective(
                    f_signed, uses_retain ? std::optional<double>(r_val) : std::nullopt, c_val, weights);
                if (!std::isfinite(objective) || !all_finite(grad)) {
                    throw NumericalError("step " + std::to_string(global_step), "non-finite unlearning objective");
                }
                row.objective += objective;
            } catch (const NumericalError& e) {
                writer.fail(global_step, e.what());
                return record;
            }
            const double lr = learning_rate_at(global_step, steps_per_epoch - 1, config);
            opt.step(model.mutable_parameters(), grad, lr);
            row.forget += f_val;
            row.forget_signed += f_signed;
            retain_sum += r_val;
            context_sum += c_val;
            row.learning_rate = lr;
            ++row.steps;
            ++global_step;
        }
        const double steps = static_cast<double>(row.steps);
        row.forget /= steps;
        row.forget_signed /= steps;
        row.objective /= steps;
        if (uses_retain) row.retain = retain_sum / steps;
        if (use_context) row.context = context_sum / steps;
        writer.epoch_done(model, std::move(row));
    }
    writer.complete();
    return record;
}

}  // namespace unlearn
