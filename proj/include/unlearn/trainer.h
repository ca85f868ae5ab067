#pragma once

// Fine-tuning and unlearning loops with AdamW, first-epoch warmup, gradient
// accumulation and per-epoch checkpoints.
//
// Run directory layout:
//   config.json              configuration snapshot (written once, never changed)
//   metrics.jsonl            one row per completed epoch
//   run.json                 RunRecord summary (status, checkpoints)
//   checkpoints/epoch-N/     model after epoch N
//   cache/                   contextual targets and reference distributions

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "unlearn/corpus.h"
#include "unlearn/eval.h"
#include "unlearn/model.h"
#include "unlearn/objectives.h"
#include "unlearn/parallel.h"

namespace unlearn {

enum class Warmup { first_epoch_linear, none };

std::string_view to_string(Warmup warmup);
Warmup parse_warmup(std::string_view text);

struct TrainingConfig {
    double learning_rate = 1e-5;
    double weight_decay = 0.01;
    std::size_t epochs = 20;
    // For unlearning, the number of forget examples per optimizer step; the
    // retain and contextual sub-batches have the same count.
    std::size_t effective_batch = 32;
    std::size_t micro_batch = 32;
    Warmup warmup = Warmup::first_epoch_linear;
    std::uint64_t seed = 0;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_epsilon = 1e-8;

    void validate() const;
};

// Linear ramp from 0 at step 0 to learning_rate at step total_steps_epoch1,
// constant afterwards. The trainer passes the index of the last step of the
// first epoch.
double learning_rate_at(std::size_t step, std::size_t total_steps_epoch1, const TrainingConfig& config);

// Adam with decoupled weight decay.
class AdamW {
public:
    AdamW(std::size_t size, double beta1, double beta2, double epsilon, double weight_decay);

    void step(std::span<double> params, std::span<const double> grad, double learning_rate);
    std::size_t steps_taken() const noexcept { return t_; }

private:
    std::vector<double> m_;
    std::vector<double> v_;
    double beta1_, beta2_, epsilon_, weight_decay_;
    std::size_t t_ = 0;
};

// Deterministic Fisher-Yates shuffle of 0..n-1; identical on every platform.
std::vector<std::size_t> shuffled_indices(std::size_t n, std::mt19937_64& rng);

enum class RunStatus { running, complete, failed };
std::string_view to_string(RunStatus status);
RunStatus parse_run_status(std::string_view text);

// Loss components averaged over the optimizer steps of one epoch.
struct EpochRow {
    std::size_t epoch = 0;
    std::size_t steps = 0;
    double learning_rate = 0.0;  // at the epoch's last step
    double forget = 0.0;
    double forget_signed = 0.0;
    std::optional<double> retain;
    std::optional<double> context;
    double objective = 0.0;
    std::optional<EvalReport> eval;

    nlohmann::json to_json() const;
    static EpochRow from_json(const nlohmann::json& j);
};

struct RunRecord {
    std::string run_id;
    std::filesystem::path dir;
    nlohmann::json config;
    std::vector<std::filesystem::path> checkpoints;
    std::vector<EpochRow> rows;
    std::optional<EvalReport> initial_eval;  // epoch 0, before any update
    RunStatus status = RunStatus::running;
    std::optional<std::size_t> failed_step;
    std::string failure;

    nlohmann::json summary_json() const;
};

// Reads run.json and metrics.jsonl back.
RunRecord load_run_record(const std::filesystem::path& dir);

std::filesystem::path checkpoint_dir(const std::filesystem::path& run_dir, std::size_t epoch);

// Called on a frozen copy of the model after each epoch (and for epoch 0 when
// requested).
using EpochHook = std::function<std::optional<EvalReport>(std::size_t epoch, const ModelHandle& snapshot)>;

struct RunOptions {
    std::filesystem::path dir;  // empty: keep everything in memory
    std::string run_id = "run";
    nlohmann::json config_snapshot;
    EpochHook on_epoch;
    bool evaluate_initial = false;
    bool write_checkpoints = true;
    Execution exec = Execution::parallel;
};

// Teacher-forced spans of framed direct prompts and gold answers.
std::vector<TokenSpan> direct_spans(const Tokenizer& tokenizer, const std::vector<QaExample>& examples,
                                    const PromptTemplateSet& templates);
// Teacher-forced spans of framed contextual prompts and target responses.
std::vector<TokenSpan> contextual_spans(const Tokenizer& tokenizer, const std::vector<ContextualExample>& examples,
                                        const PromptTemplateSet& templates);

// Mean answer-token NLL minimisation over `examples`.
RunRecord finetune(ModelHandle& model, std::span<const TokenSpan> examples, const TrainingConfig& config,
                   const RunOptions& options = {});

struct UnlearnSetup {
    PromptTemplateSet templates;
    TargetSource context_target = TargetSource::reference_model_response;
    // Whether contextual batches are drawn and the context term computed.
    // Unset means "when lambda_c > 0".
    std::optional<bool> use_context;
    std::size_t max_target_tokens = 48;
};

// Fills target_response from the frozen reference's greedy contextual answer
// (or the gold answer). Examples whose reference answer is empty are dropped
// and counted.
ContextualBuildResult prepare_contextual_targets(const ModelHandle& reference,
                                                 const std::vector<ContextualExample>& examples,
                                                 TargetSource source, const PromptTemplateSet& templates,
                                                 std::size_t max_new_tokens);

RunRecord run_unlearn(ModelHandle& model, const MethodConfig& method, const CompositeWeights& weights,
                      const DatasetBundle& bundle, const TrainingConfig& config, const UnlearnSetup& setup = {},
                      const RunOptions& options = {});

}  // namespace unlearn
