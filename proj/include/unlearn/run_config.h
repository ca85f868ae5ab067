#pragma once

// One JSON document that fully determines a fine-tuning or unlearning run.
// Parsing rejects unknown keys and reports the dotted path of the offending
// field through ValidationError.

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "unlearn/corpus.h"
#include "unlearn/eval.h"
#include "unlearn/objectives.h"
#include "unlearn/selection.h"
#include "unlearn/tiny_lm.h"
#include "unlearn/trainer.h"

namespace unlearn {

enum class RunKind { finetune, unlearn };
enum class JudgeBackendKind { offline, endpoint, replay };

struct ModelSource {
    // Exactly one of the two is used: a checkpoint directory, or a fresh TinyLM.
    std::filesystem::path checkpoint;
    std::optional<TinyLmSpec> tiny_lm;
};

struct DatasetSource {
    std::filesystem::path path;  // TOFU-style JSONL; empty selects the synthetic corpus
    std::uint64_t synthetic_seed = 42;
    std::size_t synthetic_profiles = 20;
    std::size_t synthetic_qa_per_profile = 10;
    double forget_ratio = 0.05;
    std::filesystem::path context_variants;  // optional; replaces the original contexts
    // Fine-tuning also trains on the contextual rendering of every example.
    bool contextual_mix = false;
};

struct ContextSettings {
    TargetSource target_source = TargetSource::reference_model_response;
    std::optional<bool> enabled;
    std::size_t max_target_tokens = 48;
};

struct EvalSettings {
    bool during_training = true;
    std::size_t max_new_tokens = 48;
    RougeVariant rouge = RougeVariant::recall;
    std::size_t retain_limit = 0;  // 0: the whole retain set
    std::size_t max_in_flight = 8;
};

struct JudgeSettings {
    JudgeBackendKind kind = JudgeBackendKind::offline;
    std::string base_url;
    std::string path = "/v1/chat/completions";
    std::string model = "judge";
    std::string api_key_env = "JUDGE_API_KEY";
    long timeout_ms = 30000;
    int max_attempts = 3;
    std::filesystem::path log_dir;     // exchange log for endpoint runs
    std::filesystem::path replay_dir;  // recorded exchanges for replay runs
};

struct SelectionSettings {
    double epsilon = 0.01;
    std::size_t window = 1;
    double delta = 0.06;
    SelectionRule rule = SelectionRule::sum;
};

struct RunConfig {
    RunKind kind = RunKind::unlearn;
    std::string run_id = "run";
    std::filesystem::path output_dir;
    ModelSource model;
    DatasetSource dataset;
    MethodConfig method;
    std::uint64_t steering_seed = 0;  // RMU steering vector seed
    CompositeWeights weights;
    TrainingConfig training;
    ContextSettings context;
    EvalSettings eval;
    JudgeSettings judge;
    SelectionSettings selection;
};

RunConfig parse_run_config(const nlohmann::json& j);
RunConfig load_run_config(const std::filesystem::path& path);
nlohmann::json to_json(const RunConfig& config);

std::string_view to_string(RunKind kind);
std::string_view to_string(JudgeBackendKind kind);

// Builds the dataset bundle (with the contextual forget set) described by the config.
DatasetBundle load_bundle(const RunConfig& config, const PromptTemplateSet& templates);

// Vocabulary covering every prompt and answer the run can render.
Tokenizer build_run_tokenizer(const DatasetBundle& bundle, const PromptTemplateSet& templates);

// Judge described by the config; the endpoint credential is read from the
// environment variable named in judge.api_key_env.
std::unique_ptr<JudgeBackend> make_judge(const JudgeSettings& settings);

EvalOptions eval_options(const EvalSettings& settings, std::size_t epoch = 0);
EvalSets eval_sets(const DatasetBundle& bundle, const EvalSettings& settings);

}  // namespace unlearn
