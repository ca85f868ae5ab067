#pragma once

// ROUGE-L, binary answer judges, Direct / Contextual QA evaluation and the
// model-utility aggregate.

#include <chrono>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "unlearn/corpus.h"
#include "unlearn/model.h"

namespace unlearn {

// Lowercase, ASCII punctuation removed, whitespace collapsed.
std::string normalize_text(std::string_view text);
std::vector<std::string> normalized_tokens(std::string_view text);

enum class RougeVariant { recall, f_measure };

std::size_t lcs_length(std::span<const std::string> a, std::span<const std::string> b);
// LCS(candidate, reference) / |reference| (recall) or the LCS F1. Empty
// reference gives 0.
double rouge_l(std::string_view candidate, std::string_view reference, RougeVariant variant = RougeVariant::recall);

enum class JudgeKind { endpoint, offline };
std::string_view to_string(JudgeKind kind);

struct JudgeVerdict {
    std::string example_id;
    int score = 0;
    JudgeKind judge_kind = JudgeKind::offline;
    std::string raw_reply;

    nlohmann::json to_json() const;
};

struct JudgeRequest {
    std::string example_id;
    std::string question;
    std::string reference;
    std::string candidate;
};

// The grading frame sent to an endpoint judge.
struct JudgePrompt {
    std::string system;
    std::string user;
};
JudgePrompt judge_prompt(std::string_view question, std::string_view reference, std::string_view candidate);
// "0" or "1" after trimming whitespace; anything else is nullopt.
std::optional<int> parse_judge_reply(std::string_view reply);

class JudgeBackend {
public:
    virtual ~JudgeBackend() = default;
    virtual JudgeKind kind() const = 0;
    virtual JudgeVerdict judge(const JudgeRequest& request) const = 0;
};

// Scores 1 iff every content word of the normalized reference appears in the
// normalized candidate. References without content words need an exact
// normalized match.
class OfflineJudge : public JudgeBackend {
public:
    JudgeKind kind() const override { return JudgeKind::offline; }
    JudgeVerdict judge(const JudgeRequest& request) const override;
};

std::vector<std::string> content_words(std::string_view text);

// Moves one chat-completion request body to the endpoint and returns the
// response body. Throws TransportError on connection failures and non-2xx
// statuses.
class JudgeTransport {
public:
    virtual ~JudgeTransport() = default;
    virtual std::string post(const std::string& request_body) const = 0;
};

class HttpTransport : public JudgeTransport {
public:
    // base_url like "http://127.0.0.1:8080"; path defaults to the usual
    // chat-completions route.
    HttpTransport(std::string base_url, std::string path = "/v1/chat/completions", std::string api_key = {},
                  std::chrono::milliseconds timeout = std::chrono::seconds(30));
    std::string post(const std::string& request_body) const override;

private:
    std::string base_url_;
    std::string path_;
    std::string api_key_;
    std::chrono::milliseconds timeout_;
};

// Serves responses recorded by EndpointJudge's exchange log, keyed by the
// exact request body. Unknown requests raise TransportError.
class ReplayTransport : public JudgeTransport {
public:
    explicit ReplayTransport(const std::filesystem::path& log_dir);
    std::string post(const std::string& request_body) const override;
    std::size_t size() const noexcept { return exchanges_.size(); }

private:
    std::vector<std::pair<std::string, std::string>> exchanges_;
    mutable std::mutex mutex_;
    mutable std::map<std::string, std::size_t> cursor_;
};

struct EndpointJudgeConfig {
    std::string model = "judge";
    int max_attempts = 3;
    int max_reply_tokens = 8;
    // When set, every request/response pair is written here for replay.
    std::filesystem::path log_dir;
};

class EndpointJudge : public JudgeBackend {
public:
    EndpointJudge(std::shared_ptr<const JudgeTransport> transport, EndpointJudgeConfig config = {});
    JudgeKind kind() const override { return JudgeKind::endpoint; }
    // Retries malformed replies and transport failures up to max_attempts.
    JudgeVerdict judge(const JudgeRequest& request) const override;
    std::string request_body(const JudgeRequest& request) const;

private:
    std::shared_ptr<const JudgeTransport> transport_;
    EndpointJudgeConfig config_;
};

// Judges all requests with at most max_in_flight concurrent calls. Results
// follow the input order; failed slots hold the exception.
struct JudgeOutcome {
    std::optional<JudgeVerdict> verdict;
    std::exception_ptr error;
    std::string message;
};
std::vector<JudgeOutcome> judge_all(const JudgeBackend& judge, const std::vector<JudgeRequest>& requests,
                                    std::size_t max_in_flight = 8);

enum class GenerationMode { direct, contextual };
std::string_view to_string(GenerationMode mode);

struct GenerationRecord {
    std::string example_id;
    GenerationMode mode = GenerationMode::direct;
    std::string prompt;
    std::string candidate;
    std::string reference;
    std::size_t epoch = 0;

    nlohmann::json to_json() const;
};

struct EvalOptions {
    std::size_t max_new_tokens = 48;
    RougeVariant rouge = RougeVariant::recall;
    std::size_t max_in_flight = 8;
    // A run fails when more than this fraction of verdicts fail.
    double max_judge_failure_rate = 0.05;
    std::size_t epoch = 0;
};

struct QaScores {
    double rouge = 0.0;
    double judge = 0.0;
    std::size_t judge_failures = 0;
    std::vector<GenerationRecord> generations;
    std::vector<JudgeVerdict> verdicts;
};

QaScores evaluate_direct_qa(const ModelHandle& model, const std::vector<QaExample>& examples,
                            const JudgeBackend& judge, const PromptTemplateSet& templates,
                            const EvalOptions& options = {});
// Scores against each example's gold answer.
QaScores evaluate_contextual_qa(const ModelHandle& model, const std::vector<ContextualExample>& examples,
                                const JudgeBackend& judge, const PromptTemplateSet& templates,
                                const EvalOptions& options = {});

// Harmonic mean; any zero component gives 0.
double model_utility(std::span<const double> component_scores);

struct EvalReport {
    std::size_t epoch = 0;
    double direct_rouge = 0.0;
    double direct_judge = 0.0;
    double contextual_rouge = 0.0;
    double contextual_judge = 0.0;
    double utility = 0.0;
    double retain_rouge = 0.0;
    double retain_judge = 0.0;

    void validate() const;
    nlohmann::json to_json() const;
    static EvalReport from_json(const nlohmann::json& j);
};

struct EvalSets {
    std::vector<QaExample> forget;
    std::vector<ContextualExample> contextual;
    std::vector<QaExample> retain;
};

// `limit` examples picked at evenly spaced positions, in order (everything
// when limit is 0 or not smaller than the list).
std::vector<QaExample> spread_subset(const std::vector<QaExample>& examples, std::size_t limit);

struct CheckpointEval {
    EvalReport report;
    std::vector<GenerationRecord> generations;
    std::vector<JudgeVerdict> verdicts;
};

// Direct QA and Contextual QA on the forget sets plus retain-set utility.
CheckpointEval evaluate_checkpoint(const ModelHandle& model, const EvalSets& sets, const JudgeBackend& judge,
                                   const PromptTemplateSet& templates, const EvalOptions& options);

// Appends generations.jsonl, verdicts.jsonl and eval.jsonl rows under dir.
void append_eval_logs(const std::filesystem::path& dir, const CheckpointEval& result);

}  // namespace unlearn
