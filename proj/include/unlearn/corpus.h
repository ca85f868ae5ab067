#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace unlearn {

enum class SplitTag { forget, retain, holdout };
enum class ContextVariant { original, paraphrased, reasoning };
enum class TargetSource { reference_model_response, gold_answer };
enum class PromptMode { direct, contextual };

std::string_view to_string(SplitTag tag);
std::string_view to_string(ContextVariant variant);
std::string_view to_string(TargetSource source);
SplitTag parse_split_tag(std::string_view text);
ContextVariant parse_context_variant(std::string_view text);
TargetSource parse_target_source(std::string_view text);

struct QaExample {
    std::string id;
    std::string question;
    std::string answer;
    std::string profile_id;
    SplitTag split = SplitTag::retain;
};

// A forget question paired with in-prompt evidence. gold_answer is kept so
// evaluation can score against the original fact whatever the context variant.
struct ContextualExample {
    std::string question;
    std::string context;
    std::string target_response;
    std::string source_id;
    ContextVariant variant = ContextVariant::original;
    std::string gold_answer;
};

struct DatasetBundle {
    std::vector<QaExample> full;
    std::vector<QaExample> forget;
    std::vector<QaExample> retain;
    std::vector<QaExample> holdout;
    std::vector<ContextualExample> contextual_forget;
    double forget_ratio = 0.0;
};

// Throws ContractError if the bundle breaks the forget/retain partition.
void check_bundle_invariants(const DatasetBundle& bundle);

struct ChatFrame {
    std::string bos = "<bos>";
    std::string system_open = "<system>";
    std::string system_text = "You are a helpful assistant.";
    std::string eos = "<eos>";
    std::string user_open = "<user>";
    std::string assistant_open = "<assistant>";
};

struct PromptTemplateSet {
    std::string instruction = "Answer the question based on the given context.";
    std::string context_label = "Context:";
    std::string question_label = "Question:";
    ChatFrame chat;

    std::string direct_qa(std::string_view question) const;
    std::string contextual_qa(std::string_view context, std::string_view question) const;
    // Wraps a user turn in the chat frame, leaving the assistant turn open.
    std::string frame(std::string_view user_content) const;
};

std::string render_prompt(const QaExample& example, PromptMode mode, const PromptTemplateSet& templates);
std::string render_prompt(const ContextualExample& example, PromptMode mode,
                          const PromptTemplateSet& templates);

// Recovers the user turn from a framed prompt produced by PromptTemplateSet::frame.
std::string strip_chat_frame(std::string_view rendered, const PromptTemplateSet& templates);

struct ContextualPromptParts {
    std::string instruction;
    std::string context;
    std::string question;
};
ContextualPromptParts parse_contextual_prompt(std::string_view user_content,
                                              const PromptTemplateSet& templates);

// Splits examples into forget/retain. Published split labels win when
// present; otherwise the last round(ratio * n) examples in file order are
// forgotten.
DatasetBundle split_dataset(std::vector<QaExample> examples, double forget_ratio);

DatasetBundle load_tofu_dataset(const std::filesystem::path& path, double forget_ratio);
void write_dataset(const std::filesystem::path& path, const std::vector<QaExample>& examples);

// Ingests context-variant records ({question, context, variant, source_id,
// optional answer / target_response}). source_id must name an example of the
// bundle.
std::vector<ContextualExample> load_context_variants(const std::filesystem::path& path,
                                                     const DatasetBundle& bundle);
void write_context_variants(const std::filesystem::path& path,
                            const std::vector<ContextualExample>& examples);

// Produces the reference model's answer for a framed contextual prompt.
using ReferenceResponder = std::function<std::string(const std::string& framed_prompt)>;

struct ContextualBuildResult {
    std::vector<ContextualExample> examples;
    std::size_t excluded_empty = 0;
};

ContextualBuildResult build_contextual_forget_set(const std::vector<QaExample>& forget,
                                                  TargetSource target_source,
                                                  const ReferenceResponder& reference,
                                                  const PromptTemplateSet& templates);

// Fictitious-author corpus: each profile gets distinct attribute values and
// whole profiles are assigned to the forget split.
DatasetBundle generate_synthetic_corpus(std::uint64_t seed, std::size_t n_profiles,
                                        std::size_t qa_per_profile, double forget_ratio = 0.05);

std::size_t synthetic_profile_capacity();
std::size_t synthetic_templates_per_profile();

}  // namespace unlearn
