#include "unlearn/eval.h"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "httplib.h"
#include "unlearn/errors.h"
#include "unlearn/parallel.h"

namespace unlearn {

using nlohmann::json;

std::string normalize_text(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    bool pending_space = false;
    for (char raw : text) {
        const auto c = static_cast<unsigned char>(raw);
        if (std::ispunct(c)) continue;
        if (std::isspace(c)) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) {
            out.push_back(' ');
            pending_space = false;
        }
        out.push_back(static_cast<char>(std::tolower(c)));
    }
    return out;
}

std::vector<std::string> normalized_tokens(std::string_view text) {
    std::vector<std::string> out;
    std::istringstream in(normalize_text(text));
    std::string w;
    while (in >> w) out.push_back(w);
    return out;
}

std::size_t lcs_length(std::span<const std::string> a, std::span<const std::string> b) {
    std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
    for (std::size_t i = 1; i <= a.size(); ++i) {
        for (std::size_t j = 1; j <= b.size(); ++j) {
            cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
        }
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

double rouge_l(std::string_view candidate, std::string_view reference, RougeVariant variant) {
    const auto ref = normalized_tokens(reference);
    if (ref.empty()) return 0.0;
    const auto cand = normalized_tokens(candidate);
    const double lcs = static_cast<double>(lcs_length(cand, ref));
    const double recall = lcs / static_cast<double>(ref.size());
    if (variant == RougeVariant::recall) return recall;
    if (cand.empty() || lcs == 0.0) return 0.0;
    const double precision = lcs / static_cast<double>(cand.size());
    return 2.0 * precision * recall / (precision + recall);
}

std::string_view to_string(JudgeKind kind) { return kind == JudgeKind::endpoint ? "endpoint" : "offline"; }

json JudgeVerdict::to_json() const {
    return {{"example_id", example_id}, {"score", score}, {"judge_kind", to_string(judge_kind)},
            {"raw_reply", raw_reply}};
}

JudgePrompt judge_prompt(std::string_view question, std::string_view reference, std::string_view candidate) {
    JudgePrompt p;
    p.system =
        "You are an expert grader. Output 1 if the Model Answer conveys the same essential factual content as the "
        "Reference Answer (paraphrase or minor wording differences are fine). Otherwise output 0. Return ONLY that "
        "single digit—no extra text.";
    p.user = "### Question\n" + std::string(question) + "\n\n### Reference Answer\n" + std::string(reference) +
             "\n\n### Model Answer\n" + std::string(candidate) + "\n\n### Your Response (0 or 1)\n";
    return p;
}

std::optional<int> parse_judge_reply(std::string_view reply) {
    std::size_t b = 0, e = reply.size();
    while (b < e && std::isspace(static_cast<unsigned char>(reply[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(reply[e - 1]))) --e;
    if (e - b != 1) return std::nullopt;
    if (reply[b] == '0') return 0;
    if (reply[b] == '1') return 1;
    return std::nullopt;
}

namespace {

const std::set<std::string>& stopwords() {
    static const std::set<std::string> words = {
        "a",    "an",   "the",  "is",   "are",  "was",   "were", "be",   "been", "of",   "in",   "on",
        "at",   "to",   "for",  "by",   "with", "and",   "or",   "as",   "his",  "her",  "their", "its",
        "he",   "she",  "they", "it",   "this", "that",  "from", "has",  "have", "had",  "who",  "which",
        "what", "does", "did",  "do",   "also", "into",  "every"};
    return words;
}

}  // namespace

std::vector<std::string> content_words(std::string_view text) {
    std::vector<std::string> out;
    for (auto& w : normalized_tokens(text)) {
        if (!stopwords().contains(w)) out.push_back(std::move(w));
    }
    return out;
}

JudgeVerdict OfflineJudge::judge(const JudgeRequest& request) const {
    JudgeVerdict v;
    v.example_id = request.example_id;
    v.judge_kind = JudgeKind::offline;
    const auto needed = content_words(request.reference);
    if (needed.empty()) {
        v.score = normalize_text(request.candidate) == normalize_text(request.reference) ? 1 : 0;
    } else {
        const auto cand = normalized_tokens(request.candidate);
        const std::set<std::string> have(cand.begin(), cand.end());
        v.score = std::all_of(needed.begin(), needed.end(), [&](const std::string& w) { return have.contains(w); })
                      ? 1
                      : 0;
    }
    v.raw_reply = std::to_string(v.score);
    return v;
}

HttpTransport::HttpTransport(std::string base_url, std::string path, std::string api_key,
                             std::chrono::milliseconds timeout)
    : base_url_(std::move(base_url)), path_(std::move(path)), api_key_(std::move(api_key)), timeout_(timeout) {}

std::string HttpTransport::post(const std::string& request_body) const {
    httplib::Client client(base_url_);
    client.set_connection_timeout(timeout_);
    client.set_read_timeout(timeout_);
    client.set_write_timeout(timeout_);
    httplib::Headers headers;
    if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);
    auto res = client.Post(path_, headers, request_body, "application/json");
    if (!res) throw TransportError("judge endpoint " + base_url_ + ": " + httplib::to_string(res.error()));
    if (res->status < 200 || res->status >= 300) {
        throw TransportError("judge endpoint returned HTTP " + std::to_string(res->status));
    }
    return res->body;
}

namespace {

std::string fnv_hex(std::string_view s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace

ReplayTransport::ReplayTransport(const std::filesystem::path& log_dir) {
    if (!std::filesystem::is_directory(log_dir)) throw NotFoundError("judge replay directory " + log_dir.string());
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(log_dir)) {
        if (entry.path().extension() == ".json") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
        std::ifstream in(f);
        const auto j = json::parse(in);
        exchanges_.emplace_back(j.at("request").get<std::string>(), j.at("response").get<std::string>());
    }
}

std::string ReplayTransport::post(const std::string& request_body) const {
    // Repeated identical requests (retries) walk through the recorded replies in order.
    std::vector<const std::string*> replies;
    for (const auto& [req, resp] : exchanges_) {
        if (req == request_body) replies.push_back(&resp);
    }
    if (replies.empty()) throw TransportError("no recorded judge exchange for request " + fnv_hex(request_body));
    std::lock_guard lock(mutex_);
    std::size_t& c = cursor_[request_body];
    const std::string& out = *replies[std::min(c, replies.size() - 1)];
    ++c;
    return out;
}

EndpointJudge::EndpointJudge(std::shared_ptr<const JudgeTransport> transport, EndpointJudgeConfig config)
    : transport_(std::move(transport)), config_(std::move(config)) {
    if (!transport_) throw ConfigError("endpoint judge needs a transport");
    if (config_.max_attempts < 1) throw ConfigError("judge.max_attempts must be at least 1");
}

std::string EndpointJudge::request_body(const JudgeRequest& request) const {
    const auto p = judge_prompt(request.question, request.reference, request.candidate);
    const json body = {{"model", config_.model},
                       {"temperature", 0},
                       {"max_tokens", config_.max_reply_tokens},
                       {"messages",
                        json::array({{{"role", "system"}, {"content", p.system}},
                                     {{"role", "user"}, {"content", p.user}}})}};
    return body.dump();
}

namespace {

// Chat-completion reply text; falls back to the raw body when it is not the
// expected JSON shape so the failure report shows what came back.
std::string reply_text(const std::string& body) {
    const auto j = json::parse(body, nullptr, false);
    if (j.is_discarded()) return body;
    try {
        return j.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const json::exception&) {
        return body;
    }
}

}  // namespace

JudgeVerdict EndpointJudge::judge(const JudgeRequest& request) const {
    const std::string body = request_body(request);
    std::string last_reply;
    for (int attempt = 1; attempt <= config_.max_attempts; ++attempt) {
        std::string response;
        try {
            response = transport_->post(body);
        } catch (const TransportError&) {
            if (attempt == config_.max_attempts) throw;
            continue;
        }
        if (!config_.log_dir.empty()) {
            std::filesystem::create_directories(config_.log_dir);
            std::ofstream out(config_.log_dir / (fnv_hex(body) + "-" + std::to_string(attempt) + ".json"));
            out << json{{"request", body}, {"response", response}}.dump(1) << "\n";
        }
        last_reply = reply_text(response);
        if (const auto score = parse_judge_reply(last_reply)) {
            return JudgeVerdict{request.example_id, *score, JudgeKind::endpoint, last_reply};
        }
    }
    throw JudgeFailure(last_reply, config_.max_attempts);
}

std::vector<JudgeOutcome> judge_all(const JudgeBackend& judge, const std::vector<JudgeRequest>& requests,
                                    std::size_t max_in_flight) {
    std::vector<JudgeOutcome> out(requests.size());
    auto work = [&](std::size_t i) {
        try {
            out[i].verdict = judge.judge(requests[i]);
        } catch (const std::exception& e) {
            out[i].error = std::current_exception();
            out[i].message = e.what();
        }
    };
    // Offline scoring is cheap and local; threads only pay off for network calls.
    if (judge.kind() == JudgeKind::offline || max_in_flight <= 1 || requests.size() <= 1) {
        for (std::size_t i = 0; i < requests.size(); ++i) work(i);
        return out;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> workers;
    const std::size_t n_workers = std::min(max_in_flight, requests.size());
    for (std::size_t w = 0; w < n_workers; ++w) {
        workers.emplace_back([&]() {
            for (std::size_t i = next++; i < requests.size(); i = next++) work(i);
        });
    }
    for (auto& t : workers) t.join();
    return out;
}

std::string_view to_string(GenerationMode mode) { return mode == GenerationMode::direct ? "direct" : "contextual"; }

json GenerationRecord::to_json() const {
    return {{"example_id", example_id}, {"mode", to_string(mode)}, {"prompt", prompt},
            {"candidate", candidate},   {"reference", reference},   {"epoch", epoch}};
}

namespace {

struct QaItem {
    std::string id;
    std::string question;
    std::string prompt;
    std::string reference;
};

QaScores score_items(const ModelHandle& model, const std::vector<QaItem>& items, GenerationMode mode,
                     const JudgeBackend& judge, const EvalOptions& options) {
    if (!model.frozen()) throw ContractError("evaluation expects a frozen checkpoint");
    if (items.empty()) throw ContractError(std::string("empty ") + std::string(to_string(mode)) + " evaluation set");

    const auto candidates = map_items<std::string>(
        items.size(), [&](std::size_t i) { return greedy_decode(model, items[i].prompt, options.max_new_tokens); });

    QaScores s;
    std::vector<JudgeRequest> requests;
    double rouge_sum = 0.0;
    for (std::size_t i = 0; i < items.size(); ++i) {
        s.generations.push_back({items[i].id, mode, items[i].prompt, candidates[i], items[i].reference, options.epoch});
        rouge_sum += rouge_l(candidates[i], items[i].reference, options.rouge);
        requests.push_back({items[i].id, items[i].question, items[i].reference, candidates[i]});
    }
    s.rouge = rouge_sum / static_cast<double>(items.size());

    const auto outcomes = judge_all(judge, requests, options.max_in_flight);
    std::exception_ptr first_error;
    double judge_sum = 0.0;
    for (const auto& o : outcomes) {
        if (o.verdict) {
            judge_sum += o.verdict->score;
            s.verdicts.push_back(*o.verdict);
        } else {
            ++s.judge_failures;
            if (!first_error) first_error = o.error;
        }
    }
    if (static_cast<double>(s.judge_failures) > options.max_judge_failure_rate * static_cast<double>(items.size())) {
        std::rethrow_exception(first_error);
    }
    s.judge = s.verdicts.empty() ? 0.0 : judge_sum / static_cast<double>(s.verdicts.size());
    return s;
}

}  // namespace

QaScores evaluate_direct_qa(const ModelHandle& model, const std::vector<QaExample>& examples,
                            const JudgeBackend& judge, const PromptTemplateSet& templates,
                            const EvalOptions& options) {
    std::vector<QaItem> items;
    for (const auto& e : examples) {
        items.push_back({e.id, e.question, render_prompt(e, PromptMode::direct, templates), e.answer});
    }
    return score_items(model, items, GenerationMode::direct, judge, options);
}

QaScores evaluate_contextual_qa(const ModelHandle& model, const std::vector<ContextualExample>& examples,
                                const JudgeBackend& judge, const PromptTemplateSet& templates,
                                const EvalOptions& options) {
    std::vector<QaItem> items;
    for (const auto& e : examples) {
        if (e.gold_answer.empty()) throw ContractError("contextual example " + e.source_id + " has no gold answer");
        items.push_back({e.source_id, e.question, render_prompt(e, PromptMode::contextual, templates), e.gold_answer});
    }
    return score_items(model, items, GenerationMode::contextual, judge, options);
}

double model_utility(std::span<const double> component_scores) {
    if (component_scores.empty()) throw ContractError("model utility needs at least one component");
    double inv = 0.0;
    for (double c : component_scores) {
        if (!(c >= 0.0 && c <= 1.0)) throw ValidationError("utility.components", "score outside [0, 1]");
        if (c == 0.0) return 0.0;
        inv += 1.0 / c;
    }
    return static_cast<double>(component_scores.size()) / inv;
}

void EvalReport::validate() const {
    const std::pair<const char*, double> fields[] = {
        {"direct_rouge", direct_rouge},   {"direct_judge", direct_judge}, {"contextual_rouge", contextual_rouge},
        {"contextual_judge", contextual_judge}, {"utility", utility}, {"retain_rouge", retain_rouge},
        {"retain_judge", retain_judge}};
    for (const auto& [name, v] : fields) {
        if (!(v >= 0.0 && v <= 1.0)) throw ValidationError(std::string("eval.") + name, "outside [0, 1]");
    }
}

json EvalReport::to_json() const {
    return {{"epoch", epoch},
            {"direct_rouge", direct_rouge},
            {"direct_judge", direct_judge},
            {"contextual_rouge", contextual_rouge},
            {"contextual_judge", contextual_judge},
            {"utility", utility},
            {"retain_rouge", retain_rouge},
            {"retain_judge", retain_judge}};
}

EvalReport EvalReport::from_json(const json& j) {
    EvalReport r;
    r.epoch = j.at("epoch").get<std::size_t>();
    r.direct_rouge = j.at("direct_rouge").get<double>();
    r.direct_judge = j.at("direct_judge").get<double>();
    r.contextual_rouge = j.at("contextual_rouge").get<double>();
    r.contextual_judge = j.at("contextual_judge").get<double>();
    r.utility = j.at("utility").get<double>();
    r.retain_rouge = j.value("retain_rouge", 0.0);
    r.retain_judge = j.value("retain_judge", 0.0);
    r.validate();
    return r;
}

std::vector<QaExample> spread_subset(const std::vector<QaExample>& examples, std::size_t limit) {
    if (limit == 0 || limit >= examples.size()) return examples;
    std::vector<QaExample> out;
    for (std::size_t k = 0; k < limit; ++k) out.push_back(examples[k * examples.size() / limit]);
    return out;
}

CheckpointEval evaluate_checkpoint(const ModelHandle& model, const EvalSets& sets, const JudgeBackend& judge,
                                   const PromptTemplateSet& templates, const EvalOptions& options) {
    CheckpointEval out;
    auto take = [&](QaScores&& s) {
        for (auto& g : s.generations) out.generations.push_back(std::move(g));
        for (auto& v : s.verdicts) out.verdicts.push_back(std::move(v));
    };
    auto direct = evaluate_direct_qa(model, sets.forget, judge, templates, options);
    auto contextual = evaluate_contextual_qa(model, sets.contextual, judge, templates, options);
    auto retain = evaluate_direct_qa(model, sets.retain, judge, templates, options);
    EvalReport& r = out.report;
    r.epoch = options.epoch;
    r.direct_rouge = direct.rouge;
    r.direct_judge = direct.judge;
    r.contextual_rouge = contextual.rouge;
    r.contextual_judge = contextual.judge;
    r.retain_rouge = retain.rouge;
    r.retain_judge = retain.judge;
    const double components[] = {retain.rouge, retain.judge};
    r.utility = model_utility(components);
    r.validate();
    take(std::move(direct));
    take(std::move(contextual));
    take(std::move(retain));
    return out;
}

void append_eval_logs(const std::filesystem::path& dir, const CheckpointEval& result) {
    std::filesystem::create_directories(dir);
    std::ofstream gen(dir / "generations.jsonl", std::ios::app);
    for (const auto& g : result.generations) gen << g.to_json().dump() << "\n";
    std::ofstream ver(dir / "verdicts.jsonl", std::ios::app);
    for (const auto& v : result.verdicts) ver << json(v.to_json()).dump() << "\n";
    std::ofstream ev(dir / "eval.jsonl", std::ios::app);
    ev << result.report.to_json().dump() << "\n";
}

}  // namespace unlearn
