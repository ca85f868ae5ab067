#include "unlearn/run_config.h"

#include <cstdlib>
#include <fstream>
#include <set>

#include "unlearn/errors.h"

namespace unlearn {

using nlohmann::json;

namespace {

// Reads one JSON object, remembering which keys were consumed so leftovers
// can be reported with their full path.
class Reader {
public:
    Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ValidationError(path_.empty() ? "<root>" : path_, "expected an object");
    }

    std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
    bool has(const std::string& key) const { return j_.contains(key) && !j_.at(key).is_null(); }

    template <class T>
    T get(const std::string& key, T fallback) {
        seen_.insert(key);
        if (!has(key)) return fallback;
        return convert<T>(key);
    }

    template <class T>
    T require(const std::string& key) {
        seen_.insert(key);
        if (!has(key)) throw ValidationError(field(key), "is required");
        return convert<T>(key);
    }

    Reader child(const std::string& key) {
        seen_.insert(key);
        static const json empty = json::object();
        return Reader(has(key) ? j_.at(key) : empty, field(key));
    }

    void finish() const {
        for (const auto& [key, value] : j_.items()) {
            if (!seen_.contains(key)) throw ValidationError(field(key), "unknown field");
        }
    }

private:
    template <class T>
    T convert(const std::string& key) {
        const json& v = j_.at(key);
        try {
            if constexpr (std::is_same_v<T, double>) {
                if (!v.is_number()) throw ValidationError(field(key), "expected a number");
            } else if constexpr (std::is_same_v<T, bool>) {
                if (!v.is_boolean()) throw ValidationError(field(key), "expected true or false");
            } else if constexpr (std::is_integral_v<T>) {
                if (!v.is_number_integer()) throw ValidationError(field(key), "expected an integer");
                if constexpr (std::is_unsigned_v<T>) {
                    if (v.is_number_integer() && !v.is_number_unsigned() && v.get<long long>() < 0) {
                        throw ValidationError(field(key), "must be non-negative");
                    }
                }
            } else if constexpr (std::is_same_v<T, std::string>) {
                if (!v.is_string()) throw ValidationError(field(key), "expected a string");
            }
            return v.get<T>();
        } catch (const json::exception& e) {
            throw ValidationError(field(key), e.what());
        }
    }

    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

template <class Fn>
auto in_field(const std::string& field, Fn&& fn) {
    try {
        return fn();
    } catch (const ValidationError&) {
        throw;
    } catch (const Error& e) {
        throw ValidationError(field, e.what());
    }
}

RunKind parse_run_kind(const std::string& s, const std::string& field) {
    if (s == "finetune") return RunKind::finetune;
    if (s == "unlearn") return RunKind::unlearn;
    throw ValidationError(field, "unknown run kind '" + s + "'");
}

JudgeBackendKind parse_judge_kind(const std::string& s, const std::string& field) {
    if (s == "offline") return JudgeBackendKind::offline;
    if (s == "endpoint") return JudgeBackendKind::endpoint;
    if (s == "replay") return JudgeBackendKind::replay;
    throw ValidationError(field, "unknown judge kind '" + s + "'");
}

RougeVariant parse_rouge(const std::string& s, const std::string& field) {
    if (s == "recall") return RougeVariant::recall;
    if (s == "f_measure") return RougeVariant::f_measure;
    throw ValidationError(field, "unknown rouge variant '" + s + "'");
}

SelectionRule parse_rule(const std::string& s, const std::string& field) {
    if (s == "sum") return SelectionRule::sum;
    if (s == "lexicographic") return SelectionRule::lexicographic;
    throw ValidationError(field, "unknown selection rule '" + s + "'");
}

TinyLmSpec parse_tiny_lm(Reader r) {
    TinyLmSpec s;
    s.embed_dim = r.get<std::size_t>("embed_dim", s.embed_dim);
    s.n_layers = r.get<std::size_t>("n_layers", s.n_layers);
    s.n_heads = r.get<std::size_t>("n_heads", s.n_heads);
    s.context_window = r.get<std::size_t>("context_window", s.context_window);
    s.mlp_width = r.get<std::size_t>("mlp_width", s.mlp_width);
    s.seed = r.get<std::uint64_t>("seed", s.seed);
    s.init_std = r.get<double>("init_std", s.init_std);
    r.finish();
    in_field(r.field("embed_dim"), [&] { s.validate(); return 0; });
    return s;
}

}  // namespace

std::string_view to_string(RunKind kind) { return kind == RunKind::finetune ? "finetune" : "unlearn"; }

std::string_view to_string(JudgeBackendKind kind) {
    switch (kind) {
        case JudgeBackendKind::offline: return "offline";
        case JudgeBackendKind::endpoint: return "endpoint";
        case JudgeBackendKind::replay: return "replay";
    }
    return "offline";
}

RunConfig parse_run_config(const json& j) {
    RunConfig c;
    Reader root(j, "");
    c.kind = parse_run_kind(root.require<std::string>("kind"), "kind");
    c.run_id = root.get<std::string>("run_id", c.run_id);
    if (c.run_id.empty() || c.run_id.find('/') != std::string::npos) {
        throw ValidationError("run_id", "must be a non-empty name without '/'");
    }
    c.output_dir = root.get<std::string>("output_dir", "");

    {
        auto r = root.child("model");
        c.model.checkpoint = r.get<std::string>("checkpoint", "");
        if (r.has("tiny_lm")) c.model.tiny_lm = parse_tiny_lm(r.child("tiny_lm"));
        else r.child("tiny_lm");
        r.finish();
        if (c.model.checkpoint.empty() == !c.model.tiny_lm.has_value()) {
            throw ValidationError("model", "set exactly one of model.checkpoint and model.tiny_lm");
        }
    }
    {
        auto r = root.child("dataset");
        auto& d = c.dataset;
        d.path = r.get<std::string>("path", "");
        if (r.has("synthetic")) {
            auto s = r.child("synthetic");
            d.synthetic_seed = s.get<std::uint64_t>("seed", d.synthetic_seed);
            d.synthetic_profiles = s.get<std::size_t>("profiles", d.synthetic_profiles);
            d.synthetic_qa_per_profile = s.get<std::size_t>("qa_per_profile", d.synthetic_qa_per_profile);
            s.finish();
        } else {
            r.child("synthetic");
        }
        d.forget_ratio = r.get<double>("forget_ratio", d.forget_ratio);
        if (!(d.forget_ratio > 0.0 && d.forget_ratio < 1.0)) {
            throw ValidationError("dataset.forget_ratio", "must lie in (0, 1)");
        }
        d.context_variants = r.get<std::string>("context_variants", "");
        d.contextual_mix = r.get<bool>("contextual_mix", d.contextual_mix);
        r.finish();
    }
    {
        auto r = root.child("method");
        auto& m = c.method;
        m.name = in_field("method.name", [&] { return parse_method_name(r.get<std::string>("name", "grad_diff")); });
        {
            auto n = r.child("npo");
            m.npo.tau = n.get<double>("tau", m.npo.tau);
            m.npo.length_normalized = n.get<bool>("length_normalized", m.npo.length_normalized);
            n.finish();
            in_field("method.npo.tau", [&] { m.npo.validate(); return 0; });
        }
        {
            auto n = r.child("rmu");
            m.rmu.layer = n.get<std::size_t>("layer", m.rmu.layer);
            c.steering_seed = n.get<std::uint64_t>("steering_seed", c.steering_seed);
            m.rmu.steering_coefficient = n.get<double>("steering_coefficient", m.rmu.steering_coefficient);
            m.rmu.retain_weight = n.get<double>("retain_weight", m.rmu.retain_weight);
            n.finish();
        }
        {
            auto n = r.child("undial");
            m.undial.logit_penalty = n.get<double>("logit_penalty", m.undial.logit_penalty);
            n.finish();
            in_field("method.undial.logit_penalty", [&] { m.undial.validate(); return 0; });
        }
        {
            auto n = r.child("idk_dpo");
            m.idk_dpo.beta = n.get<double>("beta", m.idk_dpo.beta);
            m.idk_dpo.idk_pool = n.get<std::vector<std::string>>("idk_pool", m.idk_dpo.idk_pool);
            m.idk_dpo.seed = n.get<std::uint64_t>("seed", m.idk_dpo.seed);
            n.finish();
            in_field("method.idk_dpo", [&] { m.idk_dpo.validate(); return 0; });
        }
        r.finish();
    }
    {
        auto r = root.child("weights");
        c.weights.lambda_f = r.get<double>("lambda_f", c.weights.lambda_f);
        c.weights.lambda_r = r.get<double>("lambda_r", c.weights.lambda_r);
        c.weights.lambda_c = r.get<double>("lambda_c", c.weights.lambda_c);
        r.finish();
        in_field("weights", [&] { c.weights.validate(); return 0; });
    }
    {
        auto r = root.child("training");
        auto& t = c.training;
        t.learning_rate = r.get<double>("learning_rate", t.learning_rate);
        t.weight_decay = r.get<double>("weight_decay", t.weight_decay);
        t.epochs = r.get<std::size_t>("epochs", t.epochs);
        t.effective_batch = r.get<std::size_t>("effective_batch", t.effective_batch);
        t.micro_batch = r.get<std::size_t>("micro_batch", t.micro_batch);
        t.warmup = in_field("training.warmup", [&] { return parse_warmup(r.get<std::string>("warmup", "first_epoch_linear")); });
        t.seed = r.get<std::uint64_t>("seed", t.seed);
        t.adam_beta1 = r.get<double>("adam_beta1", t.adam_beta1);
        t.adam_beta2 = r.get<double>("adam_beta2", t.adam_beta2);
        t.adam_epsilon = r.get<double>("adam_epsilon", t.adam_epsilon);
        r.finish();
        in_field("training", [&] { t.validate(); return 0; });
    }
    {
        auto r = root.child("context");
        c.context.target_source = in_field("context.target_source", [&] {
            return parse_target_source(r.get<std::string>("target_source", "reference_model_response"));
        });
        if (r.has("enabled")) c.context.enabled = r.get<bool>("enabled", false);
        else r.get<bool>("enabled", false);
        c.context.max_target_tokens = r.get<std::size_t>("max_target_tokens", c.context.max_target_tokens);
        r.finish();
        if (c.weights.lambda_c > 0.0 && c.context.enabled == false) {
            throw ValidationError("context.enabled", "must not be false when weights.lambda_c > 0");
        }
    }
    {
        auto r = root.child("eval");
        auto& e = c.eval;
        e.during_training = r.get<bool>("during_training", e.during_training);
        e.max_new_tokens = r.get<std::size_t>("max_new_tokens", e.max_new_tokens);
        e.rouge = parse_rouge(r.get<std::string>("rouge", "recall"), "eval.rouge");
        e.retain_limit = r.get<std::size_t>("retain_limit", e.retain_limit);
        e.max_in_flight = r.get<std::size_t>("max_in_flight", e.max_in_flight);
        if (e.max_in_flight < 1) throw ValidationError("eval.max_in_flight", "must be at least 1");
        r.finish();
    }
    {
        auto r = root.child("judge");
        auto& g = c.judge;
        g.kind = parse_judge_kind(r.get<std::string>("kind", "offline"), "judge.kind");
        g.base_url = r.get<std::string>("base_url", "");
        g.path = r.get<std::string>("path", g.path);
        g.model = r.get<std::string>("model", g.model);
        g.api_key_env = r.get<std::string>("api_key_env", g.api_key_env);
        g.timeout_ms = r.get<long>("timeout_ms", g.timeout_ms);
        g.max_attempts = r.get<int>("max_attempts", g.max_attempts);
        g.log_dir = r.get<std::string>("log_dir", "");
        g.replay_dir = r.get<std::string>("replay_dir", "");
        r.finish();
        if (g.kind == JudgeBackendKind::endpoint && g.base_url.empty()) {
            throw ValidationError("judge.base_url", "is required for the endpoint judge");
        }
        if (g.kind == JudgeBackendKind::replay && g.replay_dir.empty()) {
            throw ValidationError("judge.replay_dir", "is required for the replay judge");
        }
        if (g.max_attempts < 1) throw ValidationError("judge.max_attempts", "must be at least 1");
        if (g.timeout_ms < 1) throw ValidationError("judge.timeout_ms", "must be positive");
    }
    {
        auto r = root.child("selection");
        auto& s = c.selection;
        s.epsilon = r.get<double>("epsilon", s.epsilon);
        s.window = r.get<std::size_t>("window", s.window);
        s.delta = r.get<double>("delta", s.delta);
        s.rule = parse_rule(r.get<std::string>("rule", "sum"), "selection.rule");
        r.finish();
        if (!(s.epsilon >= 0.0)) throw ValidationError("selection.epsilon", "must be non-negative");
        if (s.window < 1) throw ValidationError("selection.window", "must be at least 1");
        if (!(s.delta >= 0.0)) throw ValidationError("selection.delta", "must be non-negative");
    }
    root.finish();
    return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw NotFoundError("config file " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ValidationError("<root>", std::string("invalid JSON: ") + e.what());
    }
    return parse_run_config(j);
}

json to_json(const RunConfig& c) {
    json model = json::object();
    if (!c.model.checkpoint.empty()) model["checkpoint"] = c.model.checkpoint.string();
    if (c.model.tiny_lm) {
        const auto& s = *c.model.tiny_lm;
        model["tiny_lm"] = {{"embed_dim", s.embed_dim},   {"n_layers", s.n_layers},
                            {"n_heads", s.n_heads},       {"context_window", s.context_window},
                            {"mlp_width", s.mlp_width},   {"seed", s.seed},
                            {"init_std", s.init_std}};
    }
    const auto& d = c.dataset;
    json dataset = {{"forget_ratio", d.forget_ratio}, {"contextual_mix", d.contextual_mix}};
    if (d.path.empty()) {
        dataset["synthetic"] = {{"seed", d.synthetic_seed},
                                {"profiles", d.synthetic_profiles},
                                {"qa_per_profile", d.synthetic_qa_per_profile}};
    } else {
        dataset["path"] = d.path.string();
    }
    if (!d.context_variants.empty()) dataset["context_variants"] = d.context_variants.string();

    const auto& m = c.method;
    json method = {{"name", to_string(m.name)},
                   {"npo", {{"tau", m.npo.tau}, {"length_normalized", m.npo.length_normalized}}},
                   {"rmu",
                    {{"layer", m.rmu.layer},
                     {"steering_seed", c.steering_seed},
                     {"steering_coefficient", m.rmu.steering_coefficient},
                     {"retain_weight", m.rmu.retain_weight}}},
                   {"undial", {{"logit_penalty", m.undial.logit_penalty}}},
                   {"idk_dpo", {{"beta", m.idk_dpo.beta}, {"idk_pool", m.idk_dpo.idk_pool}, {"seed", m.idk_dpo.seed}}}};

    const auto& t = c.training;
    json context = {{"target_source", to_string(c.context.target_source)},
                    {"max_target_tokens", c.context.max_target_tokens}};
    if (c.context.enabled) context["enabled"] = *c.context.enabled;

    json judge = {{"kind", to_string(c.judge.kind)},   {"path", c.judge.path},
                  {"model", c.judge.model},            {"api_key_env", c.judge.api_key_env},
                  {"timeout_ms", c.judge.timeout_ms},  {"max_attempts", c.judge.max_attempts}};
    if (!c.judge.base_url.empty()) judge["base_url"] = c.judge.base_url;
    if (!c.judge.log_dir.empty()) judge["log_dir"] = c.judge.log_dir.string();
    if (!c.judge.replay_dir.empty()) judge["replay_dir"] = c.judge.replay_dir.string();

    json out = {
        {"kind", to_string(c.kind)},
        {"run_id", c.run_id},
        {"model", model},
        {"dataset", dataset},
        {"method", method},
        {"weights", {{"lambda_f", c.weights.lambda_f}, {"lambda_r", c.weights.lambda_r}, {"lambda_c", c.weights.lambda_c}}},
        {"training",
         {{"learning_rate", t.learning_rate},
          {"weight_decay", t.weight_decay},
          {"epochs", t.epochs},
          {"effective_batch", t.effective_batch},
          {"micro_batch", t.micro_batch},
          {"warmup", to_string(t.warmup)},
          {"seed", t.seed},
          {"adam_beta1", t.adam_beta1},
          {"adam_beta2", t.adam_beta2},
          {"adam_epsilon", t.adam_epsilon}}},
        {"context", context},
        {"eval",
         {{"during_training", c.eval.during_training},
          {"max_new_tokens", c.eval.max_new_tokens},
          {"rouge", c.eval.rouge == RougeVariant::recall ? "recall" : "f_measure"},
          {"retain_limit", c.eval.retain_limit},
          {"max_in_flight", c.eval.max_in_flight}}},
        {"judge", judge},
        {"selection",
         {{"epsilon", c.selection.epsilon},
          {"window", c.selection.window},
          {"delta", c.selection.delta},
          {"rule", c.selection.rule == SelectionRule::sum ? "sum" : "lexicographic"}}}};
    if (!c.output_dir.empty()) out["output_dir"] = c.output_dir.string();
    return out;
}

DatasetBundle load_bundle(const RunConfig& config, const PromptTemplateSet& templates) {
    (void)templates;
    const auto& d = config.dataset;
    DatasetBundle bundle = d.path.empty()
                               ? generate_synthetic_corpus(d.synthetic_seed, d.synthetic_profiles,
                                                           d.synthetic_qa_per_profile, d.forget_ratio)
                               : load_tofu_dataset(d.path, d.forget_ratio);
    if (!d.context_variants.empty()) {
        bundle.contextual_forget = load_context_variants(d.context_variants, bundle);
    }
    return bundle;
}

Tokenizer build_run_tokenizer(const DatasetBundle& bundle, const PromptTemplateSet& templates) {
    std::vector<std::string> texts;
    auto add_example = [&](const QaExample& e) {
        texts.push_back(render_prompt(e, PromptMode::direct, templates));
        texts.push_back(e.answer);
        texts.push_back(templates.frame(templates.contextual_qa(e.answer, e.question)));
    };
    for (const auto& e : bundle.full) add_example(e);
    for (const auto& e : bundle.holdout) add_example(e);
    for (const auto& c : bundle.contextual_forget) {
        texts.push_back(render_prompt(c, PromptMode::contextual, templates));
        texts.push_back(c.target_response);
        texts.push_back(c.gold_answer);
    }
    IdkDpoConfig idk;
    for (const auto& s : idk.idk_pool) texts.push_back(s);
    return Tokenizer::build(texts, {});
}

std::unique_ptr<JudgeBackend> make_judge(const JudgeSettings& s) {
    switch (s.kind) {
        case JudgeBackendKind::offline: return std::make_unique<OfflineJudge>();
        case JudgeBackendKind::endpoint: {
            std::string key;
            if (!s.api_key_env.empty()) {
                if (const char* v = std::getenv(s.api_key_env.c_str())) key = v;
            }
            auto transport = std::make_shared<HttpTransport>(s.base_url, s.path, key,
                                                             std::chrono::milliseconds(s.timeout_ms));
            return std::make_unique<EndpointJudge>(transport,
                                                   EndpointJudgeConfig{s.model, s.max_attempts, 8, s.log_dir});
        }
        case JudgeBackendKind::replay: {
            auto transport = std::make_shared<ReplayTransport>(s.replay_dir);
            return std::make_unique<EndpointJudge>(transport, EndpointJudgeConfig{s.model, s.max_attempts, 8, {}});
        }
    }
    throw ConfigError("unknown judge kind");
}

EvalOptions eval_options(const EvalSettings& s, std::size_t epoch) {
    EvalOptions o;
    o.max_new_tokens = s.max_new_tokens;
    o.rouge = s.rouge;
    o.max_in_flight = s.max_in_flight;
    o.epoch = epoch;
    return o;
}

EvalSets eval_sets(const DatasetBundle& bundle, const EvalSettings& settings) {
    return EvalSets{bundle.forget, bundle.contextual_forget, spread_subset(bundle.retain, settings.retain_limit)};
}

}  // namespace unlearn
