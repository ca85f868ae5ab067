#include "unlearn/commands.h"

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "unlearn/errors.h"
#include "unlearn/selection.h"
#include "unlearn/tiny_lm.h"

namespace unlearn {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void claim_directory(const fs::path& dir) {
    if (fs::exists(dir / "config.json")) {
        throw ConfigError("run directory " + dir.string() + " already holds a run");
    }
    fs::create_directories(dir);
}

JudgeSettings judge_for_run(const RunConfig& config, const fs::path& run_dir) {
    JudgeSettings s = config.judge;
    if (s.kind == JudgeBackendKind::endpoint && s.log_dir.empty()) s.log_dir = run_dir / "cache" / "judge";
    return s;
}

ModelHandle load_source_model(const RunConfig& config, const DatasetBundle& bundle,
                              const PromptTemplateSet& templates) {
    if (config.model.tiny_lm) {
        return ModelHandle(std::make_unique<TinyLm>(*config.model.tiny_lm, build_run_tokenizer(bundle, templates)));
    }
    if (!fs::exists(config.model.checkpoint)) throw NotFoundError("model checkpoint " + config.model.checkpoint.string());
    return load_checkpoint(config.model.checkpoint);
}

// Evaluates the snapshot on every epoch, appends the logs and echoes a line.
EpochHook eval_hook(const RunConfig& config, const fs::path& run_dir, const DatasetBundle& bundle,
                    const PromptTemplateSet& templates, std::shared_ptr<JudgeBackend> judge, bool quiet) {
    if (!config.eval.during_training) return {};
    auto sets = std::make_shared<EvalSets>(eval_sets(bundle, config.eval));
    return [=, &templates](std::size_t epoch, const ModelHandle& snapshot) -> std::optional<EvalReport> {
        auto result = evaluate_checkpoint(snapshot, *sets, *judge, templates, eval_options(config.eval, epoch));
        append_eval_logs(run_dir, result);
        if (!quiet) {
            const auto& r = result.report;
            std::fprintf(stderr, "[%s] epoch %zu  direct %.3f/%.2f  contextual %.3f/%.2f  utility %.3f\n",
                         config.run_id.c_str(), epoch, r.direct_rouge, r.direct_judge, r.contextual_rouge,
                         r.contextual_judge, r.utility);
        }
        return result.report;
    };
}

RunRecord unlearn_into(const RunConfig& config, const fs::path& run_dir, bool quiet) {
    if (config.kind != RunKind::unlearn) throw ConfigError("kind must be unlearn for this command");
    const PromptTemplateSet templates;
    const DatasetBundle bundle = load_bundle(config, templates);
    ModelHandle model = load_source_model(config, bundle, templates);

    MethodConfig method = config.method;
    if (method.name == MethodName::rmu && method.rmu.steering_vector.empty()) {
        method.rmu.steering_vector = sample_steering_vector(config.steering_seed, model->hidden_width());
    }
    UnlearnSetup setup;
    setup.templates = templates;
    setup.context_target = config.context.target_source;
    setup.use_context = config.context.enabled;
    setup.max_target_tokens = config.context.max_target_tokens;

    claim_directory(run_dir);
    std::shared_ptr<JudgeBackend> judge = make_judge(judge_for_run(config, run_dir));
    RunOptions options;
    options.dir = run_dir;
    options.run_id = config.run_id;
    options.config_snapshot = to_json(config);
    options.on_epoch = eval_hook(config, run_dir, bundle, setup.templates, judge, quiet);
    options.evaluate_initial = config.eval.during_training;
    return run_unlearn(model, method, config.weights, bundle, config.training, setup, options);
}

std::string lambda_tag(double lambda) {
    std::ostringstream s;
    s << lambda;
    return s.str();
}

}  // namespace

RunConfig apply_overrides(RunConfig config, const CommandOverrides& overrides) {
    if (overrides.seed) config.training.seed = *overrides.seed;
    if (overrides.out) config.output_dir = *overrides.out;
    if (overrides.offline_judge) config.judge.kind = JudgeBackendKind::offline;
    return config;
}

fs::path run_directory(const RunConfig& config) {
    return (config.output_dir.empty() ? fs::path("runs") : config.output_dir) / config.run_id;
}

fs::path cmd_finetune(const RunConfig& input, const CommandOverrides& overrides) {
    const RunConfig config = apply_overrides(input, overrides);
    if (config.kind != RunKind::finetune) throw ConfigError("kind must be finetune for this command");
    const PromptTemplateSet templates;
    const DatasetBundle bundle = load_bundle(config, templates);
    ModelHandle model = load_source_model(config, bundle, templates);

    const Tokenizer& tok = model->tokenizer();
    std::vector<TokenSpan> spans = direct_spans(tok, bundle.full, templates);
    if (config.dataset.contextual_mix) {
        std::vector<ContextualExample> ctx;
        for (const auto& e : bundle.full) {
            ctx.push_back({e.question, e.answer, e.answer, e.id, ContextVariant::original, e.answer});
        }
        const auto extra = contextual_spans(tok, ctx, templates);
        spans.insert(spans.end(), extra.begin(), extra.end());
    }

    const fs::path dir = run_directory(config);
    claim_directory(dir);
    std::shared_ptr<JudgeBackend> judge = make_judge(judge_for_run(config, dir));
    RunOptions options;
    options.dir = dir;
    options.run_id = config.run_id;
    options.config_snapshot = to_json(config);
    options.on_epoch = eval_hook(config, dir, bundle, templates, judge, overrides.quiet);
    finetune(model, spans, config.training, options);
    return dir;
}

fs::path cmd_unlearn(const RunConfig& input, const CommandOverrides& overrides) {
    const RunConfig config = apply_overrides(input, overrides);
    const fs::path dir = run_directory(config);
    unlearn_into(config, dir, overrides.quiet);
    return dir;
}

std::vector<EvalReport> cmd_eval(const fs::path& run_dir, std::optional<std::size_t> epoch,
                                 const CommandOverrides& overrides) {
    if (!fs::exists(run_dir / "config.json")) throw NotFoundError("run directory " + run_dir.string());
    RunConfig config = load_run_config(run_dir / "config.json");
    if (overrides.offline_judge) config.judge.kind = JudgeBackendKind::offline;

    std::vector<std::size_t> epochs;
    if (epoch) {
        if (*epoch > 0 && !fs::exists(checkpoint_dir(run_dir, *epoch))) {
            throw NotFoundError("checkpoint for epoch " + std::to_string(*epoch) + " in " + run_dir.string());
        }
        epochs.push_back(*epoch);
    } else {
        for (std::size_t e = 1; e <= config.training.epochs; ++e) {
            if (fs::exists(checkpoint_dir(run_dir, e))) epochs.push_back(e);
        }
        if (epochs.empty()) throw NotFoundError("checkpoints in " + run_dir.string());
    }

    const PromptTemplateSet templates;
    const DatasetBundle bundle = load_bundle(config, templates);
    const EvalSets sets = eval_sets(bundle, config.eval);
    auto judge = make_judge(judge_for_run(config, run_dir));
    std::vector<EvalReport> out;
    for (std::size_t e : epochs) {
        // Epoch 0 is the model the run started from.
        ModelHandle model = e == 0 ? snapshot_frozen_reference(load_source_model(config, bundle, templates))
                                   : load_checkpoint(checkpoint_dir(run_dir, e), ModelMode::frozen);
        auto result = evaluate_checkpoint(model, sets, *judge, templates, eval_options(config.eval, e));
        append_eval_logs(run_dir, result);
        out.push_back(result.report);
    }
    return out;
}

SweepResult cmd_sweep(const RunConfig& input, const std::vector<double>& lambda_values,
                      const CommandOverrides& overrides) {
    const RunConfig base = apply_overrides(input, overrides);
    if (base.kind != RunKind::unlearn) throw ConfigError("kind must be unlearn for a sweep");
    if (!base.eval.during_training) throw ConfigError("eval.during_training must be true for a sweep");
    for (double l : lambda_values) {
        if (!(l >= 0.0)) throw ConfigError("lambda values must be non-negative");
    }
    SweepResult result;
    result.dir = run_directory(base);
    if (fs::exists(result.dir / "sweep.jsonl")) throw ConfigError("sweep directory " + result.dir.string() + " exists");
    fs::create_directories(result.dir / "runs");

    SweepTrainer trainer = [&](double lambda) {
        RunConfig c = base;
        c.run_id = base.run_id + "-lc" + lambda_tag(lambda);
        c.output_dir = result.dir / "runs";
        c.weights.lambda_c = lambda;
        return unlearn_into(c, run_directory(c), overrides.quiet);
    };
    result.candidates = run_lambda_sweep(lambda_values, trainer, base.selection.epsilon, base.selection.window);
    {
        std::ofstream out(result.dir / "sweep.jsonl");
        for (std::size_t i = 0; i < result.candidates.size(); ++i) {
            SweepCandidate c = result.candidates[i];
            if (c.run_id.empty()) c.run_id = base.run_id + "-lc" + lambda_tag(lambda_values[i]);
            out << c.to_json().dump() << "\n";
        }
    }

    json selection;
    const SweepCandidate* vanilla = nullptr;
    std::vector<SweepCandidate> aware;
    for (const auto& c : result.candidates) {
        if (c.lambda_c == 0.0) vanilla = &c;
        else aware.push_back(c);
    }
    if (!vanilla) {
        selection = {{"status", "no_baseline"}, {"message", "lambda values do not include 0"}};
    } else if (!vanilla->converged_epoch) {
        result.failure = "vanilla run did not converge";
        selection = {{"status", "failed"}, {"message", result.failure}, {"misses", json::array()}};
    } else if (aware.empty()) {
        selection = {{"status", "no_candidates"}, {"message", "only the vanilla run was swept"}};
    } else {
        try {
            result.selected = select_lambda_c(aware, vanilla->direct_judge, base.selection.delta, base.selection.rule);
            selection = {{"status", "selected"},
                         {"lambda_c", result.selected->lambda_c},
                         {"run_id", result.selected->run_id},
                         {"vanilla_direct_judge", vanilla->direct_judge},
                         {"delta", base.selection.delta}};
        } catch (const SelectionFailure& e) {
            result.failure = e.what();
            selection = {{"status", "failed"}, {"message", e.what()}, {"misses", e.nearest_misses()}};
        }
    }
    std::ofstream(result.dir / "selection.json") << selection.dump(2) << "\n";
    return result;
}

fs::path cmd_report(const std::vector<fs::path>& dirs, const fs::path& out_dir) {
    if (dirs.empty()) throw ConfigError("report needs at least one run or sweep directory");
    write_report(build_report(dirs), out_dir);
    return out_dir;
}

}  // namespace unlearn
