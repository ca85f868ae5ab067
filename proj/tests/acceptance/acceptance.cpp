// Acceptance checks. Prints one PASS/FAIL line per criterion on stdout and
// progress detail on stderr; exits non-zero when any criterion fails.
//
//   acceptance [--only 1,3,8] [--work-dir DIR]

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <mutex>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include "httplib.h"
#include "support/fixtures.h"
#include "support/oracles.h"
#include "unlearn/commands.h"
#include "unlearn/errors.h"
#include "unlearn/eval.h"
#include "unlearn/objectives.h"
#include "unlearn/report.h"
#include "unlearn/run_config.h"
#include "unlearn/selection.h"
#include "unlearn/trainer.h"

#ifndef UNLEARN_SOURCE_DIR
#define UNLEARN_SOURCE_DIR "."
#endif

using namespace unlearn;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const fs::path kSource = UNLEARN_SOURCE_DIR;

struct Outcome {
    bool pass = false;
    std::string detail;
};

void note(const std::string& line) { std::cerr << "  " << line << "\n"; }

std::string fmt(double v, int digits = 3) {
    std::ostringstream s;
    s.setf(std::ios::fixed);
    s.precision(digits);
    s << v;
    return s.str();
}

std::vector<TokenSpan> random_batch(std::mt19937_64& rng, std::size_t vocab, std::size_t n, const std::string& tag) {
    std::vector<TokenSpan> out;
    for (std::size_t i = 0; i < n; ++i) out.push_back(fixtures::random_span(rng, vocab, 3, 6, tag + std::to_string(i)));
    return out;
}

// 1. Losses that vanish (or take a closed form) at the reference point.
Outcome analytic_zero_cases() {
    std::vector<std::string> bad;
    std::mt19937_64 rng(101);

    auto model = fixtures::tiny_model(7);
    auto ref = snapshot_frozen_reference(model);
    ReferenceOracle oracle(ref);
    const auto batch = random_batch(rng, model->vocab_size(), 6, "z");

    const double kl = context_kl_term(model, oracle, batch);
    if (!(std::abs(kl) <= 1e-6)) bad.push_back("context KL " + std::to_string(kl));

    NpoConfig npo;
    npo.tau = 0.1;
    const double n = loss_npo(model, oracle, batch, npo);
    const double expected_npo = 0.05 * std::log(2.0);
    note("NPO at identity " + fmt(n, 6) + " (expected " + fmt(expected_npo, 6) + ")");
    if (!(std::abs(n - expected_npo) <= 1e-6) || !(std::abs(n - 0.034657) <= 1e-6)) bad.push_back("NPO " + fmt(n, 8));

    // Zeroed blocks pass the input embedding through, so setting the answer
    // token embeddings to c*u injects h = c*u at the RMU layer.
    auto zero = fixtures::zeroed_model(3, 2);
    RmuConfig rmu;
    rmu.layer = 1;
    rmu.steering_vector = {0.6, 0.8};
    rmu.steering_coefficient = 5.0;
    auto wte = fixtures::tiny(zero).tensor("wte");
    for (std::size_t tok : {4u, 5u, 6u}) {
        wte[tok * 2] = 3.0;
        wte[tok * 2 + 1] = 4.0;
    }
    const std::vector<TokenSpan> forget = {{{2, 4, 5, 6}, {0, 1, 1, 1}, "f"}};
    const double r = rmu_forget_term(zero, forget, rmu);
    if (!(std::abs(r) <= 1e-6)) bad.push_back("RMU forget term " + std::to_string(r));

    UndialConfig undial;
    undial.logit_penalty = 0.0;
    double entropy = 0.0;
    for (const auto& span : batch) {
        const auto dists = per_token_distributions(ref, span);
        double h = 0.0;
        for (const auto& d : dists) {
            for (double p : d) h -= p * std::log(p);
        }
        entropy += h / static_cast<double>(dists.size());
    }
    entropy /= static_cast<double>(batch.size());
    const double u = loss_undial(model, oracle, batch, undial);
    if (!(std::abs(u - entropy) <= 1e-6)) bad.push_back("UNDIAL " + fmt(u, 8) + " vs entropy " + fmt(entropy, 8));

    if (!bad.empty()) {
        std::string d;
        for (const auto& b : bad) d += (d.empty() ? "" : "; ") + b;
        return {false, d};
    }
    return {true, "KL " + std::to_string(kl) + ", NPO " + fmt(n, 6) + ", RMU " + std::to_string(r) + ", UNDIAL-H " +
                      std::to_string(u - entropy)};
}

// 2. Analytic gradients of the seven losses against central differences.
// The pass test is the per-parameter relative error. The detail also reports
// the vector-norm error and a Richardson-extrapolated difference at the worst
// parameter, which separates truncation error in the step from a wrong gradient.
Outcome gradient_checks() {
    std::mt19937_64 rng(202);
    double worst = 0.0, worst_norm = 0.0, worst_richardson = 0.0;
    std::string worst_name;
    std::size_t params = 0;
    for (int b = 0; b < 20; ++b) {
        auto model = fixtures::tiny_model(static_cast<std::uint64_t>(300 + b));
        auto ref_model = fixtures::tiny_model(static_cast<std::uint64_t>(400 + b));
        auto ref = snapshot_frozen_reference(ref_model);
        ReferenceOracle oracle(ref);
        params = model->parameter_count();
        const std::size_t V = model->vocab_size();
        const auto forget = random_batch(rng, V, 3, "f");
        const auto retain = random_batch(rng, V, 2, "r");
        RmuConfig rmu;
        rmu.layer = static_cast<std::size_t>(b % 2);
        rmu.steering_vector = sample_steering_vector(static_cast<std::uint64_t>(b), model->hidden_width());
        rmu.steering_coefficient = 2.0;
        rmu.retain_weight = 0.7;
        NpoConfig npo;
        npo.tau = 0.7;
        npo.length_normalized = b % 2 == 1;
        UndialConfig undial;
        undial.logit_penalty = 1.5;
        IdkDpoConfig dpo;
        dpo.beta = 0.5;
        dpo.idk_pool = {"w1 w2", "w3", "w4 w0 w5"};
        dpo.seed = static_cast<std::uint64_t>(b);

        auto check = [&](const char* name, auto&& loss) {
            std::vector<double> grad(model->parameter_count(), 0.0);
            loss(std::span<double>(grad));
            auto p = model.mutable_parameters();
            auto central = [&](std::size_t i, double h) {
                const double saved = p[i];
                p[i] = saved + h;
                const double up = loss(std::span<double>{});
                p[i] = saved - h;
                const double down = loss(std::span<double>{});
                p[i] = saved;
                return (up - down) / (2.0 * h);
            };
            const auto r = fixtures::check_gradient(p, grad, [&] { return loss(std::span<double>{}); });
            double diff2 = 0.0, a2 = 0.0, n2 = 0.0;
            for (std::size_t i = 0; i < p.size(); ++i) {
                const double n = central(i, 1e-4);
                diff2 += (grad[i] - n) * (grad[i] - n);
                a2 += grad[i] * grad[i];
                n2 += n * n;
            }
            const double norm_rel = std::sqrt(diff2) / std::max({std::sqrt(a2), std::sqrt(n2), 1e-12});
            worst_norm = std::max(worst_norm, norm_rel);
            if (r.max_rel > worst) {
                worst = r.max_rel;
                const double h = 1e-4;
                const double rich = (4.0 * central(r.worst_index, h / 2) - central(r.worst_index, h)) / 3.0;
                worst_richardson = std::abs(rich - r.analytic) / std::max(std::abs(r.analytic), 1e-12);
                worst_name = std::string(name) + " batch " + std::to_string(b) + " parameter " +
                             std::to_string(r.worst_index) + ": analytic " + std::to_string(r.analytic) +
                             ", central " + std::to_string(r.numeric);
            }
        };
        check("grad_ascent", [&](std::span<double> g) { return loss_grad_ascent(model, forget, g); });
        check("grad_diff", [&](std::span<double> g) { return loss_grad_diff(model, forget, retain, g); });
        check("npo", [&](std::span<double> g) { return loss_npo(model, oracle, forget, npo, g); });
        check("rmu", [&](std::span<double> g) { return loss_rmu(model, oracle, forget, retain, rmu, g); });
        check("undial", [&](std::span<double> g) { return loss_undial(model, oracle, forget, undial, g); });
        check("idk_dpo", [&](std::span<double> g) { return loss_idk_dpo(model, oracle, forget, dpo, g); });
        check("context_kl", [&](std::span<double> g) { return context_kl_term(model, oracle, forget, g); });
    }
    std::ostringstream d;
    d << params << " parameters, 7 losses x 20 batches, max per-parameter relative error " << worst;
    if (!worst_name.empty()) {
        d << " (" << worst_name << "; Richardson estimate agrees with analytic to " << worst_richardson << ")";
    }
    d << ", max vector-norm relative error " << worst_norm;
    return {params <= 1000 && worst < 1e-4, d.str()};
}

// 3. ROUGE-L LCS against exhaustive subsequence enumeration.
Outcome rouge_oracle() {
    static const char* words[] = {"the", "cat", "sat", "on", "mat", "a", "dog"};
    std::mt19937_64 rng(303);
    std::uniform_int_distribution<std::size_t> len(0, 12), pick(0, 6);
    std::size_t mismatches = 0;
    for (int i = 0; i < 200; ++i) {
        std::vector<std::string> a(len(rng)), b(len(rng));
        for (auto& w : a) w = words[pick(rng)];
        for (auto& w : b) w = words[pick(rng)];
        if (lcs_length(a, b) != oracle::brute_force_lcs(a, b)) ++mismatches;
    }
    return {mismatches == 0, std::to_string(mismatches) + " mismatches over 200 pairs"};
}

// 4. Convergence against an exhaustive scan; selection on the hand trace.
Outcome selection_oracles() {
    std::mt19937_64 rng(404);
    std::size_t mismatches = 0, defined = 0;
    for (int t = 0; t < 1000; ++t) {
        const int steps = std::bernoulli_distribution(0.5)(rng) ? 4 : 20;
        std::uniform_int_distribution<int> grid(0, steps);
        MetricSeries s;
        std::vector<oracle::Triple> rows;
        for (int e = 0; e < 20; ++e) {
            const double d = grid(rng), c = grid(rng), u = grid(rng);
            s.rows.push_back({d / steps, c / steps, u / steps});
            rows.push_back({d / steps, c / steps, u / steps});
        }
        const auto got = convergence_epoch(s);
        if (got != oracle::scan_convergence(rows, s.epsilon)) ++mismatches;
        if (got) ++defined;
    }

    auto cand = [](double l, double d, double c, double u) {
        SweepCandidate x;
        x.lambda_c = l;
        x.converged_epoch = 5;
        x.direct_judge = d;
        x.contextual_judge = c;
        x.utility = u;
        return x;
    };
    const auto pick = select_lambda_c({cand(0.25, 0.22, 0.90, 0.58), cand(0.5, 0.24, 0.95, 0.58),
                                       cand(1.0, 0.30, 0.97, 0.59)},
                                      0.20, 0.06);
    MetricSeries hand;
    hand.rows = {{0.5, 0.9, 0.6}, {0.2, 0.5, 0.55}, {0.1, 0.6, 0.58}, {0.1, 0.9, 0.6}};
    MetricSeries none;
    none.rows = {{0.5, 0.9, 0.6}, {0.1, 0.5, 0.6}};
    const bool traces = convergence_epoch(hand) == std::optional<std::size_t>(4) && !convergence_epoch(none);
    return {mismatches == 0 && pick.lambda_c == 0.5 && traces,
            std::to_string(mismatches) + " mismatches over 1000 series (" + std::to_string(defined) +
                " converged); selected lambda_c " + fmt(pick.lambda_c, 2)};
}

// 5. lambda_c = 0 with the context term switched on reproduces the vanilla loss log.
Outcome vanilla_recovery() {
    const PromptTemplateSet templates;
    const DatasetBundle bundle = generate_synthetic_corpus(5, 3, 4, 0.25);
    const Tokenizer tok = build_run_tokenizer(bundle, templates);
    TinyLmSpec spec;
    spec.embed_dim = 8;
    spec.n_layers = 2;
    spec.n_heads = 2;
    spec.context_window = 64;
    spec.seed = 5;

    TrainingConfig cfg;
    cfg.learning_rate = 5e-3;
    cfg.epochs = 3;
    cfg.effective_batch = 2;
    cfg.micro_batch = 1;
    cfg.seed = 17;

    double worst = 0.0;
    std::vector<std::string> bad;
    for (MethodName name : all_methods()) {
        MethodConfig method;
        method.name = name;
        method.rmu.steering_vector = sample_steering_vector(3, spec.embed_dim);
        CompositeWeights w;
        w.lambda_c = 0.0;
        ModelHandle a(std::make_unique<TinyLm>(spec, tok)), b(std::make_unique<TinyLm>(spec, tok));
        UnlearnSetup vanilla;
        vanilla.templates = templates;
        UnlearnSetup aware = vanilla;
        aware.use_context = true;
        const auto ra = run_unlearn(a, method, w, bundle, cfg, vanilla);
        const auto rb = run_unlearn(b, method, w, bundle, cfg, aware);
        if (ra.rows.size() != cfg.epochs || rb.rows.size() != cfg.epochs || !rb.rows.back().context) {
            bad.push_back(std::string(to_string(name)) + " incomplete log");
            continue;
        }
        for (std::size_t e = 0; e < cfg.epochs; ++e) {
            const auto& x = ra.rows[e];
            const auto& y = rb.rows[e];
            double d = std::max({std::abs(x.objective - y.objective), std::abs(x.forget - y.forget),
                                 std::abs(x.forget_signed - y.forget_signed)});
            if (x.retain && y.retain) d = std::max(d, std::abs(*x.retain - *y.retain));
            if (x.retain.has_value() != y.retain.has_value()) d = 1.0;
            worst = std::max(worst, d);
            if (d >= 1e-6) bad.push_back(std::string(to_string(name)) + " epoch " + std::to_string(e + 1));
        }
    }
    std::string d = std::to_string(all_methods().size()) + " methods, max per-epoch loss difference " +
                    std::to_string(worst);
    for (const auto& b : bad) d += "; " + b;
    return {bad.empty(), d};
}

// 6 and 7 share one desk pipeline.
struct DeskMethod {
    std::string name;
    std::string config;
    std::vector<double> lambdas;  // the four context-aware values; 0 is added for vanilla
};

struct DeskResult {
    bool train_ok = false;
    double train_rouge = 0.0;
    std::vector<std::string> lines;
    bool all_methods_ok = false;
    std::string best_c7;
    std::size_t best_c7_count = 0;
    double seconds = 0.0;
    std::string error;
};

// Per-method desk profiles; see configs/desk_unlearn_*.json.
const std::vector<DeskMethod> kDesk = {
    {"grad_diff", "desk_unlearn_grad_diff.json", {0.03, 0.1, 0.3, 1.0}},
    {"npo", "desk_unlearn_npo.json", {0.2, 0.3, 0.5, 1.0}},
    {"rmu", "desk_unlearn_rmu.json", {0.01, 0.03, 0.1, 0.3}},
};

const EvalReport& row_at(const RunEvals& run, std::size_t epoch) {
    auto it = run.rows.find(epoch);
    if (it == run.rows.end()) throw NotFoundError(run.run_id + " eval row for epoch " + std::to_string(epoch));
    return it->second.report;
}

DeskResult run_desk(const fs::path& work) {
    DeskResult out;
    const auto t0 = std::chrono::steady_clock::now();
    try {
        fs::remove_all(work);
        fs::create_directories(work);
        CommandOverrides ov;
        ov.out = work;
        ov.offline_judge = true;

        const RunConfig ft_cfg = load_run_config(kSource / "configs" / "desk_finetune.json");
        const fs::path ft_dir = cmd_finetune(ft_cfg, ov);
        const fs::path ckpt = checkpoint_dir(ft_dir, ft_cfg.training.epochs);
        {
            const PromptTemplateSet templates;
            const DatasetBundle bundle = load_bundle(ft_cfg, templates);
            const ModelHandle model = load_checkpoint(ckpt, ModelMode::frozen);
            OfflineJudge judge;
            out.train_rouge = evaluate_direct_qa(model, bundle.full, judge, templates, eval_options(ft_cfg.eval)).rouge;
            out.train_ok = out.train_rouge >= 0.9;
            note("fine-tuned " + std::to_string(bundle.full.size()) + " QA pairs, train ROUGE-L " +
                 fmt(out.train_rouge));
        }

        bool all_ok = out.train_ok;
        for (const auto& m : kDesk) {
            RunConfig cfg = load_run_config(kSource / "configs" / m.config);
            cfg.model.checkpoint = ckpt;
            std::vector<double> lambdas = {0.0};
            lambdas.insert(lambdas.end(), m.lambdas.begin(), m.lambdas.end());
            const SweepResult sweep = cmd_sweep(cfg, lambdas, ov);

            const SweepCandidate* vanilla_c = nullptr;
            for (const auto& c : sweep.candidates) {
                if (c.lambda_c == 0.0) vanilla_c = &c;
            }
            if (!vanilla_c || !vanilla_c->converged_epoch) {
                out.lines.push_back(m.name + ": vanilla run did not converge");
                all_ok = false;
                continue;
            }
            const RunEvals vanilla = load_run_evals(sweep.dir / "runs" / vanilla_c->run_id);
            const EvalReport& pre = row_at(vanilla, 0);
            const EvalReport& van = row_at(vanilla, *vanilla_c->converged_epoch);
            const bool a = pre.contextual_rouge - van.contextual_rouge >= 0.2;
            note(m.name + " vanilla @" + std::to_string(*vanilla_c->converged_epoch) + ": direct " +
                 fmt(van.direct_rouge) + ", contextual " + fmt(van.contextual_rouge) + " (pre " +
                 fmt(pre.contextual_rouge) + "), utility " + fmt(van.utility));

            auto meets_bcd = [&](const EvalReport& r) {
                return std::abs(r.contextual_rouge - pre.contextual_rouge) <= 0.1 &&
                       r.direct_rouge <= van.direct_rouge + 0.1 && std::abs(r.utility - van.utility) <= 0.05;
            };
            std::size_t count = 0;
            for (const auto& c : sweep.candidates) {
                if (c.lambda_c == 0.0) continue;
                if (!c.converged_epoch) {
                    note(m.name + " lambda_c " + fmt(c.lambda_c, 2) + ": no convergence epoch");
                    continue;
                }
                const EvalReport& r = row_at(load_run_evals(sweep.dir / "runs" / c.run_id), *c.converged_epoch);
                const bool ok = meets_bcd(r);
                count += ok;
                note(m.name + " lambda_c " + fmt(c.lambda_c, 2) + " @" + std::to_string(*c.converged_epoch) +
                     ": direct " + fmt(r.direct_rouge) + ", contextual " + fmt(r.contextual_rouge) + ", utility " +
                     fmt(r.utility) + (ok ? "  (b)-(d) hold" : ""));
            }
            if (out.best_c7.empty() || count > out.best_c7_count) {
                out.best_c7_count = count;
                out.best_c7 = m.name;
            }

            std::string line = m.name + ": (a) " + std::string(a ? "ok" : "no");
            bool ok = a;
            if (!sweep.selected) {
                line += ", selection failed (" + sweep.failure + ")";
                ok = false;
            } else {
                const EvalReport& r =
                    row_at(load_run_evals(sweep.dir / "runs" / sweep.selected->run_id), *sweep.selected->converged_epoch);
                const bool b = std::abs(r.contextual_rouge - pre.contextual_rouge) <= 0.1;
                const bool c = r.direct_rouge <= van.direct_rouge + 0.1;
                const bool d = std::abs(r.utility - van.utility) <= 0.05;
                line += " lambda_c=" + fmt(sweep.selected->lambda_c, 2) + " (b) " + (b ? "ok" : "no") + " (c) " +
                        (c ? "ok" : "no") + " (d) " + (d ? "ok" : "no");
                ok = ok && b && c && d;
            }
            all_ok = all_ok && ok;
            out.lines.push_back(line);
        }
        out.all_methods_ok = all_ok;
    } catch (const std::exception& e) {
        out.error = e.what();
    }
    out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return out;
}

// 8. Judge client against a loopback server replaying recorded replies.
class FixtureEndpoint {
public:
    FixtureEndpoint() {
        for (const auto& entry : fs::directory_iterator(kSource / "tests" / "fixtures" / "judge_endpoint")) {
            std::ifstream in(entry.path());
            const json j = json::parse(in);
            auto& list = scenarios_[j.at("scenario").get<std::string>()];
            for (const auto& r : j.at("responses")) list.push_back(r.dump());
        }
        server_.Post(R"(/(\w+)/v1/chat/completions)", [this](const httplib::Request& req, httplib::Response& res) {
            std::lock_guard<std::mutex> lock(mutex_);
            const std::string scenario = req.matches[1];
            bodies_.push_back(json::parse(req.body, nullptr, false));
            auto it = scenarios_.find(scenario);
            if (it == scenarios_.end()) {
                res.status = 404;
                return;
            }
            auto& served = served_[scenario];
            const auto& replies = it->second;
            res.set_content(replies[std::min(served, replies.size() - 1)], "application/json");
            ++served;
        });
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }
    ~FixtureEndpoint() {
        server_.stop();
        thread_.join();
    }
    std::string base_url() const { return "http://127.0.0.1:" + std::to_string(port_); }
    std::size_t served(const std::string& scenario) {
        std::lock_guard<std::mutex> lock(mutex_);
        return served_[scenario];
    }
    std::vector<json> bodies() {
        std::lock_guard<std::mutex> lock(mutex_);
        return bodies_;
    }

private:
    httplib::Server server_;
    std::thread thread_;
    int port_ = 0;
    std::mutex mutex_;
    std::map<std::string, std::vector<std::string>> scenarios_;
    std::map<std::string, std::size_t> served_;
    std::vector<json> bodies_;
};

Outcome judge_conformance() {
    const JudgeRequest figure{
        "abilov", "What specific genre is Nikolai Abilov known for?",
        "Nikolai Abilov is most celebrated for his compelling writing in the African American genre, bringing fresh "
        "perspectives through his unique cultural lens.",
        "I don't know"};
    FixtureEndpoint server;
    auto judge_for = [&](const std::string& scenario) {
        auto transport = std::make_shared<HttpTransport>(server.base_url(), "/" + scenario + "/v1/chat/completions",
                                                         "fixture-key", std::chrono::milliseconds(2000));
        return EndpointJudge(transport, {"judge", 3, 8, {}});
    };
    std::vector<std::string> bad;

    const auto v = judge_for("figure6").judge(figure);
    if (v.score != 0 || v.judge_kind != JudgeKind::endpoint) bad.push_back("figure verdict " + std::to_string(v.score));
    const auto bodies = server.bodies();
    if (bodies.empty() || !bodies[0].is_object() ||
        bodies[0]["messages"][1]["content"].get<std::string>().find("Nikolai Abilov") == std::string::npos) {
        bad.push_back("request did not carry the judge prompt");
    }

    const auto retried = judge_for("malformed_then_valid").judge(figure);
    if (retried.score != 0 || server.served("malformed_then_valid") != 2) bad.push_back("malformed reply not retried");

    try {
        judge_for("unsure").judge(figure);
        bad.push_back("three unparseable replies did not fail");
    } catch (const JudgeFailure& e) {
        if (e.attempts() != 3 || e.raw_reply() != "unsure") bad.push_back("failure lost the raw reply");
    }
    if (server.served("unsure") != 3) bad.push_back("expected 3 attempts, saw " + std::to_string(server.served("unsure")));

    std::string d = "verdict " + std::to_string(v.score) + ", retry ok after " +
                    std::to_string(server.served("malformed_then_valid")) + " calls, failure after " +
                    std::to_string(server.served("unsure")) + " attempts";
    for (const auto& b : bad) d += "; " + b;
    return {bad.empty(), d};
}

std::set<int> parse_only(const std::string& arg) {
    std::set<int> out;
    std::stringstream s(arg);
    for (std::string item; std::getline(s, item, ',');) out.insert(std::stoi(item));
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    std::set<int> only;
    fs::path work = fs::temp_directory_path() / "unlearn_acceptance";
    for (int i = 1; i < argc; ++i) {
        const std::string a = argv[i];
        if (a == "--only" && i + 1 < argc) only = parse_only(argv[++i]);
        else if (a == "--work-dir" && i + 1 < argc) work = argv[++i];
        else {
            std::cerr << "usage: acceptance [--only 1,2,...] [--work-dir DIR]\n";
            return 2;
        }
    }
    auto wanted = [&](int c) { return only.empty() || only.contains(c); };

    bool all = true;
    auto report = [&](int id, const std::string& title, bool pass, double seconds, double budget,
                      const std::string& detail) {
        const bool in_budget = seconds <= budget;
        const bool ok = pass && in_budget;
        all = all && ok;
        std::cout << (ok ? "PASS" : "FAIL") << "  C" << id << " " << title << " (" << fmt(seconds, 1) << " s, budget "
                  << fmt(budget, 0) << " s): " << detail << (in_budget ? "" : " [over time budget]") << std::endl;
    };
    auto timed = [&](int id, const std::string& title, double budget, const std::function<Outcome()>& f) {
        if (!wanted(id)) return;
        std::cerr << "C" << id << " " << title << "\n";
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = f();
        } catch (const std::exception& e) {
            o = {false, std::string("threw: ") + e.what()};
        }
        report(id, title, o.pass, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(), budget,
               o.detail);
    };

    timed(1, "analytic zero cases", 10, analytic_zero_cases);
    timed(2, "gradient checks", 120, gradient_checks);
    timed(3, "ROUGE-L oracle", 5, rouge_oracle);
    timed(4, "convergence/selection oracles", 10, selection_oracles);
    timed(5, "vanilla recovery", 300, vanilla_recovery);

    if (wanted(6) || wanted(7)) {
        std::cerr << "C6/C7 desk pipeline in " << work << "\n";
        const DeskResult desk = run_desk(work);
        if (wanted(6)) {
            std::string d = desk.error.empty() ? "train ROUGE-L " + fmt(desk.train_rouge) : "threw: " + desk.error;
            for (const auto& l : desk.lines) d += "; " + l;
            report(6, "desk-scale trend reproduction", desk.error.empty() && desk.all_methods_ok, desk.seconds, 900, d);
        }
        if (wanted(7)) {
            const bool ok = desk.error.empty() && desk.best_c7_count >= 2;
            const std::string d = desk.error.empty() ? desk.best_c7 + ": " + std::to_string(desk.best_c7_count) +
                                                           " of 4 lambda_c values meet (b)-(d)"
                                                     : "threw: " + desk.error;
            report(7, "lambda_c insensitivity", ok, desk.seconds, 900, d);
        }
    }

    timed(8, "judge client conformance", 5, judge_conformance);
    return all ? 0 : 1;
}
