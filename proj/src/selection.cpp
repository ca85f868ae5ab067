#include "unlearn/selection.h"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "unlearn/errors.h"

namespace unlearn {

using nlohmann::json;

void MetricSeries::validate() const {
    if (rows.empty()) throw ContractError("metric series is empty");
    if (!(epsilon >= 0.0)) throw ConfigError("selection.epsilon must be non-negative");
    if (window < 1) throw ConfigError("selection.window must be at least 1");
    for (std::size_t e = 0; e < rows.size(); ++e) {
        for (double v : {rows[e].direct_judge, rows[e].contextual_judge, rows[e].utility}) {
            if (!(v >= 0.0 && v <= 1.0)) {
                throw ValidationError("series.epoch " + std::to_string(e + 1), "metric outside [0, 1]");
            }
        }
    }
}

MetricSeries series_from_run(const RunRecord& run, double epsilon, std::size_t window) {
    MetricSeries s;
    s.epsilon = epsilon;
    s.window = window;
    for (std::size_t i = 0; i < run.rows.size(); ++i) {
        const auto& row = run.rows[i];
        if (row.epoch != i + 1) throw ContractError("run " + run.run_id + " has non-contiguous epochs");
        if (!row.eval) throw ContractError("run " + run.run_id + " epoch " + std::to_string(row.epoch) + " has no evaluation");
        s.rows.push_back({row.eval->direct_judge, row.eval->contextual_judge, row.eval->utility});
    }
    return s;
}

MetricSeries smoothed(const MetricSeries& series) {
    MetricSeries out = series;
    if (series.window <= 1) return out;
    for (std::size_t e = 0; e < series.rows.size(); ++e) {
        const std::size_t first = e + 1 >= series.window ? e + 1 - series.window : 0;
        MetricRow acc;
        for (std::size_t k = first; k <= e; ++k) {
            acc.direct_judge += series.rows[k].direct_judge;
            acc.contextual_judge += series.rows[k].contextual_judge;
            acc.utility += series.rows[k].utility;
        }
        const double n = static_cast<double>(e - first + 1);
        out.rows[e] = {acc.direct_judge / n, acc.contextual_judge / n, acc.utility / n};
    }
    return out;
}

std::optional<std::size_t> convergence_epoch(const MetricSeries& input) {
    input.validate();
    const MetricSeries s = smoothed(input);
    double best_d = s.rows[0].direct_judge, best_c = s.rows[0].contextual_judge, best_u = s.rows[0].utility;
    for (const auto& r : s.rows) {
        best_d = std::min(best_d, r.direct_judge);
        best_c = std::max(best_c, r.contextual_judge);
        best_u = std::max(best_u, r.utility);
    }
    const double eps = s.epsilon;
    std::size_t e = 0;
    while (e < s.rows.size() && !(s.rows[e].direct_judge <= best_d + eps)) ++e;
    for (; e < s.rows.size(); ++e) {
        const auto& r = s.rows[e];
        if (r.direct_judge <= best_d + eps && r.contextual_judge >= best_c - eps && r.utility >= best_u - eps) {
            return e + 1;
        }
    }
    return std::nullopt;
}

json SweepCandidate::to_json() const {
    json j = {{"lambda_c", lambda_c}, {"run_id", run_id}};
    if (converged_epoch) {
        j["converged_epoch"] = *converged_epoch;
        j["direct_judge"] = direct_judge;
        j["contextual_judge"] = contextual_judge;
        j["utility"] = utility;
    } else {
        j["converged_epoch"] = nullptr;
    }
    if (!note.empty()) j["note"] = note;
    return j;
}

SweepCandidate SweepCandidate::from_json(const json& j) {
    SweepCandidate c;
    c.lambda_c = j.at("lambda_c").get<double>();
    c.run_id = j.value("run_id", "");
    c.note = j.value("note", "");
    if (!j.at("converged_epoch").is_null()) {
        c.converged_epoch = j["converged_epoch"].get<std::size_t>();
        c.direct_judge = j.at("direct_judge").get<double>();
        c.contextual_judge = j.at("contextual_judge").get<double>();
        c.utility = j.at("utility").get<double>();
    }
    return c;
}

SweepCandidate select_lambda_c(const std::vector<SweepCandidate>& candidates, double vanilla_direct, double delta,
                               SelectionRule rule) {
    if (candidates.empty()) throw ContractError("lambda selection needs at least one candidate");
    const SweepCandidate* best = nullptr;
    auto better = [&](const SweepCandidate& a, const SweepCandidate& b) {
        if (rule == SelectionRule::sum) {
            const double sa = a.contextual_judge + a.utility, sb = b.contextual_judge + b.utility;
            if (sa != sb) return sa > sb;
        } else {
            if (a.contextual_judge != b.contextual_judge) return a.contextual_judge > b.contextual_judge;
            if (a.utility != b.utility) return a.utility > b.utility;
        }
        return a.lambda_c < b.lambda_c;
    };
    for (const auto& c : candidates) {
        if (!c.converged_epoch || !(c.direct_judge <= vanilla_direct + delta)) continue;
        if (!best || better(c, *best)) best = &c;
    }
    if (best) return *best;

    // Report the converged candidates closest to the Direct QA bound, then the unconverged ones.
    std::vector<const SweepCandidate*> order;
    for (const auto& c : candidates) order.push_back(&c);
    std::stable_sort(order.begin(), order.end(), [](const SweepCandidate* a, const SweepCandidate* b) {
        if (a->converged_epoch.has_value() != b->converged_epoch.has_value()) return a->converged_epoch.has_value();
        return a->direct_judge < b->direct_judge;
    });
    std::vector<std::string> misses;
    for (const auto* c : order) {
        std::ostringstream m;
        m << "lambda_c=" << c->lambda_c;
        if (c->converged_epoch) {
            m << " direct_judge=" << c->direct_judge << " exceeds " << vanilla_direct + delta;
        } else {
            m << " never converged";
        }
        misses.push_back(m.str());
    }
    throw SelectionFailure("no candidate within delta " + std::to_string(delta) + " of vanilla direct judge " +
                               std::to_string(vanilla_direct),
                           misses);
}

SweepCandidate harvest_candidate(const RunRecord& run, double lambda_c, double epsilon, std::size_t window) {
    SweepCandidate c;
    c.lambda_c = lambda_c;
    c.run_id = run.run_id;
    if (run.status != RunStatus::complete) {
        c.note = "run " + std::string(to_string(run.status)) + (run.failure.empty() ? "" : ": " + run.failure);
        return c;
    }
    try {
        const auto series = series_from_run(run, epsilon, window);
        c.converged_epoch = convergence_epoch(series);
        if (c.converged_epoch) {
            const auto& row = series.rows[*c.converged_epoch - 1];
            c.direct_judge = row.direct_judge;
            c.contextual_judge = row.contextual_judge;
            c.utility = row.utility;
        } else {
            c.note = "no epoch satisfied the convergence criterion";
        }
    } catch (const ContractError& e) {
        c.note = e.what();
    }
    return c;
}

std::vector<SweepCandidate> run_lambda_sweep(const std::vector<double>& lambda_values, const SweepTrainer& trainer,
                                             double epsilon, std::size_t window) {
    if (lambda_values.empty()) throw ContractError("lambda sweep needs at least one value");
    std::vector<SweepCandidate> out;
    for (double lambda : lambda_values) {
        try {
            out.push_back(harvest_candidate(trainer(lambda), lambda, epsilon, window));
        } catch (const std::exception& e) {
            SweepCandidate c;
            c.lambda_c = lambda;
            c.note = std::string("run failed: ") + e.what();
            out.push_back(c);
        }
    }
    return out;
}

}  // namespace unlearn
