#include "unlearn/report.h"

#include <fstream>
#include <iomanip>
#include <sstream>

#include "unlearn/errors.h"
#include "unlearn/selection.h"

namespace unlearn {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json read_json_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw NotFoundError(path.string());
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ValidationError(path.string(), e.what());
    }
}

std::string fixed(double v) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(2) << v;
    return s.str();
}

std::string signed_fixed(double v) {
    // Avoid printing "-0.00".
    if (std::abs(v) < 0.005) return "+0.00";
    return (v > 0 ? "+" : "") + fixed(v);
}

EvalReport difference(const EvalReport& a, const EvalReport& b) {
    EvalReport d;
    d.epoch = a.epoch;
    d.direct_rouge = a.direct_rouge - b.direct_rouge;
    d.direct_judge = a.direct_judge - b.direct_judge;
    d.contextual_rouge = a.contextual_rouge - b.contextual_rouge;
    d.contextual_judge = a.contextual_judge - b.contextual_judge;
    d.utility = a.utility - b.utility;
    d.retain_rouge = a.retain_rouge - b.retain_rouge;
    d.retain_judge = a.retain_judge - b.retain_judge;
    return d;
}

std::string join_epochs(const std::vector<std::size_t>& epochs) {
    std::string out;
    for (std::size_t i = 0; i < epochs.size(); ++i) out += (i ? ", " : "") + std::to_string(epochs[i]);
    return out;
}

// Table row taken at the convergence epoch, or at the last evaluated epoch
// when the run never converged.
std::optional<TableRow> row_for(const RunEvals& run, const std::string& variant, Report& report) {
    std::optional<std::size_t> epoch = run.converged_epoch;
    if (!epoch) {
        for (auto it = run.rows.rbegin(); it != run.rows.rend(); ++it) {
            if (it->first >= 1) {
                epoch = it->first;
                break;
            }
        }
        if (!epoch) return std::nullopt;
        report.notes.push_back(run.run_id + ": no convergence epoch; table uses epoch " + std::to_string(*epoch));
    }
    const auto& src = run.rows.at(*epoch);
    TableRow row;
    row.method = run.method;
    row.variant = variant;
    row.run_id = run.run_id;
    row.lambda_c = run.lambda_c;
    row.epoch = *epoch;
    row.converged = run.converged_epoch.has_value();
    row.values = src.report;
    row.source = (run.dir / "eval.jsonl").string() + ":" + std::to_string(src.line);
    return row;
}

}  // namespace

RunEvals load_run_evals(const fs::path& run_dir) {
    RunEvals run;
    run.dir = run_dir;
    const json config = read_json_file(run_dir / "config.json");
    run.run_id = config.value("run_id", run_dir.filename().string());
    run.kind = config.value("kind", "unlearn");
    if (run.kind == "unlearn") {
        run.method = config.at("method").at("name").get<std::string>();
        run.lambda_c = config.at("weights").value("lambda_c", 0.0);
    }
    if (config.contains("selection")) {
        run.epsilon = config["selection"].value("epsilon", run.epsilon);
        run.window = config["selection"].value("window", run.window);
    }
    run.expected_epochs = config.at("training").at("epochs").get<std::size_t>();

    std::ifstream in(run_dir / "eval.jsonl");
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (line.empty()) continue;
        EvalRow row;
        try {
            row.report = EvalReport::from_json(json::parse(line));
        } catch (const std::exception& e) {
            throw ValidationError((run_dir / "eval.jsonl").string() + ":" + std::to_string(n), e.what());
        }
        row.line = n;
        run.rows[row.report.epoch] = row;
    }
    for (std::size_t e = 1; e <= run.expected_epochs; ++e) {
        if (!run.rows.contains(e)) run.missing_epochs.push_back(e);
    }
    if (run.missing_epochs.empty() && run.expected_epochs > 0) {
        MetricSeries series;
        series.epsilon = run.epsilon;
        series.window = run.window;
        for (std::size_t e = 1; e <= run.expected_epochs; ++e) {
            const auto& r = run.rows.at(e).report;
            series.rows.push_back({r.direct_judge, r.contextual_judge, r.utility});
        }
        run.converged_epoch = convergence_epoch(series);
    }
    return run;
}

Report build_report(const std::vector<fs::path>& dirs) {
    Report report;
    std::vector<RunEvals> runs;
    // Method -> (vanilla run indices, context-aware run indices), in input order.
    std::vector<std::string> method_order;
    std::map<std::string, std::pair<std::vector<std::size_t>, std::vector<std::size_t>>> by_method;

    enum class Role { by_lambda, vanilla, aware, curve_only };
    auto add_run = [&](const fs::path& dir, Role role) {
        try {
            runs.push_back(load_run_evals(dir));
        } catch (const Error& e) {
            report.gaps.push_back(dir.string() + ": " + e.what());
            return;
        }
        const auto& run = runs.back();
        if (run.rows.empty()) report.gaps.push_back(run.run_id + ": no eval rows");
        else if (!run.missing_epochs.empty()) {
            report.gaps.push_back(run.run_id + ": no eval row for epoch " + join_epochs(run.missing_epochs));
        }
        if (run.kind != "unlearn" || role == Role::curve_only) return;
        if (!by_method.contains(run.method)) method_order.push_back(run.method);
        auto& slot = by_method[run.method];
        const bool aware = role == Role::aware || (role == Role::by_lambda && run.lambda_c > 0.0);
        (aware ? slot.second : slot.first).push_back(runs.size() - 1);
    };

    for (const auto& dir : dirs) {
        if (!fs::exists(dir / "sweep.jsonl")) {
            add_run(dir, Role::by_lambda);
            continue;
        }
        std::ifstream in(dir / "sweep.jsonl");
        std::string line;
        std::vector<SweepCandidate> candidates;
        while (std::getline(in, line)) {
            if (!line.empty()) candidates.push_back(SweepCandidate::from_json(json::parse(line)));
        }
        std::string selected_run;
        if (fs::exists(dir / "selection.json")) {
            const json sel = read_json_file(dir / "selection.json");
            if (sel.value("status", "") == "selected") {
                selected_run = sel.value("run_id", "");
            } else {
                std::string msg = dir.string() + ": selection failed: " + sel.value("message", "");
                for (const auto& m : sel.value("misses", std::vector<std::string>{})) msg += "; " + m;
                report.notes.push_back(msg);
            }
        } else {
            report.gaps.push_back(dir.string() + ": no selection.json");
        }
        for (const auto& c : candidates) {
            const fs::path run_dir = dir / "runs" / c.run_id;
            if (c.lambda_c == 0.0) add_run(run_dir, Role::vanilla);
            else add_run(run_dir, c.run_id == selected_run ? Role::aware : Role::curve_only);
        }
    }

    for (const auto& run : runs) {
        Curve curve;
        curve.run_id = run.run_id;
        for (const auto& [epoch, row] : run.rows) {
            curve.points.push_back({row.report, run.converged_epoch && *run.converged_epoch == epoch});
        }
        report.curves.push_back(std::move(curve));
    }

    for (const auto& method : method_order) {
        const auto& [vanilla, aware] = by_method[method];
        if (vanilla.empty() || aware.empty()) continue;
        if (vanilla.size() > 1) {
            report.notes.push_back(method + ": " + std::to_string(vanilla.size()) +
                                   " vanilla runs; deltas use " + runs[vanilla.front()].run_id);
        }
        auto base = row_for(runs[vanilla.front()], "vanilla", report);
        if (!base) continue;
        report.table.push_back(*base);
        for (std::size_t i : aware) {
            auto row = row_for(runs[i], "context-aware", report);
            if (!row) continue;
            row->delta = difference(row->values, base->values);
            report.table.push_back(*row);
        }
    }
    return report;
}

std::string render_table_markdown(const Report& report) {
    std::ostringstream out;
    out << "| Method | Variant | lambda_c | Epoch | ROUGE-L Direct (lower) | ROUGE-L Contextual (higher) "
           "| Judge Direct (lower) | Judge Contextual (higher) | Utility (higher) |\n";
    out << "|---|---|---|---|---|---|---|---|---|\n";
    for (const auto& row : report.table) {
        auto cell = [&](double v, double EvalReport::*field) {
            std::string s = fixed(v);
            if (row.delta) s += " (" + signed_fixed((*row.delta).*field) + ")";
            return s;
        };
        const auto& v = row.values;
        out << "| " << row.method << " | " << row.variant << " | " << row.lambda_c << " | " << row.epoch
            << (row.converged ? "" : "*") << " | " << cell(v.direct_rouge, &EvalReport::direct_rouge) << " | "
            << cell(v.contextual_rouge, &EvalReport::contextual_rouge) << " | "
            << cell(v.direct_judge, &EvalReport::direct_judge) << " | "
            << cell(v.contextual_judge, &EvalReport::contextual_judge) << " | "
            << cell(v.utility, &EvalReport::utility) << " |\n";
    }
    out << "\nEpoch marked * : run did not converge, last evaluated epoch shown. "
           "Parenthesised values are context-aware minus vanilla.\n";
    return out.str();
}

void write_report(const Report& report, const fs::path& out_dir) {
    fs::create_directories(out_dir / "curves");
    json rows = json::array();
    if (!report.table.empty()) {
        std::ofstream(out_dir / "table.md") << render_table_markdown(report);
        std::ofstream csv(out_dir / "table.csv");
        csv << "method,variant,run_id,lambda_c,epoch,converged,direct_rouge,contextual_rouge,direct_judge,"
               "contextual_judge,utility,delta_direct_rouge,delta_contextual_rouge,delta_direct_judge,"
               "delta_contextual_judge,delta_utility,source\n";
        csv << std::setprecision(10);
        for (const auto& r : report.table) {
            const auto& v = r.values;
            csv << r.method << "," << r.variant << "," << r.run_id << "," << r.lambda_c << "," << r.epoch << ","
                << (r.converged ? 1 : 0) << "," << v.direct_rouge << "," << v.contextual_rouge << ","
                << v.direct_judge << "," << v.contextual_judge << "," << v.utility;
            if (r.delta) {
                const auto& d = *r.delta;
                csv << "," << d.direct_rouge << "," << d.contextual_rouge << "," << d.direct_judge << ","
                    << d.contextual_judge << "," << d.utility;
            } else {
                csv << ",,,,,";
            }
            csv << "," << r.source << "\n";
            json j = {{"method", r.method},   {"variant", r.variant},     {"run_id", r.run_id},
                      {"lambda_c", r.lambda_c}, {"epoch", r.epoch},       {"converged", r.converged},
                      {"values", r.values.to_json()}, {"source", r.source}};
            if (r.delta) j["delta"] = r.delta->to_json();
            rows.push_back(j);
        }
    }
    for (const auto& curve : report.curves) {
        std::ofstream csv(out_dir / "curves" / (curve.run_id + ".csv"));
        csv << "epoch,direct_rouge,direct_judge,contextual_rouge,contextual_judge,utility,retain_rouge,"
               "retain_judge,converged\n";
        csv << std::setprecision(10);
        for (const auto& p : curve.points) {
            const auto& v = p.values;
            csv << v.epoch << "," << v.direct_rouge << "," << v.direct_judge << "," << v.contextual_rouge << ","
                << v.contextual_judge << "," << v.utility << "," << v.retain_rouge << "," << v.retain_judge << ","
                << (p.converged ? 1 : 0) << "\n";
        }
    }
    std::ofstream gaps(out_dir / "gaps.txt");
    for (const auto& g : report.gaps) gaps << g << "\n";
    std::ofstream(out_dir / "report.json") << json{{"table", rows}, {"gaps", report.gaps}, {"notes", report.notes}}.dump(2)
                                           << "\n";
}

}  // namespace unlearn
