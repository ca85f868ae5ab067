#pragma once

// Read-only reporting over run and sweep directories: a vanilla vs
// context-aware comparison table, per-epoch curve CSVs and a list of gaps.
//
// Sweep directory layout (written by cmd_sweep):
//   sweep.jsonl        one SweepCandidate per lambda_c
//   selection.json     chosen candidate or the selection failure
//   runs/<run_id>/     one unlearning run per lambda_c

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "unlearn/eval.h"

namespace unlearn {

struct EvalRow {
    EvalReport report;
    std::size_t line = 0;  // 1-based line in eval.jsonl
};

struct RunEvals {
    std::string run_id;
    std::filesystem::path dir;
    std::string kind;    // finetune or unlearn
    std::string method;  // empty for fine-tuning runs
    double lambda_c = 0.0;
    double epsilon = 0.01;
    std::size_t window = 1;
    std::size_t expected_epochs = 0;
    std::map<std::size_t, EvalRow> rows;  // by epoch; a later row for the same epoch wins
    std::vector<std::size_t> missing_epochs;
    std::optional<std::size_t> converged_epoch;
};

// Reads config.json and eval.jsonl from a run directory. Never writes.
RunEvals load_run_evals(const std::filesystem::path& run_dir);

struct TableRow {
    std::string method;
    std::string variant;  // "vanilla" or "context-aware"
    std::string run_id;
    double lambda_c = 0.0;
    std::size_t epoch = 0;
    bool converged = false;
    EvalReport values;
    std::optional<EvalReport> delta;  // context-aware minus vanilla, metric by metric
    std::string source;               // <run_dir>/eval.jsonl:<line>
};

struct CurvePoint {
    EvalReport values;
    bool converged = false;
};

struct Curve {
    std::string run_id;
    std::vector<CurvePoint> points;
};

struct Report {
    std::vector<TableRow> table;
    std::vector<Curve> curves;
    std::vector<std::string> gaps;
    std::vector<std::string> notes;
};

// Accepts run directories and sweep directories in any mix.
Report build_report(const std::vector<std::filesystem::path>& dirs);

// Writes table.md, table.csv (only when there is a table), curves/<run_id>.csv,
// gaps.txt and report.json under out_dir.
void write_report(const Report& report, const std::filesystem::path& out_dir);

std::string render_table_markdown(const Report& report);

}  // namespace unlearn
