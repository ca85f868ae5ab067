#pragma once

// Entry points behind the command-line verbs. Each returns the directory it
// wrote; errors propagate as unlearn::Error subclasses.

#include <filesystem>
#include <optional>
#include <vector>

#include "unlearn/report.h"
#include "unlearn/run_config.h"

namespace unlearn {

struct CommandOverrides {
    std::optional<std::uint64_t> seed;       // replaces training.seed
    std::optional<std::filesystem::path> out;  // replaces output_dir
    bool offline_judge = false;
    bool quiet = true;
};

// Applies overrides and resolves the run directory (output_dir / run_id).
RunConfig apply_overrides(RunConfig config, const CommandOverrides& overrides);
std::filesystem::path run_directory(const RunConfig& config);

std::filesystem::path cmd_finetune(const RunConfig& config, const CommandOverrides& overrides = {});
std::filesystem::path cmd_unlearn(const RunConfig& config, const CommandOverrides& overrides = {});

// Evaluates one epoch (or every checkpoint when epoch is unset) of an existing
// run and appends the rows to its eval logs. Returns the reports written.
std::vector<EvalReport> cmd_eval(const std::filesystem::path& run_dir, std::optional<std::size_t> epoch,
                                 const CommandOverrides& overrides = {});

struct SweepResult {
    std::filesystem::path dir;
    std::vector<SweepCandidate> candidates;
    std::optional<SweepCandidate> selected;
    std::string failure;  // set when selection failed
};

// One unlearning run per lambda_c under <out>/<run_id>/runs/, then selection
// against the lambda_c = 0 run when the list contains 0.
SweepResult cmd_sweep(const RunConfig& config, const std::vector<double>& lambda_values,
                      const CommandOverrides& overrides = {});

std::filesystem::path cmd_report(const std::vector<std::filesystem::path>& dirs, const std::filesystem::path& out_dir);

}  // namespace unlearn
