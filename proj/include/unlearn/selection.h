#pragma once

// Convergence-epoch detection and lambda_c selection over finished runs.

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "unlearn/trainer.h"

namespace unlearn {

struct MetricRow {
    double direct_judge = 0.0;      // lower is better
    double contextual_judge = 0.0;  // higher is better
    double utility = 0.0;           // higher is better
};

struct MetricSeries {
    std::vector<MetricRow> rows;  // rows[0] is epoch 1
    double epsilon = 0.01;
    std::size_t window = 1;

    void validate() const;
};

// Series built from the eval rows of a run; throws ContractError when an
// epoch has no evaluation.
MetricSeries series_from_run(const RunRecord& run, double epsilon = 0.01, std::size_t window = 1);

// Earliest epoch (1-based) that is within epsilon of the best Direct QA and,
// from the first such Direct epoch on, also within epsilon of the best
// Contextual QA and utility. nullopt when no epoch qualifies.
std::optional<std::size_t> convergence_epoch(const MetricSeries& series);

// Trailing mean over `window` epochs (shorter at the start).
MetricSeries smoothed(const MetricSeries& series);

struct SweepCandidate {
    double lambda_c = 0.0;
    std::optional<std::size_t> converged_epoch;
    double direct_judge = 0.0;
    double contextual_judge = 0.0;
    double utility = 0.0;
    std::string run_id;
    std::string note;

    nlohmann::json to_json() const;
    static SweepCandidate from_json(const nlohmann::json& j);
};

enum class SelectionRule { sum, lexicographic };

// Among converged candidates with direct_judge <= vanilla_direct + delta,
// maximises contextual + utility (sum) or contextual then utility
// (lexicographic); ties go to the smaller lambda_c.
SweepCandidate select_lambda_c(const std::vector<SweepCandidate>& candidates, double vanilla_direct, double delta,
                               SelectionRule rule = SelectionRule::sum);

// Converged-epoch metrics of a finished run; failed or unconverged runs give a
// candidate without an epoch.
SweepCandidate harvest_candidate(const RunRecord& run, double lambda_c, double epsilon = 0.01,
                                 std::size_t window = 1);

// Runs one unlearning job per lambda with the caller's trainer and harvests
// the candidates. A throwing run becomes an unconverged candidate.
using SweepTrainer = std::function<RunRecord(double lambda_c)>;
std::vector<SweepCandidate> run_lambda_sweep(const std::vector<double>& lambda_values, const SweepTrainer& trainer,
                                             double epsilon = 0.01, std::size_t window = 1);

}  // namespace unlearn
