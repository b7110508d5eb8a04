#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "spingap/config.hpp"
#include "spingap/gap.hpp"
#include "spingap/model.hpp"

namespace spingap {

// Disorder Monte Carlo sweep: for every (beta_scale, realization) pair the
// mixing coefficients of the base spec are scaled, a fresh disorder is drawn
// from a derived seed and the full-system inverse gap is computed.
struct ExperimentPlan {
    ModelSpec base;
    std::vector<double> beta_scale;
    int n_realizations = 1;
    double epsilon = 0.01;
    std::vector<std::string> checks;  // subset of {hjid, smatrix, conditioning, indu_m}
    std::filesystem::path out_dir;
    bool exact_omega = false;
    int omega_samples = 64;
    GapOptions gap;

    void validate() const;
};

ExperimentPlan make_plan(const ParsedConfig& cfg);

struct RealizationRow {
    int grid_index = 0;
    int realization = 0;
    std::uint64_t seed = 0;
    double beta_scale = 0.0;
    double a = 0.0;
    double residual = 0.0;
    bool omega = false;
    double omega_sup = 0.0;
    // Worst slack per requested check: min over reports of slack for
    // one-sided checks and of -|slack| for identities; >= -tol means pass.
    std::map<std::string, double> worst_slack;
};

struct GridAggregate {
    double beta_scale = 0.0;
    int n = 0;
    double p_exceed = 0.0;  // empirical P(a > 1 + epsilon)
    double stderr_p = 0.0;  // sqrt(p (1-p) / n)
    double mean_a = 0.0;
    double min_a = 0.0;
    double q25_a = 0.0;
    double median_a = 0.0;
    double q75_a = 0.0;
    double max_a = 0.0;
    double omega_freq = 0.0;
};

struct EnsembleReport {
    ExperimentPlan plan;
    std::vector<RealizationRow> rows;
    std::vector<GridAggregate> aggregates;
    bool complete = true;
};

/// Pure function of the plan; identical at any thread count.
EnsembleReport run_ensemble(const ExperimentPlan& plan, int threads = 0);

/// Writes realizations.csv, aggregate.csv and summary.json into plan.out_dir.
void sweep_report(const EnsembleReport& report);

std::vector<GridAggregate> aggregate_rows(const ExperimentPlan& plan,
                                          const std::vector<RealizationRow>& rows);

}  // namespace spingap
