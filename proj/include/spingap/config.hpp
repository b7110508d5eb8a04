#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "spingap/model.hpp"

namespace spingap {

// Settings of the optional [experiment] section; combined with the model
// block into an ExperimentPlan by the caller.
struct ExperimentSettings {
    std::vector<double> beta_scale;
    int n_realizations = 1;
    double epsilon = 0.01;
    std::vector<std::string> checks;
    std::string out;
    bool exact_omega = false;
    int omega_samples = 64;
};

struct ParsedConfig {
    ModelSpec model;
    std::optional<ExperimentSettings> experiment;
};

// Plain-text config. Model keys (top level or under [model]):
//   n_spins = 8
//   mixing  = [[2, 0.02], [3, 0.01]]
//   eta     = [0.1, -0.2, ...]        (omitted: zeros)
//   seed    = 12345
// Values on the right-hand side are JSON literals. An [experiment] section
// holds beta_scale, n_realizations, epsilon, checks, out, exact_omega,
// omega_samples.
ParsedConfig load_config(const std::filesystem::path& path);
ParsedConfig parse_config(const std::string& text, const std::string& origin = "<string>");

void save_model_config(const std::filesystem::path& path, const ModelSpec& spec);

}  // namespace spingap
