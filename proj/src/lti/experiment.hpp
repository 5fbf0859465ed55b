// SPDX-License-Identifier: Apache-2.0
//
// Experiment specifications and the commands that run them: grid export,
// sample-train-integrate runs, formula calculators and report summaries.
#pragma once

#include "lti/analysis.hpp"
#include "lti/density.hpp"
#include "lti/training.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace lti::experiment {

struct FamilySpec {
    std::string family;
    nlohmann::json params = nlohmann::json::object();
};

enum class Model { Network, Transport, Identity };

struct ExperimentSpec {
    std::string name = "experiment";
    int dim = 0;
    std::uint64_t seed = 0;
    FamilySpec source{"uniform"};
    FamilySpec target{"uniform"};
    FamilySpec qoi{"coordinate"};
    int min_level = 0, max_level = 4;
    std::vector<std::size_t> sample_sizes{1000};
    Model model = Model::Network;
    training::TrainConfig training;
    analysis::Probe probe;
    bool quadrature_oracle = true;  // dense-grid quadrature error, dim <= 3
    std::filesystem::path out_dir = "out";
    std::string csv = "table.csv";
    std::string results = "results.jsonl";
    std::string telemetry;  // empty: none

    [[nodiscard]] nlohmann::json to_json() const;
    /// Strict parse: unknown or mistyped keys raise ConfigurationError naming the key path.
    [[nodiscard]] static ExperimentSpec from_json(const nlohmann::json& j);
    [[nodiscard]] static ExperimentSpec load(const std::filesystem::path& path);
    bool operator==(const ExperimentSpec& o) const { return to_json() == o.to_json(); }
};

/// Families: uniform; tilt {slope | slopes}; parabolic {eps}; cosine
/// {coefficients: one list for every axis or one list per axis}; coupled {coupling}.
/// `path` prefixes configuration error messages.
[[nodiscard]] std::shared_ptr<const Density> make_density(const FamilySpec& spec, int dim,
                                                          const std::string& path = "density");

struct GridRow {
    int level = 0;
    std::size_t nodes = 0;
    double asymptotic = 0.0;
    std::filesystem::path file;
};

/// Writes one grid file per level into out_dir/grids.
std::vector<GridRow> cmd_grid(const ExperimentSpec& spec);

/// Samples the target, fits the model for every sample size and integrates at
/// every level. Writes the CSV table (overwritten) and appends the reports to
/// the results file.
std::vector<analysis::ErrorReport> cmd_run(const ExperimentSpec& spec);

/// kind: constants {L, W, d, kappa, lipschitz_nu, c_d, c_dkl} | threshold
/// {epsilon, delta, beta, qoi_sup, c} | schedule {n, beta, c_d, dim}.
[[nodiscard]] nlohmann::json cmd_calc(const std::string& kind, const nlohmann::json& params);

/// Reads a results file and returns the CSV table plus audit columns.
[[nodiscard]] std::string cmd_report(const std::filesystem::path& results, double slack = 5e-3);

/// Splitmix-style derivation of independent stream seeds.
[[nodiscard]] std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b);

} // namespace lti::experiment
