// SPDX-License-Identifier: Apache-2.0
//
// Maximum-likelihood training of boundary-masked network flows: the empirical
// negative log-likelihood, its exact gradient, and projected first-order ERM.
#pragma once

#include "lti/density.hpp"
#include "lti/flow.hpp"
#include "lti/network.hpp"

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace lti::training {

enum class Optimizer { Adam, Momentum };

struct TrainConfig {
    std::size_t batch_size = 64;
    int max_epochs = 8;
    double learning_rate = 0.02;
    double decay = 0.0;  // rate at epoch e is learning_rate / (1 + decay * e)
    Optimizer optimizer = Optimizer::Adam;
    double momentum = 0.9;
    std::uint64_t seed = 0;

    int depth = 2;
    int width = 16;
    int power = 2;
    bool adaptive = false;  // take (W_n, L_n) from the sample-size schedule
    double beta = 0.25;
    double c_d = 1.0;

    int flow_steps = 16;
    double holdout_fraction = 0.2;
    std::optional<std::filesystem::path> telemetry;  // JSON lines, one per epoch

    void validate() const;
};

struct EpochRecord {
    int epoch = 0;
    double nll = 0.0;
    double grad_norm = 0.0;
    double wall_time = 0.0;
};

struct TrainResult {
    network::Architecture arch;
    std::vector<double> theta;      // best by full training-split NLL
    std::vector<double> nll_trace;  // entry 0 is the initialization
    std::vector<EpochRecord> epochs;
    double initial_nll = 0.0;
    double final_nll = 0.0;
    double holdout_nll = 0.0;
    double generalization_gap = 0.0;  // holdout minus training NLL at theta
    int best_epoch = 0;
    std::size_t train_size = 0, holdout_size = 0;
    double max_excursion = 0.0;
    double wall_time = 0.0;
    bool schedule_clamped = false;

    [[nodiscard]] std::shared_ptr<network::MlpVectorField> field() const;
};

/// -(1/n) sum_j log f_{Phi_* nu}(Z_j); samples are row-major n x d.
[[nodiscard]] double empirical_nll(const flow::FlowMap& fm, const Density& source, std::span<const double> samples,
                                   flow::FlowStats* stats = nullptr);

/// empirical_nll over the rows `rows` of `samples`, writing its gradient with
/// respect to the field parameters into grad (overwritten).
double empirical_nll_gradient(const flow::FlowMap& fm, const Density& source, std::span<const double> samples,
                              std::span<const std::size_t> rows, std::span<double> grad,
                              flow::FlowStats* stats = nullptr);

[[nodiscard]] TrainResult train_erm(const TrainConfig& config, std::span<const double> samples,
                                    std::shared_ptr<const Density> source);

} // namespace lti::training
