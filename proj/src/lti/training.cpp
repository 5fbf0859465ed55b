// SPDX-License-Identifier: Apache-2.0
#include "lti/training.hpp"

#include "lti/calculators.hpp"
#include "lti/error.hpp"
#include "lti/numerics.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>

namespace lti::training {

void TrainConfig::validate() const {
    require(batch_size >= 1, "training: batch_size must be >= 1");
    require(max_epochs >= 0, "training: max_epochs must be >= 0");
    require(learning_rate > 0.0 && std::isfinite(learning_rate), "training: learning_rate must be > 0");
    require(decay >= 0.0, "training: decay must be >= 0");
    require(momentum >= 0.0 && momentum < 1.0, "training: momentum must lie in [0, 1)");
    require(depth >= 1 && width >= 1, "training: depth and width must be >= 1");
    require(power >= 2, "training: activation power must be >= 2");
    require(beta > 0.0 && beta < 0.5, "training: beta must lie in (0, 1/2)");
    require(c_d > 0.0, "training: c_d must be > 0");
    require(flow_steps >= 1, "training: flow_steps must be >= 1");
    require(holdout_fraction >= 0.0 && holdout_fraction < 1.0, "training: holdout_fraction must lie in [0, 1)");
}

std::shared_ptr<network::MlpVectorField> TrainResult::field() const {
    return std::make_shared<network::MlpVectorField>(arch, theta);
}

namespace {

std::size_t rows_of(std::span<const double> samples, int d) {
    require(samples.size() % static_cast<std::size_t>(d) == 0, "samples: length is not a multiple of the dimension");
    return samples.size() / static_cast<std::size_t>(d);
}

[[noreturn]] void rethrow_with_sample(const Error& e, std::size_t j) {
    throw Error(e.code(), "sample " + std::to_string(j) + ": " + e.what());
}

} // namespace

double empirical_nll(const flow::FlowMap& fm, const Density& source, std::span<const double> samples,
                     flow::FlowStats* stats) {
    const int d = fm.dim();
    const std::size_t n = rows_of(samples, d);
    require(n >= 1, "empirical_nll: need at least one sample");
    std::vector<double> values(n);
    std::vector<flow::FlowStats> local(n);
    parallel_for(n, [&](std::size_t j) {
        try {
            values[j] = fm.log_density(source, samples.subspan(j * static_cast<std::size_t>(d), static_cast<std::size_t>(d)),
                                       &local[j]);
        } catch (const Error& e) {
            rethrow_with_sample(e, j);
        }
    });
    if (stats)
        for (const auto& s : local) stats->merge(s);
    return -compensated_sum(values) / static_cast<double>(n);
}

double empirical_nll_gradient(const flow::FlowMap& fm, const Density& source, std::span<const double> samples,
                              std::span<const std::size_t> rows, std::span<double> grad, flow::FlowStats* stats) {
    const int d = fm.dim();
    const std::size_t n = rows_of(samples, d);
    const std::size_t b = rows.size();
    require(b >= 1, "empirical_nll_gradient: need at least one row");
    const std::size_t q = grad.size();
    std::vector<double> per_sample(b * q, 0.0), values(b);
    std::vector<flow::FlowStats> local(b);
    parallel_for(b, [&](std::size_t k) {
        const std::size_t j = rows[k];
        if (j >= n) fail(ErrorCode::InvalidArgument, "empirical_nll_gradient: row index out of range");
        try {
            values[k] = fm.log_density_gradient(
                source, samples.subspan(j * static_cast<std::size_t>(d), static_cast<std::size_t>(d)),
                std::span<double>(per_sample.data() + k * q, q), &local[k]);
        } catch (const Error& e) {
            rethrow_with_sample(e, j);
        }
    });
    const double scale = -1.0 / static_cast<double>(b);
    std::fill(grad.begin(), grad.end(), 0.0);
    for (std::size_t k = 0; k < b; ++k)
        for (std::size_t i = 0; i < q; ++i) grad[i] += per_sample[k * q + i];
    for (double& g : grad) g *= scale;
    if (stats)
        for (const auto& s : local) stats->merge(s);
    return -compensated_sum(values) / static_cast<double>(b);
}

TrainResult train_erm(const TrainConfig& config, std::span<const double> samples,
                      std::shared_ptr<const Density> source) {
    config.validate();
    require(source != nullptr, "train_erm: null source density");
    const int d = source->dim();
    const std::size_t n = rows_of(samples, d);
    require(n >= 1, "train_erm: need at least one sample");
    const auto t0 = std::chrono::steady_clock::now();
    const auto elapsed = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(); };

    TrainResult result;
    int depth = config.depth, width = config.width;
    if (config.adaptive) {
        const auto s = calc::adaptive_architecture(static_cast<double>(n), config.beta, config.c_d, d);
        depth = s.depth;
        width = s.width;
        result.schedule_clamped = s.width_clamped || s.depth_clamped;
    }
    result.arch = network::Architecture::field(d, depth, width, config.power);

    // Seeded shuffle, then the tail becomes the holdout split.
    Rng rng(config.seed);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    std::size_t holdout = static_cast<std::size_t>(std::floor(config.holdout_fraction * static_cast<double>(n)));
    if (holdout >= n) holdout = n - 1;
    const std::size_t train_n = n - holdout;
    std::vector<double> train(train_n * static_cast<std::size_t>(d)), held(holdout * static_cast<std::size_t>(d));
    for (std::size_t k = 0; k < n; ++k) {
        const double* row = samples.data() + order[k] * static_cast<std::size_t>(d);
        double* dst = k < train_n ? train.data() + k * static_cast<std::size_t>(d)
                                  : held.data() + (k - train_n) * static_cast<std::size_t>(d);
        std::copy(row, row + d, dst);
    }
    result.train_size = train_n;
    result.holdout_size = holdout;

    auto theta = network::initialize(result.arch, rng.next());
    const std::size_t q = theta.size();
    auto field = std::make_shared<network::MlpVectorField>(result.arch, theta);
    flow::FlowStats stats;
    const auto nll_at = [&](std::span<const double> data, int epoch) {
        const flow::FlowMap fm(field, config.flow_steps);
        try {
            return empirical_nll(fm, *source, data, &stats);
        } catch (const Error& e) {
            fail(ErrorCode::TrainingFailure, "train_erm: epoch " + std::to_string(epoch) + ": " + e.what());
        }
    };

    std::optional<std::ofstream> telemetry;
    if (config.telemetry) {
        telemetry.emplace(*config.telemetry, std::ios::app);
        if (!*telemetry) fail(ErrorCode::IoError, "train_erm: cannot open telemetry file " + config.telemetry->string());
    }
    const auto record = [&](const EpochRecord& r) {
        result.epochs.push_back(r);
        if (telemetry) {
            nlohmann::json j = {{"epoch", r.epoch}, {"nll", r.nll}, {"grad_norm", r.grad_norm}, {"wall_time", r.wall_time}};
            *telemetry << j.dump() << '\n';
        }
    };

    double best = nll_at(train, 0);
    if (!std::isfinite(best)) fail(ErrorCode::TrainingFailure, "train_erm: non-finite NLL at epoch 0");
    result.initial_nll = best;
    result.nll_trace.push_back(best);
    result.theta = theta;
    record({0, best, 0.0, elapsed()});

    std::vector<double> grad(q), m(q, 0.0), v(q, 0.0);
    std::vector<std::size_t> batch_order(train_n);
    std::iota(batch_order.begin(), batch_order.end(), 0);
    const std::size_t batch = std::min(config.batch_size, train_n);
    long step = 0;
    constexpr double beta2 = 0.999, eps = 1e-8;
    for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
        for (std::size_t i = train_n; i > 1; --i) std::swap(batch_order[i - 1], batch_order[rng.below(i)]);
        const double lr = config.learning_rate / (1.0 + config.decay * (epoch - 1));
        double norm_sum = 0.0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start + batch <= train_n; start += batch) {
            const flow::FlowMap fm(field, config.flow_steps);
            const std::span<const std::size_t> rows(batch_order.data() + start, batch);
            try {
                (void)empirical_nll_gradient(fm, *source, train, rows, grad, &stats);
            } catch (const Error& e) {
                fail(ErrorCode::TrainingFailure, "train_erm: epoch " + std::to_string(epoch) + ": " + e.what());
            }
            double norm = 0.0;
            for (double g : grad) norm += g * g;
            norm = std::sqrt(norm);
            if (!std::isfinite(norm))
                fail(ErrorCode::TrainingFailure, "train_erm: non-finite gradient at epoch " + std::to_string(epoch));
            norm_sum += norm;
            ++batches;
            ++step;
            if (config.optimizer == Optimizer::Adam) {
                const double c1 = 1.0 - std::pow(config.momentum, static_cast<double>(step));
                const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step));
                for (std::size_t i = 0; i < q; ++i) {
                    m[i] = config.momentum * m[i] + (1.0 - config.momentum) * grad[i];
                    v[i] = beta2 * v[i] + (1.0 - beta2) * grad[i] * grad[i];
                    theta[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps);
                }
            } else {
                for (std::size_t i = 0; i < q; ++i) {
                    m[i] = config.momentum * m[i] + grad[i];
                    theta[i] -= lr * m[i];
                }
            }
            network::project_box(theta);
            field->set_theta(theta);
        }
        const double nll = nll_at(train, epoch);
        if (!std::isfinite(nll)) fail(ErrorCode::TrainingFailure, "train_erm: non-finite NLL at epoch " + std::to_string(epoch));
        result.nll_trace.push_back(nll);
        if (nll < best) {
            best = nll;
            result.theta = theta;
            result.best_epoch = epoch;
        }
        record({epoch, nll, batches ? norm_sum / static_cast<double>(batches) : 0.0, elapsed()});
    }

    result.final_nll = best;
    field->set_theta(result.theta);
    if (holdout > 0) {
        result.holdout_nll = nll_at(held, result.best_epoch);
        result.generalization_gap = result.holdout_nll - result.final_nll;
    }
    result.max_excursion = stats.max_excursion;
    result.wall_time = elapsed();
    return result;
}

} // namespace lti::training
