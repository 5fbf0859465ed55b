// SPDX-License-Identifier: Apache-2.0
//
// The integration pipeline and its error split: learned sparse-grid
// estimates, dense reference integrals, and density-based TV / KL.
#pragma once

#include "lti/density.hpp"
#include "lti/flow.hpp"
#include "lti/quadrature.hpp"

#include <json.hpp>

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace lti::analysis {

struct QoI {
    std::string name;
    int dim = 1;
    std::function<double(std::span<const double>)> evaluate;
    double sup_norm = 0.0;
    std::optional<double> c1_norm;
    /// Per-axis factors when evaluate(x) = prod_i factors[i](x_i).
    std::vector<std::function<double(double)>> factors;

    [[nodiscard]] double operator()(std::span<const double> x) const { return evaluate(x); }
    [[nodiscard]] bool separable() const noexcept { return !factors.empty(); }
};

/// Built-in families: constant {value}, coordinate {axis}, product,
/// monomial {exponents}, abs_product (prod |x_i - 1/2|), exp_sum (exp(sum x_i)).
[[nodiscard]] QoI make_qoi(const std::string& family, const nlohmann::json& params, int dim);
/// Checks |qoi| <= sup_norm on a probe lattice.
void validate_qoi(const QoI& qoi);

/// Smolyak grid whose univariate rules carry the source marginals as weights.
[[nodiscard]] quadrature::SparseGrid source_grid(const Density& source, int level);

/// Sum_j w_j qoi(Phi(xi_j)).
[[nodiscard]] double integrate_via_flow(const quadrature::SparseGrid& grid, const flow::FlowMap& fm, const QoI& qoi,
                                        flow::FlowStats* stats = nullptr);

[[nodiscard]] double total_error(double reference, double estimate);

/// E_mu[qoi]: product of 1-D integrals for separable qoi on a factorized
/// target, else a dense tensor Gauss grid (dim <= 3).
[[nodiscard]] double reference_expectation(const Density& target, const QoI& qoi);

/// int qoi(Phi(x)) dnu(x) on a dense tensor Gauss grid (dim <= 3).
[[nodiscard]] double flow_integral_oracle(const Density& source, const flow::FlowMap& fm, const QoI& qoi);

/// |oracle - integrate_via_flow(grid, fm, qoi)|.
[[nodiscard]] double quadrature_error_measured(const quadrature::SparseGrid& grid, const flow::FlowMap& fm,
                                               const QoI& qoi, double oracle);

enum class ProbeMode { Automatic, Grid, MonteCarlo };

struct Probe {
    ProbeMode mode = ProbeMode::Automatic;  // grid for dim <= 2
    std::size_t panels = 8;                 // 8-point Gauss panels per axis
    std::size_t samples = 100000;
    std::uint64_t seed = 0;
};

struct Divergences {
    double kl = 0.0;
    double tv = 0.0;  // 1/2 L1
    double kl_std_error = 0.0, tv_std_error = 0.0;  // 0 in grid mode
    bool monte_carlo = false;
};

/// KL(mu || Phi_* nu) and TV on a common probe. Grid mode needs dim <= 2.
[[nodiscard]] Divergences divergences(const Density& target, const flow::FlowMap& fm, const Density& source,
                                      const Probe& probe = {});
[[nodiscard]] double kl_estimate(const Density& target, const flow::FlowMap& fm, const Density& source,
                                 const Probe& probe = {});
[[nodiscard]] double tv_estimate(const Density& target, const flow::FlowMap& fm, const Density& source,
                                 const Probe& probe = {});

[[nodiscard]] inline bool pinsker_holds(double tv, double kl, double slack) {
    return tv <= std::sqrt(std::max(kl, 0.0) / 2.0) + slack;
}

struct ErrorReport {
    std::string name;
    double estimate = 0.0;
    double reference_value = 0.0;
    double total_error = 0.0;
    std::optional<double> quadrature_error;
    std::optional<double> tv;
    std::optional<double> kl;
    double kl_std_error = 0.0;
    double qoi_sup_norm = 0.0;
    int dim = 0, level = 0;
    std::size_t nodes = 0;
    std::size_t sample_size = 0;
    std::uint64_t seed = 0;
    std::vector<int> widths;
    int power = 2;
    std::optional<double> train_nll, holdout_nll;

    /// ||qoi||_inf times the full L1 distance; empty without tv.
    [[nodiscard]] std::optional<double> learning_error_bound() const;
    /// total <= learning bound + quadrature error + slack; true when a term is unavailable.
    [[nodiscard]] bool decomposition_holds(double slack) const;

    bool operator==(const ErrorReport&) const = default;
};

void to_json(nlohmann::json& j, const ErrorReport& r);
void from_json(const nlohmann::json& j, ErrorReport& r);

/// "n,level,m_nodes,total,quad,tv,kl,seed"; missing values are empty cells.
[[nodiscard]] std::string csv_header();
[[nodiscard]] std::string csv_row(const ErrorReport& r);

} // namespace lti::analysis
