// SPDX-License-Identifier: Apache-2.0
//
// Probability densities on the unit cube. The built-in families are bounded
// above and below in closed form, and the factorized ones expose their
// univariate marginals with closed-form CDFs.
#pragma once

#include "lti/quadrature.hpp"

#include <cmath>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace lti {

/// Univariate density on [0, 1].
class Marginal {
public:
    virtual ~Marginal() = default;

    [[nodiscard]] virtual double pdf(double x) const = 0;
    [[nodiscard]] virtual double cdf(double x) const = 0;
    /// d pdf / dx.
    [[nodiscard]] virtual double pdf_derivative(double x) const = 0;
    [[nodiscard]] virtual double lower_bound() const = 0;
    [[nodiscard]] virtual double upper_bound() const = 0;
    [[nodiscard]] virtual std::string name() const = 0;

    /// Inverse CDF by safeguarded Newton; |cdf(x) - u| <= 1e-10 on return.
    [[nodiscard]] virtual double inverse_cdf(double u) const;
    [[nodiscard]] quadrature::UnivariateWeight as_weight() const;
};

class UniformMarginal final : public Marginal {
public:
    double pdf(double) const override { return 1.0; }
    double cdf(double x) const override { return x; }
    double pdf_derivative(double) const override { return 0.0; }
    double lower_bound() const override { return 1.0; }
    double upper_bound() const override { return 1.0; }
    std::string name() const override { return "uniform"; }
    double inverse_cdf(double u) const override { return u; }
};

/// Linear tilt 1 + slope (x - 1/2), |slope| <= 2. slope = 2 gives 2x.
class TiltMarginal final : public Marginal {
public:
    explicit TiltMarginal(double slope);
    double pdf(double x) const override { return 1.0 + slope_ * (x - 0.5); }
    double cdf(double x) const override { return x + 0.5 * slope_ * (x * x - x); }
    double pdf_derivative(double) const override { return slope_; }
    double lower_bound() const override { return 1.0 - 0.5 * std::abs(slope_); }
    double upper_bound() const override { return 1.0 + 0.5 * std::abs(slope_); }
    std::string name() const override;
    double inverse_cdf(double u) const override;
    [[nodiscard]] double slope() const noexcept { return slope_; }

private:
    double slope_;
};

/// (6x(1-x) + eps) / (1 + eps), eps > 0.
class ParabolicMarginal final : public Marginal {
public:
    explicit ParabolicMarginal(double eps);
    double pdf(double x) const override { return (6.0 * x * (1.0 - x) + eps_) / (1.0 + eps_); }
    double cdf(double x) const override { return (3.0 * x * x - 2.0 * x * x * x + eps_ * x) / (1.0 + eps_); }
    double pdf_derivative(double x) const override { return (6.0 - 12.0 * x) / (1.0 + eps_); }
    double lower_bound() const override { return eps_ / (1.0 + eps_); }
    double upper_bound() const override { return (1.5 + eps_) / (1.0 + eps_); }
    std::string name() const override;
    [[nodiscard]] double eps() const noexcept { return eps_; }

private:
    double eps_;
};

/// 1 + sum_k a_k cos(k pi x), sum |a_k| < 1.
class CosineMarginal final : public Marginal {
public:
    explicit CosineMarginal(std::vector<double> coefficients);
    double pdf(double x) const override;
    double cdf(double x) const override;
    double pdf_derivative(double x) const override;
    double lower_bound() const override;
    double upper_bound() const override;
    std::string name() const override;
    [[nodiscard]] const std::vector<double>& coefficients() const noexcept { return a_; }

private:
    std::vector<double> a_;
};

class Density {
public:
    virtual ~Density() = default;

    [[nodiscard]] int dim() const noexcept { return dim_; }
    [[nodiscard]] virtual double pdf(std::span<const double> x) const = 0;
    [[nodiscard]] virtual double log_pdf(std::span<const double> x) const;
    /// Gradient of log pdf; the default uses central differences.
    virtual void grad_log_pdf(std::span<const double> x, std::span<double> out) const;

    /// kappa <= pdf <= K on the cube.
    [[nodiscard]] virtual double lower_bound() const = 0;
    [[nodiscard]] virtual double upper_bound() const = 0;
    /// Lipschitz bound on pdf (metadata only).
    [[nodiscard]] virtual double lipschitz() const = 0;
    [[nodiscard]] virtual std::string name() const = 0;

    /// Univariate factors when pdf(x) = prod_i f_i(x_i); empty otherwise.
    [[nodiscard]] virtual std::span<const std::shared_ptr<const Marginal>> factors() const { return {}; }
    [[nodiscard]] bool factorized() const { return !factors().empty(); }

protected:
    explicit Density(int dim);

private:
    int dim_;
};

class ProductDensity final : public Density {
public:
    explicit ProductDensity(std::vector<std::shared_ptr<const Marginal>> factors);
    double pdf(std::span<const double> x) const override;
    double log_pdf(std::span<const double> x) const override;
    void grad_log_pdf(std::span<const double> x, std::span<double> out) const override;
    double lower_bound() const override;
    double upper_bound() const override;
    double lipschitz() const override;
    std::string name() const override;
    std::span<const std::shared_ptr<const Marginal>> factors() const override { return factors_; }

private:
    std::vector<std::shared_ptr<const Marginal>> factors_;
};

/// 1 + c prod_i (2 x_i - 1), |c| < 1. Not factorized for c != 0.
class CoupledDensity final : public Density {
public:
    CoupledDensity(int dim, double coupling);
    double pdf(std::span<const double> x) const override;
    void grad_log_pdf(std::span<const double> x, std::span<double> out) const override;
    double lower_bound() const override { return 1.0 - std::abs(c_); }
    double upper_bound() const override { return 1.0 + std::abs(c_); }
    double lipschitz() const override;
    std::string name() const override;
    [[nodiscard]] double coupling() const noexcept { return c_; }

private:
    double c_;
};

[[nodiscard]] std::shared_ptr<const Density> uniform_density(int dim);

/// Checks kappa <= pdf <= K on a probe lattice and, for dim <= 3, unit mass on
/// a dense reference grid. Throws InvalidArgument with the offending location.
void validate_density(const Density& density, double mass_tolerance = 1e-6);

} // namespace lti
