// SPDX-License-Identifier: Apache-2.0
#include "lti/density.hpp"

#include "lti/error.hpp"
#include "lti/numerics.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

namespace lti {

namespace {

std::string fmt(double v) {
    std::ostringstream s;
    s.precision(17);
    s << v;
    return s.str();
}

} // namespace

double Marginal::inverse_cdf(double u) const {
    require(u >= 0.0 && u <= 1.0, "inverse_cdf: u must lie in [0, 1]");
    if (u == 0.0) return 0.0;
    if (u == 1.0) return 1.0;
    double lo = 0.0, hi = 1.0, x = u;
    for (int iter = 0; iter < 200; ++iter) {
        const double r = cdf(x) - u;
        if (r == 0.0) return x;
        (r < 0.0 ? lo : hi) = x;
        if (hi - lo <= 1e-16) break;
        const double f = pdf(x);
        double next = f > 0.0 ? x - r / f : 0.5 * (lo + hi);
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        if (std::abs(next - x) <= 1e-17) {
            x = next;
            break;
        }
        x = next;
    }
    if (std::abs(cdf(x) - u) > 1e-10)
        fail(ErrorCode::InversionFailure, "inverse_cdf(" + name() + "): no convergence at u=" + fmt(u));
    return x;
}

quadrature::UnivariateWeight Marginal::as_weight() const {
    if (dynamic_cast<const UniformMarginal*>(this) != nullptr) return quadrature::UnivariateWeight::uniform();
    return quadrature::UnivariateWeight::density(name(), [this](double x) { return pdf(x); });
}

TiltMarginal::TiltMarginal(double slope) : slope_(slope) {
    require(std::isfinite(slope) && std::abs(slope) <= 2.0, "tilt: slope must satisfy |slope| <= 2");
}

std::string TiltMarginal::name() const { return "tilt(" + fmt(slope_) + ")"; }

double TiltMarginal::inverse_cdf(double u) const {
    require(u >= 0.0 && u <= 1.0, "inverse_cdf: u must lie in [0, 1]");
    // Root of (s/2) x^2 + (1 - s/2) x - u in the cancellation-free form.
    const double b = 1.0 - 0.5 * slope_;
    const double disc = b * b + 2.0 * slope_ * u;
    const double denom = b + std::sqrt(std::max(disc, 0.0));
    if (denom <= 0.0) return 0.0;
    return std::clamp(2.0 * u / denom, 0.0, 1.0);
}

ParabolicMarginal::ParabolicMarginal(double eps) : eps_(eps) {
    require(std::isfinite(eps) && eps > 0.0, "parabolic: eps must be > 0");
}

std::string ParabolicMarginal::name() const { return "parabolic(" + fmt(eps_) + ")"; }

CosineMarginal::CosineMarginal(std::vector<double> coefficients) : a_(std::move(coefficients)) {
    double total = 0.0;
    for (double a : a_) {
        require(std::isfinite(a), "cosine: coefficients must be finite");
        total += std::abs(a);
    }
    require(total < 1.0, "cosine: sum of |a_k| must be < 1 to stay bounded below");
}

double CosineMarginal::pdf(double x) const {
    double v = 1.0;
    for (std::size_t k = 0; k < a_.size(); ++k)
        v += a_[k] * std::cos(static_cast<double>(k + 1) * std::numbers::pi * x);
    return v;
}

double CosineMarginal::cdf(double x) const {
    double v = x;
    for (std::size_t k = 0; k < a_.size(); ++k) {
        const double w = static_cast<double>(k + 1) * std::numbers::pi;
        v += a_[k] * std::sin(w * x) / w;
    }
    return v;
}

double CosineMarginal::pdf_derivative(double x) const {
    double v = 0.0;
    for (std::size_t k = 0; k < a_.size(); ++k) {
        const double w = static_cast<double>(k + 1) * std::numbers::pi;
        v -= a_[k] * w * std::sin(w * x);
    }
    return v;
}

double CosineMarginal::lower_bound() const {
    double total = 0.0;
    for (double a : a_) total += std::abs(a);
    return 1.0 - total;
}

double CosineMarginal::upper_bound() const { return 2.0 - lower_bound(); }

std::string CosineMarginal::name() const {
    std::string s = "cosine(";
    for (std::size_t k = 0; k < a_.size(); ++k) s += (k ? "," : "") + fmt(a_[k]);
    return s + ")";
}

Density::Density(int dim) : dim_(dim) { require(dim >= 1, "density: dim must be >= 1"); }

double Density::log_pdf(std::span<const double> x) const { return std::log(pdf(x)); }

void Density::grad_log_pdf(std::span<const double> x, std::span<double> out) const {
    std::vector<double> p(x.begin(), x.end());
    const double h = 1e-6;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double xi = p[i];
        p[i] = std::min(1.0, xi + h);
        const double up = log_pdf(p);
        const double hi = p[i];
        p[i] = std::max(0.0, xi - h);
        const double dn = log_pdf(p);
        out[i] = (up - dn) / (hi - p[i]);
        p[i] = xi;
    }
}

ProductDensity::ProductDensity(std::vector<std::shared_ptr<const Marginal>> factors)
    : Density(static_cast<int>(factors.size())), factors_(std::move(factors)) {
    for (const auto& f : factors_) require(f != nullptr, "product density: null factor");
}

double ProductDensity::pdf(std::span<const double> x) const {
    double v = 1.0;
    for (std::size_t i = 0; i < factors_.size(); ++i) v *= factors_[i]->pdf(x[i]);
    return v;
}

double ProductDensity::log_pdf(std::span<const double> x) const {
    double v = 0.0;
    for (std::size_t i = 0; i < factors_.size(); ++i) v += std::log(factors_[i]->pdf(x[i]));
    return v;
}

void ProductDensity::grad_log_pdf(std::span<const double> x, std::span<double> out) const {
    for (std::size_t i = 0; i < factors_.size(); ++i)
        out[i] = factors_[i]->pdf_derivative(x[i]) / factors_[i]->pdf(x[i]);
}

double ProductDensity::lower_bound() const {
    double v = 1.0;
    for (const auto& f : factors_) v *= f->lower_bound();
    return v;
}

double ProductDensity::upper_bound() const {
    double v = 1.0;
    for (const auto& f : factors_) v *= f->upper_bound();
    return v;
}

double ProductDensity::lipschitz() const {
    // |grad f| <= sum_i sup|f_i'| prod_{j != i} K_j, with sup|f_i'| probed.
    double total = 0.0;
    for (std::size_t i = 0; i < factors_.size(); ++i) {
        double slope = 0.0;
        for (int p = 0; p <= 1024; ++p) slope = std::max(slope, std::abs(factors_[i]->pdf_derivative(p / 1024.0)));
        double rest = 1.0;
        for (std::size_t j = 0; j < factors_.size(); ++j)
            if (j != i) rest *= factors_[j]->upper_bound();
        total += slope * rest;
    }
    return total;
}

std::string ProductDensity::name() const {
    std::string s = "product[";
    for (std::size_t i = 0; i < factors_.size(); ++i) s += (i ? "," : "") + factors_[i]->name();
    return s + "]";
}

CoupledDensity::CoupledDensity(int dim, double coupling) : Density(dim), c_(coupling) {
    require(std::isfinite(coupling) && std::abs(coupling) < 1.0, "coupled: |coupling| must be < 1");
}

double CoupledDensity::pdf(std::span<const double> x) const {
    double p = 1.0;
    for (int i = 0; i < dim(); ++i) p *= 2.0 * x[static_cast<std::size_t>(i)] - 1.0;
    return 1.0 + c_ * p;
}

void CoupledDensity::grad_log_pdf(std::span<const double> x, std::span<double> out) const {
    const double f = pdf(x);
    for (int i = 0; i < dim(); ++i) {
        double p = 2.0 * c_;
        for (int j = 0; j < dim(); ++j)
            if (j != i) p *= 2.0 * x[static_cast<std::size_t>(j)] - 1.0;
        out[static_cast<std::size_t>(i)] = p / f;
    }
}

double CoupledDensity::lipschitz() const { return 2.0 * std::abs(c_) * std::sqrt(static_cast<double>(dim())); }

std::string CoupledDensity::name() const { return "coupled(" + fmt(c_) + ")"; }

std::shared_ptr<const Density> uniform_density(int dim) {
    require(dim >= 1, "uniform_density: dim must be >= 1");
    std::vector<std::shared_ptr<const Marginal>> f(static_cast<std::size_t>(dim), std::make_shared<UniformMarginal>());
    return std::make_shared<ProductDensity>(std::move(f));
}

void validate_density(const Density& density, double mass_tolerance) {
    const int d = density.dim();
    const double lo = density.lower_bound(), hi = density.upper_bound();
    require(lo >= 0.0 && hi >= lo, "density " + density.name() + ": bounds must satisfy 0 <= kappa <= K");

    const auto check_point = [&](std::span<const double> x) {
        const double v = density.pdf(x);
        const double slack = 1e-12 * std::max(1.0, hi);
        if (!(v >= lo - slack && v <= hi + slack)) {
            std::ostringstream msg;
            msg << "density " << density.name() << ": value " << v << " outside [" << lo << ", " << hi << "] at (";
            for (std::size_t i = 0; i < x.size(); ++i) msg << (i ? " " : "") << x[i];
            msg << ")";
            fail(ErrorCode::InvalidArgument, msg.str());
        }
    };

    const std::size_t per_axis = d <= 2 ? 65 : (d == 3 ? 17 : 0);
    std::vector<double> x(static_cast<std::size_t>(d));
    if (per_axis > 0) {
        std::vector<std::size_t> pos(static_cast<std::size_t>(d), 0);
        while (true) {
            for (int i = 0; i < d; ++i)
                x[static_cast<std::size_t>(i)] = static_cast<double>(pos[static_cast<std::size_t>(i)]) / (per_axis - 1);
            check_point(x);
            int i = d - 1;
            for (; i >= 0; --i) {
                if (++pos[static_cast<std::size_t>(i)] < per_axis) break;
                pos[static_cast<std::size_t>(i)] = 0;
            }
            if (i < 0) break;
        }
    } else {
        Rng rng(0x5eed);
        for (int p = 0; p < 4096; ++p) {
            for (double& xi : x) xi = rng.uniform();
            check_point(x);
        }
    }

    if (d > 3) return;
    const ReferenceRule rule = composite_gauss(0.0, 1.0, d == 3 ? 8 : 16);
    const std::size_t m = rule.nodes.size();
    std::vector<std::size_t> pos(static_cast<std::size_t>(d), 0);
    CompensatedSum mass;
    while (true) {
        double w = 1.0;
        for (int i = 0; i < d; ++i) {
            x[static_cast<std::size_t>(i)] = rule.nodes[pos[static_cast<std::size_t>(i)]];
            w *= rule.weights[pos[static_cast<std::size_t>(i)]];
        }
        mass.add(w * density.pdf(x));
        int i = d - 1;
        for (; i >= 0; --i) {
            if (++pos[static_cast<std::size_t>(i)] < m) break;
            pos[static_cast<std::size_t>(i)] = 0;
        }
        if (i < 0) break;
    }
    if (std::abs(mass.value() - 1.0) > mass_tolerance)
        fail(ErrorCode::InvalidArgument,
             "density " + density.name() + ": total mass " + fmt(mass.value()) + " differs from 1");
}

} // namespace lti
