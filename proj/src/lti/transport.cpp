// SPDX-License-Identifier: Apache-2.0
#include "lti/transport.hpp"

#include "lti/error.hpp"
#include "lti/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace lti::transport {

namespace {

// Safeguarded Newton for an increasing g on [lo, hi] with g(lo) <= 0 <= g(hi).
template <typename G, typename Dg>
double solve_increasing(G&& g, Dg&& dg, double lo, double hi, double guess) {
    double x = std::clamp(guess, lo, hi);
    for (int iter = 0; iter < 300; ++iter) {
        const double r = g(x);
        if (r == 0.0) return x;
        (r < 0.0 ? lo : hi) = x;
        if (hi - lo <= 4e-16 * std::max(1.0, std::abs(x))) break;
        const double slope = dg(x);
        double next = (slope > 0.0 && std::isfinite(slope)) ? x - r / slope : 0.5 * (lo + hi);
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        if (std::abs(next - x) <= 1e-17) {
            x = next;
            break;
        }
        x = next;
    }
    return x;
}

double clamp_unit(double v, const char* what, int axis) {
    if (!(v >= -1e-12 && v <= 1.0 + 1e-12)) {
        std::ostringstream msg;
        msg << what << ": coordinate " << axis << " = " << v << " lies outside [0, 1]";
        fail(ErrorCode::InversionFailure, msg.str());
    }
    return std::clamp(v, 0.0, 1.0);
}

} // namespace

double ConditionalLaw::cdf(double x) const {
    x = std::clamp(x, 0.0, 1.0);
    if (marginal_ != nullptr) return std::clamp(marginal_->cdf(x), 0.0, 1.0);
    const Table& t = *table_;
    const std::size_t panels = t.cumulative.size() - 1;
    const std::size_t p = std::min(static_cast<std::size_t>(x / t.panel_width), panels - 1);
    const double s = (x - static_cast<double>(p) * t.panel_width) / t.panel_width;
    const double f0 = t.values[2 * p], f1 = t.values[2 * p + 1], f2 = t.values[2 * p + 2];
    const double partial =
        t.panel_width * s * (f0 + s * (0.5 * (-3.0 * f0 + 4.0 * f1 - f2) + s * (2.0 * f0 - 4.0 * f1 + 2.0 * f2) / 3.0));
    return std::clamp((t.cumulative[p] + partial) / t.total, 0.0, 1.0);
}

double ConditionalLaw::pdf(double x) const {
    x = std::clamp(x, 0.0, 1.0);
    if (marginal_ != nullptr) return marginal_->pdf(x);
    const Table& t = *table_;
    const std::size_t panels = t.cumulative.size() - 1;
    const std::size_t p = std::min(static_cast<std::size_t>(x / t.panel_width), panels - 1);
    const double s = (x - static_cast<double>(p) * t.panel_width) / t.panel_width;
    const double f0 = t.values[2 * p], f1 = t.values[2 * p + 1], f2 = t.values[2 * p + 2];
    const double q = f0 + s * ((-3.0 * f0 + 4.0 * f1 - f2) + s * (2.0 * f0 - 4.0 * f1 + 2.0 * f2));
    return std::max(q, 0.0) / t.total;
}

double ConditionalLaw::inverse(double u) const {
    require(u >= 0.0 && u <= 1.0, "cdf_inverse: u must lie in [0, 1]");
    if (marginal_ != nullptr) return marginal_->inverse_cdf(u);
    if (u == 0.0) return 0.0;
    if (u == 1.0) return 1.0;
    const Table& t = *table_;
    const double mass = u * t.total;
    const auto it = std::upper_bound(t.cumulative.begin(), t.cumulative.end(), mass);
    const std::size_t panels = t.cumulative.size() - 1;
    const std::size_t p = std::min<std::size_t>(
        static_cast<std::size_t>(std::max<std::ptrdiff_t>(it - t.cumulative.begin() - 1, 0)), panels - 1);
    const double lo = static_cast<double>(p) * t.panel_width;
    const double hi = (p + 1 == panels) ? 1.0 : lo + t.panel_width;
    const double x = solve_increasing([&](double v) { return cdf(v) - u; }, [&](double v) { return pdf(v); }, lo, hi,
                                      0.5 * (lo + hi));
    if (std::abs(cdf(x) - u) > 1e-10)
        fail(ErrorCode::InversionFailure, "cdf_inverse: tabulated inversion did not converge");
    return x;
}

KrTransport::KrTransport(std::shared_ptr<const Density> source, std::shared_ptr<const Density> target, int resolution)
    : dim_(0), resolution_(resolution), source_(std::move(source)), target_(std::move(target)) {
    require(source_ && target_, "KrTransport: null density");
    require(source_->dim() == target_->dim(), "KrTransport: source and target dimensions differ");
    require(resolution_ >= 5 && resolution_ % 2 == 1, "KrTransport: resolution must be odd and >= 5");
    dim_ = source_->dim();
    for (const Density* density : {source_.get(), target_.get()})
        if (!density->factorized() && dim_ > 3)
            fail(ErrorCode::UnsupportedDimension,
                 "KrTransport: non-factorized density " + density->name() + " requires dim <= 3");
    if (!source_->factorized()) source_first_ = tabulate(*source_, 0, {});
    if (!target_->factorized()) target_first_ = tabulate(*target_, 0, {});
}

std::shared_ptr<const ConditionalLaw::Table> KrTransport::tabulate(const Density& density, int axis,
                                                                  std::span<const double> prefix) const {
    const int d = dim_;
    const std::size_t r = static_cast<std::size_t>(resolution_);
    const double h = 1.0 / static_cast<double>(r - 1);
    const int trailing = d - axis - 1;

    std::vector<double> simpson(r);
    for (std::size_t i = 0; i < r; ++i)
        simpson[i] = h / 3.0 * ((i == 0 || i + 1 == r) ? 1.0 : (i % 2 ? 4.0 : 2.0));

    auto table = std::make_shared<ConditionalLaw::Table>();
    table->panel_width = 2.0 * h;
    table->values.resize(r);
    std::vector<double> x(static_cast<std::size_t>(d));
    std::copy(prefix.begin(), prefix.end(), x.begin());
    for (std::size_t i = 0; i < r; ++i) {
        x[static_cast<std::size_t>(axis)] = static_cast<double>(i) * h;
        if (trailing == 0) {
            table->values[i] = density.pdf(x);
            continue;
        }
        CompensatedSum acc;
        std::vector<std::size_t> pos(static_cast<std::size_t>(trailing), 0);
        while (true) {
            double w = 1.0;
            for (int j = 0; j < trailing; ++j) {
                x[static_cast<std::size_t>(axis + 1 + j)] = static_cast<double>(pos[static_cast<std::size_t>(j)]) * h;
                w *= simpson[pos[static_cast<std::size_t>(j)]];
            }
            acc.add(w * density.pdf(x));
            int j = trailing - 1;
            for (; j >= 0; --j) {
                if (++pos[static_cast<std::size_t>(j)] < r) break;
                pos[static_cast<std::size_t>(j)] = 0;
            }
            if (j < 0) break;
        }
        table->values[i] = acc.value();
    }

    const std::size_t panels = (r - 1) / 2;
    table->cumulative.assign(panels + 1, 0.0);
    for (std::size_t p = 0; p < panels; ++p) {
        const double f0 = table->values[2 * p], f1 = table->values[2 * p + 1], f2 = table->values[2 * p + 2];
        table->cumulative[p + 1] = table->cumulative[p] + table->panel_width * (f0 + 4.0 * f1 + f2) / 6.0;
    }
    table->total = table->cumulative.back();
    if (!(table->total > 0.0))
        fail(ErrorCode::DomainError, "KrTransport: conditional marginal of " + density.name() + " has no mass");
    return table;
}

ConditionalLaw KrTransport::conditional(Side which, int axis, std::span<const double> prefix) const {
    require(axis >= 0 && axis < dim_, "conditional: axis out of range");
    require(prefix.size() == static_cast<std::size_t>(axis), "conditional: prefix length must equal the axis index");
    const Density& density = side(which);
    ConditionalLaw law;
    if (density.factorized()) {
        law.marginal_ = density.factors()[static_cast<std::size_t>(axis)].get();
    } else if (axis == 0) {
        law.table_ = which == Side::Source ? source_first_ : target_first_;
    } else {
        law.table_ = tabulate(density, axis, prefix);
    }
    return law;
}

double KrTransport::conditional_cdf(Side which, int axis, double x, std::span<const double> prefix) const {
    return conditional(which, axis, prefix).cdf(x);
}

double KrTransport::cdf_inverse(Side which, int axis, double u, std::span<const double> prefix) const {
    if (!(u >= 0.0 && u <= 1.0)) fail(ErrorCode::InvalidArgument, "cdf_inverse: u must lie in [0, 1]");
    return conditional(which, axis, prefix).inverse(u);
}

std::vector<double> KrTransport::map(std::span<const double> x) const {
    require(x.size() == static_cast<std::size_t>(dim_), "kr_map: point dimension mismatch");
    std::vector<double> in(x.begin(), x.end()), y(static_cast<std::size_t>(dim_));
    for (int k = 0; k < dim_; ++k) {
        const auto uk = static_cast<std::size_t>(k);
        in[uk] = clamp_unit(in[uk], "kr_map", k);
        const double u = conditional(Side::Source, k, std::span<const double>(in.data(), uk)).cdf(in[uk]);
        try {
            y[uk] = conditional(Side::Target, k, std::span<const double>(y.data(), uk)).inverse(u);
        } catch (const Error& e) {
            fail(ErrorCode::InversionFailure, "kr_map: axis " + std::to_string(k) + ": " + e.what());
        }
    }
    return y;
}

std::vector<double> KrTransport::displacement(std::span<const double> x, double s) const {
    require(s >= 0.0 && s <= 1.0, "displacement: s must lie in [0, 1]");
    std::vector<double> out(x.begin(), x.end());
    if (s == 0.0) return out;
    const auto t = map(x);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = s * t[i] + (1.0 - s) * out[i];
    return out;
}

namespace {

struct Preimage {
    std::vector<double> x;       // G(y, s)
    std::vector<double> mapped;  // T(G(y, s))
};

} // namespace

static Preimage invert_displacement(const KrTransport& kr, std::span<const double> y, double s) {
    const int d = kr.dim();
    require(y.size() == static_cast<std::size_t>(d), "displacement_inverse: point dimension mismatch");
    require(s >= 0.0 && s <= 1.0, "displacement_inverse: s must lie in [0, 1]");
    Preimage out{std::vector<double>(static_cast<std::size_t>(d)), std::vector<double>(static_cast<std::size_t>(d))};
    for (int k = 0; k < d; ++k) {
        const auto uk = static_cast<std::size_t>(k);
        const double yk = clamp_unit(y[uk], "displacement_inverse", k);
        const ConditionalLaw src = kr.conditional(Side::Source, k, std::span<const double>(out.x.data(), uk));
        const ConditionalLaw tgt = kr.conditional(Side::Target, k, std::span<const double>(out.mapped.data(), uk));
        const auto component = [&](double t) { return tgt.inverse(src.cdf(t)); };
        double xk = yk;
        if (s > 0.0) {
            xk = solve_increasing(
                [&](double t) { return s * component(t) + (1.0 - s) * t - yk; },
                [&](double t) {
                    const double fm = tgt.pdf(component(t));
                    return (fm > 0.0 ? s * src.pdf(t) / fm : 1e300) + (1.0 - s);
                },
                0.0, 1.0, yk);
        }
        out.x[uk] = xk;
        out.mapped[uk] = component(xk);
    }
    return out;
}

std::vector<double> KrTransport::displacement_inverse(std::span<const double> y, double s) const {
    if (s == 0.0) {
        require(y.size() == static_cast<std::size_t>(dim_), "displacement_inverse: point dimension mismatch");
        return {y.begin(), y.end()};
    }
    return invert_displacement(*this, y, s).x;
}

std::vector<double> KrTransport::target_field(std::span<const double> y, double s) const {
    Preimage g = invert_displacement(*this, y, s);
    for (std::size_t i = 0; i < g.x.size(); ++i) g.mapped[i] -= g.x[i];
    return g.mapped;
}

std::vector<double> sample(std::shared_ptr<const Density> target, std::size_t n, std::uint64_t seed) {
    require(target != nullptr, "sample: null density");
    const int d = target->dim();
    const KrTransport kr(uniform_density(d), std::move(target));
    Rng rng(seed);
    std::vector<double> u(n * static_cast<std::size_t>(d));
    for (double& v : u) v = rng.uniform();
    std::vector<double> out(u.size());
    parallel_for(n, [&](std::size_t j) {
        const auto y = kr.map(std::span<const double>(u.data() + j * static_cast<std::size_t>(d), static_cast<std::size_t>(d)));
        std::copy(y.begin(), y.end(), out.begin() + static_cast<std::ptrdiff_t>(j * static_cast<std::size_t>(d)));
    });
    return out;
}

} // namespace lti::transport
