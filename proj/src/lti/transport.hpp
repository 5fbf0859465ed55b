// SPDX-License-Identifier: Apache-2.0
//
// Knothe-Rosenblatt transport between two densities on [0,1]^d, its
// displacement interpolation I_s = s T + (1 - s) id, and the velocity field
// u_s(y) = T(G(y, s)) - G(y, s) with G(., s) = I_s^{-1}. Axes are 0-based.
//
// Factorized densities use their closed-form marginal CDFs. Other densities
// (d <= 3) are marginalized over trailing coordinates with composite Simpson
// on `resolution` points per axis; the conditional density along the current
// axis is tabulated on the same lattice and integrated piecewise-quadratically.
#pragma once

#include "lti/density.hpp"

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

namespace lti::transport {

enum class Side { Source, Target };

/// One-dimensional conditional law F(. | prefix) along a fixed axis.
class ConditionalLaw {
public:
    [[nodiscard]] double cdf(double x) const;
    [[nodiscard]] double pdf(double x) const;
    /// x in [0,1] with |cdf(x) - u| <= 1e-10.
    [[nodiscard]] double inverse(double u) const;

private:
    friend class KrTransport;
    struct Table {
        double panel_width = 0.0;
        std::vector<double> values;      // density at 2P+1 lattice points
        std::vector<double> cumulative;  // unnormalized mass at panel ends
        double total = 0.0;
    };
    const Marginal* marginal_ = nullptr;
    std::shared_ptr<const Table> table_;
};

class KrTransport {
public:
    KrTransport(std::shared_ptr<const Density> source, std::shared_ptr<const Density> target,
                int resolution = 257);

    [[nodiscard]] int dim() const noexcept { return dim_; }
    [[nodiscard]] const Density& source() const noexcept { return *source_; }
    [[nodiscard]] const Density& target() const noexcept { return *target_; }
    [[nodiscard]] std::shared_ptr<const Density> source_ptr() const noexcept { return source_; }
    [[nodiscard]] std::shared_ptr<const Density> target_ptr() const noexcept { return target_; }

    [[nodiscard]] ConditionalLaw conditional(Side which, int axis, std::span<const double> prefix) const;
    [[nodiscard]] double conditional_cdf(Side which, int axis, double x, std::span<const double> prefix) const;
    [[nodiscard]] double cdf_inverse(Side which, int axis, double u, std::span<const double> prefix) const;

    [[nodiscard]] std::vector<double> map(std::span<const double> x) const;
    [[nodiscard]] std::vector<double> displacement(std::span<const double> x, double s) const;
    [[nodiscard]] std::vector<double> displacement_inverse(std::span<const double> y, double s) const;
    [[nodiscard]] std::vector<double> target_field(std::span<const double> y, double s) const;

private:
    [[nodiscard]] const Density& side(Side which) const { return which == Side::Source ? *source_ : *target_; }
    [[nodiscard]] std::shared_ptr<const ConditionalLaw::Table> tabulate(const Density& density, int axis,
                                                                       std::span<const double> prefix) const;

    int dim_;
    int resolution_;
    std::shared_ptr<const Density> source_;
    std::shared_ptr<const Density> target_;
    // Axis-0 tables do not depend on a prefix and are built once.
    std::shared_ptr<const ConditionalLaw::Table> source_first_;
    std::shared_ptr<const ConditionalLaw::Table> target_first_;
};

/// n samples of `target`: uniform draws pushed through the KR map from the
/// uniform density. Row-major, n x dim.
[[nodiscard]] std::vector<double> sample(std::shared_ptr<const Density> target, std::size_t n, std::uint64_t seed);

} // namespace lti::transport
