// SPDX-License-Identifier: Apache-2.0
//
// Cardinal B-splines on integer knots and explicit ReLU^s networks that
// represent them and products of their inputs exactly.
#pragma once

#include "lti/network.hpp"

#include <span>
#include <vector>

namespace lti::network {

/// B_{j,s}(x) = 1/s! sum_{k=0}^{s+1} (-1)^k C(s+1,k) ReLU^s(x - j - k),
/// with ReLU^0(y) = 1[y >= 0]. Zero for x >= j + s + 1.
[[nodiscard]] double bspline_eval(int s, int j, double x);
/// Cox-de Boor recursion on the knots j, j+1, ..., j+s+1.
[[nodiscard]] double bspline_recursive(int s, int j, double x);

struct ExplicitNetwork {
    Architecture arch;
    std::vector<double> theta;

    [[nodiscard]] double operator()(std::span<const double> x) const;
};

/// One hidden layer of width 2^{s+1} computing x_1 ... x_s via polarization.
[[nodiscard]] ExplicitNetwork product_gadget_network(int s);
/// prod x_i evaluated through product_gadget_network(x.size()).
[[nodiscard]] double product_gadget(std::span<const double> x);

/// (2, 2(s+2), 2^{s+1}, 1) network computing B_{j1,s}(x1) B_{j2,s}(x2), s >= 2.
/// The spline factors are padded with constant ones up to s gadget inputs.
[[nodiscard]] ExplicitNetwork tensor_bspline_network(int s, int j1, int j2);

} // namespace lti::network
