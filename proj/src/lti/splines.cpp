// SPDX-License-Identifier: Apache-2.0
#include "lti/splines.hpp"

#include "lti/error.hpp"

#include <cmath>

namespace lti::network {

namespace {

double factorial(int s) {
    double f = 1.0;
    for (int i = 2; i <= s; ++i) f *= i;
    return f;
}

double binomial(int n, int k) {
    double c = 1.0;
    for (int i = 1; i <= k; ++i) c = c * (n - k + i) / i;
    return c;
}

double relu_power(double y, int s) {
    if (s == 0) return y >= 0.0 ? 1.0 : 0.0;
    return y > 0.0 ? std::pow(y, s) : 0.0;
}

int popcount(unsigned v) {
    int c = 0;
    for (; v != 0; v &= v - 1) ++c;
    return c;
}

// Signed output weight of the hidden unit ReLU^s(sign * <a, x>).
double gadget_weight(int s, unsigned a, bool negative) {
    const double w = ((s - popcount(a)) % 2 == 0 ? 1.0 : -1.0) / factorial(s);
    return negative && s % 2 == 1 ? -w : w;
}

} // namespace

double bspline_eval(int s, int j, double x) {
    require(s >= 0, "bspline: degree must be >= 0");
    if (x >= j + s + 1) return 0.0;
    double sum = 0.0;
    for (int k = 0; k <= s + 1; ++k)
        sum += (k % 2 == 0 ? 1.0 : -1.0) * binomial(s + 1, k) * relu_power(x - (j + k), s);
    return sum / factorial(s);
}

double bspline_recursive(int s, int j, double x) {
    require(s >= 0, "bspline: degree must be >= 0");
    if (s == 0) return (x >= j && x < j + 1) ? 1.0 : 0.0;
    return ((x - j) * bspline_recursive(s - 1, j, x) + (j + s + 1 - x) * bspline_recursive(s - 1, j + 1, x)) / s;
}

double ExplicitNetwork::operator()(std::span<const double> x) const {
    return Mlp(arch).evaluate(theta, x)[0];
}

ExplicitNetwork product_gadget_network(int s) {
    require(s >= 1 && s <= 16, "product_gadget: s must lie in 1..16");
    const unsigned subsets = 1u << s;
    ExplicitNetwork net;
    net.arch.widths = {s, static_cast<int>(2 * subsets), 1};
    net.arch.power = s;
    net.theta.assign(net.arch.param_count(), 0.0);
    const Mlp mlp(net.arch);
    double* W0 = net.theta.data() + mlp.weight_offset(0);
    double* W1 = net.theta.data() + mlp.weight_offset(1);
    for (unsigned a = 0; a < subsets; ++a) {
        for (int sign = 0; sign < 2; ++sign) {
            const std::size_t unit = 2 * a + static_cast<std::size_t>(sign);
            for (int i = 0; i < s; ++i)
                W0[unit * static_cast<std::size_t>(s) + static_cast<std::size_t>(i)] =
                    (a >> i) & 1u ? (sign ? -1.0 : 1.0) : 0.0;
            W1[unit] = gadget_weight(s, a, sign == 1);
        }
    }
    return net;
}

double product_gadget(std::span<const double> x) {
    require(!x.empty(), "product_gadget: need at least one input");
    return product_gadget_network(static_cast<int>(x.size()))(x);
}

ExplicitNetwork tensor_bspline_network(int s, int j1, int j2) {
    require(s >= 2 && s <= 8, "tensor_bspline_network: s must lie in 2..8");
    const int knots = s + 2;
    const unsigned subsets = 1u << s;
    ExplicitNetwork net;
    net.arch.widths = {2, 2 * knots, static_cast<int>(2 * subsets), 1};
    net.arch.power = s;
    net.theta.assign(net.arch.param_count(), 0.0);
    const Mlp mlp(net.arch);

    // Layer 0: ReLU^s(x_axis - (j + k)).
    double* W0 = net.theta.data() + mlp.weight_offset(0);
    double* b0 = net.theta.data() + mlp.bias_offset(0);
    for (int axis = 0; axis < 2; ++axis)
        for (int k = 0; k < knots; ++k) {
            const auto unit = static_cast<std::size_t>(axis * knots + k);
            W0[unit * 2 + static_cast<std::size_t>(axis)] = 1.0;
            b0[unit] = -static_cast<double>((axis == 0 ? j1 : j2) + k);
        }

    // Layer 1: gadget on (B1, B2, 1, ..., 1); each B is a fixed combination of layer-0 units.
    std::vector<double> coeff(static_cast<std::size_t>(knots));
    for (int k = 0; k < knots; ++k)
        coeff[static_cast<std::size_t>(k)] = (k % 2 == 0 ? 1.0 : -1.0) * binomial(s + 1, k) / factorial(s);
    const auto n_in = static_cast<std::size_t>(2 * knots);
    double* W1 = net.theta.data() + mlp.weight_offset(1);
    double* b1 = net.theta.data() + mlp.bias_offset(1);
    double* W2 = net.theta.data() + mlp.weight_offset(2);
    for (unsigned a = 0; a < subsets; ++a) {
        for (int sign = 0; sign < 2; ++sign) {
            const double sg = sign ? -1.0 : 1.0;
            const std::size_t unit = 2 * a + static_cast<std::size_t>(sign);
            for (int axis = 0; axis < 2; ++axis) {
                if (!((a >> axis) & 1u)) continue;
                for (int k = 0; k < knots; ++k)
                    W1[unit * n_in + static_cast<std::size_t>(axis * knots + k)] = sg * coeff[static_cast<std::size_t>(k)];
            }
            b1[unit] = sg * popcount(a >> 2);
            W2[unit] = gadget_weight(s, a, sign == 1);
        }
    }
    return net;
}

} // namespace lti::network
