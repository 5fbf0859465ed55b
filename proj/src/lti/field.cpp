// SPDX-License-Identifier: Apache-2.0
#include "lti/field.hpp"

#include "lti/error.hpp"

#include <algorithm>

namespace lti {

double VectorField::divergence(std::span<const double> x, double t) const {
    const int d = dim();
    require(x.size() == static_cast<std::size_t>(d), "divergence: point dimension mismatch");
    constexpr double h = 1e-5;
    std::vector<double> p(x.begin(), x.end()), out(static_cast<std::size_t>(d));
    double div = 0.0;
    for (int i = 0; i < d; ++i) {
        const auto ui = static_cast<std::size_t>(i);
        const double xi = x[ui];
        auto component = [&](double v) {
            p[ui] = v;
            evaluate(p, t, out);
            return out[ui];
        };
        if (xi - h >= 0.0 && xi + h <= 1.0) {
            div += (component(xi + h) - component(xi - h)) / (2.0 * h);
        } else if (xi + h > 1.0) {
            div += (3.0 * component(xi) - 4.0 * component(xi - h) + component(xi - 2.0 * h)) / (2.0 * h);
        } else {
            div += (-3.0 * component(xi) + 4.0 * component(xi + h) - component(xi + 2.0 * h)) / (2.0 * h);
        }
        p[ui] = xi;
    }
    return div;
}

double VectorField::evaluate_with_divergence(std::span<const double> x, double t, std::span<double> out) const {
    evaluate(x, t, out);
    return divergence(x, t);
}

std::vector<double> VectorField::operator()(std::span<const double> x, double t) const {
    std::vector<double> out(static_cast<std::size_t>(dim()));
    evaluate(x, t, out);
    return out;
}

ZeroField::ZeroField(int dim) : dim_(dim) { require(dim >= 1, "ZeroField: dim must be >= 1"); }

void ZeroField::evaluate(std::span<const double>, double, std::span<double> out) const {
    std::fill(out.begin(), out.end(), 0.0);
}

} // namespace lti
