// SPDX-License-Identifier: Apache-2.0
#include "lti/calculators.hpp"

#include "lti/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace lti::calc {

namespace {

using ld = long double;
constexpr ld inf = std::numeric_limits<ld>::infinity();

ld log_add(ld a, ld b) {
    if (a == -inf) return b;
    if (b == -inf) return a;
    if (a == inf || b == inf) return inf;
    const ld hi = std::max(a, b);
    return hi + std::log1p(std::exp(std::min(a, b) - hi));
}

ld log_of_log(ld log_value) { return log_value > 0 ? std::log(log_value) : -inf; }

} // namespace

CapacityConstants capacity_constants(int L, int W, int d, const CapacityInputs& in) {
    require(L >= 1 && W >= 1 && d >= 1, "capacity_constants: L, W, d must be >= 1");
    require(L <= 30, "capacity_constants: L must be <= 30");
    require(in.kappa > 0.0 && in.lipschitz_nu >= 0.0, "capacity_constants: need kappa > 0 and L_nu >= 0");
    require(in.c_d > 0.0 && in.c_dkl > 0.0, "capacity_constants: envelope constants must be > 0");

    CapacityConstants out;
    out.depth = L;
    out.width = W;
    out.dim = d;
    const ld lL = L, lW = W, ld1 = d + 1;
    const ld log2W = std::log(2 * lW);
    const ld p2L = std::ldexp(1.0L, L);
    out.params = static_cast<std::uint64_t>(d + 1) * W + W + static_cast<std::uint64_t>(L - 1) * (W * W + W) +
                 static_cast<std::uint64_t>(W) * d + d;
    const ld q = static_cast<ld>(out.params);

    out.log_lip0 = std::log(lL) + (std::ldexp(1.0L, L + 2) + 2 * lL - 3) * log2W + p2L * std::log(ld1);
    out.degenerate = L < 2;
    out.log_c = (p2L - 2) * log2W + (L >= 2 ? std::ldexp(1.0L, L - 2) * std::log(ld1) : 0.0L);

    const ld logW = std::log(lW);
    const ld log_c_plus_1 = log_add(out.log_c, 0.0L);
    ld inner = std::log(8.0L) + 2 * logW + out.log_c;
    inner = log_add(inner, std::log(2.0L) + 2 * logW + out.log_lip0);
    inner = log_add(inner, log2W + log_c_plus_1);
    const ld first = std::log(lL / 4) + (lL - 1) * (2 * log2W + out.log_c) + inner;
    out.log_lip1 = log_add(first, out.log_lip0);

    out.log_lip1_bound = 4 * lL * (std::log(4.0L) + 2 * logW + out.log_c);
    out.log_lip1_envelope = std::ldexp(1.0L, 2 * L + 2) * log2W + std::ldexp(1.0L, 2 * L) * std::log(ld1);

    // a = sqrt(d) sqrt(q) Lip1 appears inside exponentials.
    const ld dd = d;
    const ld log_a = 0.5L * std::log(dd) + 0.5L * std::log(q) + out.log_lip1;
    const ld a = std::exp(log_a);
    const ld log_ratio = std::log(static_cast<ld>(in.lipschitz_nu) / static_cast<ld>(in.kappa));
    const ld log_2sqrtq = std::log(2 * std::sqrt(q));
    const ld log_fact = std::lgamma(dd + 1);

    const ld lbar_a = log_ratio + a + out.log_lip0 + log_2sqrtq;
    const ld lbar_b = log_fact + (dd + 1) * std::log(2.0L) + 0.5L * dd * std::log(dd) + 2 * dd * a + std::log(dd) +
                      (dd - 1) * log_2sqrtq;
    out.log_lbar = std::log(2.0L) + log_add(lbar_a, lbar_b);
    const ld d_a = log_ratio + 0.5L * std::log(dd);
    const ld d_b = log_fact + (dd + 1) * std::log(2.0L) + 0.5L * dd * std::log(q) + dd * out.log_lip1 + 2 * dd * a;
    out.log_d = log_add(d_a, d_b);
    // Once a overflows both logs are dominated by 2 d a.
    const ld loglog_leading = std::log(2 * dd) + log_a;
    out.loglog_lbar = std::isfinite(out.log_lbar) ? log_of_log(out.log_lbar) : loglog_leading;
    out.loglog_d = std::isfinite(out.log_d) ? log_of_log(out.log_d) : loglog_leading;

    const ld x = std::ldexp(1.0L, 2 * L + 3) * std::log(static_cast<ld>(in.c_d) * lW);
    const ld log_c_env = std::log(static_cast<ld>(in.c_dkl));
    const ld e = std::exp(x);
    out.loglog_envelope = std::isfinite(e) ? log_of_log(log_c_env + e) : x;
    return out;
}

RequArchitecture requ_architecture(int k, int d, int p, int K, double holder_norm) {
    require(k >= 2 && d >= 1 && p >= 1 && K >= 2, "requ_architecture: need k >= 2, d >= 1, p >= 1, K >= 2");
    require(holder_norm > 0.0, "requ_architecture: Holder norm must be > 0");
    const double kd = k, dd = d;
    const double log2_2dk = std::log2(2 * dd * kd + dd);
    const double loglog_norm = holder_norm > 1.0 ? std::log2(std::log2(holder_norm)) : -HUGE_VAL;
    RequArchitecture out;
    const double spline = std::pow(static_cast<double>(K + k), dd);
    out.width = std::max({4 * dd * spline, 12.0 * ((K + 2 * kd) + 1), static_cast<double>(p)});
    out.depth = 6 + 2 * (kd - 2) + std::ceil(std::log2(dd)) + 2 * std::max({std::ceil(log2_2dk), loglog_norm, 1.0});
    out.c_const = 60 * std::max(std::ceil(std::max(log2_2dk, loglog_norm)), 1.0) + 38 + 20 * dd * dd +
                  144 * dd * kd + 8 * dd;
    out.nonzero_bound = p * spline * out.c_const;
    return out;
}

double requ_error_bound(int k, int d, int K, int l, double alpha, double holder_norm) {
    require(k >= 2 && d >= 1 && K >= 2, "requ_error_bound: need k >= 2, d >= 1, K >= 2");
    require(l >= 0 && l <= k, "requ_error_bound: derivative order must lie in 0..k");
    require(alpha > 0.0 && alpha <= 1.0, "requ_error_bound: alpha must lie in (0, 1]");
    const double dd = d;
    const double lead = 1.0 + std::pow(9.0, dd * (k - 1)) * std::pow(2.0 * k + 1, 2 * dd + l);
    return lead * std::pow(std::sqrt(2.0) * std::exp(1.0) * dd, k + alpha) * holder_norm /
           std::pow(static_cast<double>(K), k + alpha - l);
}

Schedule adaptive_architecture(double n, double beta, double c_d, int dim) {
    require(n >= 1.0, "adaptive_architecture: n must be >= 1");
    require(beta > 0.0 && beta < 0.5, "adaptive_architecture: beta must lie in (0, 1/2)");
    require(c_d > 0.0 && dim >= 1, "adaptive_architecture: need c_d > 0 and dim >= 1");
    const double ninf = -HUGE_VAL;
    Schedule s;
    const double log_n = std::log(n);
    s.width_raw = log_n > 0.0 ? std::log(log_n) : ninf;
    const double w = std::floor(s.width_raw);
    s.width_clamped = !(w >= 1.0);
    s.width = s.width_clamped ? 1 : static_cast<int>(w);

    const double inner = beta * log_n;
    const double base = c_d * s.width;
    double ratio = ninf;
    if (inner > 0.0 && base > 0.0 && base != 1.0) ratio = std::log(inner) / std::log(base);
    s.depth_raw = ratio > 0.0 ? 0.5 * std::log2(ratio) - 3.0 : ninf;
    const double l = std::floor(s.depth_raw);
    s.depth_clamped = !(l >= 1.0);
    s.depth = s.depth_clamped ? 1 : static_cast<int>(l);

    s.resolution_raw = std::pow(s.width / (12.0 * (dim + 1)), 1.0 / (dim + 1)) / 3.0;
    const double k = std::floor(s.resolution_raw);
    s.resolution_clamped = !(k >= 1.0);
    s.resolution = s.resolution_clamped ? 1 : static_cast<int>(k);
    return s;
}

Threshold sample_threshold(double epsilon, double delta, double beta, double qoi_sup_norm, double c_const) {
    require(epsilon > 0.0 && epsilon < 1.0, "sample_threshold: epsilon must lie in (0, 1)");
    require(delta > 0.0 && delta <= 1.0, "sample_threshold: delta must lie in (0, 1]");
    require(beta > 0.0 && beta < 0.5, "sample_threshold: beta must lie in (0, 1/2)");
    require(qoi_sup_norm > 0.0 && c_const > 0.0, "sample_threshold: norms and constants must be > 0");
    Threshold t;
    if (delta == 1.0) {
        t.log10_n = -HUGE_VAL;
        t.n = 0;
        return t;
    }
    const double log_base = 2 * std::log(c_const) + std::log(4096.0) + 4 * std::log(qoi_sup_norm) -
                            4 * std::log(epsilon) + std::log(std::log(1.0 / delta));
    t.log10_n = log_base / (1.0 - 2.0 * beta) / std::log(10.0);
    if (t.log10_n < 18.5) {
        t.n = static_cast<std::uint64_t>(std::ceil(std::pow(10.0, t.log10_n)));
    } else {
        t.n = std::numeric_limits<std::uint64_t>::max();
        t.representable = false;
    }
    return t;
}

} // namespace lti::calc
