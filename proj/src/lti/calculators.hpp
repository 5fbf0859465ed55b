// SPDX-License-Identifier: Apache-2.0
//
// Closed-form capacity, architecture and sample-size formulas for the
// boundary-masked ReLU^2 hypothesis class. Values that overflow doubles are
// reported through natural logarithms (and log-logs for the envelopes).
#pragma once

#include <cstdint>

namespace lti::calc {

struct CapacityInputs {
    double kappa = 1.0;         // lower density bound of the source
    double lipschitz_nu = 1.0;  // Lipschitz bound of the source density
    double c_d = 1.0;           // envelope constants, not explicit in the theory
    double c_dkl = 1.0;
};

struct CapacityConstants {
    int depth = 0, width = 0, dim = 0;
    std::uint64_t params = 0;  // q for (d+1, W x L, d)
    long double log_lip0 = 0, log_lip1 = 0, log_c = 0;
    bool degenerate = false;  // L = 1: the exponent 2^{L-2} of C is not an integer; log C is taken as 0
    long double log_lip1_bound = 0;     // log [4 W^2 C]^{4L}
    long double log_lip1_envelope = 0;  // log (2W)^{2^{2L+2}} (d+1)^{2^{2L}}
    // log Lbar and log D; +inf when the inner exponential overflows, in which
    // case only the log-log is meaningful.
    long double log_lbar = 0, loglog_lbar = 0;
    long double log_d = 0, loglog_d = 0;
    // log-log of c_dkl exp((c_d W)^{2^{2L+3}}).
    long double loglog_envelope = 0;
};

[[nodiscard]] CapacityConstants capacity_constants(int depth, int width, int dim, const CapacityInputs& in = {});

struct RequArchitecture {
    double width = 0;
    double depth = 0;           // hidden layers
    double nonzero_bound = 0;   // p (K+k)^d C(k,d,f)
    double c_const = 0;         // C(k,d,f)
};

/// Size recipe for ReQU networks approximating a C^{k,alpha} map with p outputs
/// at spline resolution K.
[[nodiscard]] RequArchitecture requ_architecture(int k, int d, int p, int K, double holder_norm);
/// (1 + 9^{d(k-1)} (2k+1)^{2d+l}) (sqrt(2) e d)^{k+alpha} ||f|| / K^{k+alpha-l}.
[[nodiscard]] double requ_error_bound(int k, int d, int K, int l, double alpha, double holder_norm);

struct Schedule {
    int width = 1, depth = 1, resolution = 1;           // W_n, L_n, K_n after clamping
    double width_raw = 0, depth_raw = 0, resolution_raw = 0;  // before floor and clamp
    bool width_clamped = false, depth_clamped = false, resolution_clamped = false;
};

/// W_n = floor(log log n), L_n = floor(1/2 log2 log_{c_d W_n} log(n^beta) - 3),
/// K_n = floor(1/3 (W_n / (12(d+1)))^{1/(d+1)}); each clamped below at 1.
/// A nested log that is undefined gives a raw value of -inf.
[[nodiscard]] Schedule adaptive_architecture(double n, double beta, double c_d, int dim);

struct Threshold {
    double log10_n = 0;      // -inf when the threshold is 0
    std::uint64_t n = 0;     // ceil of the threshold when it fits, else UINT64_MAX
    bool representable = true;
};

/// n >= (c^2 4096 ||qoi||^4 / eps^4 log(1/delta))^{1/(1-2 beta)}.
[[nodiscard]] Threshold sample_threshold(double epsilon, double delta, double beta, double qoi_sup_norm,
                                         double c_const);

} // namespace lti::calc
