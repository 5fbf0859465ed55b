// SPDX-License-Identifier: Apache-2.0
//
// Small numerical helpers shared by every module: compensated summation,
// composite Gauss-Legendre reference rules, deterministic fan-out and a
// portable seeded uniform generator.
#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <vector>

namespace lti {

/// Neumaier variant of Kahan summation.
class CompensatedSum {
public:
    void add(double x) noexcept {
        const double t = sum_ + x;
        if (std::abs(sum_) >= std::abs(x))
            comp_ += (sum_ - t) + x;
        else
            comp_ += (x - t) + sum_;
        sum_ = t;
    }
    [[nodiscard]] double value() const noexcept { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

[[nodiscard]] double compensated_sum(std::span<const double> values) noexcept;

/// Composite 8-point Gauss-Legendre rule on [a, b] with `panels` panels.
struct ReferenceRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};
[[nodiscard]] ReferenceRule composite_gauss(double a, double b, std::size_t panels);

/// Thread count used by parallel_for; 0 means "read LTI_THREADS, else 1".
void set_thread_count(unsigned threads) noexcept;
[[nodiscard]] unsigned thread_count() noexcept;

/// Runs body(i) for i in [0, n). Work is split into contiguous blocks; callers
/// write into index-addressed slots and reduce afterwards in index order, which
/// keeps results independent of the thread count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

/// Seeded generator with a platform-independent uniform draw.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}
    /// Uniform double in [0, 1) with 53 random bits.
    double uniform() noexcept {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }
    /// Uniform integer in [0, n).
    std::size_t below(std::size_t n) noexcept {
        return static_cast<std::size_t>(uniform() * static_cast<double>(n));
    }
    std::uint64_t next() noexcept { return engine_(); }

private:
    std::mt19937_64 engine_;
};

} // namespace lti
