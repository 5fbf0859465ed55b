// SPDX-License-Identifier: Apache-2.0
#include "lti/numerics.hpp"

#include "lti/error.hpp"

#include <boost/math/quadrature/gauss.hpp>

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>

namespace lti {

const char* to_string(ErrorCode code) noexcept {
    switch (code) {
    case ErrorCode::InvalidArgument: return "invalid-argument";
    case ErrorCode::InvalidWeight: return "invalid-weight";
    case ErrorCode::EvaluationFailure: return "evaluation-failure";
    case ErrorCode::UnsupportedDimension: return "unsupported-dimension";
    case ErrorCode::InversionFailure: return "inversion-failure";
    case ErrorCode::NumericalOverflow: return "numerical-overflow";
    case ErrorCode::IntegrationFailure: return "integration-failure";
    case ErrorCode::DomainError: return "domain-error";
    case ErrorCode::TrainingFailure: return "training-failure";
    case ErrorCode::ConfigurationError: return "configuration-error";
    case ErrorCode::IoError: return "io-error";
    case ErrorCode::Internal: return "internal";
    }
    return "unknown";
}

double compensated_sum(std::span<const double> values) noexcept {
    CompensatedSum acc;
    for (double v : values) acc.add(v);
    return acc.value();
}

ReferenceRule composite_gauss(double a, double b, std::size_t panels) {
    require(panels >= 1, "composite_gauss: panels must be >= 1");
    require(a < b, "composite_gauss: empty interval");
    using Gauss = boost::math::quadrature::gauss<double, 8>;
    // boost stores the non-negative half of the symmetric abscissae.
    std::vector<double> x, w;
    const auto& ab = Gauss::abscissa();
    const auto& wt = Gauss::weights();
    for (std::size_t i = ab.size(); i-- > 0;) {
        if (ab[i] == 0.0) continue;
        x.push_back(-ab[i]);
        w.push_back(wt[i]);
    }
    for (std::size_t i = 0; i < ab.size(); ++i) {
        x.push_back(ab[i]);
        w.push_back(wt[i]);
    }

    ReferenceRule rule;
    rule.nodes.reserve(panels * x.size());
    rule.weights.reserve(panels * x.size());
    const double h = (b - a) / static_cast<double>(panels);
    for (std::size_t p = 0; p < panels; ++p) {
        const double lo = a + h * static_cast<double>(p);
        for (std::size_t i = 0; i < x.size(); ++i) {
            rule.nodes.push_back(lo + 0.5 * h * (x[i] + 1.0));
            rule.weights.push_back(0.5 * h * w[i]);
        }
    }
    return rule;
}

namespace {
std::atomic<unsigned> g_threads{0};
}

void set_thread_count(unsigned threads) noexcept { g_threads = threads; }

unsigned thread_count() noexcept {
    unsigned t = g_threads.load();
    if (t != 0) return t;
    if (const char* env = std::getenv("LTI_THREADS")) {
        const long v = std::strtol(env, nullptr, 10);
        if (v > 0) return static_cast<unsigned>(v);
    }
    return 1;
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body) {
    const std::size_t workers = std::min<std::size_t>(thread_count(), n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::exception_ptr first_error;
    std::size_t first_index = n;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        const std::size_t begin = n * w / workers;
        const std::size_t end = n * (w + 1) / workers;
        pool.emplace_back([&, begin, end] {
            for (std::size_t i = begin; i < end; ++i) {
                try {
                    body(i);
                } catch (...) {
                    std::lock_guard lock(error_mutex);
                    // Report the lowest failing index so errors do not depend
                    // on scheduling.
                    if (i < first_index) {
                        first_index = i;
                        first_error = std::current_exception();
                    }
                    return;
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

} // namespace lti
