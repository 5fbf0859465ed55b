// SPDX-License-Identifier: Apache-2.0
#include "fd_oracle.hpp"

#include "lti/density.hpp"
#include "lti/error.hpp"
#include "lti/flow.hpp"
#include "lti/network.hpp"
#include "lti/numerics.hpp"
#include "lti/transport.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>
#include <memory>
#include <numbers>
#include <vector>

using namespace lti;
using flow::FlowMap;
using flow::FlowStats;
using network::Architecture;
using network::MlpVectorField;
using lti::testing::fd_gradient;
using lti::testing::relative_error;

namespace {

std::shared_ptr<const Density> two_x() {
    return std::make_shared<ProductDensity>(std::vector<std::shared_ptr<const Marginal>>{std::make_shared<TiltMarginal>(2.0)});
}

std::shared_ptr<const flow::TransportField> kr_field(std::shared_ptr<const Density> source,
                                                     std::shared_ptr<const Density> target) {
    return std::make_shared<flow::TransportField>(std::make_shared<transport::KrTransport>(source, target));
}

std::shared_ptr<MlpVectorField> random_field(int d, int L, int W, Rng& rng, double r = 1.0) {
    const auto arch = Architecture::field(d, L, W);
    std::vector<double> theta(arch.param_count());
    for (double& v : theta) v = r * (2 * rng.uniform() - 1);
    return std::make_shared<MlpVectorField>(arch, theta);
}

// Smooth, boundary-tangent field for order-of-accuracy checks.
class SmoothField final : public VectorField {
public:
    int dim() const override { return 2; }
    void evaluate(std::span<const double> x, double t, std::span<double> out) const override {
        const double pi = std::numbers::pi;
        out[0] = x[0] * (1 - x[0]) * (1.5 * std::sin(pi * x[1] + t) + 0.5);
        out[1] = x[1] * (1 - x[1]) * std::cos(2 * pi * x[0] - t);
    }
};

class NanField final : public VectorField {
public:
    int dim() const override { return 1; }
    void evaluate(std::span<const double>, double t, std::span<double> out) const override {
        out[0] = t > 0.5 ? std::numeric_limits<double>::quiet_NaN() : 0.0;
    }
};

} // namespace

TEST_CASE("zero field leaves points and densities unchanged") {
    const FlowMap fm(std::make_shared<ZeroField>(2));
    const std::vector<double> x{0.3, 0.8};
    for (double t : {0.0, 0.4, 1.0}) {
        CHECK(fm.forward(x, t) == x);
        CHECK(fm.inverse(x, t) == x);
    }
    CHECK(fm.log_density(*uniform_density(2), x) == 0.0);
}

TEST_CASE("target-field flow reproduces the transport map") {
    const FlowMap fm(kr_field(uniform_density(1), two_x()), 64);
    for (double x : {0.1, 0.3, 0.6, 0.9}) {
        const std::vector<double> p{x};
        CHECK(std::abs(fm.forward(p)[0] - std::sqrt(x)) < 1e-5);
    }
    for (double y : {0.3, 0.5, 0.8}) {
        const std::vector<double> p{y};
        CHECK(std::abs(fm.inverse(p)[0] - y * y) < 1e-4);
    }
    const std::vector<double> y{0.64};
    CHECK(std::abs(fm.log_density(*uniform_density(1), y) - std::log(1.28)) < 1e-3);
}

TEST_CASE("RK4 endpoint error decreases at fourth order") {
    const auto field = std::make_shared<SmoothField>();
    const std::vector<double> x{0.3, 0.6};
    const auto ref = FlowMap(field, 2048).forward(x);
    const auto err = [&](int n) {
        const auto y = FlowMap(field, n).forward(x);
        return std::max(std::abs(y[0] - ref[0]), std::abs(y[1] - ref[1]));
    };
    for (int n : {8, 16, 32}) {
        const double order = std::log2(err(n) / err(2 * n));
        CHECK(order > 3.5);
        CHECK(order < 4.5);
    }
}

TEST_CASE("forward and inverse flows round trip and stay in the cube") {
    // Random networks drawn from the training initialization.
    Rng rng(2);
    for (int trial = 0; trial < 10; ++trial) {
        const int d = 1 + trial % 3;
        const auto arch = Architecture::field(d, 2, 8);
        const FlowMap fm(std::make_shared<MlpVectorField>(arch, network::initialize(arch, 100 + trial)), 64);
        for (int probe = 0; probe < 10; ++probe) {
            std::vector<double> x(static_cast<std::size_t>(d));
            for (double& v : x) v = rng.uniform();
            FlowStats stats;
            const auto y = fm.forward(x, 1.0, &stats);
            const auto back = fm.inverse(y, 1.0, &stats);
            for (int i = 0; i < d; ++i) {
                CHECK(y[static_cast<std::size_t>(i)] >= 0.0);
                CHECK(y[static_cast<std::size_t>(i)] <= 1.0);
                CHECK(std::abs(back[static_cast<std::size_t>(i)] - x[static_cast<std::size_t>(i)]) < 2e-5);
            }
            CHECK(stats.max_excursion <= 1e-9);
        }
    }
}

TEST_CASE("Liouville density agrees with the finite-difference Jacobian") {
    Rng rng(8);
    const auto source = std::make_shared<ProductDensity>(std::vector<std::shared_ptr<const Marginal>>{
        std::make_shared<ParabolicMarginal>(0.5), std::make_shared<TiltMarginal>(0.6)});
    int probes = 0;
    for (int d : {1, 2}) {
        const std::shared_ptr<const Density> nu =
            d == 1 ? std::shared_ptr<const Density>(std::make_shared<ProductDensity>(
                         std::vector<std::shared_ptr<const Marginal>>{std::make_shared<ParabolicMarginal>(0.5)}))
                   : source;
        for (int net = 0; net < 5; ++net) {
            const FlowMap fm(random_field(d, 2, 8, rng), 64);
            for (int probe = 0; probe < 10; ++probe, ++probes) {
                std::vector<double> y(static_cast<std::size_t>(d));
                for (double& v : y) v = 0.02 + 0.96 * rng.uniform();
                const double h = 1e-5;
                std::vector<double> J(static_cast<std::size_t>(d * d));
                for (int j = 0; j < d; ++j) {
                    auto yp = y, ym = y;
                    yp[static_cast<std::size_t>(j)] += h;
                    ym[static_cast<std::size_t>(j)] -= h;
                    const auto a = fm.inverse(yp), b = fm.inverse(ym);
                    for (int i = 0; i < d; ++i)
                        J[static_cast<std::size_t>(i * d + j)] =
                            (a[static_cast<std::size_t>(i)] - b[static_cast<std::size_t>(i)]) / (2 * h);
                }
                const double det = d == 1 ? J[0] : J[0] * J[3] - J[1] * J[2];
                const double expected = nu->pdf(fm.inverse(y)) * std::abs(det);
                CHECK(std::abs(std::exp(fm.log_density(*nu, y)) - expected) < 1e-4);
            }
        }
    }
    CHECK(probes == 100);
}

TEST_CASE("pushforward density integrates to one") {
    // Networks at the training initialization scale; strongly contracting
    // random nets need a finer reference grid than this.
    const auto rule = composite_gauss(0.0, 1.0, 8);
    const auto n = rule.nodes.size();
    {
        const auto arch = Architecture::field(1, 2, 8);
        const FlowMap fm(std::make_shared<MlpVectorField>(arch, network::initialize(arch, 12)), 64);
        double mass = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            mass += rule.weights[i] * std::exp(fm.log_density(*uniform_density(1), std::vector<double>{rule.nodes[i]}));
        CHECK(std::abs(mass - 1.0) < 1e-3);
    }
    const auto arch = Architecture::field(2, 2, 8);
    const FlowMap fm(std::make_shared<MlpVectorField>(arch, network::initialize(arch, 13)), 64);
    const auto nu = std::make_shared<CoupledDensity>(2, 0.4);
    std::vector<double> rows(n);
    parallel_for(n, [&](std::size_t i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < n; ++j)
            acc += rule.weights[j] * std::exp(fm.log_density(*nu, std::vector<double>{rule.nodes[i], rule.nodes[j]}));
        rows[i] = rule.weights[i] * acc;
    });
    double mass = 0.0;
    for (double r : rows) mass += r;
    CHECK(std::abs(mass - 1.0) < 1e-3);
}

TEST_CASE("log-density gradient matches finite differences") {
    Rng rng(77);
    const auto nu2 = std::make_shared<ProductDensity>(std::vector<std::shared_ptr<const Marginal>>{
        std::make_shared<CosineMarginal>(std::vector<double>{0.3}), std::make_shared<TiltMarginal>(-0.5)});
    for (int trial = 0; trial < 6; ++trial) {
        const int d = 1 + trial % 2;
        const int L = 1 + trial % 3;
        const auto field = random_field(d, L, d == 1 ? 8 : 6, rng, 0.9);
        CHECK(field->theta().size() <= 200u);
        const std::shared_ptr<const Density> nu =
            d == 1 ? std::shared_ptr<const Density>(std::make_shared<ProductDensity>(
                         std::vector<std::shared_ptr<const Marginal>>{std::make_shared<TiltMarginal>(0.8)}))
                   : nu2;
        std::vector<double> y(static_cast<std::size_t>(d));
        for (double& v : y) v = 0.05 + 0.9 * rng.uniform();
        const FlowMap fm(field, 16);
        std::vector<double> g(field->theta().size(), 0.0);
        const double value = fm.log_density_gradient(*nu, y, g);
        CHECK(value == doctest::Approx(fm.log_density(*nu, y)).epsilon(1e-13));
        const auto arch = field->architecture();
        const auto f = [&](std::span<const double> th) {
            return FlowMap(std::make_shared<MlpVectorField>(arch, std::vector<double>(th.begin(), th.end())), 16)
                .log_density(*nu, y);
        };
        const std::vector<double> theta(field->theta().begin(), field->theta().end());
        CHECK(relative_error(g, fd_gradient(f, theta, g)) < 1e-5);
    }
}

TEST_CASE("gradient at zero parameters comes from the output bias only") {
    const auto arch = Architecture::field(2, 2, 5);
    const auto field = std::make_shared<MlpVectorField>(arch, std::vector<double>{});
    const FlowMap fm(field, 8);
    const std::vector<double> y{0.3, 0.9};
    std::vector<double> g(arch.param_count(), 0.0);
    CHECK(fm.log_density_gradient(*uniform_density(2), y, g) == 0.0);
    const std::size_t bias = field->net().bias_offset(2);
    for (std::size_t i = 0; i < bias; ++i) CHECK(g[i] == 0.0);
    CHECK(g[bias] == doctest::Approx(-(1 - 2 * 0.3)).epsilon(1e-13));
    CHECK(g[bias + 1] == doctest::Approx(-(1 - 2 * 0.9)).epsilon(1e-13));
}

TEST_CASE("flow errors") {
    const FlowMap fm(std::make_shared<NanField>(), 8);
    try {
        (void)fm.forward(std::vector<double>{0.5});
        FAIL("expected integration failure");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::IntegrationFailure);
        CHECK(std::string(e.what()).find("step 4") != std::string::npos);
    }
    const FlowMap zero(std::make_shared<ZeroField>(1));
    try {
        (void)zero.log_density(*two_x(), std::vector<double>{0.0});
        FAIL("expected domain error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::DomainError);
    }
    CHECK_THROWS_AS((void)zero.forward(std::vector<double>{1.5}), Error);
    CHECK_THROWS_AS((void)zero.log_density_gradient(*uniform_density(1), std::vector<double>{0.5}, {}), Error);
}
