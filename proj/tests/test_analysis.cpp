// SPDX-License-Identifier: Apache-2.0
#include "lti/analysis.hpp"
#include "lti/density.hpp"
#include "lti/error.hpp"
#include "lti/flow.hpp"
#include "lti/network.hpp"
#include "lti/quadrature.hpp"
#include "lti/transport.hpp"

#include <doctest.h>

#include <cmath>
#include <memory>
#include <vector>

using namespace lti;
using analysis::make_qoi;
using flow::FlowMap;
using nlohmann::json;

namespace {

std::shared_ptr<const Density> tilt(std::vector<double> slopes) {
    std::vector<std::shared_ptr<const Marginal>> f;
    for (double s : slopes) f.push_back(std::make_shared<TiltMarginal>(s));
    return std::make_shared<ProductDensity>(std::move(f));
}

FlowMap kr_flow(std::shared_ptr<const Density> source, std::shared_ptr<const Density> target, int steps = 64) {
    return FlowMap(std::make_shared<flow::TransportField>(std::make_shared<transport::KrTransport>(source, target)),
                   steps);
}

// int x (1 + s (x - 1/2)) dx.
double tilt_mean(double s) { return 0.5 + s / 12.0; }

} // namespace

TEST_CASE("qoi families") {
    const auto c = make_qoi("constant", json{{"value", -2.5}}, 2);
    CHECK(c(std::vector<double>{0.1, 0.9}) == -2.5);
    CHECK(c.sup_norm == 2.5);
    const auto x1 = make_qoi("coordinate", json{{"axis", 1}}, 2);
    CHECK(x1(std::vector<double>{0.1, 0.9}) == 0.9);
    const auto m = make_qoi("monomial", json{{"exponents", {2, 3}}}, 2);
    CHECK(m(std::vector<double>{0.5, 0.5}) == doctest::Approx(1.0 / 32));
    CHECK(*m.c1_norm == 3.0);
    const auto a = make_qoi("abs_product", json(nullptr), 2);
    CHECK(a(std::vector<double>{0.0, 1.0}) == 0.25);
    CHECK(a.sup_norm == 0.25);
    CHECK_FALSE(a.c1_norm.has_value());
    const auto e = make_qoi("exp_sum", json::object(), 3);
    CHECK(e(std::vector<double>{1, 1, 1}) == doctest::Approx(std::exp(3.0)));
    for (const auto& q : {c, x1, m, a, e, make_qoi("product", {}, 3)}) CHECK_NOTHROW(analysis::validate_qoi(q));

    CHECK_THROWS_AS((void)make_qoi("sine", {}, 1), Error);
    CHECK_THROWS_AS((void)make_qoi("coordinate", json{{"axis", 2}}, 2), Error);
    CHECK_THROWS_AS((void)make_qoi("monomial", json{{"exponents", {1}}}, 2), Error);
    CHECK_THROWS_AS((void)make_qoi("product", json{{"scale", 2}}, 2), Error);
    auto bad = x1;
    bad.sup_norm = 0.5;
    CHECK_THROWS_AS(analysis::validate_qoi(bad), Error);
}

TEST_CASE("integrate via the identity flow") {
    const FlowMap id(std::make_shared<ZeroField>(2));
    const auto grid = analysis::source_grid(*uniform_density(2), 3);
    CHECK(analysis::integrate_via_flow(grid, id, make_qoi("constant", {}, 2)) == doctest::Approx(1.0).epsilon(1e-14));
    // Polynomial of degree < m under the source: exact, so total error vanishes.
    const auto q = make_qoi("monomial", json{{"exponents", {2, 1}}}, 2);
    const double est = analysis::integrate_via_flow(grid, id, q);
    const double ref = analysis::reference_expectation(*uniform_density(2), q);
    CHECK(ref == doctest::Approx(1.0 / 6).epsilon(1e-14));
    CHECK(analysis::total_error(ref, est) < 1e-10);
    CHECK(analysis::total_error(0.3, 0.3) == 0.0);
}

TEST_CASE("source grids carry the source weight") {
    const auto nu = tilt({0.8});
    const auto grid = analysis::source_grid(*nu, 3);
    const FlowMap id(std::make_shared<ZeroField>(1));
    const auto q = make_qoi("monomial", json{{"exponents", {3}}}, 1);
    // int x^3 (1 + 0.8 (x - 1/2)) dx = 1/4 + 0.8 (1/5 - 1/8)
    CHECK(analysis::integrate_via_flow(grid, id, q) == doctest::Approx(0.25 + 0.8 * 0.075).epsilon(1e-12));
    CHECK_THROWS_AS((void)analysis::source_grid(CoupledDensity(2, 0.3), 2), Error);
}

TEST_CASE("transport flow integrates the target expectation") {
    const auto target = tilt({2.0});
    const auto fm = kr_flow(uniform_density(1), target);
    const auto q = make_qoi("coordinate", {}, 1);
    const double est = analysis::integrate_via_flow(analysis::source_grid(*uniform_density(1), 4), fm, q);
    CHECK(std::abs(est - 2.0 / 3) < 1e-3);
    CHECK(analysis::reference_expectation(*target, q) == doctest::Approx(2.0 / 3).epsilon(1e-14));

    const auto t2 = tilt({1.5, -1.0});
    const auto fm2 = kr_flow(uniform_density(2), t2, 32);
    const auto prod = make_qoi("product", {}, 2);
    const double est2 = analysis::integrate_via_flow(analysis::source_grid(*uniform_density(2), 4), fm2, prod);
    const double exact = tilt_mean(1.5) * tilt_mean(-1.0);
    CHECK(std::abs(est2 - exact) < 1e-3);
    CHECK(analysis::reference_expectation(*t2, prod) == doctest::Approx(exact).epsilon(1e-14));
    // Dense-grid path for a non-factorized target: E[x1 x2] = 1/4 + c/36.
    CHECK(analysis::reference_expectation(CoupledDensity(2, 0.6), prod) == doctest::Approx(0.25 + 0.6 / 36).epsilon(1e-12));
}

TEST_CASE("measured quadrature error") {
    const FlowMap id1(std::make_shared<ZeroField>(1));
    const auto nu1 = uniform_density(1);
    for (int level = 0; level <= 5; ++level) {
        const auto grid = analysis::source_grid(*nu1, level);
        const int m = static_cast<int>(grid.size());
        const auto q = make_qoi("monomial", json{{"exponents", {m - 1}}}, 1);
        const double oracle = analysis::flow_integral_oracle(*nu1, id1, q);
        CHECK(oracle == doctest::Approx(1.0 / m).epsilon(1e-13));
        CHECK(analysis::quadrature_error_measured(grid, id1, q, oracle) < 1e-11);
    }

    const FlowMap id2(std::make_shared<ZeroField>(2));
    const auto nu2 = uniform_density(2);
    const auto smooth = make_qoi("exp_sum", {}, 2);
    const auto rough = make_qoi("abs_product", {}, 2);
    const double smooth_ref = std::pow(std::exp(1.0) - 1.0, 2);
    const double rough_ref = 1.0 / 16;
    CHECK(analysis::flow_integral_oracle(*nu2, id2, smooth) == doctest::Approx(smooth_ref).epsilon(1e-13));
    CHECK(analysis::flow_integral_oracle(*nu2, id2, rough) == doctest::Approx(rough_ref).epsilon(1e-13));
    double previous = INFINITY;
    for (int level = 1; level <= 6; ++level) {
        const auto grid = analysis::source_grid(*nu2, level);
        const double es = analysis::quadrature_error_measured(grid, id2, smooth, smooth_ref) / smooth.sup_norm;
        const double er = analysis::quadrature_error_measured(grid, id2, rough, rough_ref) / rough.sup_norm;
        CHECK(es <= previous);
        previous = es;
        if (level >= 3) CHECK(er > es);
    }
    const auto grid1 = analysis::source_grid(*uniform_density(1), 6);
    const double rough1 = analysis::quadrature_error_measured(
        grid1, id1, make_qoi("abs_product", {}, 1), 0.25);
    CHECK(rough1 < 0.25 * 0.01);

    const FlowMap id4(std::make_shared<ZeroField>(4));
    try {
        (void)analysis::flow_integral_oracle(*uniform_density(4), id4, make_qoi("product", {}, 4));
        FAIL("expected unsupported dimension");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::UnsupportedDimension);
    }
}

TEST_CASE("TV and KL in grid mode") {
    const FlowMap id1(std::make_shared<ZeroField>(1));
    const auto u = uniform_density(1);
    const auto two_x = tilt({2.0});
    const auto d0 = analysis::divergences(*u, id1, *u);
    CHECK(d0.kl == 0.0);
    CHECK(d0.tv == 0.0);
    CHECK_FALSE(d0.monte_carlo);
    // Model uniform, target 2x.
    const auto d1 = analysis::divergences(*two_x, id1, *u);
    CHECK(d1.tv == doctest::Approx(0.25).epsilon(1e-13));
    CHECK(std::abs(d1.kl - (std::log(2.0) - 0.5)) < 1e-5);
    CHECK(analysis::pinsker_holds(d1.tv, d1.kl, 0.0));

    const auto fm = kr_flow(u, two_x);
    const auto d2 = analysis::divergences(*two_x, fm, *u);
    CHECK(std::abs(d2.kl) < 2e-3);
    CHECK(d2.tv < 2e-3);
    CHECK(analysis::kl_estimate(*two_x, fm, *u) == d2.kl);
    CHECK(analysis::tv_estimate(*two_x, fm, *u) == d2.tv);

    const auto arch = network::Architecture::field(2, 2, 6);
    const FlowMap zero_net(std::make_shared<network::MlpVectorField>(arch, std::vector<double>{}), 16);
    const auto nu = tilt({0.5, -0.5});
    const auto d3 = analysis::divergences(*nu, zero_net, *nu);
    CHECK(d3.kl == 0.0);
    CHECK(d3.tv == 0.0);
}

TEST_CASE("TV and KL in Monte Carlo mode") {
    const FlowMap id(std::make_shared<ZeroField>(1));
    analysis::Probe probe;
    probe.mode = analysis::ProbeMode::MonteCarlo;
    probe.samples = 20000;
    probe.seed = 4;
    const auto d = analysis::divergences(*tilt({2.0}), id, *uniform_density(1), probe);
    CHECK(d.monte_carlo);
    CHECK(d.kl_std_error > 0.0);
    CHECK(std::abs(d.kl - (std::log(2.0) - 0.5)) < 4 * d.kl_std_error);
    CHECK(std::abs(d.tv - 0.25) < 4 * d.tv_std_error);

    const FlowMap id3(std::make_shared<ZeroField>(3));
    const auto t3 = tilt({1.0, 0.5, -0.5});
    probe.samples = 2000;
    const auto d3 = analysis::divergences(*t3, id3, *uniform_density(3), probe);
    CHECK(d3.kl > 0.0);
    CHECK(d3.tv <= 1.0);
    probe.mode = analysis::ProbeMode::Grid;
    CHECK_THROWS_AS((void)analysis::divergences(*t3, id3, *uniform_density(3), probe), Error);
}

TEST_CASE("error report records, audit and CSV") {
    analysis::ErrorReport r;
    r.name = "demo";
    r.estimate = 0.66;
    r.reference_value = 2.0 / 3;
    r.total_error = analysis::total_error(r.reference_value, r.estimate);
    r.quadrature_error = 1e-4;
    r.tv = 0.01;
    r.kl = 3e-4;
    r.qoi_sup_norm = 1.0;
    r.dim = 1;
    r.level = 4;
    r.nodes = 17;
    r.sample_size = 2000;
    r.seed = 9;
    r.widths = {2, 16, 16, 1};
    r.train_nll = -0.18;
    CHECK(*r.learning_error_bound() == doctest::Approx(0.02));
    CHECK(r.decomposition_holds(0.0));
    r.tv = 0.001;
    CHECK_FALSE(r.decomposition_holds(0.0));

    const json j = r;
    CHECK(j.at("grid").at("nodes") == 17);
    CHECK(j.at("metadata").at("holdout_nll").is_null());
    CHECK(j.get<analysis::ErrorReport>() == r);

    CHECK(analysis::csv_header() == "n,level,m_nodes,total,quad,tv,kl,seed");
    r.kl.reset();
    r.total_error = 0.5;
    r.quadrature_error = 0.25;
    r.tv = 0.125;
    CHECK(analysis::csv_row(r) == "2000,4,17,0.5,0.25,0.125,,9");
}
