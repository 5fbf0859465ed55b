// SPDX-License-Identifier: Apache-2.0
#include "lti/analysis.hpp"

#include "lti/error.hpp"
#include "lti/numerics.hpp"
#include "lti/transport.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace lti::analysis {

namespace {

QoI from_factors(std::string name, int dim, std::vector<std::function<double(double)>> factors, double sup,
                 std::optional<double> c1) {
    QoI q;
    q.name = std::move(name);
    q.dim = dim;
    q.sup_norm = sup;
    q.c1_norm = c1;
    q.factors = std::move(factors);
    q.evaluate = [f = q.factors](std::span<const double> x) {
        double v = 1.0;
        for (std::size_t i = 0; i < f.size(); ++i) v *= f[i](x[i]);
        return v;
    };
    return q;
}

double param(const nlohmann::json& p, const char* key, double fallback) {
    if (!p.is_object() || !p.contains(key)) return fallback;
    if (!p.at(key).is_number()) fail(ErrorCode::InvalidArgument, std::string("qoi.params.") + key + ": expected a number");
    return p.at(key).get<double>();
}

void only_keys(const nlohmann::json& p, std::initializer_list<const char*> keys) {
    if (p.is_null()) return;
    if (!p.is_object()) fail(ErrorCode::InvalidArgument, "qoi.params: expected an object");
    for (const auto& [k, _] : p.items())
        if (std::none_of(keys.begin(), keys.end(), [&](const char* allowed) { return k == allowed; }))
            fail(ErrorCode::InvalidArgument, "qoi.params." + k + ": unknown key");
}

// Tensor product of a composite Gauss rule, weighted by `density` when given.
quadrature::PointSet dense_rule(int dim, std::size_t panels, const Density* density) {
    const auto rule = composite_gauss(0.0, 1.0, panels);
    const std::size_t m = rule.nodes.size();
    quadrature::PointSet ps;
    ps.dim = static_cast<std::size_t>(dim);
    std::size_t total = 1;
    for (int i = 0; i < dim; ++i) total *= m;
    ps.nodes.resize(total * ps.dim);
    ps.weights.resize(total);
    for (std::size_t j = 0; j < total; ++j) {
        std::size_t r = j;
        double w = 1.0;
        for (std::size_t i = ps.dim; i-- > 0;) {
            const std::size_t k = r % m;
            r /= m;
            ps.nodes[j * ps.dim + i] = rule.nodes[k];
            w *= rule.weights[k];
        }
        ps.weights[j] = density ? w * density->pdf(ps.node(j)) : w;
    }
    return ps;
}

std::size_t dense_panels(int dim) {
    switch (dim) {
    case 1: return 16;
    case 2: return 16;
    case 3: return 4;
    default: fail(ErrorCode::UnsupportedDimension, "dense reference grid needs dim <= 3, got " + std::to_string(dim));
    }
}

std::string where(std::span<const double> x) {
    std::ostringstream s;
    s << '(';
    for (std::size_t i = 0; i < x.size(); ++i) s << (i ? " " : "") << x[i];
    s << ')';
    return s.str();
}

} // namespace

QoI make_qoi(const std::string& family, const nlohmann::json& params, int dim) {
    require(dim >= 1, "qoi: dim must be >= 1");
    using F = std::function<double(double)>;
    const auto one = [](double) { return 1.0; };
    if (family == "constant") {
        only_keys(params, {"value"});
        const double v = param(params, "value", 1.0);
        std::vector<F> f(static_cast<std::size_t>(dim), one);
        f[0] = [v](double) { return v; };
        return from_factors("constant", dim, std::move(f), std::abs(v), std::abs(v));
    }
    if (family == "coordinate") {
        only_keys(params, {"axis"});
        const double a = param(params, "axis", 0.0);
        if (a != std::floor(a) || a < 0 || a >= dim)
            fail(ErrorCode::InvalidArgument, "qoi.params.axis: must be an integer in [0, dim)");
        std::vector<F> f(static_cast<std::size_t>(dim), one);
        f[static_cast<std::size_t>(a)] = [](double x) { return x; };
        return from_factors("coordinate", dim, std::move(f), 1.0, 1.0);
    }
    if (family == "product") {
        only_keys(params, {});
        return from_factors("product", dim, std::vector<F>(static_cast<std::size_t>(dim), [](double x) { return x; }),
                            1.0, 1.0);
    }
    if (family == "monomial") {
        only_keys(params, {"exponents"});
        if (!params.is_object() || !params.contains("exponents") || !params.at("exponents").is_array() ||
            params.at("exponents").size() != static_cast<std::size_t>(dim))
            fail(ErrorCode::InvalidArgument, "qoi.params.exponents: expected dim non-negative integers");
        std::vector<F> f;
        int top = 0;
        for (const auto& e : params.at("exponents")) {
            if (!e.is_number_integer() || e.get<int>() < 0)
                fail(ErrorCode::InvalidArgument, "qoi.params.exponents: expected non-negative integers");
            const int k = e.get<int>();
            top = std::max(top, k);
            f.emplace_back([k](double x) { return std::pow(x, k); });
        }
        return from_factors("monomial", dim, std::move(f), 1.0, std::max(1, top));
    }
    if (family == "abs_product") {
        only_keys(params, {});
        return from_factors("abs_product", dim,
                            std::vector<F>(static_cast<std::size_t>(dim), [](double x) { return std::abs(x - 0.5); }),
                            std::pow(0.5, dim), std::nullopt);
    }
    if (family == "exp_sum") {
        only_keys(params, {});
        const double e = std::exp(static_cast<double>(dim));
        return from_factors("exp_sum", dim,
                            std::vector<F>(static_cast<std::size_t>(dim), [](double x) { return std::exp(x); }), e, e);
    }
    fail(ErrorCode::InvalidArgument, "qoi.family: unknown family '" + family + "'");
}

void validate_qoi(const QoI& qoi) {
    require(static_cast<bool>(qoi.evaluate), "qoi: missing evaluator");
    const int per_axis = qoi.dim <= 3 ? 17 : 3;
    std::vector<double> x(static_cast<std::size_t>(qoi.dim));
    std::size_t total = 1;
    for (int i = 0; i < qoi.dim; ++i) total *= static_cast<std::size_t>(per_axis);
    for (std::size_t j = 0; j < total; ++j) {
        std::size_t r = j;
        for (auto& v : x) {
            v = static_cast<double>(r % static_cast<std::size_t>(per_axis)) / (per_axis - 1);
            r /= static_cast<std::size_t>(per_axis);
        }
        const double v = qoi(x);
        if (!(std::abs(v) <= qoi.sup_norm * (1 + 1e-12)))
            fail(ErrorCode::InvalidArgument, "qoi " + qoi.name + ": |value| exceeds sup_norm at " + where(x));
    }
}

quadrature::SparseGrid source_grid(const Density& source, int level) {
    if (!source.factorized())
        fail(ErrorCode::InvalidArgument, "source_grid: source density " + source.name() + " is not a product density");
    const auto factors = source.factors();
    if (std::all_of(factors.begin(), factors.end(),
                    [](const auto& f) { return dynamic_cast<const UniformMarginal*>(f.get()) != nullptr; }))
        return quadrature::smolyak(source.dim(), level);
    std::vector<quadrature::RuleFamily> families;
    for (const auto& f : factors) families.push_back({{0.0, 1.0}, f->as_weight()});
    return quadrature::smolyak(source.dim(), level, families);
}

double integrate_via_flow(const quadrature::SparseGrid& grid, const flow::FlowMap& fm, const QoI& qoi,
                          flow::FlowStats* stats) {
    require(grid.dim() == fm.dim() && qoi.dim == fm.dim(), "integrate_via_flow: dimension mismatch");
    std::vector<flow::FlowStats> local(grid.size());
    const auto& points = grid.points();
    const double value = quadrature::apply(points, [&](std::span<const double> x) {
        const std::size_t j = static_cast<std::size_t>(x.data() - points.nodes.data()) / points.dim;
        try {
            return qoi(fm.forward(x, 1.0, &local[j]));
        } catch (const Error& e) {
            throw Error(e.code(), "node " + std::to_string(j) + " " + where(x) + ": " + e.what());
        }
    });
    if (stats)
        for (const auto& s : local) stats->merge(s);
    return value;
}

double total_error(double reference, double estimate) { return std::abs(reference - estimate); }

double reference_expectation(const Density& target, const QoI& qoi) {
    require(target.dim() == qoi.dim, "reference_expectation: dimension mismatch");
    if (qoi.separable() && target.factorized()) {
        const auto rule = composite_gauss(0.0, 1.0, 16);
        double value = 1.0;
        for (std::size_t i = 0; i < qoi.factors.size(); ++i) {
            CompensatedSum acc;
            for (std::size_t k = 0; k < rule.nodes.size(); ++k)
                acc.add(rule.weights[k] * qoi.factors[i](rule.nodes[k]) * target.factors()[i]->pdf(rule.nodes[k]));
            value *= acc.value();
        }
        return value;
    }
    const auto ps = dense_rule(target.dim(), dense_panels(target.dim()), &target);
    return quadrature::apply(ps, qoi.evaluate);
}

double flow_integral_oracle(const Density& source, const flow::FlowMap& fm, const QoI& qoi) {
    require(source.dim() == fm.dim() && qoi.dim == fm.dim(), "flow_integral_oracle: dimension mismatch");
    const auto ps = dense_rule(source.dim(), dense_panels(source.dim()), &source);
    return quadrature::apply(ps, [&](std::span<const double> x) { return qoi(fm.forward(x)); });
}

double quadrature_error_measured(const quadrature::SparseGrid& grid, const flow::FlowMap& fm, const QoI& qoi,
                                 double oracle) {
    return std::abs(oracle - integrate_via_flow(grid, fm, qoi));
}

Divergences divergences(const Density& target, const flow::FlowMap& fm, const Density& source, const Probe& probe) {
    const int d = target.dim();
    require(source.dim() == d && fm.dim() == d, "divergences: dimension mismatch");
    const bool grid = probe.mode == ProbeMode::Grid || (probe.mode == ProbeMode::Automatic && d <= 2);
    if (grid && d > 2) fail(ErrorCode::UnsupportedDimension, "divergences: grid probe needs dim <= 2");

    std::vector<double> points, weights;
    if (grid) {
        require(probe.panels >= 1, "divergences: panels must be >= 1");
        auto ps = dense_rule(d, probe.panels, nullptr);
        points = std::move(ps.nodes);
        weights = std::move(ps.weights);
    } else {
        require(probe.samples >= 2, "divergences: need at least two samples");
        points = transport::sample(std::shared_ptr<const Density>(&target, [](const Density*) {}), probe.samples,
                                   probe.seed);
    }
    const std::size_t n = points.size() / static_cast<std::size_t>(d);
    std::vector<double> kl_terms(n), tv_terms(n);
    parallel_for(n, [&](std::size_t j) {
        const std::span<const double> y(points.data() + j * static_cast<std::size_t>(d), static_cast<std::size_t>(d));
        double log_model = 0.0;
        try {
            log_model = fm.log_density(source, y);
        } catch (const Error& e) {
            throw Error(ErrorCode::DomainError, "model density at " + where(y) + ": " + e.what());
        }
        const double log_f = target.log_pdf(y);
        const double f = std::exp(log_f);
        const double g = std::exp(log_model);
        if (grid) {
            kl_terms[j] = f > 0.0 ? weights[j] * f * (log_f - log_model) : 0.0;
            tv_terms[j] = 0.5 * weights[j] * std::abs(f - g);
        } else {
            kl_terms[j] = log_f - log_model;
            tv_terms[j] = 0.5 * std::abs(1.0 - std::exp(log_model - log_f));
        }
    });
    Divergences out;
    out.monte_carlo = !grid;
    if (grid) {
        out.kl = compensated_sum(kl_terms);
        out.tv = compensated_sum(tv_terms);
    } else {
        const auto mean_se = [n](const std::vector<double>& v) {
            const double mean = compensated_sum(v) / static_cast<double>(n);
            CompensatedSum ss;
            for (double x : v) ss.add((x - mean) * (x - mean));
            return std::pair{mean, std::sqrt(ss.value() / static_cast<double>(n - 1) / static_cast<double>(n))};
        };
        std::tie(out.kl, out.kl_std_error) = mean_se(kl_terms);
        std::tie(out.tv, out.tv_std_error) = mean_se(tv_terms);
    }
    out.tv = std::clamp(out.tv, 0.0, 1.0);
    return out;
}

double kl_estimate(const Density& target, const flow::FlowMap& fm, const Density& source, const Probe& probe) {
    return divergences(target, fm, source, probe).kl;
}

double tv_estimate(const Density& target, const flow::FlowMap& fm, const Density& source, const Probe& probe) {
    return divergences(target, fm, source, probe).tv;
}

std::optional<double> ErrorReport::learning_error_bound() const {
    if (!tv) return std::nullopt;
    return qoi_sup_norm * 2.0 * *tv;
}

bool ErrorReport::decomposition_holds(double slack) const {
    const auto learn = learning_error_bound();
    if (!learn || !quadrature_error) return true;
    return total_error <= *learn + *quadrature_error + slack;
}

namespace {

nlohmann::json opt(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); }

std::optional<double> read_opt(const nlohmann::json& j, const char* key) {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    return j.at(key).get<double>();
}

std::string cell(const std::optional<double>& v) {
    if (!v) return {};
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", *v);
    return buf;
}

} // namespace

void to_json(nlohmann::json& j, const ErrorReport& r) {
    j = nlohmann::json{{"name", r.name},
                       {"estimate", r.estimate},
                       {"reference_value", r.reference_value},
                       {"total_error", r.total_error},
                       {"quadrature_error", opt(r.quadrature_error)},
                       {"tv", opt(r.tv)},
                       {"learning_error_bound", opt(r.learning_error_bound())},
                       {"kl", opt(r.kl)},
                       {"kl_std_error", r.kl_std_error},
                       {"qoi_sup_norm", r.qoi_sup_norm},
                       {"grid", {{"dim", r.dim}, {"level", r.level}, {"nodes", r.nodes}}},
                       {"sample_size", r.sample_size},
                       {"metadata",
                        {{"seed", r.seed},
                         {"widths", r.widths},
                         {"power", r.power},
                         {"train_nll", opt(r.train_nll)},
                         {"holdout_nll", opt(r.holdout_nll)}}}};
}

void from_json(const nlohmann::json& j, ErrorReport& r) {
    r.name = j.at("name").get<std::string>();
    r.estimate = j.at("estimate").get<double>();
    r.reference_value = j.at("reference_value").get<double>();
    r.total_error = j.at("total_error").get<double>();
    r.quadrature_error = read_opt(j, "quadrature_error");
    r.tv = read_opt(j, "tv");
    r.kl = read_opt(j, "kl");
    r.kl_std_error = j.at("kl_std_error").get<double>();
    r.qoi_sup_norm = j.at("qoi_sup_norm").get<double>();
    const auto& g = j.at("grid");
    r.dim = g.at("dim").get<int>();
    r.level = g.at("level").get<int>();
    r.nodes = g.at("nodes").get<std::size_t>();
    r.sample_size = j.at("sample_size").get<std::size_t>();
    const auto& m = j.at("metadata");
    r.seed = m.at("seed").get<std::uint64_t>();
    r.widths = m.at("widths").get<std::vector<int>>();
    r.power = m.at("power").get<int>();
    r.train_nll = read_opt(m, "train_nll");
    r.holdout_nll = read_opt(m, "holdout_nll");
}

std::string csv_header() { return "n,level,m_nodes,total,quad,tv,kl,seed"; }

std::string csv_row(const ErrorReport& r) {
    return std::to_string(r.sample_size) + ',' + std::to_string(r.level) + ',' + std::to_string(r.nodes) + ',' +
           cell(r.total_error) + ',' + cell(r.quadrature_error) + ',' + cell(r.tv) + ',' + cell(r.kl) + ',' +
           std::to_string(r.seed);
}

} // namespace lti::analysis
