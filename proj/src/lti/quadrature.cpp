// SPDX-License-Identifier: Apache-2.0
#include "lti/quadrature.hpp"

#include "lti/error.hpp"
#include "lti/numerics.hpp"

#include <cmath>
#include <cstdio>
#include <istream>
#include <map>
#include <numbers>
#include <ostream>
#include <sstream>

namespace lti::quadrature {

UnivariateWeight UnivariateWeight::uniform() { return UnivariateWeight{}; }

UnivariateWeight UnivariateWeight::density(std::string id, std::function<double(double)> pdf) {
    require(static_cast<bool>(pdf), "UnivariateWeight::density: empty density");
    UnivariateWeight w;
    w.id_ = std::move(id);
    w.pdf_ = std::move(pdf);
    return w;
}

namespace {

void check_domain(Interval domain) {
    require(std::isfinite(domain.a) && std::isfinite(domain.b) && domain.a < domain.b,
            "quadrature: domain must satisfy a < b");
}

// cos(pi * num / den) with the argument reduced exactly in integers.
double cos_pi_ratio(long num, long den) {
    const long period = 2 * den;
    long r = num % period;
    if (r < 0) r += period;
    return std::cos(std::numbers::pi * static_cast<double>(r) / static_cast<double>(den));
}

std::vector<double> uniform_weights(std::size_t m, Interval domain) {
    if (m == 1) return {domain.length()};
    const long n = static_cast<long>(m) - 1;
    std::vector<double> w(m);
    for (long j = 0; j <= n; ++j) {
        CompensatedSum series;
        series.add(1.0);
        for (long k = 1; 2 * k <= n; ++k) {
            const double b = (2 * k == n) ? 1.0 : 2.0;
            series.add(-b / static_cast<double>(4 * k * k - 1) * cos_pi_ratio(2 * k * j, n));
        }
        const double c = (j == 0 || j == n) ? 1.0 : 2.0;
        w[static_cast<std::size_t>(j)] = c / static_cast<double>(n) * series.value();
    }
    // Symmetric rule: the descending-node order of the formula is irrelevant.
    for (double& wi : w) wi *= 0.5 * domain.length();
    return w;
}

std::vector<double> weighted_weights(std::size_t m, Interval domain, const UnivariateWeight& weight) {
    const ReferenceRule ref = composite_gauss(domain.a, domain.b, 64 * m);
    for (std::size_t i = 0; i < ref.nodes.size(); ++i) {
        const double v = weight(ref.nodes[i]);
        if (!(v >= 0.0) || !std::isfinite(v))
            fail(ErrorCode::InvalidWeight,
                 "cc_weights: weight '" + weight.id() + "' is negative or non-finite at x=" +
                     std::to_string(ref.nodes[i]));
    }
    const std::size_t probes = 1025;
    for (std::size_t i = 0; i < probes; ++i) {
        const double x = domain.a + domain.length() * static_cast<double>(i) / (probes - 1);
        const double v = weight(x);
        if (!(v >= 0.0) || !std::isfinite(v))
            fail(ErrorCode::InvalidWeight,
                 "cc_weights: weight '" + weight.id() + "' is negative or non-finite at x=" +
                     std::to_string(x));
    }

    // Modified moments mu_k = int T_k(t(x)) w(x) dx, k < m.
    std::vector<CompensatedSum> moments(m);
    for (std::size_t i = 0; i < ref.nodes.size(); ++i) {
        const double t = (2.0 * ref.nodes[i] - domain.a - domain.b) / domain.length();
        const double f = ref.weights[i] * weight(ref.nodes[i]);
        double t_prev = 1.0, t_cur = t;
        moments[0].add(f);
        if (m > 1) moments[1].add(f * t);
        for (std::size_t k = 2; k < m; ++k) {
            const double t_next = 2.0 * t * t_cur - t_prev;
            moments[k].add(f * t_next);
            t_prev = t_cur;
            t_cur = t_next;
        }
    }
    if (m == 1) return {moments[0].value()};

    // Interpolatory weights via discrete Chebyshev orthogonality on the
    // extrema: w_j = 2/(n cbar_j) sum''_k T_k(t_j) mu_k.
    const long n = static_cast<long>(m) - 1;
    std::vector<double> w(m);
    for (long i = 0; i <= n; ++i) {
        const long j = n - i;  // ascending position i is descending index j
        CompensatedSum acc;
        for (long k = 0; k <= n; ++k) {
            const double half = (k == 0 || k == n) ? 0.5 : 1.0;
            acc.add(half * cos_pi_ratio(k * j, n) * moments[static_cast<std::size_t>(k)].value());
        }
        const double cbar = (j == 0 || j == n) ? 2.0 : 1.0;
        w[static_cast<std::size_t>(i)] = 2.0 / (static_cast<double>(n) * cbar) * acc.value();
    }
    return w;
}

} // namespace

std::vector<double> cc_nodes(std::size_t m, Interval domain) {
    require(m >= 1, "cc_nodes: point count must be >= 1");
    check_domain(domain);
    if (m == 1) return {0.5 * (domain.a + domain.b)};
    const long n = static_cast<long>(m) - 1;
    std::vector<double> x(m);
    for (long i = 0; i <= n; ++i) {
        // -cos(i pi / n) written as a sine so that symmetric nodes are exact
        // negatives and the centre is exactly zero.
        const double t = std::sin(std::numbers::pi * static_cast<double>(2 * i - n) /
                                  static_cast<double>(2 * n));
        x[static_cast<std::size_t>(i)] = domain.from_reference(t);
    }
    x.front() = domain.a;
    x.back() = domain.b;
    return x;
}

std::vector<double> cc_weights(std::size_t m, Interval domain, const UnivariateWeight& weight) {
    require(m >= 1, "cc_weights: point count must be >= 1");
    check_domain(domain);
    if (weight.is_uniform()) return uniform_weights(m, domain);
    return weighted_weights(m, domain, weight);
}

Rule1D cc_rule(std::size_t m, Interval domain, const UnivariateWeight& weight) {
    Rule1D rule;
    rule.nodes = cc_nodes(m, domain);
    rule.weights = cc_weights(m, domain, weight);
    rule.domain = domain;
    rule.weight_id = weight.id();
    return rule;
}

std::size_t growth(int level) {
    require(level >= 1, "growth: level must be >= 1");
    require(level <= 40, "growth: level too large");
    if (level == 1) return 1;
    return (std::size_t{1} << (level - 1)) + 1;
}

int MultiIndex::sum() const noexcept {
    int s = 0;
    for (int k : entries) s += k;
    return s;
}

PointSet tensor_rule(const MultiIndex& index, std::span<const Rule1D> per_dim_rules) {
    const std::size_t d = index.dim();
    require(d >= 1, "tensor_rule: empty multi-index");
    require(per_dim_rules.size() == d, "tensor_rule: dimension mismatch between index and rules");
    std::size_t count = 1;
    for (std::size_t i = 0; i < d; ++i) {
        require(index.entries[i] >= 1, "tensor_rule: multi-index entries must be >= 1");
        require(per_dim_rules[i].point_count() == growth(index.entries[i]),
                "tensor_rule: rule " + std::to_string(i) + " does not have growth(k_i) points");
        count *= per_dim_rules[i].point_count();
    }
    PointSet out;
    out.dim = d;
    out.nodes.resize(count * d);
    out.weights.resize(count);
    std::vector<std::size_t> pos(d, 0);
    for (std::size_t j = 0; j < count; ++j) {
        double w = 1.0;
        for (std::size_t i = 0; i < d; ++i) {
            out.nodes[j * d + i] = per_dim_rules[i].nodes[pos[i]];
            w *= per_dim_rules[i].weights[pos[i]];
        }
        out.weights[j] = w;
        // Odometer with the last dimension varying fastest.
        for (std::size_t i = d; i-- > 0;) {
            if (++pos[i] < per_dim_rules[i].point_count()) break;
            pos[i] = 0;
        }
    }
    return out;
}

SparseGrid::SparseGrid(int dim, int level, PointSet points, std::vector<CombinationTerm> terms)
    : dim_(dim), level_(level), points_(std::move(points)), terms_(std::move(terms)) {
    require(points_.dim == static_cast<std::size_t>(dim), "SparseGrid: point dimension mismatch");
    require(points_.nodes.size() == points_.weights.size() * points_.dim,
            "SparseGrid: node/weight length mismatch");
}

namespace {

long binomial(int n, int k) {
    if (k < 0 || k > n) return 0;
    long r = 1;
    for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return r;
}

void enumerate_indices(int dim, int lo, int hi, std::vector<int>& prefix, int partial,
                       std::vector<MultiIndex>& out) {
    const int placed = static_cast<int>(prefix.size());
    if (placed == dim) {
        if (partial >= lo) out.push_back(MultiIndex{prefix});
        return;
    }
    const int remaining = dim - placed - 1;  // each later entry needs at least 1
    for (int k = 1; partial + k + remaining <= hi; ++k) {
        prefix.push_back(k);
        enumerate_indices(dim, lo, hi, prefix, partial + k, out);
        prefix.pop_back();
    }
}

} // namespace

std::vector<CombinationTerm> combination_terms(int dim, int level) {
    require(dim >= 1, "smolyak: dim must be >= 1");
    require(level >= 0, "smolyak: level must be >= 0");
    const int q = level + dim;
    std::vector<MultiIndex> indices;
    std::vector<int> prefix;
    enumerate_indices(dim, q - dim + 1, q, prefix, 0, indices);
    std::vector<CombinationTerm> terms;
    terms.reserve(indices.size());
    for (auto& k : indices) {
        const int gap = q - k.sum();
        const long sign = (gap % 2 == 0) ? 1 : -1;
        terms.push_back(CombinationTerm{std::move(k), sign * binomial(dim - 1, gap)});
    }
    return terms;
}

SparseGrid smolyak(int dim, int level, std::span<const RuleFamily> families) {
    require(dim >= 1, "smolyak: dim must be >= 1");
    require(level >= 0, "smolyak: level must be >= 0");
    require(families.size() == static_cast<std::size_t>(dim) || families.size() == 1,
            "smolyak: need one rule family per dimension (or a single shared family)");
    const auto family = [&](int i) -> const RuleFamily& {
        return families.size() == 1 ? families[0] : families[static_cast<std::size_t>(i)];
    };

    const int max_level = level + 1;
    // rules[i][l-1]: rule of dimension i at level l.
    std::vector<std::vector<Rule1D>> rules(static_cast<std::size_t>(dim));
    for (int i = 0; i < dim; ++i) {
        const RuleFamily& f = family(i);
        if (i > 0 && families.size() == 1) {
            rules[static_cast<std::size_t>(i)] = rules[0];
            continue;
        }
        for (int l = 1; l <= max_level; ++l)
            rules[static_cast<std::size_t>(i)].push_back(cc_rule(growth(l), f.domain, f.weight));
    }

    const long finest = static_cast<long>(growth(max_level)) - 1;
    std::vector<CombinationTerm> terms = combination_terms(dim, level);

    // Node identity is the per-dimension index on the finest nested lattice.
    std::map<std::vector<long>, CompensatedSum> merged;
    std::vector<Rule1D> tensor_rules(static_cast<std::size_t>(dim));
    for (const auto& term : terms) {
        for (int i = 0; i < dim; ++i)
            tensor_rules[static_cast<std::size_t>(i)] =
                rules[static_cast<std::size_t>(i)][static_cast<std::size_t>(term.index.entries[static_cast<std::size_t>(i)] - 1)];
        std::vector<std::size_t> pos(static_cast<std::size_t>(dim), 0);
        std::vector<long> key(static_cast<std::size_t>(dim));
        bool done = false;
        while (!done) {
            double w = static_cast<double>(term.coefficient);
            for (int i = 0; i < dim; ++i) {
                const auto ui = static_cast<std::size_t>(i);
                const long m = static_cast<long>(tensor_rules[ui].point_count());
                key[ui] = (m == 1) ? finest / 2 : static_cast<long>(pos[ui]) * (finest / (m - 1));
                w *= tensor_rules[ui].weights[pos[ui]];
            }
            merged[key].add(w);
            done = true;
            for (int i = dim; i-- > 0;) {
                const auto ui = static_cast<std::size_t>(i);
                if (++pos[ui] < tensor_rules[ui].point_count()) {
                    done = false;
                    break;
                }
                pos[ui] = 0;
            }
        }
    }

    PointSet points;
    points.dim = static_cast<std::size_t>(dim);
    for (const auto& [key, acc] : merged) {
        // Cancelled weights stay in the grid so the node set equals the union
        // of the tensor grids; only their rounding residue is removed.
        double w = acc.value();
        if (std::abs(w) < 1e-15) w = 0.0;
        for (int i = 0; i < dim; ++i) {
            const auto& finest_rule = rules[static_cast<std::size_t>(i)].back();
            points.nodes.push_back(finest_rule.nodes[static_cast<std::size_t>(key[static_cast<std::size_t>(i)])]);
        }
        points.weights.push_back(w);
    }
    return SparseGrid(dim, level, std::move(points), std::move(terms));
}

SparseGrid smolyak(int dim, int level) {
    const RuleFamily unit{};
    return smolyak(dim, level, std::span<const RuleFamily>(&unit, 1));
}

double node_count_asymptotic(int dim, int level) {
    require(level >= 0, "node_count_asymptotic: level must be >= 0");
    require(dim >= 1, "node_count_asymptotic: dim must be >= 1");
    // 2^l d^l / l! accumulated as a product to avoid overflow of l!.
    double v = 1.0;
    for (int i = 1; i <= level; ++i) v *= 2.0 * static_cast<double>(dim) / static_cast<double>(i);
    return v;
}

double apply(const PointSet& points, const Integrand& f) {
    const std::size_t n = points.size();
    std::vector<double> values(n);
    parallel_for(n, [&](std::size_t j) { values[j] = f(points.node(j)); });
    CompensatedSum acc;
    for (std::size_t j = 0; j < n; ++j) {
        if (!std::isfinite(values[j])) {
            std::ostringstream msg;
            msg << "apply: integrand is non-finite at node " << j << " (";
            for (std::size_t i = 0; i < points.dim; ++i) msg << (i ? " " : "") << points.node(j)[i];
            msg << ")";
            fail(ErrorCode::EvaluationFailure, msg.str());
        }
        acc.add(points.weights[j] * values[j]);
    }
    return acc.value();
}

double apply(const SparseGrid& grid, const Integrand& f) { return apply(grid.points(), f); }

void write_grid(const SparseGrid& grid, std::ostream& out) {
    out << grid.dim() << ' ' << grid.level() << ' ' << grid.size() << '\n';
    char buf[40];
    for (std::size_t j = 0; j < grid.size(); ++j) {
        for (double x : grid.node(j)) {
            std::snprintf(buf, sizeof buf, "%.17g ", x);
            out << buf;
        }
        std::snprintf(buf, sizeof buf, "%.17g\n", grid.weight(j));
        out << buf;
    }
}

SparseGrid read_grid(std::istream& in) {
    int dim = 0, level = -1;
    std::size_t count = 0;
    if (!(in >> dim >> level >> count) || dim < 1 || level < 0)
        fail(ErrorCode::IoError, "read_grid: malformed header, expected 'dim level count'");
    PointSet points;
    points.dim = static_cast<std::size_t>(dim);
    points.nodes.resize(count * points.dim);
    points.weights.resize(count);
    for (std::size_t j = 0; j < count; ++j) {
        for (std::size_t i = 0; i < points.dim; ++i)
            if (!(in >> points.nodes[j * points.dim + i]))
                fail(ErrorCode::IoError, "read_grid: truncated row " + std::to_string(j));
        if (!(in >> points.weights[j]))
            fail(ErrorCode::IoError, "read_grid: truncated row " + std::to_string(j));
    }
    return SparseGrid(dim, level, std::move(points), combination_terms(dim, level));
}

} // namespace lti::quadrature
