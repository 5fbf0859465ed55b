// SPDX-License-Identifier: Apache-2.0
//
// Clenshaw-Curtis rules and Smolyak sparse grids with closed non-linear
// growth (m_1 = 1, m_i = 2^(i-1) + 1).
#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace lti::quadrature {

struct Interval {
    double a = 0.0;
    double b = 1.0;

    [[nodiscard]] double length() const noexcept { return b - a; }
    /// Affine image of t in [-1, 1].
    [[nodiscard]] double from_reference(double t) const noexcept {
        return 0.5 * (a + b) + 0.5 * (b - a) * t;
    }
};

/// Weight function of a univariate rule: Lebesgue measure on the domain, or a
/// user-supplied density on it.
class UnivariateWeight {
public:
    static UnivariateWeight uniform();
    static UnivariateWeight density(std::string id, std::function<double(double)> pdf);

    [[nodiscard]] bool is_uniform() const noexcept { return !pdf_; }
    [[nodiscard]] const std::string& id() const noexcept { return id_; }
    [[nodiscard]] double operator()(double x) const { return pdf_ ? pdf_(x) : 1.0; }

private:
    std::string id_ = "uniform";
    std::function<double(double)> pdf_;
};

struct Rule1D {
    std::vector<double> nodes;
    std::vector<double> weights;
    Interval domain;
    std::string weight_id = "uniform";

    [[nodiscard]] std::size_t point_count() const noexcept { return nodes.size(); }
};

/// Chebyshev extrema mapped to the domain, ascending; the midpoint for m == 1.
[[nodiscard]] std::vector<double> cc_nodes(std::size_t m, Interval domain = {});

/// Interpolatory weights at cc_nodes(m, domain). The uniform case uses the
/// closed cosine-series form; a density weight goes through modified
/// Chebyshev moments computed with a composite Gauss rule on 64*m panels.
[[nodiscard]] std::vector<double> cc_weights(std::size_t m, Interval domain,
                                             const UnivariateWeight& weight);

[[nodiscard]] Rule1D cc_rule(std::size_t m, Interval domain = {},
                             const UnivariateWeight& weight = UnivariateWeight::uniform());

/// Closed non-linear growth rule: 1 for level 1, 2^(level-1) + 1 beyond.
[[nodiscard]] std::size_t growth(int level);

struct MultiIndex {
    std::vector<int> entries;

    [[nodiscard]] int sum() const noexcept;
    [[nodiscard]] std::size_t dim() const noexcept { return entries.size(); }
    auto operator<=>(const MultiIndex&) const = default;
};

/// Nodes stored row-major: point j occupies nodes[j*dim .. j*dim+dim).
struct PointSet {
    std::size_t dim = 0;
    std::vector<double> nodes;
    std::vector<double> weights;

    [[nodiscard]] std::size_t size() const noexcept { return weights.size(); }
    [[nodiscard]] std::span<const double> node(std::size_t j) const noexcept {
        return {nodes.data() + j * dim, dim};
    }
};

/// Full tensor product rule I_k^d. per_dim_rules[i] must have growth(k_i) points.
[[nodiscard]] PointSet tensor_rule(const MultiIndex& index, std::span<const Rule1D> per_dim_rules);

/// One univariate rule family per dimension, reused at every level.
struct RuleFamily {
    Interval domain;
    UnivariateWeight weight = UnivariateWeight::uniform();
};

struct CombinationTerm {
    MultiIndex index;
    long coefficient = 0;
};

/// Smolyak operator S_{level+dim}^dim with coincident nodes merged.
class SparseGrid {
public:
    SparseGrid(int dim, int level, PointSet points, std::vector<CombinationTerm> terms);

    [[nodiscard]] int dim() const noexcept { return dim_; }
    [[nodiscard]] int level() const noexcept { return level_; }
    [[nodiscard]] std::size_t size() const noexcept { return points_.size(); }
    [[nodiscard]] std::span<const double> node(std::size_t j) const noexcept { return points_.node(j); }
    [[nodiscard]] double weight(std::size_t j) const noexcept { return points_.weights[j]; }
    [[nodiscard]] const PointSet& points() const noexcept { return points_; }
    [[nodiscard]] const std::vector<CombinationTerm>& combination_terms() const noexcept { return terms_; }

private:
    int dim_;
    int level_;
    PointSet points_;
    std::vector<CombinationTerm> terms_;
};

/// All multi-indices k >= 1 with level+1 <= |k| <= level+dim, with coefficient
/// (-1)^(q-|k|) binom(dim-1, q-|k|), q = level+dim.
[[nodiscard]] std::vector<CombinationTerm> combination_terms(int dim, int level);

[[nodiscard]] SparseGrid smolyak(int dim, int level, std::span<const RuleFamily> families);
/// Uniform probability weight on [0,1]^dim.
[[nodiscard]] SparseGrid smolyak(int dim, int level);

/// (2^level / level!) * dim^level.
[[nodiscard]] double node_count_asymptotic(int dim, int level);

using Integrand = std::function<double(std::span<const double>)>;

/// Sum_j w_j f(xi_j) with compensated summation in node order. Nodes may be
/// evaluated concurrently; non-finite values raise EvaluationFailure naming
/// the node index.
[[nodiscard]] double apply(const PointSet& points, const Integrand& f);
[[nodiscard]] double apply(const SparseGrid& grid, const Integrand& f);

/// Columnar text format: "dim level count" then one "x_1 ... x_d w" row per
/// node, 17 significant digits.
void write_grid(const SparseGrid& grid, std::ostream& out);
[[nodiscard]] SparseGrid read_grid(std::istream& in);

} // namespace lti::quadrature
