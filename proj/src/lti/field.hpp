// SPDX-License-Identifier: Apache-2.0
//
// Time-dependent vector fields on [0,1]^d x [0,1].
#pragma once

#include <span>
#include <vector>

namespace lti {

class VectorField {
public:
    virtual ~VectorField() = default;

    [[nodiscard]] virtual int dim() const = 0;
    virtual void evaluate(std::span<const double> x, double t, std::span<double> out) const = 0;

    /// Spatial divergence. The default differentiates `evaluate` numerically,
    /// using one-sided stencils next to the cube faces.
    [[nodiscard]] virtual double divergence(std::span<const double> x, double t) const;

    /// evaluate() and divergence() in one call; returns the divergence.
    virtual double evaluate_with_divergence(std::span<const double> x, double t, std::span<double> out) const;

    [[nodiscard]] std::vector<double> operator()(std::span<const double> x, double t) const;
};

class ZeroField final : public VectorField {
public:
    explicit ZeroField(int dim);
    int dim() const override { return dim_; }
    void evaluate(std::span<const double>, double, std::span<double> out) const override;
    double divergence(std::span<const double>, double) const override { return 0.0; }

private:
    int dim_;
};

} // namespace lti
