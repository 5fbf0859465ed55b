// SPDX-License-Identifier: Apache-2.0
//
// Time-1 flow maps of vector fields by fixed-step RK4, their inverses, and
// the pushforward log-density from the instantaneous change of variables
//   log f(y) = log f_nu(z(1)) - int_0^1 div v(z(tau), 1 - tau) dtau
// along the backward trajectory z(tau) = Phi_{1-tau}(Phi^{-1}(y)).
#pragma once

#include "lti/density.hpp"
#include "lti/field.hpp"
#include "lti/network.hpp"
#include "lti/transport.hpp"

#include <memory>
#include <span>
#include <vector>

namespace lti::flow {

/// Largest distance by which an RK4 step left the cube before clamping.
struct FlowStats {
    double max_excursion = 0.0;
    void merge(const FlowStats& o) { max_excursion = std::max(max_excursion, o.max_excursion); }
};

class FlowMap {
public:
    explicit FlowMap(std::shared_ptr<const VectorField> field, int steps = 64);

    [[nodiscard]] int dim() const { return field_->dim(); }
    [[nodiscard]] int steps() const noexcept { return steps_; }
    [[nodiscard]] const VectorField& field() const noexcept { return *field_; }
    [[nodiscard]] std::shared_ptr<const VectorField> field_ptr() const noexcept { return field_; }

    /// Phi_{t_end}(x): dy/dt = v(y, t) on [0, t_end].
    [[nodiscard]] std::vector<double> forward(std::span<const double> x, double t_end = 1.0,
                                              FlowStats* stats = nullptr) const;
    /// Phi_{t_end}^{-1}(y): dz/dt = -v(z, t_end - t) on [0, t_end].
    [[nodiscard]] std::vector<double> inverse(std::span<const double> y, double t_end = 1.0,
                                              FlowStats* stats = nullptr) const;

    [[nodiscard]] double log_density(const Density& source, std::span<const double> y,
                                     FlowStats* stats = nullptr) const;

    /// Returns log_density(source, y) and accumulates its exact gradient with
    /// respect to the field parameters into theta_bar. The field must be an
    /// MlpVectorField.
    double log_density_gradient(const Density& source, std::span<const double> y, std::span<double> theta_bar,
                                FlowStats* stats = nullptr) const;

private:
    std::shared_ptr<const VectorField> field_;
    int steps_;
};

/// u_s(y) = T(G(y, s)) - G(y, s) of a Knothe-Rosenblatt transport. Points
/// are clamped to the cube before evaluation.
class TransportField final : public VectorField {
public:
    explicit TransportField(std::shared_ptr<const transport::KrTransport> kr);
    int dim() const override { return kr_->dim(); }
    void evaluate(std::span<const double> x, double t, std::span<double> out) const override;

private:
    std::shared_ptr<const transport::KrTransport> kr_;
};

} // namespace lti::flow
