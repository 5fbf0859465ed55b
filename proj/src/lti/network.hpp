// SPDX-License-Identifier: Apache-2.0
//
// Fully connected ReLU^s networks with exact reverse- and forward-mode
// derivatives, and the boundary-masked vector fields built from them.
//
// Parameter layout: for each affine layer l = 0..L the weight matrix
// (widths[l+1] x widths[l], row-major) followed by its bias.
#pragma once

#include "lti/field.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace lti::network {

struct Architecture {
    std::vector<int> widths;  // d_0, ..., d_{L+1}
    int power = 2;            // s in ReLU^s

    [[nodiscard]] int depth() const { return static_cast<int>(widths.size()) - 2; }
    [[nodiscard]] int width() const;
    [[nodiscard]] int input_dim() const { return widths.front(); }
    [[nodiscard]] int output_dim() const { return widths.back(); }
    [[nodiscard]] std::size_t param_count() const;
    void validate() const;

    /// (d+1, W, ..., W, d) with `depth` hidden layers.
    [[nodiscard]] static Architecture field(int dim, int depth, int width, int power = 2);

    bool operator==(const Architecture&) const = default;
};

/// Identity replaces ReLU^s in every hidden layer; used to test against
/// closed-form linear models.
enum class Activation { ReluPower, Identity };

/// Intermediate values of one forward pass, reused by the reverse pass.
/// Tangents are forward-mode derivatives along the first `tangents` inputs.
struct Trace {
    int tangents = 0;
    std::vector<double> pre, post;    // per unit, all layers concatenated
    std::vector<double> tpre, tpost;  // per unit x tangent
    std::vector<double> bar, tbar, bar_next, tbar_next;
};

class Mlp {
public:
    explicit Mlp(Architecture arch, Activation activation = Activation::ReluPower);

    [[nodiscard]] const Architecture& architecture() const noexcept { return arch_; }
    [[nodiscard]] Activation activation() const noexcept { return activation_; }
    [[nodiscard]] std::size_t param_count() const noexcept { return param_count_; }
    [[nodiscard]] std::size_t weight_offset(int layer) const { return weight_offset_[static_cast<std::size_t>(layer)]; }
    [[nodiscard]] std::size_t bias_offset(int layer) const;

    void forward(std::span<const double> theta, std::span<const double> input, int tangents, Trace& tr) const;
    [[nodiscard]] std::span<const double> output(const Trace& tr) const;
    /// output_dim x tangents, row-major.
    [[nodiscard]] std::span<const double> output_tangents(const Trace& tr) const;

    /// Accumulates into theta_bar (and input_bar when non-empty) the gradient of
    /// <out_bar, output> + <tangent_bar, output_tangents>. tangent_bar may be
    /// empty. Needs the trace of the matching forward pass.
    void backward(std::span<const double> theta, Trace& tr, std::span<const double> out_bar,
                  std::span<const double> tangent_bar, std::span<double> theta_bar,
                  std::span<double> input_bar) const;

    [[nodiscard]] std::vector<double> evaluate(std::span<const double> theta, std::span<const double> input) const;

private:
    [[nodiscard]] double sigma(double z) const;
    [[nodiscard]] double sigma1(double z) const;
    [[nodiscard]] double sigma2(double z) const;

    Architecture arch_;
    Activation activation_;
    std::size_t param_count_ = 0;
    std::vector<std::size_t> weight_offset_;
    std::vector<std::size_t> unit_offset_;  // start of each layer's units
    std::size_t unit_count_ = 0;
};

/// Forward trace of a field evaluation.
struct FieldTrace {
    Trace net;
    std::vector<double> input;  // (x, t)
    bool with_divergence = false;
};

/// v(x, t) = N_theta(x, t) (x) eta(x) with eta_i(x) = x_i (1 - x_i) when
/// masked, so every normal component vanishes on the cube faces.
class MlpVectorField final : public VectorField {
public:
    MlpVectorField(Architecture arch, std::vector<double> theta, bool masked = true,
                   Activation activation = Activation::ReluPower);

    int dim() const override { return net_.architecture().output_dim(); }
    void evaluate(std::span<const double> x, double t, std::span<double> out) const override;
    /// Exact trace of the spatial Jacobian from d forward-mode tangents.
    double divergence(std::span<const double> x, double t) const override;
    double evaluate_with_divergence(std::span<const double> x, double t, std::span<double> out) const override;

    /// Forward pass keeping the trace; returns the divergence if requested, else 0.
    double forward(std::span<const double> x, double t, std::span<double> out, bool with_divergence,
                   FieldTrace& tr) const;
    /// Accumulates the gradient of <value_bar, v(x,t)> + div_bar * div v(x,t)
    /// into theta_bar and x_bar (either may be empty). div_bar must be 0 if
    /// the trace was recorded without divergence.
    void backward(FieldTrace& tr, std::span<const double> value_bar, double div_bar, std::span<double> theta_bar,
                  std::span<double> x_bar) const;

    /// Reverse-mode gradient of <value_bar, v(x,t)> with respect to theta and x.
    void vjp(std::span<const double> x, double t, std::span<const double> value_bar, double div_bar,
             std::span<double> theta_bar, std::span<double> x_bar) const;

    [[nodiscard]] const Mlp& net() const noexcept { return net_; }
    [[nodiscard]] const Architecture& architecture() const noexcept { return net_.architecture(); }
    [[nodiscard]] std::span<const double> theta() const noexcept { return theta_; }
    void set_theta(std::span<const double> theta);
    [[nodiscard]] bool masked() const noexcept { return masked_; }

private:
    Mlp net_;
    std::vector<double> theta_;
    bool masked_;
};

/// Uniform on [-r, r] with r = min(1, 1/sqrt(W)), projected into [-1, 1].
[[nodiscard]] std::vector<double> initialize(const Architecture& arch, std::uint64_t seed);
/// Clamps every entry to [-1, 1].
void project_box(std::span<double> theta);

/// Text checkpoint, version 1:
///   lti-checkpoint 1
///   power <s>
///   activation relu|identity
///   masked 0|1
///   widths <n> d_0 ... d_{L+1}
///   params <q>
///   q lines, %.17g
void write_checkpoint(const std::filesystem::path& path, const MlpVectorField& field);
[[nodiscard]] MlpVectorField read_checkpoint(const std::filesystem::path& path);

} // namespace lti::network
