// SPDX-License-Identifier: Apache-2.0
#include "lti/flow.hpp"

#include "lti/error.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace lti::flow {

namespace {

constexpr double rk_weights[4] = {1.0 / 6.0, 2.0 / 6.0, 2.0 / 6.0, 1.0 / 6.0};

std::vector<double> checked_point(std::span<const double> x, int d, const char* what) {
    require(x.size() == static_cast<std::size_t>(d), std::string(what) + ": point dimension mismatch");
    std::vector<double> p(x.begin(), x.end());
    for (double& v : p) {
        if (!(v >= -1e-12 && v <= 1.0 + 1e-12)) {
            std::ostringstream msg;
            msg << what << ": point coordinate " << v << " lies outside [0, 1]";
            fail(ErrorCode::DomainError, msg.str());
        }
        v = std::clamp(v, 0.0, 1.0);
    }
    return p;
}

// Clamps to the cube; returns the clamped coordinates as a bit mask and
// raises on a non-finite state.
std::uint64_t clamp_state(std::vector<double>& z, int step, const char* what, FlowStats* stats) {
    std::uint64_t mask = 0;
    for (std::size_t i = 0; i < z.size(); ++i) {
        if (!std::isfinite(z[i]))
            fail(ErrorCode::IntegrationFailure, std::string(what) + ": non-finite state at step " + std::to_string(step));
        const double c = std::clamp(z[i], 0.0, 1.0);
        if (c != z[i]) {
            if (stats) stats->max_excursion = std::max(stats->max_excursion, std::abs(c - z[i]));
            mask |= std::uint64_t{1} << std::min<std::size_t>(i, 63);
            z[i] = c;
        }
    }
    return mask;
}

// One RK4 step of dz/dt = sign * v(z, t0 + sign_t * tau).
template <typename Eval>
void rk4_step(std::vector<double>& z, double h, Eval&& eval, std::vector<double> (&k)[4], std::vector<double>& s) {
    const std::size_t d = z.size();
    eval(0, z, k[0]);
    for (std::size_t i = 0; i < d; ++i) s[i] = z[i] + 0.5 * h * k[0][i];
    eval(1, s, k[1]);
    for (std::size_t i = 0; i < d; ++i) s[i] = z[i] + 0.5 * h * k[1][i];
    eval(2, s, k[2]);
    for (std::size_t i = 0; i < d; ++i) s[i] = z[i] + h * k[2][i];
    eval(3, s, k[3]);
    for (std::size_t i = 0; i < d; ++i)
        z[i] += h * (rk_weights[0] * k[0][i] + rk_weights[1] * k[1][i] + rk_weights[2] * k[2][i] +
                     rk_weights[3] * k[3][i]);
}

constexpr double stage_offset[4] = {0.0, 0.5, 0.5, 1.0};

} // namespace

FlowMap::FlowMap(std::shared_ptr<const VectorField> field, int steps) : field_(std::move(field)), steps_(steps) {
    require(field_ != nullptr, "FlowMap: null field");
    require(steps_ >= 1, "FlowMap: steps must be >= 1");
}

std::vector<double> FlowMap::forward(std::span<const double> x, double t_end, FlowStats* stats) const {
    require(t_end >= 0.0 && t_end <= 1.0, "flow_forward: t_end must lie in [0, 1]");
    auto z = checked_point(x, dim(), "flow_forward");
    const auto d = z.size();
    const double h = t_end / steps_;
    std::vector<double> k[4] = {std::vector<double>(d), std::vector<double>(d), std::vector<double>(d),
                                std::vector<double>(d)};
    std::vector<double> s(d);
    for (int n = 0; n < steps_; ++n) {
        rk4_step(z, h, [&](int stage, const std::vector<double>& p, std::vector<double>& out) {
            field_->evaluate(p, (n + stage_offset[stage]) * h, out);
        }, k, s);
        clamp_state(z, n, "flow_forward", stats);
    }
    return z;
}

std::vector<double> FlowMap::inverse(std::span<const double> y, double t_end, FlowStats* stats) const {
    require(t_end >= 0.0 && t_end <= 1.0, "flow_inverse: t_end must lie in [0, 1]");
    auto z = checked_point(y, dim(), "flow_inverse");
    const auto d = z.size();
    const double h = t_end / steps_;
    std::vector<double> k[4] = {std::vector<double>(d), std::vector<double>(d), std::vector<double>(d),
                                std::vector<double>(d)};
    std::vector<double> s(d);
    for (int n = 0; n < steps_; ++n) {
        rk4_step(z, h, [&](int stage, const std::vector<double>& p, std::vector<double>& out) {
            field_->evaluate(p, t_end - (n + stage_offset[stage]) * h, out);
            for (double& v : out) v = -v;
        }, k, s);
        clamp_state(z, n, "flow_inverse", stats);
    }
    return z;
}

double FlowMap::log_density(const Density& source, std::span<const double> y, FlowStats* stats) const {
    require(source.dim() == dim(), "log_pushforward_density: source dimension mismatch");
    auto z = checked_point(y, dim(), "log_pushforward_density");
    const auto d = z.size();
    const double h = 1.0 / steps_;
    std::vector<double> k[4] = {std::vector<double>(d), std::vector<double>(d), std::vector<double>(d),
                                std::vector<double>(d)};
    std::vector<double> s(d);
    double div[4] = {0, 0, 0, 0};
    double ell = 0.0;
    for (int n = 0; n < steps_; ++n) {
        rk4_step(z, h, [&](int stage, const std::vector<double>& p, std::vector<double>& out) {
            div[stage] = field_->evaluate_with_divergence(p, 1.0 - (n + stage_offset[stage]) * h, out);
            for (double& v : out) v = -v;
        }, k, s);
        ell += h * (rk_weights[0] * div[0] + rk_weights[1] * div[1] + rk_weights[2] * div[2] + rk_weights[3] * div[3]);
        if (!std::isfinite(ell))
            fail(ErrorCode::IntegrationFailure, "log_pushforward_density: non-finite divergence at step " + std::to_string(n));
        clamp_state(z, n, "log_pushforward_density", stats);
    }
    const double p = source.pdf(z);
    if (!(p > 0.0)) {
        std::ostringstream msg;
        msg << "log_pushforward_density: source density vanishes at the preimage (";
        for (std::size_t i = 0; i < d; ++i) msg << (i ? ", " : "") << z[i];
        msg << ")";
        fail(ErrorCode::DomainError, msg.str());
    }
    return source.log_pdf(z) - ell;
}

double FlowMap::log_density_gradient(const Density& source, std::span<const double> y, std::span<double> theta_bar,
                                     FlowStats* stats) const {
    const auto* net = dynamic_cast<const network::MlpVectorField*>(field_.get());
    require(net != nullptr, "log_density_gradient: the field must be a network field");
    require(theta_bar.size() == net->theta().size(), "log_density_gradient: gradient buffer has the wrong length");
    require(source.dim() == dim(), "log_density_gradient: source dimension mismatch");
    auto z = checked_point(y, dim(), "log_density_gradient");
    const auto d = z.size();
    const auto N = static_cast<std::size_t>(steps_);
    const double h = 1.0 / steps_;

    thread_local std::vector<network::FieldTrace> traces;
    if (traces.size() < 4 * N) traces.resize(4 * N);
    std::vector<std::uint64_t> clamped(N);
    std::vector<double> k[4] = {std::vector<double>(d), std::vector<double>(d), std::vector<double>(d),
                                std::vector<double>(d)};
    std::vector<double> s(d);
    double div[4] = {0, 0, 0, 0};
    double ell = 0.0;
    for (std::size_t n = 0; n < N; ++n) {
        rk4_step(z, h, [&](int stage, const std::vector<double>& p, std::vector<double>& out) {
            div[stage] = net->forward(p, 1.0 - (static_cast<double>(n) + stage_offset[stage]) * h, out, true,
                                      traces[4 * n + static_cast<std::size_t>(stage)]);
            for (double& v : out) v = -v;
        }, k, s);
        ell += h * (rk_weights[0] * div[0] + rk_weights[1] * div[1] + rk_weights[2] * div[2] + rk_weights[3] * div[3]);
        if (!std::isfinite(ell))
            fail(ErrorCode::IntegrationFailure, "log_density_gradient: non-finite divergence at step " + std::to_string(n));
        clamped[n] = clamp_state(z, static_cast<int>(n), "log_density_gradient", stats);
    }
    const double p = source.pdf(z);
    if (!(p > 0.0)) fail(ErrorCode::DomainError, "log_density_gradient: source density vanishes at the preimage");
    const double value = source.log_pdf(z) - ell;

    // Reverse sweep through the discrete scheme; the divergence sum enters with weight -1.
    std::vector<double> zbar(d), zn_bar(d), sbar(d), vbar(d);
    source.grad_log_pdf(z, zbar);
    std::vector<double> kbar[4] = {std::vector<double>(d), std::vector<double>(d), std::vector<double>(d),
                                   std::vector<double>(d)};
    for (std::size_t n = N; n-- > 0;) {
        for (std::size_t i = 0; i < d; ++i)
            if (clamped[n] >> std::min<std::size_t>(i, 63) & 1u) zbar[i] = 0.0;
        for (int st = 0; st < 4; ++st)
            for (std::size_t i = 0; i < d; ++i) kbar[st][i] = rk_weights[st] * h * zbar[i];
        zn_bar = zbar;
        for (int st = 3; st >= 0; --st) {
            for (std::size_t i = 0; i < d; ++i) vbar[i] = -kbar[st][i];
            std::fill(sbar.begin(), sbar.end(), 0.0);
            net->backward(traces[4 * n + static_cast<std::size_t>(st)], vbar, -rk_weights[st] * h, theta_bar, sbar);
            const double c = st == 3 ? h : 0.5 * h;
            for (std::size_t i = 0; i < d; ++i) {
                zn_bar[i] += sbar[i];
                if (st > 0) kbar[st - 1][i] += c * sbar[i];
            }
        }
        zbar = zn_bar;
    }
    return value;
}

TransportField::TransportField(std::shared_ptr<const transport::KrTransport> kr) : kr_(std::move(kr)) {
    require(kr_ != nullptr, "TransportField: null transport");
}

void TransportField::evaluate(std::span<const double> x, double t, std::span<double> out) const {
    std::vector<double> p(x.begin(), x.end());
    for (double& v : p) v = std::clamp(v, 0.0, 1.0);
    const auto u = kr_->target_field(p, std::clamp(t, 0.0, 1.0));
    std::copy(u.begin(), u.end(), out.begin());
}

} // namespace lti::flow
