// SPDX-License-Identifier: Apache-2.0
#include "lti/network.hpp"

#include "lti/error.hpp"
#include "lti/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

namespace lti::network {

int Architecture::width() const { return widths.empty() ? 0 : *std::max_element(widths.begin(), widths.end()); }

std::size_t Architecture::param_count() const {
    std::size_t q = 0;
    for (std::size_t l = 0; l + 1 < widths.size(); ++l)
        q += static_cast<std::size_t>(widths[l]) * static_cast<std::size_t>(widths[l + 1]) +
             static_cast<std::size_t>(widths[l + 1]);
    return q;
}

void Architecture::validate() const {
    require(widths.size() >= 3, "architecture: need at least one hidden layer");
    for (int w : widths) require(w >= 1, "architecture: every width must be >= 1");
    require(power >= 1, "architecture: activation power must be >= 1");
}

Architecture Architecture::field(int dim, int depth, int width, int power) {
    require(dim >= 1 && depth >= 1 && width >= 1, "architecture: dim, depth and width must be >= 1");
    Architecture a;
    a.widths.push_back(dim + 1);
    for (int l = 0; l < depth; ++l) a.widths.push_back(width);
    a.widths.push_back(dim);
    a.power = power;
    a.validate();
    return a;
}

Mlp::Mlp(Architecture arch, Activation activation) : arch_(std::move(arch)), activation_(activation) {
    arch_.validate();
    const int layers = arch_.depth() + 1;
    std::size_t offset = 0;
    for (int l = 0; l < layers; ++l) {
        weight_offset_.push_back(offset);
        const auto n_in = static_cast<std::size_t>(arch_.widths[static_cast<std::size_t>(l)]);
        const auto n_out = static_cast<std::size_t>(arch_.widths[static_cast<std::size_t>(l) + 1]);
        offset += n_in * n_out + n_out;
    }
    param_count_ = offset;
    std::size_t units = 0;
    for (int w : arch_.widths) {
        unit_offset_.push_back(units);
        units += static_cast<std::size_t>(w);
    }
    unit_count_ = units;
}

std::size_t Mlp::bias_offset(int layer) const {
    const auto l = static_cast<std::size_t>(layer);
    return weight_offset_[l] + static_cast<std::size_t>(arch_.widths[l]) * static_cast<std::size_t>(arch_.widths[l + 1]);
}

double Mlp::sigma(double z) const {
    if (activation_ == Activation::Identity) return z;
    if (z <= 0.0) return 0.0;
    switch (arch_.power) {
    case 1: return z;
    case 2: return z * z;
    case 3: return z * z * z;
    default: return std::pow(z, arch_.power);
    }
}

double Mlp::sigma1(double z) const {
    if (activation_ == Activation::Identity) return 1.0;
    if (z <= 0.0) return 0.0;
    switch (arch_.power) {
    case 1: return 1.0;
    case 2: return 2.0 * z;
    case 3: return 3.0 * z * z;
    default: return arch_.power * std::pow(z, arch_.power - 1);
    }
}

double Mlp::sigma2(double z) const {
    if (activation_ == Activation::Identity || z <= 0.0) return 0.0;
    switch (arch_.power) {
    case 1: return 0.0;
    case 2: return 2.0;
    case 3: return 6.0 * z;
    default: return arch_.power * (arch_.power - 1) * std::pow(z, arch_.power - 2);
    }
}

void Mlp::forward(std::span<const double> theta, std::span<const double> input, int tangents, Trace& tr) const {
    require(theta.size() == param_count_, "forward: parameter vector has the wrong length");
    require(input.size() == static_cast<std::size_t>(arch_.input_dim()), "forward: input has the wrong length");
    require(tangents >= 0 && tangents <= arch_.input_dim(), "forward: too many tangent directions");
    const auto R = static_cast<std::size_t>(tangents);
    tr.tangents = tangents;
    tr.pre.resize(unit_count_);
    tr.post.resize(unit_count_);
    tr.tpre.resize(unit_count_ * R);
    tr.tpost.resize(unit_count_ * R);

    std::copy(input.begin(), input.end(), tr.post.begin());
    for (std::size_t i = 0; i < input.size(); ++i)
        for (std::size_t r = 0; r < R; ++r) tr.tpost[i * R + r] = (i == r) ? 1.0 : 0.0;

    const int layers = arch_.depth() + 1;
    for (int l = 0; l < layers; ++l) {
        const auto ul = static_cast<std::size_t>(l);
        const auto n_in = static_cast<std::size_t>(arch_.widths[ul]);
        const auto n_out = static_cast<std::size_t>(arch_.widths[ul + 1]);
        const double* W = theta.data() + weight_offset_[ul];
        const double* b = W + n_in * n_out;
        const double* a = tr.post.data() + unit_offset_[ul];
        const double* ta = tr.tpost.data() + unit_offset_[ul] * R;
        double* z = tr.pre.data() + unit_offset_[ul + 1];
        double* out = tr.post.data() + unit_offset_[ul + 1];
        double* tz = tr.tpre.data() + unit_offset_[ul + 1] * R;
        double* tout = tr.tpost.data() + unit_offset_[ul + 1] * R;
        const bool hidden = l + 1 < layers;
        bool finite = true;
        for (std::size_t j = 0; j < n_out; ++j) {
            const double* row = W + j * n_in;
            double acc = b[j];
            for (std::size_t i = 0; i < n_in; ++i) acc += row[i] * a[i];
            z[j] = acc;
            double* tzj = tz + j * R;
            for (std::size_t r = 0; r < R; ++r) tzj[r] = 0.0;
            if (R > 0)
                for (std::size_t i = 0; i < n_in; ++i) {
                    const double w = row[i];
                    const double* tai = ta + i * R;
                    for (std::size_t r = 0; r < R; ++r) tzj[r] += w * tai[r];
                }
            double* toj = tout + j * R;
            if (hidden) {
                out[j] = sigma(acc);
                const double s1 = R > 0 ? sigma1(acc) : 0.0;
                for (std::size_t r = 0; r < R; ++r) toj[r] = s1 * tzj[r];
            } else {
                out[j] = acc;
                for (std::size_t r = 0; r < R; ++r) toj[r] = tzj[r];
            }
            finite = finite && std::isfinite(out[j]);
        }
        if (!finite)
            fail(ErrorCode::NumericalOverflow, "forward: non-finite value in layer " + std::to_string(l + 1));
    }
}

std::span<const double> Mlp::output(const Trace& tr) const {
    return std::span<const double>(tr.post).subspan(unit_offset_.back(), static_cast<std::size_t>(arch_.output_dim()));
}

std::span<const double> Mlp::output_tangents(const Trace& tr) const {
    const auto R = static_cast<std::size_t>(tr.tangents);
    return std::span<const double>(tr.tpost).subspan(unit_offset_.back() * R,
                                                     static_cast<std::size_t>(arch_.output_dim()) * R);
}

void Mlp::backward(std::span<const double> theta, Trace& tr, std::span<const double> out_bar,
                   std::span<const double> tangent_bar, std::span<double> theta_bar,
                   std::span<double> input_bar) const {
    const auto R = static_cast<std::size_t>(tr.tangents);
    const bool use_t = R > 0 && !tangent_bar.empty();
    require(out_bar.size() == static_cast<std::size_t>(arch_.output_dim()), "backward: cotangent has the wrong length");
    require(!use_t || tangent_bar.size() == out_bar.size() * R, "backward: tangent cotangent has the wrong length");
    require(theta_bar.empty() || theta_bar.size() == param_count_, "backward: gradient buffer has the wrong length");
    require(input_bar.empty() || input_bar.size() == static_cast<std::size_t>(arch_.input_dim()),
            "backward: input gradient buffer has the wrong length");

    const auto W_max = static_cast<std::size_t>(arch_.width());
    tr.bar.assign(W_max, 0.0);
    tr.bar_next.assign(W_max, 0.0);
    tr.tbar.assign(use_t ? W_max * R : 0, 0.0);
    tr.tbar_next.assign(use_t ? W_max * R : 0, 0.0);
    std::copy(out_bar.begin(), out_bar.end(), tr.bar.begin());
    if (use_t) std::copy(tangent_bar.begin(), tangent_bar.end(), tr.tbar.begin());

    const int layers = arch_.depth() + 1;
    for (int l = layers - 1; l >= 0; --l) {
        const auto ul = static_cast<std::size_t>(l);
        const auto n_in = static_cast<std::size_t>(arch_.widths[ul]);
        const auto n_out = static_cast<std::size_t>(arch_.widths[ul + 1]);
        const double* W = theta.data() + weight_offset_[ul];
        const double* a = tr.post.data() + unit_offset_[ul];
        const double* ta = tr.tpost.data() + unit_offset_[ul] * R;
        const double* z = tr.pre.data() + unit_offset_[ul + 1];
        const double* tz = tr.tpre.data() + unit_offset_[ul + 1] * R;
        double* zb = tr.bar.data();
        double* tzb = tr.tbar.data();

        if (l + 1 < layers) {
            for (std::size_t j = 0; j < n_out; ++j) {
                const double s1 = sigma1(z[j]);
                double g = zb[j] * s1;
                if (use_t) {
                    const double s2 = sigma2(z[j]);
                    double* tj = tzb + j * R;
                    const double* tzj = tz + j * R;
                    for (std::size_t r = 0; r < R; ++r) {
                        g += tj[r] * s2 * tzj[r];
                        tj[r] *= s1;
                    }
                }
                zb[j] = g;
            }
        }

        if (!theta_bar.empty()) {
            double* Wb = theta_bar.data() + weight_offset_[ul];
            double* bb = Wb + n_in * n_out;
            for (std::size_t j = 0; j < n_out; ++j) {
                double* row = Wb + j * n_in;
                const double g = zb[j];
                for (std::size_t i = 0; i < n_in; ++i) row[i] += g * a[i];
                if (use_t) {
                    const double* tj = tzb + j * R;
                    for (std::size_t i = 0; i < n_in; ++i) {
                        const double* tai = ta + i * R;
                        double acc = 0.0;
                        for (std::size_t r = 0; r < R; ++r) acc += tj[r] * tai[r];
                        row[i] += acc;
                    }
                }
                bb[j] += g;
            }
        }

        if (l == 0 && input_bar.empty()) break;
        double* ab = tr.bar_next.data();
        std::fill(ab, ab + n_in, 0.0);
        const bool prop_t = use_t && l > 0;
        double* tab = tr.tbar_next.data();
        if (prop_t) std::fill(tab, tab + n_in * R, 0.0);
        for (std::size_t j = 0; j < n_out; ++j) {
            const double* row = W + j * n_in;
            const double g = zb[j];
            for (std::size_t i = 0; i < n_in; ++i) ab[i] += row[i] * g;
            if (prop_t) {
                const double* tj = tzb + j * R;
                for (std::size_t i = 0; i < n_in; ++i) {
                    const double w = row[i];
                    double* ti = tab + i * R;
                    for (std::size_t r = 0; r < R; ++r) ti[r] += w * tj[r];
                }
            }
        }
        std::swap(tr.bar, tr.bar_next);
        if (prop_t) std::swap(tr.tbar, tr.tbar_next);
    }
    if (!input_bar.empty())
        for (std::size_t i = 0; i < input_bar.size(); ++i) input_bar[i] += tr.bar[i];
}

std::vector<double> Mlp::evaluate(std::span<const double> theta, std::span<const double> input) const {
    Trace tr;
    forward(theta, input, 0, tr);
    const auto out = output(tr);
    return {out.begin(), out.end()};
}

MlpVectorField::MlpVectorField(Architecture arch, std::vector<double> theta, bool masked, Activation activation)
    : net_(std::move(arch), activation), theta_(std::move(theta)), masked_(masked) {
    require(net_.architecture().input_dim() == net_.architecture().output_dim() + 1,
            "vector field: input width must equal output width + 1");
    if (theta_.empty()) theta_.assign(net_.param_count(), 0.0);
    require(theta_.size() == net_.param_count(), "vector field: parameter vector has the wrong length");
}

void MlpVectorField::set_theta(std::span<const double> theta) {
    require(theta.size() == net_.param_count(), "vector field: parameter vector has the wrong length");
    theta_.assign(theta.begin(), theta.end());
}

double MlpVectorField::forward(std::span<const double> x, double t, std::span<double> out, bool with_divergence,
                               FieldTrace& tr) const {
    const auto d = static_cast<std::size_t>(dim());
    require(x.size() == d && out.size() == d, "vector field: point dimension mismatch");
    tr.input.assign(x.begin(), x.end());
    tr.input.push_back(t);
    tr.with_divergence = with_divergence;
    net_.forward(theta_, tr.input, with_divergence ? static_cast<int>(d) : 0, tr.net);
    const auto n = net_.output(tr.net);
    double div = 0.0;
    const auto T = with_divergence ? net_.output_tangents(tr.net) : std::span<const double>{};
    for (std::size_t i = 0; i < d; ++i) {
        if (masked_) {
            const double eta = x[i] * (1.0 - x[i]);
            out[i] = eta * n[i];
            if (with_divergence) div += (1.0 - 2.0 * x[i]) * n[i] + eta * T[i * d + i];
        } else {
            out[i] = n[i];
            if (with_divergence) div += T[i * d + i];
        }
    }
    return div;
}

void MlpVectorField::backward(FieldTrace& tr, std::span<const double> value_bar, double div_bar,
                              std::span<double> theta_bar, std::span<double> x_bar) const {
    const auto d = static_cast<std::size_t>(dim());
    require(value_bar.size() == d, "vector field: cotangent has the wrong length");
    require(div_bar == 0.0 || tr.with_divergence, "vector field: divergence cotangent needs a divergence trace");
    require(x_bar.empty() || x_bar.size() == d, "vector field: point gradient has the wrong length");
    const auto n = net_.output(tr.net);
    const auto T = tr.with_divergence ? net_.output_tangents(tr.net) : std::span<const double>{};
    const bool use_t = div_bar != 0.0;
    std::vector<double> nbar(d), tbar(use_t ? d * d : 0, 0.0), in_bar(x_bar.empty() ? 0 : d + 1, 0.0);
    for (std::size_t i = 0; i < d; ++i) {
        const double xi = tr.input[i];
        if (masked_) {
            const double eta = xi * (1.0 - xi), deta = 1.0 - 2.0 * xi;
            nbar[i] = eta * value_bar[i] + deta * div_bar;
            if (use_t) tbar[i * d + i] = eta * div_bar;
            if (!x_bar.empty()) {
                x_bar[i] += deta * n[i] * value_bar[i];
                if (use_t) x_bar[i] += div_bar * (-2.0 * n[i] + deta * T[i * d + i]);
            }
        } else {
            nbar[i] = value_bar[i];
            if (use_t) tbar[i * d + i] = div_bar;
        }
    }
    net_.backward(theta_, tr.net, nbar, tbar, theta_bar, in_bar);
    for (std::size_t i = 0; i < x_bar.size(); ++i) x_bar[i] += in_bar[i];
}

void MlpVectorField::evaluate(std::span<const double> x, double t, std::span<double> out) const {
    FieldTrace tr;
    forward(x, t, out, false, tr);
}

double MlpVectorField::divergence(std::span<const double> x, double t) const {
    std::vector<double> out(static_cast<std::size_t>(dim()));
    FieldTrace tr;
    return forward(x, t, out, true, tr);
}

double MlpVectorField::evaluate_with_divergence(std::span<const double> x, double t, std::span<double> out) const {
    FieldTrace tr;
    return forward(x, t, out, true, tr);
}

void MlpVectorField::vjp(std::span<const double> x, double t, std::span<const double> value_bar, double div_bar,
                         std::span<double> theta_bar, std::span<double> x_bar) const {
    FieldTrace tr;
    std::vector<double> out(static_cast<std::size_t>(dim()));
    forward(x, t, out, div_bar != 0.0, tr);
    backward(tr, value_bar, div_bar, theta_bar, x_bar);
}

std::vector<double> initialize(const Architecture& arch, std::uint64_t seed) {
    arch.validate();
    const double r = std::min(1.0, 1.0 / std::sqrt(static_cast<double>(arch.width())));
    Rng rng(seed);
    std::vector<double> theta(arch.param_count());
    for (double& v : theta) v = r * (2.0 * rng.uniform() - 1.0);
    project_box(theta);
    return theta;
}

void project_box(std::span<double> theta) {
    for (double& v : theta) v = std::clamp(v, -1.0, 1.0);
}

void write_checkpoint(const std::filesystem::path& path, const MlpVectorField& field) {
    std::ofstream out(path);
    if (!out) fail(ErrorCode::IoError, "write_checkpoint: cannot open " + path.string());
    const auto& arch = field.architecture();
    out << "lti-checkpoint 1\n";
    out << "power " << arch.power << "\n";
    out << "activation " << (field.net().activation() == Activation::Identity ? "identity" : "relu") << "\n";
    out << "masked " << (field.masked() ? 1 : 0) << "\n";
    out << "widths " << arch.widths.size();
    for (int w : arch.widths) out << ' ' << w;
    out << "\nparams " << field.theta().size() << "\n";
    char buf[40];
    for (double v : field.theta()) {
        std::snprintf(buf, sizeof buf, "%.17g\n", v);
        out << buf;
    }
    if (!out) fail(ErrorCode::IoError, "write_checkpoint: write failed for " + path.string());
}

MlpVectorField read_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::IoError, "read_checkpoint: cannot open " + path.string());
    auto bad = [&](const std::string& what) -> void {
        fail(ErrorCode::IoError, "read_checkpoint: " + path.string() + ": " + what);
    };
    std::string key, activation;
    int version = 0, masked = 0;
    Architecture arch;
    if (!(in >> key >> version) || key != "lti-checkpoint") bad("missing header");
    if (version != 1) bad("unsupported version " + std::to_string(version));
    if (!(in >> key >> arch.power) || key != "power") bad("expected 'power'");
    if (!(in >> key >> activation) || key != "activation" || (activation != "relu" && activation != "identity"))
        bad("expected 'activation relu|identity'");
    if (!(in >> key >> masked) || key != "masked") bad("expected 'masked'");
    std::size_t count = 0;
    if (!(in >> key >> count) || key != "widths" || count < 3 || count > 1000) bad("expected 'widths'");
    arch.widths.resize(count);
    for (int& w : arch.widths)
        if (!(in >> w)) bad("truncated widths");
    std::size_t q = 0;
    if (!(in >> key >> q) || key != "params") bad("expected 'params'");
    try {
        arch.validate();
    } catch (const Error& e) {
        bad(e.what());
    }
    if (q != arch.param_count()) bad("parameter count does not match the architecture");
    std::vector<double> theta(q);
    for (double& v : theta)
        if (!(in >> v)) bad("truncated parameter list");
    return MlpVectorField(std::move(arch), std::move(theta), masked != 0,
                          activation == "identity" ? Activation::Identity : Activation::ReluPower);
}

} // namespace lti::network
