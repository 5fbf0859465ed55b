// SPDX-License-Identifier: Apache-2.0
#include "lti/lti.h"

#include "lti/analysis.hpp"
#include "lti/calculators.hpp"
#include "lti/error.hpp"
#include "lti/experiment.hpp"
#include "lti/field.hpp"
#include "lti/flow.hpp"
#include "lti/network.hpp"
#include "lti/numerics.hpp"
#include "lti/quadrature.hpp"
#include "lti/training.hpp"
#include "lti/transport.hpp"

#include <json.hpp>

#include <cstdlib>
#include <cstring>
#include <fstream>
#include <new>
#include <string>

using nlohmann::json;

struct lti_density {
    std::shared_ptr<const lti::Density> d;
};
struct lti_grid {
    lti::quadrature::SparseGrid g;
};
struct lti_transport {
    std::shared_ptr<const lti::transport::KrTransport> t;
};
struct lti_field {
    std::shared_ptr<const lti::VectorField> f;
    std::shared_ptr<const lti::network::MlpVectorField> net;
};
struct lti_flow {
    lti::flow::FlowMap fm;
    std::shared_ptr<const lti::network::MlpVectorField> net;
};
struct lti_experiment {
    lti::experiment::ExperimentSpec s;
};

namespace {

thread_local std::string last_error;

template <class F>
lti_status guard(F&& body) noexcept {
    try {
        body();
        last_error.clear();
        return LTI_OK;
    } catch (const lti::Error& e) {
        last_error = e.what();
        return static_cast<lti_status>(static_cast<int>(e.code()));
    } catch (const json::exception& e) {
        last_error = std::string("json: ") + e.what();
        return LTI_ERR_CONFIGURATION;
    } catch (const std::bad_alloc&) {
        last_error = "out of memory";
        return LTI_ERR_INTERNAL;
    } catch (const std::exception& e) {
        last_error = e.what();
        return LTI_ERR_INTERNAL;
    } catch (...) {
        last_error = "unknown exception";
        return LTI_ERR_INTERNAL;
    }
}

template <class T>
const T& deref(const T* p, const char* what) {
    if (!p) lti::fail(lti::ErrorCode::InvalidArgument, std::string(what) + ": null handle");
    return *p;
}

void need(const void* p, const char* what) {
    if (!p) lti::fail(lti::ErrorCode::InvalidArgument, std::string(what) + ": null pointer");
}

json parse_params(const char* text) {
    if (!text || !*text) return json::object();
    try {
        return json::parse(text);
    } catch (const json::exception& e) {
        lti::fail(lti::ErrorCode::ConfigurationError, std::string("params: ") + e.what());
    }
}

char* dup(const std::string& s) {
    char* out = static_cast<char*>(std::malloc(s.size() + 1));
    if (!out) throw std::bad_alloc();
    std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

std::span<const double> point(const double* x, int dim) { return {x, static_cast<std::size_t>(dim)}; }

void copy_out(const std::vector<double>& v, double* out) { std::copy(v.begin(), v.end(), out); }

} // namespace

extern "C" {

const char* lti_version(void) { return "0.1.0"; }

const char* lti_status_string(lti_status status) {
    if (status == LTI_OK) return "ok";
    return lti::to_string(static_cast<lti::ErrorCode>(status));
}

const char* lti_last_error(void) { return last_error.c_str(); }

void lti_string_free(char* s) { std::free(s); }

void lti_set_threads(unsigned threads) { lti::set_thread_count(threads); }
unsigned lti_get_threads(void) { return lti::thread_count(); }

lti_status lti_density_create(const char* family, const char* params_json, int dim, lti_density** out) {
    return guard([&] {
        need(family, "lti_density_create: family");
        need(out, "lti_density_create: out");
        *out = nullptr;
        auto d = lti::experiment::make_density({family, parse_params(params_json)}, dim);
        *out = new lti_density{std::move(d)};
    });
}

void lti_density_free(lti_density* density) { delete density; }

int lti_density_dim(const lti_density* density) { return density ? density->d->dim() : 0; }

lti_status lti_density_pdf(const lti_density* density, const double* x, double* out) {
    return guard([&] {
        const auto& d = *deref(density, "lti_density_pdf").d;
        need(x, "lti_density_pdf: x");
        need(out, "lti_density_pdf: out");
        *out = d.pdf(point(x, d.dim()));
    });
}

lti_status lti_density_sample(const lti_density* density, size_t n, uint64_t seed, double* out) {
    return guard([&] {
        const auto& d = deref(density, "lti_density_sample").d;
        need(out, "lti_density_sample: out");
        copy_out(lti::transport::sample(d, n, seed), out);
    });
}

lti_status lti_cc_rule(size_t m, double* nodes, double* weights) {
    return guard([&] {
        need(nodes, "lti_cc_rule: nodes");
        need(weights, "lti_cc_rule: weights");
        const auto rule = lti::quadrature::cc_rule(m);
        copy_out(rule.nodes, nodes);
        copy_out(rule.weights, weights);
    });
}

lti_status lti_grid_create(const lti_density* source, int level, lti_grid** out) {
    return guard([&] {
        const auto& d = *deref(source, "lti_grid_create").d;
        need(out, "lti_grid_create: out");
        *out = nullptr;
        *out = new lti_grid{lti::analysis::source_grid(d, level)};
    });
}

void lti_grid_free(lti_grid* grid) { delete grid; }
size_t lti_grid_size(const lti_grid* grid) { return grid ? grid->g.size() : 0; }
int lti_grid_dim(const lti_grid* grid) { return grid ? grid->g.dim() : 0; }

lti_status lti_grid_node(const lti_grid* grid, size_t j, double* x, double* weight) {
    return guard([&] {
        const auto& g = deref(grid, "lti_grid_node").g;
        if (j >= g.size()) lti::fail(lti::ErrorCode::InvalidArgument, "lti_grid_node: index out of range");
        if (x) std::copy(g.node(j).begin(), g.node(j).end(), x);
        if (weight) *weight = g.weight(j);
    });
}

lti_status lti_grid_write(const lti_grid* grid, const char* path) {
    return guard([&] {
        const auto& g = deref(grid, "lti_grid_write").g;
        need(path, "lti_grid_write: path");
        std::ofstream out(path);
        if (!out) lti::fail(lti::ErrorCode::IoError, std::string("cannot write ") + path);
        lti::quadrature::write_grid(g, out);
    });
}

lti_status lti_transport_create(const lti_density* source, const lti_density* target, lti_transport** out) {
    return guard([&] {
        const auto& s = deref(source, "lti_transport_create: source").d;
        const auto& t = deref(target, "lti_transport_create: target").d;
        need(out, "lti_transport_create: out");
        *out = nullptr;
        *out = new lti_transport{std::make_shared<lti::transport::KrTransport>(s, t)};
    });
}

void lti_transport_free(lti_transport* transport) { delete transport; }

lti_status lti_transport_map(const lti_transport* transport, const double* x, double* y) {
    return guard([&] {
        const auto& t = *deref(transport, "lti_transport_map").t;
        need(x, "lti_transport_map: x");
        need(y, "lti_transport_map: y");
        copy_out(t.map(point(x, t.dim())), y);
    });
}

lti_status lti_field_create_network(int dim, int depth, int width, int power, const double* theta, size_t count,
                                    lti_field** out) {
    return guard([&] {
        need(out, "lti_field_create_network: out");
        *out = nullptr;
        const auto arch = lti::network::Architecture::field(dim, depth, width, power);
        std::vector<double> params;
        if (theta) params.assign(theta, theta + count);
        else if (count != 0) lti::fail(lti::ErrorCode::InvalidArgument, "lti_field_create_network: null theta");
        auto net = std::make_shared<lti::network::MlpVectorField>(arch, std::move(params));
        *out = new lti_field{net, net};
    });
}

lti_status lti_field_create_transport(const lti_transport* transport, lti_field** out) {
    return guard([&] {
        const auto& t = deref(transport, "lti_field_create_transport").t;
        need(out, "lti_field_create_transport: out");
        *out = nullptr;
        *out = new lti_field{std::make_shared<lti::flow::TransportField>(t), nullptr};
    });
}

lti_status lti_field_load(const char* path, lti_field** out) {
    return guard([&] {
        need(path, "lti_field_load: path");
        need(out, "lti_field_load: out");
        *out = nullptr;
        auto net = std::make_shared<lti::network::MlpVectorField>(lti::network::read_checkpoint(path));
        *out = new lti_field{net, net};
    });
}

lti_status lti_field_save(const lti_field* field, const char* path) {
    return guard([&] {
        const auto& f = deref(field, "lti_field_save");
        need(path, "lti_field_save: path");
        if (!f.net) lti::fail(lti::ErrorCode::InvalidArgument, "lti_field_save: not a network field");
        lti::network::write_checkpoint(path, *f.net);
    });
}

void lti_field_free(lti_field* field) { delete field; }
int lti_field_dim(const lti_field* field) { return field ? field->f->dim() : 0; }
size_t lti_field_param_count(const lti_field* field) {
    return field && field->net ? field->net->theta().size() : 0;
}

lti_status lti_field_params(const lti_field* field, double* theta) {
    return guard([&] {
        const auto& f = deref(field, "lti_field_params");
        need(theta, "lti_field_params: theta");
        if (!f.net) lti::fail(lti::ErrorCode::InvalidArgument, "lti_field_params: not a network field");
        std::copy(f.net->theta().begin(), f.net->theta().end(), theta);
    });
}

lti_status lti_field_evaluate(const lti_field* field, const double* x, double t, double* out) {
    return guard([&] {
        const auto& f = *deref(field, "lti_field_evaluate").f;
        need(x, "lti_field_evaluate: x");
        need(out, "lti_field_evaluate: out");
        f.evaluate(point(x, f.dim()), t, {out, static_cast<std::size_t>(f.dim())});
    });
}

lti_status lti_field_divergence(const lti_field* field, const double* x, double t, double* out) {
    return guard([&] {
        const auto& f = *deref(field, "lti_field_divergence").f;
        need(x, "lti_field_divergence: x");
        need(out, "lti_field_divergence: out");
        *out = f.divergence(point(x, f.dim()), t);
    });
}

lti_status lti_flow_create(const lti_field* field, int steps, lti_flow** out) {
    return guard([&] {
        const auto& f = deref(field, "lti_flow_create");
        need(out, "lti_flow_create: out");
        *out = nullptr;
        *out = new lti_flow{lti::flow::FlowMap(f.f, steps), f.net};
    });
}

void lti_flow_free(lti_flow* flow) { delete flow; }

lti_status lti_flow_forward(const lti_flow* flow, const double* x, double* y) {
    return guard([&] {
        const auto& fm = deref(flow, "lti_flow_forward").fm;
        need(x, "lti_flow_forward: x");
        need(y, "lti_flow_forward: y");
        copy_out(fm.forward(point(x, fm.dim())), y);
    });
}

lti_status lti_flow_inverse(const lti_flow* flow, const double* y, double* x) {
    return guard([&] {
        const auto& fm = deref(flow, "lti_flow_inverse").fm;
        need(y, "lti_flow_inverse: y");
        need(x, "lti_flow_inverse: x");
        copy_out(fm.inverse(point(y, fm.dim())), x);
    });
}

lti_status lti_flow_log_density(const lti_flow* flow, const lti_density* source, const double* y, double* out) {
    return guard([&] {
        const auto& fm = deref(flow, "lti_flow_log_density").fm;
        const auto& s = *deref(source, "lti_flow_log_density: source").d;
        need(y, "lti_flow_log_density: y");
        need(out, "lti_flow_log_density: out");
        *out = fm.log_density(s, point(y, fm.dim()));
    });
}

lti_status lti_flow_log_density_gradient(const lti_flow* flow, const lti_density* source, const double* y,
                                         double* value, double* grad) {
    return guard([&] {
        const auto& f = deref(flow, "lti_flow_log_density_gradient");
        const auto& s = *deref(source, "lti_flow_log_density_gradient: source").d;
        need(y, "lti_flow_log_density_gradient: y");
        need(grad, "lti_flow_log_density_gradient: grad");
        if (!f.net) lti::fail(lti::ErrorCode::InvalidArgument, "lti_flow_log_density_gradient: not a network field");
        const std::size_t q = f.net->theta().size();
        std::fill(grad, grad + q, 0.0);
        const double v = f.fm.log_density_gradient(s, point(y, f.fm.dim()), {grad, q});
        if (value) *value = v;
    });
}

lti_status lti_empirical_nll(const lti_flow* flow, const lti_density* source, const double* samples, size_t n,
                             double* out) {
    return guard([&] {
        const auto& fm = deref(flow, "lti_empirical_nll").fm;
        const auto& s = *deref(source, "lti_empirical_nll: source").d;
        need(samples, "lti_empirical_nll: samples");
        need(out, "lti_empirical_nll: out");
        *out = lti::training::empirical_nll(fm, s, {samples, n * static_cast<std::size_t>(fm.dim())});
    });
}

lti_status lti_train(const char* config_json, const double* samples, size_t n, const lti_density* source,
                     lti_field** out_field, double* final_nll) {
    return guard([&] {
        const auto& s = deref(source, "lti_train: source").d;
        need(samples, "lti_train: samples");
        need(out_field, "lti_train: out_field");
        *out_field = nullptr;
        json block = parse_params(config_json);
        if (!block.is_object()) lti::fail(lti::ErrorCode::ConfigurationError, "training: expected an object");
        std::uint64_t seed = 0;
        if (block.contains("seed")) {
            if (!block.at("seed").is_number_unsigned() && !(block.at("seed").is_number_integer() && block.at("seed").get<long long>() >= 0))
                lti::fail(lti::ErrorCode::ConfigurationError, "training.seed: expected a non-negative integer");
            seed = block.at("seed").get<std::uint64_t>();
            block.erase("seed");
        }
        auto spec = lti::experiment::ExperimentSpec::from_json({{"dim", s->dim()}, {"training", block}});
        spec.training.seed = seed;
        const auto res =
            lti::training::train_erm(spec.training, {samples, n * static_cast<std::size_t>(s->dim())}, s);
        auto net = res.field();
        if (final_nll) *final_nll = res.final_nll;
        *out_field = new lti_field{net, net};
    });
}

lti_status lti_integrate_via_flow(const lti_grid* grid, const lti_flow* flow, const char* qoi_family,
                                  const char* qoi_params_json, double* out) {
    return guard([&] {
        const auto& g = deref(grid, "lti_integrate_via_flow: grid").g;
        const auto& fm = deref(flow, "lti_integrate_via_flow: flow").fm;
        need(qoi_family, "lti_integrate_via_flow: qoi_family");
        need(out, "lti_integrate_via_flow: out");
        const auto q = lti::analysis::make_qoi(qoi_family, parse_params(qoi_params_json), fm.dim());
        *out = lti::analysis::integrate_via_flow(g, fm, q);
    });
}

lti_status lti_reference_expectation(const lti_density* target, const char* qoi_family, const char* qoi_params_json,
                                     double* out) {
    return guard([&] {
        const auto& t = *deref(target, "lti_reference_expectation").d;
        need(qoi_family, "lti_reference_expectation: qoi_family");
        need(out, "lti_reference_expectation: out");
        *out = lti::analysis::reference_expectation(
            t, lti::analysis::make_qoi(qoi_family, parse_params(qoi_params_json), t.dim()));
    });
}

lti_status lti_divergences(const lti_density* target, const lti_flow* flow, const lti_density* source, double* kl,
                           double* tv) {
    return guard([&] {
        const auto& t = *deref(target, "lti_divergences: target").d;
        const auto& fm = deref(flow, "lti_divergences: flow").fm;
        const auto& s = *deref(source, "lti_divergences: source").d;
        const auto d = lti::analysis::divergences(t, fm, s);
        if (kl) *kl = d.kl;
        if (tv) *tv = d.tv;
    });
}

lti_status lti_capacity_constants(int depth, int width, int dim, double* log_lip0, double* log_lip1, double* log_c) {
    return guard([&] {
        const auto c = lti::calc::capacity_constants(depth, width, dim);
        if (log_lip0) *log_lip0 = static_cast<double>(c.log_lip0);
        if (log_lip1) *log_lip1 = static_cast<double>(c.log_lip1);
        if (log_c) *log_c = static_cast<double>(c.log_c);
    });
}

lti_status lti_adaptive_architecture(double n, double beta, double c_d, int dim, int* width, int* depth,
                                     int* resolution) {
    return guard([&] {
        const auto s = lti::calc::adaptive_architecture(n, beta, c_d, dim);
        if (width) *width = s.width;
        if (depth) *depth = s.depth;
        if (resolution) *resolution = s.resolution;
    });
}

lti_status lti_sample_threshold(double epsilon, double delta, double beta, double qoi_sup, double c,
                                double* log10_n) {
    return guard([&] {
        need(log10_n, "lti_sample_threshold: log10_n");
        *log10_n = lti::calc::sample_threshold(epsilon, delta, beta, qoi_sup, c).log10_n;
    });
}

lti_status lti_calc(const char* kind, const char* params_json, char** out_json) {
    return guard([&] {
        need(kind, "lti_calc: kind");
        need(out_json, "lti_calc: out_json");
        *out_json = nullptr;
        *out_json = dup(lti::experiment::cmd_calc(kind, parse_params(params_json)).dump(2));
    });
}

lti_status lti_experiment_load(const char* path, lti_experiment** out) {
    return guard([&] {
        need(path, "lti_experiment_load: path");
        need(out, "lti_experiment_load: out");
        *out = nullptr;
        *out = new lti_experiment{lti::experiment::ExperimentSpec::load(path)};
    });
}

lti_status lti_experiment_parse(const char* text, lti_experiment** out) {
    return guard([&] {
        need(text, "lti_experiment_parse: json");
        need(out, "lti_experiment_parse: out");
        *out = nullptr;
        json j;
        try {
            j = json::parse(text);
        } catch (const json::exception& e) {
            lti::fail(lti::ErrorCode::ConfigurationError, std::string("spec: ") + e.what());
        }
        *out = new lti_experiment{lti::experiment::ExperimentSpec::from_json(j)};
    });
}

void lti_experiment_free(lti_experiment* experiment) { delete experiment; }

lti_status lti_experiment_to_json(const lti_experiment* experiment, char** out_json) {
    return guard([&] {
        const auto& e = deref(experiment, "lti_experiment_to_json");
        need(out_json, "lti_experiment_to_json: out_json");
        *out_json = dup(e.s.to_json().dump(2));
    });
}

lti_status lti_experiment_set_seed(lti_experiment* experiment, uint64_t seed) {
    return guard([&] {
        need(experiment, "lti_experiment_set_seed");
        experiment->s.seed = seed;
    });
}

lti_status lti_experiment_set_levels(lti_experiment* experiment, int min_level, int max_level) {
    return guard([&] {
        need(experiment, "lti_experiment_set_levels");
        if (min_level < 0 || max_level < min_level)
            lti::fail(lti::ErrorCode::ConfigurationError, "grid.levels: need 0 <= min <= max");
        experiment->s.min_level = min_level;
        experiment->s.max_level = max_level;
    });
}

lti_status lti_experiment_set_output_dir(lti_experiment* experiment, const char* dir) {
    return guard([&] {
        need(experiment, "lti_experiment_set_output_dir");
        need(dir, "lti_experiment_set_output_dir: dir");
        experiment->s.out_dir = dir;
    });
}

lti_status lti_cmd_grid(const lti_experiment* experiment, char** out_json) {
    return guard([&] {
        const auto& e = deref(experiment, "lti_cmd_grid");
        const auto rows = lti::experiment::cmd_grid(e.s);
        if (!out_json) return;
        json j = json::array();
        for (const auto& r : rows)
            j.push_back({{"level", r.level}, {"nodes", r.nodes}, {"asymptotic", r.asymptotic}, {"file", r.file.string()}});
        *out_json = dup(j.dump());
    });
}

lti_status lti_cmd_run(const lti_experiment* experiment, char** out_csv) {
    return guard([&] {
        const auto& e = deref(experiment, "lti_cmd_run");
        const auto reports = lti::experiment::cmd_run(e.s);
        if (!out_csv) return;
        std::string csv = lti::analysis::csv_header() + "\n";
        for (const auto& r : reports) csv += lti::analysis::csv_row(r) + "\n";
        *out_csv = dup(csv);
    });
}

lti_status lti_cmd_report(const char* results_path, char** out_csv) {
    return guard([&] {
        need(results_path, "lti_cmd_report: results_path");
        need(out_csv, "lti_cmd_report: out_csv");
        *out_csv = nullptr;
        *out_csv = dup(lti::experiment::cmd_report(results_path));
    });
}

} // extern "C"
