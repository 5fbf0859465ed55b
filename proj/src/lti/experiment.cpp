// SPDX-License-Identifier: Apache-2.0
#include "lti/experiment.hpp"

#include "lti/calculators.hpp"
#include "lti/error.hpp"
#include "lti/field.hpp"
#include "lti/flow.hpp"
#include "lti/quadrature.hpp"
#include "lti/transport.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace lti::experiment {

using nlohmann::json;

namespace {

[[noreturn]] void config_error(const std::string& path, const std::string& what) {
    fail(ErrorCode::ConfigurationError, path + ": " + what);
}

// Typed, path-aware access to one JSON object; finish() rejects unread keys.
class Reader {
public:
    Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) config_error(path_.empty() ? "spec" : path_, "expected an object");
    }
    Reader(json&&, std::string) = delete;

    [[nodiscard]] std::string at(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
    [[nodiscard]] bool has(const std::string& key) const { return j_.contains(key); }

    const json* child(const std::string& key) {
        seen_.insert(key);
        return j_.contains(key) ? &j_.at(key) : nullptr;
    }

    template <class T>
    T get(const std::string& key, T fallback) {
        const json* v = child(key);
        return v ? convert<T>(*v, at(key)) : fallback;
    }

    template <class T>
    T required(const std::string& key) {
        const json* v = child(key);
        if (!v) config_error(at(key), "missing required field");
        return convert<T>(*v, at(key));
    }

    void finish() const {
        for (const auto& [k, _] : j_.items())
            if (!seen_.count(k)) config_error(at(k), "unknown key");
    }

    template <class T>
    static T convert(const json& v, const std::string& path) {
        if constexpr (std::is_same_v<T, bool>) {
            if (!v.is_boolean()) config_error(path, "expected a boolean");
            return v.get<bool>();
        } else if constexpr (std::is_same_v<T, std::string>) {
            if (!v.is_string()) config_error(path, "expected a string");
            return v.get<std::string>();
        } else if constexpr (std::is_same_v<T, double>) {
            if (!v.is_number()) config_error(path, "expected a number");
            return v.get<double>();
        } else if constexpr (std::is_same_v<T, int>) {
            if (!v.is_number_integer()) config_error(path, "expected an integer");
            return v.get<int>();
        } else if constexpr (std::is_unsigned_v<T>) {
            if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0))
                config_error(path, "expected a non-negative integer");
            return v.get<T>();
        } else if constexpr (std::is_same_v<T, std::vector<double>>) {
            if (!v.is_array()) config_error(path, "expected an array of numbers");
            std::vector<double> out;
            for (std::size_t i = 0; i < v.size(); ++i) out.push_back(convert<double>(v[i], path + "[" + std::to_string(i) + "]"));
            return out;
        } else if constexpr (std::is_same_v<T, std::vector<std::size_t>>) {
            if (!v.is_array()) config_error(path, "expected an array of integers");
            std::vector<std::size_t> out;
            for (std::size_t i = 0; i < v.size(); ++i)
                out.push_back(convert<std::size_t>(v[i], path + "[" + std::to_string(i) + "]"));
            return out;
        } else {
            static_assert(sizeof(T) == 0, "unsupported type");
        }
    }

private:
    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

FamilySpec read_family(Reader& parent, const std::string& key, const FamilySpec& fallback) {
    const json* v = parent.child(key);
    if (!v) return fallback;
    Reader r(*v, parent.at(key));
    FamilySpec out;
    out.family = r.required<std::string>("family");
    if (const json* p = r.child("params")) {
        if (!p->is_object() && !p->is_null()) config_error(r.at("params"), "expected an object");
        out.params = p->is_null() ? json::object() : *p;
    }
    r.finish();
    return out;
}

json family_json(const FamilySpec& f) { return {{"family", f.family}, {"params", f.params}}; }

const char* model_name(Model m) {
    switch (m) {
    case Model::Network: return "network";
    case Model::Transport: return "transport";
    case Model::Identity: return "identity";
    }
    return "network";
}

const char* probe_name(analysis::ProbeMode m) {
    switch (m) {
    case analysis::ProbeMode::Automatic: return "auto";
    case analysis::ProbeMode::Grid: return "grid";
    case analysis::ProbeMode::MonteCarlo: return "monte_carlo";
    }
    return "auto";
}

// Runs body; an Error escaping it is re-raised as `code` (configuration errors
// pass through) with the stage name prefixed.
template <class F>
auto stage(const char* name, ErrorCode code, F&& body) {
    try {
        return body();
    } catch (const Error& e) {
        const ErrorCode c = e.code() == ErrorCode::ConfigurationError || e.code() == ErrorCode::IoError ? e.code() : code;
        throw Error(c, std::string("stage ") + name + ": " + e.what());
    }
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

json finite_or_null(long double v) {
    return std::isfinite(static_cast<double>(v)) ? json(static_cast<double>(v)) : json(nullptr);
}

} // namespace

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (a + 1) + 0xBF58476D1CE4E5B9ull * (b + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

json ExperimentSpec::to_json() const {
    const auto& t = training;
    json tr = {{"model", model_name(model)},
               {"sample_sizes", sample_sizes},
               {"batch_size", t.batch_size},
               {"max_epochs", t.max_epochs},
               {"learning_rate", t.learning_rate},
               {"decay", t.decay},
               {"optimizer", t.optimizer == training::Optimizer::Adam ? "adam" : "momentum"},
               {"momentum", t.momentum},
               {"depth", t.depth},
               {"width", t.width},
               {"power", t.power},
               {"adaptive", t.adaptive},
               {"beta", t.beta},
               {"c_d", t.c_d},
               {"flow_steps", t.flow_steps},
               {"holdout", t.holdout_fraction}};
    return {{"name", name},
            {"dim", dim},
            {"seed", seed},
            {"source", family_json(source)},
            {"target", family_json(target)},
            {"qoi", family_json(qoi)},
            {"grid", {{"levels", {min_level, max_level}}}},
            {"training", tr},
            {"analysis",
             {{"probe", probe_name(probe.mode)},
              {"panels", probe.panels},
              {"samples", probe.samples},
              {"quadrature_oracle", quadrature_oracle}}},
            {"outputs", {{"dir", out_dir.generic_string()}, {"csv", csv}, {"results", results}, {"telemetry", telemetry}}}};
}

ExperimentSpec ExperimentSpec::from_json(const json& j) {
    ExperimentSpec s;
    Reader r(j, "");
    s.name = r.get<std::string>("name", s.name);
    s.dim = r.required<int>("dim");
    if (s.dim < 1) config_error("dim", "must be >= 1");
    s.seed = r.get<std::uint64_t>("seed", s.seed);
    s.source = read_family(r, "source", s.source);
    s.target = read_family(r, "target", s.target);
    s.qoi = read_family(r, "qoi", s.qoi);

    if (const json* g = r.child("grid")) {
        Reader gr(*g, "grid");
        if (const json* lv = gr.child("levels")) {
            if (!lv->is_array() || lv->size() != 2) config_error("grid.levels", "expected [min, max]");
            s.min_level = Reader::convert<int>((*lv)[0], "grid.levels[0]");
            s.max_level = Reader::convert<int>((*lv)[1], "grid.levels[1]");
        }
        gr.finish();
    }
    if (s.min_level < 0 || s.max_level < s.min_level) config_error("grid.levels", "need 0 <= min <= max");

    if (const json* t = r.child("training")) {
        Reader tr(*t, "training");
        auto& c = s.training;
        const auto model = tr.get<std::string>("model", "network");
        if (model == "network") s.model = Model::Network;
        else if (model == "transport") s.model = Model::Transport;
        else if (model == "identity") s.model = Model::Identity;
        else config_error("training.model", "expected network, transport or identity");
        s.sample_sizes = tr.get("sample_sizes", s.sample_sizes);
        c.batch_size = tr.get("batch_size", c.batch_size);
        c.max_epochs = tr.get("max_epochs", c.max_epochs);
        c.learning_rate = tr.get("learning_rate", c.learning_rate);
        c.decay = tr.get("decay", c.decay);
        const auto opt = tr.get<std::string>("optimizer", "adam");
        if (opt == "adam") c.optimizer = training::Optimizer::Adam;
        else if (opt == "momentum") c.optimizer = training::Optimizer::Momentum;
        else config_error("training.optimizer", "expected adam or momentum");
        c.momentum = tr.get("momentum", c.momentum);
        c.depth = tr.get("depth", c.depth);
        c.width = tr.get("width", c.width);
        c.power = tr.get("power", c.power);
        c.adaptive = tr.get("adaptive", c.adaptive);
        c.beta = tr.get("beta", c.beta);
        c.c_d = tr.get("c_d", c.c_d);
        c.flow_steps = tr.get("flow_steps", c.flow_steps);
        c.holdout_fraction = tr.get("holdout", c.holdout_fraction);
        tr.finish();
        try {
            c.validate();
        } catch (const Error& e) {
            config_error("training", e.what());
        }
    }
    if (s.sample_sizes.empty()) config_error("training.sample_sizes", "must not be empty");
    for (std::size_t n : s.sample_sizes)
        if (n < 1) config_error("training.sample_sizes", "entries must be >= 1");

    if (const json* a = r.child("analysis")) {
        Reader ar(*a, "analysis");
        const auto mode = ar.get<std::string>("probe", "auto");
        if (mode == "auto") s.probe.mode = analysis::ProbeMode::Automatic;
        else if (mode == "grid") s.probe.mode = analysis::ProbeMode::Grid;
        else if (mode == "monte_carlo") s.probe.mode = analysis::ProbeMode::MonteCarlo;
        else config_error("analysis.probe", "expected auto, grid or monte_carlo");
        s.probe.panels = ar.get("panels", s.probe.panels);
        s.probe.samples = ar.get("samples", s.probe.samples);
        s.quadrature_oracle = ar.get("quadrature_oracle", s.quadrature_oracle);
        ar.finish();
        if (s.probe.panels < 1) config_error("analysis.panels", "must be >= 1");
        if (s.probe.samples < 2) config_error("analysis.samples", "must be >= 2");
    }
    if (const json* o = r.child("outputs")) {
        Reader orr(*o, "outputs");
        s.out_dir = orr.get<std::string>("dir", s.out_dir.generic_string());
        s.csv = orr.get("csv", s.csv);
        s.results = orr.get("results", s.results);
        s.telemetry = orr.get("telemetry", s.telemetry);
        orr.finish();
    }
    r.finish();

    // Build the families once so configuration errors surface at parse time.
    (void)make_density(s.source, s.dim, "source");
    (void)make_density(s.target, s.dim, "target");
    try {
        analysis::validate_qoi(analysis::make_qoi(s.qoi.family, s.qoi.params, s.dim));
    } catch (const Error& e) {
        config_error("qoi", e.what());
    }
    return s;
}

ExperimentSpec ExperimentSpec::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::ConfigurationError, "cannot open spec file " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        fail(ErrorCode::ConfigurationError, "spec " + path.string() + ": " + e.what());
    }
    return from_json(j);
}

std::shared_ptr<const Density> make_density(const FamilySpec& spec, int dim, const std::string& path) {
    Reader p(spec.params, path + ".params");
    const auto per_axis = [&](std::vector<std::shared_ptr<const Marginal>> f) {
        return std::shared_ptr<const Density>(std::make_shared<ProductDensity>(std::move(f)));
    };
    std::shared_ptr<const Density> out;
    try {
        if (spec.family == "uniform") {
            out = uniform_density(dim);
        } else if (spec.family == "tilt") {
            std::vector<double> slopes;
            if (p.has("slopes")) {
                slopes = p.get<std::vector<double>>("slopes", {});
                if (slopes.size() != static_cast<std::size_t>(dim)) config_error(p.at("slopes"), "expected dim entries");
            } else {
                slopes.assign(static_cast<std::size_t>(dim), p.required<double>("slope"));
            }
            std::vector<std::shared_ptr<const Marginal>> f;
            for (double s : slopes) f.push_back(std::make_shared<TiltMarginal>(s));
            out = per_axis(std::move(f));
        } else if (spec.family == "parabolic") {
            const double eps = p.required<double>("eps");
            out = per_axis(std::vector<std::shared_ptr<const Marginal>>(static_cast<std::size_t>(dim),
                                                                        std::make_shared<ParabolicMarginal>(eps)));
        } else if (spec.family == "cosine") {
            const json* c = p.child("coefficients");
            if (!c || !c->is_array() || c->empty()) config_error(p.at("coefficients"), "expected a non-empty array");
            std::vector<std::shared_ptr<const Marginal>> f;
            if ((*c)[0].is_array()) {
                if (c->size() != static_cast<std::size_t>(dim)) config_error(p.at("coefficients"), "expected dim lists");
                for (std::size_t i = 0; i < c->size(); ++i)
                    f.push_back(std::make_shared<CosineMarginal>(Reader::convert<std::vector<double>>(
                        (*c)[i], p.at("coefficients") + "[" + std::to_string(i) + "]")));
            } else {
                const auto a = Reader::convert<std::vector<double>>(*c, p.at("coefficients"));
                f.assign(static_cast<std::size_t>(dim), std::make_shared<CosineMarginal>(a));
            }
            out = per_axis(std::move(f));
        } else if (spec.family == "coupled") {
            out = std::make_shared<CoupledDensity>(dim, p.required<double>("coupling"));
        } else {
            config_error(path + ".family", "unknown density family '" + spec.family + "'");
        }
        p.finish();
    } catch (const Error& e) {
        if (e.code() == ErrorCode::ConfigurationError) throw;
        config_error(path, e.what());
    }
    return out;
}

std::vector<GridRow> cmd_grid(const ExperimentSpec& spec) {
    const auto source = make_density(spec.source, spec.dim, "source");
    const auto dir = spec.out_dir / "grids";
    std::filesystem::create_directories(dir);
    std::vector<GridRow> rows;
    for (int level = spec.min_level; level <= spec.max_level; ++level) {
        const auto grid = analysis::source_grid(*source, level);
        GridRow row;
        row.level = level;
        row.nodes = grid.size();
        row.asymptotic = quadrature::node_count_asymptotic(spec.dim, level);
        row.file = dir / ("grid_d" + std::to_string(spec.dim) + "_l" + std::to_string(level) + ".txt");
        std::ofstream out(row.file);
        if (!out) fail(ErrorCode::IoError, "cannot write " + row.file.string());
        quadrature::write_grid(grid, out);
        rows.push_back(row);
    }
    return rows;
}

std::vector<analysis::ErrorReport> cmd_run(const ExperimentSpec& spec) {
    const int d = spec.dim;
    const auto source = make_density(spec.source, d, "source");
    const auto target = make_density(spec.target, d, "target");
    analysis::QoI qoi;
    try {
        qoi = analysis::make_qoi(spec.qoi.family, spec.qoi.params, d);
    } catch (const Error& e) {
        config_error("qoi", e.what());
    }

    std::vector<quadrature::SparseGrid> grids;
    stage("grid", ErrorCode::InvalidArgument, [&] {
        for (int level = spec.min_level; level <= spec.max_level; ++level)
            grids.push_back(analysis::source_grid(*source, level));
        return 0;
    });
    const double reference =
        stage("reference", ErrorCode::IntegrationFailure, [&] { return analysis::reference_expectation(*target, qoi); });

    std::filesystem::create_directories(spec.out_dir);
    if (!spec.telemetry.empty()) std::filesystem::remove(spec.out_dir / spec.telemetry);

    std::vector<analysis::ErrorReport> reports;
    for (std::size_t si = 0; si < spec.sample_sizes.size(); ++si) {
        const std::size_t n = spec.sample_sizes[si];
        analysis::ErrorReport base;
        base.name = spec.name;
        base.reference_value = reference;
        base.qoi_sup_norm = qoi.sup_norm;
        base.dim = d;
        base.sample_size = n;
        base.seed = spec.seed;
        base.power = spec.training.power;

        std::shared_ptr<const VectorField> field;
        const int steps = spec.training.flow_steps;
        if (spec.model == Model::Network) {
            const auto samples = stage("sample", ErrorCode::InvalidArgument,
                                       [&] { return transport::sample(target, n, derive_seed(spec.seed, n, 1)); });
            auto cfg = spec.training;
            cfg.seed = derive_seed(spec.seed, n, 2);
            if (!spec.telemetry.empty()) cfg.telemetry = spec.out_dir / spec.telemetry;
            const auto res = stage("train", ErrorCode::TrainingFailure,
                                   [&] { return training::train_erm(cfg, samples, source); });
            base.widths = res.arch.widths;
            base.power = res.arch.power;
            base.train_nll = res.final_nll;
            if (res.holdout_size > 0) base.holdout_nll = res.holdout_nll;
            field = res.field();
        } else if (spec.model == Model::Transport) {
            field = stage("transport", ErrorCode::InvalidArgument, [&] {
                return std::make_shared<flow::TransportField>(std::make_shared<transport::KrTransport>(source, target));
            });
        } else {
            field = std::make_shared<ZeroField>(d);
        }
        const flow::FlowMap fm(field, steps);

        std::optional<double> oracle;
        if (spec.quadrature_oracle && d <= 3)
            oracle = stage("integrate", ErrorCode::IntegrationFailure,
                           [&] { return analysis::flow_integral_oracle(*source, fm, qoi); });
        auto probe = spec.probe;
        probe.seed = derive_seed(spec.seed, n, 3);
        const auto div = stage("divergence", ErrorCode::IntegrationFailure,
                               [&] { return analysis::divergences(*target, fm, *source, probe); });
        base.tv = div.tv;
        base.kl = div.kl;
        base.kl_std_error = div.kl_std_error;

        for (std::size_t li = 0; li < grids.size(); ++li) {
            auto r = base;
            r.level = spec.min_level + static_cast<int>(li);
            r.nodes = grids[li].size();
            r.estimate = stage("integrate", ErrorCode::IntegrationFailure,
                               [&] { return analysis::integrate_via_flow(grids[li], fm, qoi); });
            r.total_error = analysis::total_error(reference, r.estimate);
            if (oracle) r.quadrature_error = std::abs(*oracle - r.estimate);
            reports.push_back(std::move(r));
        }
    }

    const auto csv_path = spec.out_dir / spec.csv;
    std::ofstream csv(csv_path, std::ios::binary | std::ios::trunc);
    if (!csv) fail(ErrorCode::IoError, "cannot write " + csv_path.string());
    csv << analysis::csv_header() << '\n';
    for (const auto& r : reports) csv << analysis::csv_row(r) << '\n';

    const auto results_path = spec.out_dir / spec.results;
    std::ofstream res(results_path, std::ios::binary | std::ios::app);
    if (!res) fail(ErrorCode::IoError, "cannot write " + results_path.string());
    for (const auto& r : reports) res << json(r).dump() << '\n';
    return reports;
}

json cmd_calc(const std::string& kind, const json& params) {
    const json body = params.is_null() ? json::object() : params;
    Reader p(body, "params");
    json out;
    try {
        if (kind == "constants") {
            calc::CapacityInputs in;
            const int L = p.required<int>("L"), W = p.required<int>("W"), dim = p.required<int>("d");
            in.kappa = p.get("kappa", in.kappa);
            in.lipschitz_nu = p.get("lipschitz_nu", in.lipschitz_nu);
            in.c_d = p.get("c_d", in.c_d);
            in.c_dkl = p.get("c_dkl", in.c_dkl);
            p.finish();
            const auto c = calc::capacity_constants(L, W, dim, in);
            out = {{"kind", kind},
                   {"L", L},
                   {"W", W},
                   {"d", dim},
                   {"params", c.params},
                   {"log_lip0", finite_or_null(c.log_lip0)},
                   {"log_lip1", finite_or_null(c.log_lip1)},
                   {"log_c", finite_or_null(c.log_c)},
                   {"degenerate", c.degenerate},
                   {"log_lip1_bound", finite_or_null(c.log_lip1_bound)},
                   {"log_lip1_envelope", finite_or_null(c.log_lip1_envelope)},
                   {"log_lbar", finite_or_null(c.log_lbar)},
                   {"loglog_lbar", finite_or_null(c.loglog_lbar)},
                   {"log_d", finite_or_null(c.log_d)},
                   {"loglog_d", finite_or_null(c.loglog_d)},
                   {"loglog_envelope", finite_or_null(c.loglog_envelope)}};
        } else if (kind == "threshold") {
            const double eps = p.required<double>("epsilon"), delta = p.required<double>("delta");
            const double beta = p.get("beta", 0.25), sup = p.get("qoi_sup", 1.0), c = p.get("c", 1.0);
            p.finish();
            const auto t = calc::sample_threshold(eps, delta, beta, sup, c);
            out = {{"kind", kind}, {"log10_n", finite_or_null(t.log10_n)}, {"representable", t.representable}};
            if (t.representable) out["n"] = t.n;
        } else if (kind == "schedule") {
            const double n = p.required<double>("n");
            const double beta = p.get("beta", 0.25), c_d = p.get("c_d", 1.0);
            const int dim = p.get("dim", 1);
            p.finish();
            const auto s = calc::adaptive_architecture(n, beta, c_d, dim);
            out = {{"kind", kind},
                   {"n", n},
                   {"width", s.width},
                   {"depth", s.depth},
                   {"resolution", s.resolution},
                   {"width_raw", finite_or_null(s.width_raw)},
                   {"depth_raw", finite_or_null(s.depth_raw)},
                   {"resolution_raw", finite_or_null(s.resolution_raw)},
                   {"clamped", s.width_clamped || s.depth_clamped || s.resolution_clamped}};
        } else {
            config_error("calc", "unknown kind '" + kind + "', expected constants, threshold or schedule");
        }
    } catch (const Error& e) {
        if (e.code() == ErrorCode::ConfigurationError) throw;
        config_error("params", e.what());
    }
    return out;
}

std::string cmd_report(const std::filesystem::path& results, double slack) {
    std::ifstream in(results);
    if (!in) fail(ErrorCode::IoError, "cannot open results file " + results.string());
    std::ostringstream out;
    out << analysis::csv_header() << ",estimate,reference,decomposition,pinsker\n";
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        analysis::ErrorReport r;
        try {
            r = json::parse(line).get<analysis::ErrorReport>();
        } catch (const json::exception& e) {
            fail(ErrorCode::IoError, results.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
        out << analysis::csv_row(r) << ',' << fmt(r.estimate) << ',' << fmt(r.reference_value) << ','
            << (r.decomposition_holds(slack) ? "ok" : "violated") << ',';
        if (r.tv && r.kl)
            out << (analysis::pinsker_holds(*r.tv, *r.kl, slack) ? "ok" : "violated");
        out << '\n';
    }
    return out.str();
}

} // namespace lti::experiment
