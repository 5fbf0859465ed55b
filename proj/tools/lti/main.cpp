// SPDX-License-Identifier: Apache-2.0
//
// lti: command-line front end over the C API.
#include "lti/lti.h"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace {

constexpr int exit_other = 1;
constexpr int exit_config = 2;
constexpr int exit_training = 3;
constexpr int exit_integration = 4;

int exit_code(lti_status s) {
    switch (s) {
    case LTI_OK: return 0;
    case LTI_ERR_CONFIGURATION:
    case LTI_ERR_INVALID_ARGUMENT: return exit_config;
    case LTI_ERR_TRAINING: return exit_training;
    case LTI_ERR_INTEGRATION:
    case LTI_ERR_EVALUATION: return exit_integration;
    default: return exit_other;
    }
}

struct Failure {
    int code;
};

void check(lti_status s) {
    if (s == LTI_OK) return;
    std::cerr << "lti: " << lti_status_string(s) << ": " << lti_last_error() << '\n';
    throw Failure{exit_code(s)};
}

struct ExperimentDeleter {
    void operator()(lti_experiment* e) const { lti_experiment_free(e); }
};
using Experiment = std::unique_ptr<lti_experiment, ExperimentDeleter>;

std::string take(char* s) {
    std::string out = s ? s : "";
    lti_string_free(s);
    return out;
}

std::pair<int, int> parse_levels(const std::string& text) {
    const auto dots = text.find("..");
    try {
        if (dots == std::string::npos) {
            const int l = std::stoi(text);
            return {l, l};
        }
        return {std::stoi(text.substr(0, dots)), std::stoi(text.substr(dots + 2))};
    } catch (const std::exception&) {
        std::cerr << "lti: --levels expects a..b, got '" << text << "'\n";
        throw Failure{exit_config};
    }
}

struct Common {
    std::string spec;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::string levels;
};

Experiment load(const Common& c) {
    if (c.spec.empty()) {
        std::cerr << "lti: --spec is required\n";
        throw Failure{exit_config};
    }
    lti_experiment* raw = nullptr;
    check(lti_experiment_load(c.spec.c_str(), &raw));
    Experiment e(raw);
    if (c.seed) check(lti_experiment_set_seed(e.get(), *c.seed));
    if (!c.out.empty()) check(lti_experiment_set_output_dir(e.get(), c.out.c_str()));
    if (!c.levels.empty()) {
        const auto [a, b] = parse_levels(c.levels);
        check(lti_experiment_set_levels(e.get(), a, b));
    }
    return e;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Learn-then-integrate: sparse-grid quadrature through learned transport"};
    app.require_subcommand(1);
    unsigned threads = 0;
    app.add_option("--threads", threads, "Worker threads (default: LTI_THREADS, else 1)");

    Common common;
    const auto add_common = [&](CLI::App* sub, bool with_seed) {
        sub->add_option("--spec", common.spec, "Experiment spec (JSON)");
        sub->add_option("--out", common.out, "Output directory (overrides the spec)");
        sub->add_option("--levels", common.levels, "Level range a..b (overrides the spec)");
        if (with_seed) sub->add_option("--seed", common.seed, "Seed (overrides the spec)");
        sub->add_option("--threads", threads, "Worker threads");
    };

    auto* grid = app.add_subcommand("grid", "Write sparse grids and print node counts");
    add_common(grid, false);
    auto* run = app.add_subcommand("run", "Sample, train, integrate and write the error table");
    add_common(run, true);

    auto* calc = app.add_subcommand("calc", "Evaluate a formula calculator");
    std::string kind, params_json;
    std::vector<std::string> assignments;
    calc->add_option("kind", kind, "constants | threshold | schedule")->required();
    calc->add_option("assignments", assignments, "key=value pairs");
    calc->add_option("--params", params_json, "Parameters as a JSON object");
    calc->add_option("--threads", threads, "Worker threads");

    auto* report = app.add_subcommand("report", "Summarize a results file with audit columns");
    std::string results;
    report->add_option("--results", results, "Results file (JSON lines)");
    add_common(report, false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : exit_config;
    }

    try {
        lti_set_threads(threads);
        if (*grid) {
            const auto e = load(common);
            char* out = nullptr;
            check(lti_cmd_grid(e.get(), &out));
            const auto rows = nlohmann::json::parse(take(out));
            std::cout << "level,nodes,asymptotic,file\n";
            for (const auto& r : rows)
                std::cout << r.at("level").get<int>() << ',' << r.at("nodes").get<std::size_t>() << ','
                          << r.at("asymptotic").get<double>() << ',' << r.at("file").get<std::string>() << '\n';
        } else if (*run) {
            const auto e = load(common);
            char* out = nullptr;
            check(lti_cmd_run(e.get(), &out));
            std::cout << take(out);
        } else if (*calc) {
            nlohmann::json params = nlohmann::json::object();
            if (!params_json.empty()) {
                try {
                    params = nlohmann::json::parse(params_json);
                } catch (const nlohmann::json::exception& ex) {
                    std::cerr << "lti: --params: " << ex.what() << '\n';
                    return exit_config;
                }
            }
            for (const auto& a : assignments) {
                const auto eq = a.find('=');
                if (eq == std::string::npos || eq == 0) {
                    std::cerr << "lti: expected key=value, got '" << a << "'\n";
                    return exit_config;
                }
                const auto key = a.substr(0, eq), value = a.substr(eq + 1);
                try {
                    params[key] = nlohmann::json::parse(value);
                } catch (const nlohmann::json::exception&) {
                    params[key] = value;
                }
            }
            char* out = nullptr;
            check(lti_calc(kind.c_str(), params.dump().c_str(), &out));
            std::cout << take(out) << '\n';
        } else if (*report) {
            std::string path = results;
            if (path.empty()) {
                const auto e = load(common);
                char* spec = nullptr;
                check(lti_experiment_to_json(e.get(), &spec));
                const auto j = nlohmann::json::parse(take(spec));
                path = j.at("outputs").at("dir").get<std::string>() + "/" +
                       j.at("outputs").at("results").get<std::string>();
            }
            char* out = nullptr;
            check(lti_cmd_report(path.c_str(), &out));
            std::cout << take(out);
        }
    } catch (const Failure& f) {
        return f.code;
    } catch (const std::exception& ex) {
        std::cerr << "lti: " << ex.what() << '\n';
        return exit_other;
    }
    return 0;
}
