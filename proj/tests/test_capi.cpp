// SPDX-License-Identifier: Apache-2.0
// Exercises the shared library through its C header only.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "lti/lti.h"

#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <string>
#include <thread>
#include <vector>

namespace fs = std::filesystem;

namespace {

lti_density* density(const char* family, const char* params, int dim) {
    lti_density* d = nullptr;
    REQUIRE(lti_density_create(family, params, dim, &d) == LTI_OK);
    return d;
}

std::string take(char* s) {
    std::string out = s ? s : "";
    lti_string_free(s);
    return out;
}

} // namespace

TEST_CASE("status strings and thread-local errors") {
    CHECK(std::string(lti_status_string(LTI_OK)) == "ok");
    CHECK(std::string(lti_status_string(LTI_ERR_TRAINING)) != "");
    CHECK(std::strlen(lti_version()) > 0);
    lti_density* d = nullptr;
    CHECK(lti_density_create("gaussian", nullptr, 1, &d) == LTI_ERR_CONFIGURATION);
    CHECK(d == nullptr);
    const std::string msg = lti_last_error();
    CHECK(msg.find("gaussian") != std::string::npos);
    std::string other;
    std::thread([&] { other = lti_last_error(); }).join();
    CHECK(other.empty());
    lti_density* u = density("uniform", nullptr, 1);
    CHECK(std::string(lti_last_error()).empty());
    CHECK(lti_density_pdf(nullptr, nullptr, nullptr) == LTI_ERR_INVALID_ARGUMENT);
    lti_density_free(u);
    lti_density_free(nullptr);
}

TEST_CASE("thread setting") {
    lti_set_threads(3);
    CHECK(lti_get_threads() == 3);
    lti_set_threads(0);
    CHECK(lti_get_threads() >= 1);
}

TEST_CASE("densities, rules and grids") {
    lti_density* t = density("tilt", "{\"slope\": 2.0}", 1);
    CHECK(lti_density_dim(t) == 1);
    double x = 0.75, p = 0;
    CHECK(lti_density_pdf(t, &x, &p) == LTI_OK);
    CHECK(p == doctest::Approx(1.5));
    std::vector<double> s(100);
    CHECK(lti_density_sample(t, 100, 3, s.data()) == LTI_OK);
    for (double v : s) CHECK((v >= 0 && v <= 1));

    double nodes[5], weights[5];
    CHECK(lti_cc_rule(5, nodes, weights) == LTI_OK);
    double sum = 0;
    for (double w : weights) sum += w;
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-14));

    lti_density* u2 = density("uniform", nullptr, 2);
    lti_grid* g = nullptr;
    CHECK(lti_grid_create(u2, 2, &g) == LTI_OK);
    CHECK(lti_grid_size(g) == 13);
    CHECK(lti_grid_dim(g) == 2);
    double node[2], w = 0;
    CHECK(lti_grid_node(g, 0, node, &w) == LTI_OK);
    CHECK(lti_grid_node(g, 13, node, &w) == LTI_ERR_INVALID_ARGUMENT);
    const auto path = fs::temp_directory_path() / "lti_capi_grid.txt";
    CHECK(lti_grid_write(g, path.c_str()) == LTI_OK);
    CHECK(fs::file_size(path) > 0);
    fs::remove(path);
    lti_grid_free(g);
    lti_density_free(u2);
    lti_density_free(t);
}

TEST_CASE("transport, flows and integration") {
    lti_density* u = density("uniform", nullptr, 1);
    lti_density* t = density("tilt", "{\"slope\": 2.0}", 1);
    lti_transport* kr = nullptr;
    REQUIRE(lti_transport_create(u, t, &kr) == LTI_OK);
    double x = 0.49, y = 0;
    CHECK(lti_transport_map(kr, &x, &y) == LTI_OK);
    CHECK(y == doctest::Approx(0.7).epsilon(1e-8));

    lti_field* f = nullptr;
    REQUIRE(lti_field_create_transport(kr, &f) == LTI_OK);
    CHECK(lti_field_param_count(f) == 0);
    lti_flow* fm = nullptr;
    REQUIRE(lti_flow_create(f, 64, &fm) == LTI_OK);
    CHECK(lti_flow_forward(fm, &x, &y) == LTI_OK);
    CHECK(std::abs(y - 0.7) < 1e-5);
    double back = 0;
    CHECK(lti_flow_inverse(fm, &y, &back) == LTI_OK);
    CHECK(std::abs(back - x) < 1e-4);

    lti_grid* g = nullptr;
    REQUIRE(lti_grid_create(u, 4, &g) == LTI_OK);
    double est = 0, ref = 0;
    CHECK(lti_integrate_via_flow(g, fm, "coordinate", nullptr, &est) == LTI_OK);
    CHECK(std::abs(est - 2.0 / 3) < 1e-3);
    CHECK(lti_reference_expectation(t, "coordinate", "{}", &ref) == LTI_OK);
    CHECK(ref == doctest::Approx(2.0 / 3));
    double kl = -1, tv = -1;
    CHECK(lti_divergences(t, fm, u, &kl, &tv) == LTI_OK);
    CHECK(std::abs(kl) < 2e-3);
    CHECK(tv < 2e-3);
    CHECK(lti_integrate_via_flow(g, fm, "sine", nullptr, &est) == LTI_ERR_INVALID_ARGUMENT);
    double grad[1];
    CHECK(lti_flow_log_density_gradient(fm, u, &y, nullptr, grad) == LTI_ERR_INVALID_ARGUMENT);

    lti_grid_free(g);
    lti_flow_free(fm);
    lti_field_free(f);
    lti_transport_free(kr);
    lti_density_free(t);
    lti_density_free(u);
}

TEST_CASE("network fields, checkpoints and training") {
    lti_field* f = nullptr;
    REQUIRE(lti_field_create_network(1, 2, 4, 2, nullptr, 0, &f) == LTI_OK);
    const size_t q = lti_field_param_count(f);
    CHECK(q == 2 * 4 + 4 + 4 * 4 + 4 + 4 + 1);
    std::vector<double> theta(q, 0.0);
    theta.back() = 1.0;  // output bias
    lti_field* g = nullptr;
    REQUIRE(lti_field_create_network(1, 2, 4, 2, theta.data(), q, &g) == LTI_OK);
    double x = 0.5, v = 0, div = 0;
    CHECK(lti_field_evaluate(g, &x, 0.0, &v) == LTI_OK);
    CHECK(v == doctest::Approx(0.25));
    CHECK(lti_field_divergence(g, &x, 0.0, &div) == LTI_OK);
    CHECK(div == doctest::Approx(0.0).epsilon(1e-12));
    lti_field* bad = nullptr;
    CHECK(lti_field_create_network(1, 2, 4, 2, theta.data(), q - 1, &bad) == LTI_ERR_INVALID_ARGUMENT);
    CHECK(bad == nullptr);

    const auto path = fs::temp_directory_path() / "lti_capi_checkpoint.txt";
    CHECK(lti_field_save(g, path.c_str()) == LTI_OK);
    lti_field* loaded = nullptr;
    REQUIRE(lti_field_load(path.c_str(), &loaded) == LTI_OK);
    std::vector<double> back(q);
    CHECK(lti_field_params(loaded, back.data()) == LTI_OK);
    CHECK(back == theta);
    fs::remove(path);
    CHECK(lti_field_load("/nonexistent/ckpt", &loaded) == LTI_ERR_IO);

    lti_density* u = density("uniform", nullptr, 1);
    lti_density* t = density("tilt", "{\"slope\": 2.0}", 1);
    std::vector<double> samples(200);
    REQUIRE(lti_density_sample(t, 200, 1, samples.data()) == LTI_OK);
    lti_flow* fm = nullptr;
    REQUIRE(lti_flow_create(g, 8, &fm) == LTI_OK);
    double nll = 0, value = 0;
    CHECK(lti_empirical_nll(fm, u, samples.data(), 200, &nll) == LTI_OK);
    // At zero parameters only the output bias moves the density: d/db = -(1 - 2y).
    lti_flow* zero = nullptr;
    REQUIRE(lti_flow_create(f, 8, &zero) == LTI_OK);
    std::vector<double> grad(q);
    CHECK(lti_flow_log_density_gradient(zero, u, samples.data(), &value, grad.data()) == LTI_OK);
    CHECK(value == 0.0);
    CHECK(grad.back() == doctest::Approx(-(1 - 2 * samples[0])).epsilon(1e-12));
    lti_flow_free(zero);

    lti_field* trained = nullptr;
    double final_nll = 0;
    CHECK(lti_train("{\"seed\": 2, \"max_epochs\": 3, \"width\": 4, \"flow_steps\": 8}", samples.data(), 200, u,
                    &trained, &final_nll) == LTI_OK);
    CHECK(std::isfinite(final_nll));
    CHECK(lti_field_param_count(trained) == q);
    CHECK(lti_train("{\"max_epoch\": 3}", samples.data(), 200, u, &trained, &final_nll) == LTI_ERR_CONFIGURATION);
    CHECK(std::string(lti_last_error()).find("max_epoch") != std::string::npos);

    lti_flow_free(fm);
    lti_field_free(trained);
    lti_field_free(loaded);
    lti_field_free(g);
    lti_field_free(f);
    lti_density_free(t);
    lti_density_free(u);
}

TEST_CASE("calculators") {
    double lip0 = 0, lip1 = 0, logc = 0;
    CHECK(lti_capacity_constants(2, 4, 2, &lip0, &lip1, &logc) == LTI_OK);
    CHECK(lip0 == doctest::Approx(40.438102543789594855).epsilon(1e-12));
    CHECK(lip1 == doctest::Approx(52.627074807666917576).epsilon(1e-12));
    CHECK(logc == doctest::Approx(5.2574953720277815479).epsilon(1e-12));
    int w = 0, l = 0, k = 0;
    CHECK(lti_adaptive_architecture(1e6, 0.25, 1.0, 1, &w, &l, &k) == LTI_OK);
    CHECK(w == 2);
    double lg = 0;
    CHECK(lti_sample_threshold(0.1, 0.05, 0.25, 1.0, 1.0, &lg) == LTI_OK);
    CHECK(lg == doctest::Approx(16.177725892285743898).epsilon(1e-12));
    char* out = nullptr;
    CHECK(lti_calc("schedule", "{\"n\": 1e6}", &out) == LTI_OK);
    CHECK(take(out).find("\"width\": 2") != std::string::npos);
    CHECK(lti_calc("volume", nullptr, &out) == LTI_ERR_CONFIGURATION);
    CHECK(lti_calc("schedule", "{not json", &out) == LTI_ERR_CONFIGURATION);
}

TEST_CASE("experiments") {
    const auto dir = fs::temp_directory_path() / "lti_capi_experiment";
    fs::remove_all(dir);
    const std::string spec = R"({"dim": 1, "seed": 3, "target": {"family": "tilt", "params": {"slope": 2.0}},
        "training": {"model": "transport", "sample_sizes": [1], "flow_steps": 32}, "grid": {"levels": [0, 1]}})";
    lti_experiment* e = nullptr;
    REQUIRE(lti_experiment_parse(spec.c_str(), &e) == LTI_OK);
    CHECK(lti_experiment_set_levels(e, 2, 3) == LTI_OK);
    CHECK(lti_experiment_set_levels(e, 3, 2) == LTI_ERR_CONFIGURATION);
    CHECK(lti_experiment_set_output_dir(e, dir.c_str()) == LTI_OK);
    CHECK(lti_experiment_set_seed(e, 11) == LTI_OK);
    char* out = nullptr;
    CHECK(lti_experiment_to_json(e, &out) == LTI_OK);
    const auto text = take(out);
    CHECK(text.find("\"seed\": 11") != std::string::npos);
    lti_experiment* again = nullptr;
    REQUIRE(lti_experiment_parse(text.c_str(), &again) == LTI_OK);
    CHECK(lti_experiment_to_json(again, &out) == LTI_OK);
    CHECK(take(out) == text);
    lti_experiment_free(again);

    CHECK(lti_cmd_grid(e, &out) == LTI_OK);
    CHECK(take(out).find("grid_d1_l3.txt") != std::string::npos);
    CHECK(lti_cmd_run(e, &out) == LTI_OK);
    const auto csv = take(out);
    CHECK(csv.rfind("n,level,m_nodes,total,quad,tv,kl,seed\n1,2,5,", 0) == 0);
    CHECK(lti_cmd_report((dir / "results.jsonl").c_str(), &out) == LTI_OK);
    CHECK(take(out).find(",ok,ok") != std::string::npos);
    CHECK(lti_cmd_report("/nonexistent/results.jsonl", &out) == LTI_ERR_IO);
    lti_experiment_free(e);

    CHECK(lti_experiment_parse("{\"dim\": 1, \"sed\": 1}", &e) == LTI_ERR_CONFIGURATION);
    CHECK(std::string(lti_last_error()) == "sed: unknown key");
    CHECK(lti_experiment_parse("{", &e) == LTI_ERR_CONFIGURATION);
    CHECK(lti_experiment_load("/nonexistent.json", &e) == LTI_ERR_CONFIGURATION);
    fs::remove_all(dir);
}
