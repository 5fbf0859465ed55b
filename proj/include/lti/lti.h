/* SPDX-License-Identifier: Apache-2.0 */
/*
 * C interface to the learn-then-integrate library: densities, sparse grids,
 * transport oracles, network flows, training, error analysis and the
 * experiment commands.
 *
 * Every fallible call returns an lti_status. On failure the message is kept
 * per thread and read with lti_last_error(). Handles are opaque, owned by the
 * caller and released with the matching *_free function (NULL is accepted).
 * Strings returned through char** are released with lti_string_free.
 * Axes are 0-based; points are row-major double arrays of length dim.
 */
#ifndef LTI_LTI_H
#define LTI_LTI_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define LTI_API __declspec(dllexport)
#else
#define LTI_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum lti_status {
    LTI_OK = 0,
    LTI_ERR_INVALID_ARGUMENT = 1,
    LTI_ERR_INVALID_WEIGHT = 2,
    LTI_ERR_EVALUATION = 3,
    LTI_ERR_UNSUPPORTED_DIMENSION = 4,
    LTI_ERR_INVERSION = 5,
    LTI_ERR_OVERFLOW = 6,
    LTI_ERR_INTEGRATION = 7,
    LTI_ERR_DOMAIN = 8,
    LTI_ERR_TRAINING = 9,
    LTI_ERR_CONFIGURATION = 10,
    LTI_ERR_IO = 11,
    LTI_ERR_INTERNAL = 12
} lti_status;

typedef struct lti_density lti_density;
typedef struct lti_grid lti_grid;
typedef struct lti_transport lti_transport;
typedef struct lti_field lti_field;
typedef struct lti_flow lti_flow;
typedef struct lti_experiment lti_experiment;

LTI_API const char* lti_version(void);
LTI_API const char* lti_status_string(lti_status status);
/* Message of the last failed call on this thread; "" after a success. */
LTI_API const char* lti_last_error(void);
LTI_API void lti_string_free(char* s);

/* 0 restores the default (LTI_THREADS, else 1). */
LTI_API void lti_set_threads(unsigned threads);
LTI_API unsigned lti_get_threads(void);

/* ---- densities ---------------------------------------------------------- */

/* family: uniform | tilt | parabolic | cosine | coupled; params_json may be NULL. */
LTI_API lti_status lti_density_create(const char* family, const char* params_json, int dim, lti_density** out);
LTI_API void lti_density_free(lti_density* density);
LTI_API int lti_density_dim(const lti_density* density);
LTI_API lti_status lti_density_pdf(const lti_density* density, const double* x, double* out);
/* n samples written to out (n * dim doubles), deterministic in seed. */
LTI_API lti_status lti_density_sample(const lti_density* density, size_t n, uint64_t seed, double* out);

/* ---- quadrature --------------------------------------------------------- */

/* m-point Clenshaw-Curtis rule on [0, 1] with unit weight. */
LTI_API lti_status lti_cc_rule(size_t m, double* nodes, double* weights);
/* Smolyak grid at `level` whose univariate rules carry the source weight. */
LTI_API lti_status lti_grid_create(const lti_density* source, int level, lti_grid** out);
LTI_API void lti_grid_free(lti_grid* grid);
LTI_API size_t lti_grid_size(const lti_grid* grid);
LTI_API int lti_grid_dim(const lti_grid* grid);
LTI_API lti_status lti_grid_node(const lti_grid* grid, size_t j, double* x, double* weight);
LTI_API lti_status lti_grid_write(const lti_grid* grid, const char* path);

/* ---- transport ---------------------------------------------------------- */

LTI_API lti_status lti_transport_create(const lti_density* source, const lti_density* target, lti_transport** out);
LTI_API void lti_transport_free(lti_transport* transport);
LTI_API lti_status lti_transport_map(const lti_transport* transport, const double* x, double* y);

/* ---- fields and flows --------------------------------------------------- */

/* Boundary-masked ReLU^power network field (dim+1, width x depth, dim).
 * theta may be NULL (all zeros), else param_count values. */
LTI_API lti_status lti_field_create_network(int dim, int depth, int width, int power, const double* theta,
                                            size_t count, lti_field** out);
/* Velocity of the displacement interpolation of a transport map. */
LTI_API lti_status lti_field_create_transport(const lti_transport* transport, lti_field** out);
LTI_API lti_status lti_field_load(const char* path, lti_field** out);
LTI_API lti_status lti_field_save(const lti_field* field, const char* path);
LTI_API void lti_field_free(lti_field* field);
LTI_API int lti_field_dim(const lti_field* field);
/* 0 for fields that are not networks. */
LTI_API size_t lti_field_param_count(const lti_field* field);
LTI_API lti_status lti_field_params(const lti_field* field, double* theta);
LTI_API lti_status lti_field_evaluate(const lti_field* field, const double* x, double t, double* out);
LTI_API lti_status lti_field_divergence(const lti_field* field, const double* x, double t, double* out);

LTI_API lti_status lti_flow_create(const lti_field* field, int steps, lti_flow** out);
LTI_API void lti_flow_free(lti_flow* flow);
LTI_API lti_status lti_flow_forward(const lti_flow* flow, const double* x, double* y);
LTI_API lti_status lti_flow_inverse(const lti_flow* flow, const double* y, double* x);
LTI_API lti_status lti_flow_log_density(const lti_flow* flow, const lti_density* source, const double* y,
                                        double* out);
/* grad receives param_count values (network fields only). */
LTI_API lti_status lti_flow_log_density_gradient(const lti_flow* flow, const lti_density* source, const double* y,
                                                 double* value, double* grad);

/* ---- training ----------------------------------------------------------- */

/* -(1/n) sum log density of the n samples under the flow. */
LTI_API lti_status lti_empirical_nll(const lti_flow* flow, const lti_density* source, const double* samples,
                                     size_t n, double* out);
/* config_json holds the "training" block of an experiment spec plus an
 * optional "seed". The trained field is returned in out_field. */
LTI_API lti_status lti_train(const char* config_json, const double* samples, size_t n, const lti_density* source,
                             lti_field** out_field, double* final_nll);

/* ---- analysis ----------------------------------------------------------- */

/* qoi family: constant | coordinate | product | monomial | abs_product | exp_sum. */
LTI_API lti_status lti_integrate_via_flow(const lti_grid* grid, const lti_flow* flow, const char* qoi_family,
                                          const char* qoi_params_json, double* out);
LTI_API lti_status lti_reference_expectation(const lti_density* target, const char* qoi_family,
                                             const char* qoi_params_json, double* out);
/* KL(target || flow_* source) and TV = 1/2 L1; grid probe for dim <= 2,
 * Monte Carlo beyond. Either output may be NULL. */
LTI_API lti_status lti_divergences(const lti_density* target, const lti_flow* flow, const lti_density* source,
                                   double* kl, double* tv);

/* ---- calculators -------------------------------------------------------- */

LTI_API lti_status lti_capacity_constants(int depth, int width, int dim, double* log_lip0, double* log_lip1,
                                          double* log_c);
LTI_API lti_status lti_adaptive_architecture(double n, double beta, double c_d, int dim, int* width, int* depth,
                                             int* resolution);
LTI_API lti_status lti_sample_threshold(double epsilon, double delta, double beta, double qoi_sup, double c,
                                        double* log10_n);
/* kind: constants | threshold | schedule; result is a JSON object. */
LTI_API lti_status lti_calc(const char* kind, const char* params_json, char** out_json);

/* ---- experiments -------------------------------------------------------- */

LTI_API lti_status lti_experiment_load(const char* path, lti_experiment** out);
LTI_API lti_status lti_experiment_parse(const char* json, lti_experiment** out);
LTI_API void lti_experiment_free(lti_experiment* experiment);
LTI_API lti_status lti_experiment_to_json(const lti_experiment* experiment, char** out_json);
LTI_API lti_status lti_experiment_set_seed(lti_experiment* experiment, uint64_t seed);
LTI_API lti_status lti_experiment_set_levels(lti_experiment* experiment, int min_level, int max_level);
LTI_API lti_status lti_experiment_set_output_dir(lti_experiment* experiment, const char* dir);

/* Writes grid files; out_json lists {level, nodes, asymptotic, file}. */
LTI_API lti_status lti_cmd_grid(const lti_experiment* experiment, char** out_json);
/* Runs the experiment; out_csv (may be NULL) receives the convergence table. */
LTI_API lti_status lti_cmd_run(const lti_experiment* experiment, char** out_csv);
/* Summarizes a results file as CSV with audit columns. */
LTI_API lti_status lti_cmd_report(const char* results_path, char** out_csv);

#ifdef __cplusplus
}
#endif

#endif /* LTI_LTI_H */
