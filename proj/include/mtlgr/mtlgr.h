/*
 * mtlgr C API.
 *
 * Graph-regularized multi-task LASSO with missing-data covariance
 * estimators. Every object is an opaque handle created by a function that
 * returns mtlgr_status and released by the matching *_free function.
 * Matrices cross the boundary as column-major double arrays sized by the
 * caller. On failure, mtlgr_last_error() describes the most recent error
 * raised on the calling thread.
 */
#ifndef MTLGR_H
#define MTLGR_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(MTLGR_BUILDING)
#    define MTLGR_API __declspec(dllexport)
#  else
#    define MTLGR_API __declspec(dllimport)
#  endif
#else
#  define MTLGR_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum mtlgr_status {
    MTLGR_OK = 0,
    MTLGR_INVALID_ARGUMENT = 1,
    MTLGR_DEGENERATE_COLUMN = 2,
    MTLGR_SCHEMA_ERROR = 3,
    MTLGR_INVALID_DATA = 4,
    MTLGR_IO_ERROR = 5,
    MTLGR_NUMERICAL_FAILURE = 6,
    MTLGR_CONFIG_ERROR = 7,
    MTLGR_TUNING_FAILURE = 8,
    MTLGR_INTERNAL_ERROR = 9
} mtlgr_status;

typedef enum mtlgr_method {
    MTLGR_MEAN_IMPUTE = 0,
    MTLGR_MF_LGR = 1,
    MTLGR_RLGR = 2,
    MTLGR_RLGR1 = 3
} mtlgr_method;

typedef enum mtlgr_support {
    MTLGR_SUPPORT_CORRELATED = 0,
    MTLGR_SUPPORT_SHARED = 1,
    MTLGR_SUPPORT_INDEPENDENT = 2
} mtlgr_support;

typedef struct mtlgr_graph mtlgr_graph;
typedef struct mtlgr_dataset mtlgr_dataset;
typedef struct mtlgr_model mtlgr_model;
typedef struct mtlgr_config mtlgr_config;
typedef struct mtlgr_sweep mtlgr_sweep;

typedef struct mtlgr_synth_params {
    int32_t features;
    int32_t tasks;
    int32_t rows;
    int32_t sparsity;
    double noise_std;
    mtlgr_support support;
    int32_t shared_features;
} mtlgr_synth_params;

typedef struct mtlgr_hyper {
    double mu;
    double lambda;
    double delta; /* rlgr1 only */
    int32_t rank; /* mf-lgr only */
} mtlgr_hyper;

typedef struct mtlgr_solver_settings {
    int32_t max_iters;
    double tol;
    double initial_step; /* <= 0 selects the automatic step */
} mtlgr_solver_settings;

/* Absent metrics are NaN. */
typedef struct mtlgr_result_row {
    mtlgr_method method;
    double missing_fraction;
    int32_t replication;
    double nmse_w;
    double nmse_gamma;
    double prediction_nmse;
    double rmse;
    mtlgr_hyper hyper;
    double runtime_ms;
    int32_t converged;
    int32_t iterations;
} mtlgr_result_row;

MTLGR_API const char* mtlgr_version(void);
MTLGR_API const char* mtlgr_status_string(mtlgr_status status);
MTLGR_API const char* mtlgr_last_error(void);
MTLGR_API const char* mtlgr_method_name(mtlgr_method method);
MTLGR_API mtlgr_status mtlgr_method_parse(const char* tag, mtlgr_method* out);

/* Task graph. Edge arrays hold 1-based (i, k) pairs back to back. */
MTLGR_API mtlgr_status mtlgr_graph_chain(int32_t task_count, mtlgr_graph** out);
MTLGR_API mtlgr_status mtlgr_graph_from_edges(int32_t task_count, const int32_t* edges, int32_t edge_count,
                                              mtlgr_graph** out);
MTLGR_API void mtlgr_graph_free(mtlgr_graph* graph);
MTLGR_API int32_t mtlgr_graph_task_count(const mtlgr_graph* graph);
MTLGR_API int32_t mtlgr_graph_edge_count(const mtlgr_graph* graph);
/* K x |E| into `out`. */
MTLGR_API mtlgr_status mtlgr_graph_incidence(const mtlgr_graph* graph, int32_t* out);
/* K x K into `out`. */
MTLGR_API mtlgr_status mtlgr_graph_laplacian(const mtlgr_graph* graph, double* out);

/* Datasets. A dataset owns one masked task per graph node. */
MTLGR_API void mtlgr_synth_params_default(mtlgr_synth_params* params);
/* `graph` may be NULL for a chain. `truth` may be NULL. */
MTLGR_API mtlgr_status mtlgr_dataset_synthetic(const mtlgr_synth_params* params, const mtlgr_graph* graph,
                                               uint64_t seed, mtlgr_dataset** out, mtlgr_model** truth);
MTLGR_API mtlgr_status mtlgr_dataset_create(int32_t features, mtlgr_dataset** out);
/* values: rows x features; mask: rows x features with nonzero = observed, or
 * NULL for fully observed; response: rows. The graph is reset to a chain. */
MTLGR_API mtlgr_status mtlgr_dataset_add_task(mtlgr_dataset* data, int32_t rows, const double* values,
                                              const uint8_t* mask, const double* response);
MTLGR_API mtlgr_status mtlgr_dataset_set_graph(mtlgr_dataset* data, const mtlgr_graph* graph);
MTLGR_API mtlgr_status mtlgr_dataset_load_csv(const char* const* paths, int32_t count, mtlgr_dataset** out);
MTLGR_API mtlgr_status mtlgr_dataset_write_csv(const mtlgr_dataset* data, const char* dir, const char* stem);
MTLGR_API void mtlgr_dataset_free(mtlgr_dataset* data);
MTLGR_API int32_t mtlgr_dataset_task_count(const mtlgr_dataset* data);
MTLGR_API int32_t mtlgr_dataset_feature_count(const mtlgr_dataset* data);
MTLGR_API int32_t mtlgr_dataset_rows(const mtlgr_dataset* data, int32_t task);
MTLGR_API double mtlgr_dataset_missing_rate(const mtlgr_dataset* data, int32_t task);
MTLGR_API mtlgr_status mtlgr_dataset_response(const mtlgr_dataset* data, int32_t task, double* out);
MTLGR_API mtlgr_status mtlgr_dataset_inject_mcar(const mtlgr_dataset* data, double fraction, uint64_t seed,
                                                 mtlgr_dataset** out);
MTLGR_API mtlgr_status mtlgr_dataset_l2_normalize(const mtlgr_dataset* data, mtlgr_dataset** out);
/* Scales `data` with the observed-entry column norms of `reference`. */
MTLGR_API mtlgr_status mtlgr_dataset_scale_like(const mtlgr_dataset* data, const mtlgr_dataset* reference,
                                                mtlgr_dataset** out);
MTLGR_API mtlgr_status mtlgr_dataset_split(const mtlgr_dataset* data, double train_fraction, uint64_t seed,
                                           mtlgr_dataset** train, mtlgr_dataset** test);
/* Second-moment estimate of one task under `method`: gamma_mat is p x p,
 * gamma_vec is p. Baselines impute first and return the empirical pair. */
MTLGR_API mtlgr_status mtlgr_dataset_moments(const mtlgr_dataset* data, int32_t task, mtlgr_method method,
                                             const mtlgr_hyper* hyper, double* gamma_mat, double* gamma_vec);

/* Fitting. `settings` may be NULL for defaults. */
MTLGR_API void mtlgr_solver_settings_default(mtlgr_solver_settings* settings);
MTLGR_API mtlgr_status mtlgr_fit(const mtlgr_dataset* train, mtlgr_method method, const mtlgr_hyper* hyper,
                                 const mtlgr_solver_settings* settings, mtlgr_model** out);
MTLGR_API void mtlgr_model_free(mtlgr_model* model);
MTLGR_API int32_t mtlgr_model_feature_count(const mtlgr_model* model);
MTLGR_API int32_t mtlgr_model_task_count(const mtlgr_model* model);
/* p x K into `out`. */
MTLGR_API mtlgr_status mtlgr_model_coefficients(const mtlgr_model* model, double* out);
MTLGR_API int32_t mtlgr_model_iterations(const mtlgr_model* model);
MTLGR_API int32_t mtlgr_model_converged(const mtlgr_model* model);
MTLGR_API double mtlgr_model_final_objective(const mtlgr_model* model);
MTLGR_API mtlgr_status mtlgr_model_write_csv(const mtlgr_model* model, const char* path);
/* Predicts one task of `data`; missing entries are filled with the observed
 * column means of the same task in `fill_from` (NULL: `data` itself). */
MTLGR_API mtlgr_status mtlgr_model_predict(const mtlgr_model* model, const mtlgr_dataset* data,
                                           const mtlgr_dataset* fill_from, int32_t task, double* out);
MTLGR_API mtlgr_status mtlgr_evaluate(const mtlgr_model* model, const mtlgr_dataset* test,
                                      const mtlgr_dataset* train, double* prediction_nmse, double* rmse);
MTLGR_API mtlgr_status mtlgr_nmse_model(const mtlgr_model* estimate, const mtlgr_model* truth, double* out);

/* Experiments. */
MTLGR_API mtlgr_status mtlgr_config_default(mtlgr_config** out);
MTLGR_API mtlgr_status mtlgr_config_load(const char* path, mtlgr_config** out);
/* `base_dir` resolves relative CSV paths; may be NULL. */
MTLGR_API mtlgr_status mtlgr_config_parse(const char* json, const char* base_dir, mtlgr_config** out);
MTLGR_API void mtlgr_config_free(mtlgr_config* config);
MTLGR_API mtlgr_status mtlgr_config_set_seed(mtlgr_config* config, uint64_t seed);
MTLGR_API mtlgr_status mtlgr_config_set_output_dir(mtlgr_config* config, const char* dir);
MTLGR_API mtlgr_status mtlgr_config_set_threads(mtlgr_config* config, int32_t threads);
MTLGR_API mtlgr_status mtlgr_config_set_methods(mtlgr_config* config, const mtlgr_method* methods, int32_t count);
/* Writes 16 hex digits plus NUL; `len` must be at least 17. */
MTLGR_API mtlgr_status mtlgr_config_hash(const mtlgr_config* config, char* buf, size_t len);
MTLGR_API int32_t mtlgr_config_level_count(const mtlgr_config* config);
MTLGR_API uint64_t mtlgr_config_seed(const mtlgr_config* config);
/* Synthetic data described by the config (base missingness applied). */
MTLGR_API mtlgr_status mtlgr_config_generate(const mtlgr_config* config, uint64_t seed, mtlgr_dataset** out,
                                             mtlgr_model** truth);

MTLGR_API mtlgr_status mtlgr_sweep_run(const mtlgr_config* config, mtlgr_sweep** out);
MTLGR_API void mtlgr_sweep_free(mtlgr_sweep* sweep);
MTLGR_API int64_t mtlgr_sweep_row_count(const mtlgr_sweep* sweep);
MTLGR_API mtlgr_status mtlgr_sweep_row(const mtlgr_sweep* sweep, int64_t index, mtlgr_result_row* out);
/* Empty string when the row has no note; NULL on a bad index. */
MTLGR_API const char* mtlgr_sweep_row_note(const mtlgr_sweep* sweep, int64_t index);
/* Writes the result files; the raw CSV path is copied into `raw_path`. */
MTLGR_API mtlgr_status mtlgr_sweep_write(const mtlgr_sweep* sweep, const mtlgr_config* config, char* raw_path,
                                         size_t len);

/* level_index < 0 tunes across all levels. `criterion` may be NULL. */
MTLGR_API mtlgr_status mtlgr_tune(const mtlgr_config* config, mtlgr_method method, int32_t level_index,
                                  mtlgr_hyper* chosen, double* criterion);
/* Tunes every configured method (per the config's scope) and writes the
 * grid scores CSV; its path is copied into `path`. */
MTLGR_API mtlgr_status mtlgr_tune_write(const mtlgr_config* config, char* path, size_t len);

MTLGR_API mtlgr_status mtlgr_weibull_fit(const double* samples, int64_t count, double* shape, double* scale);
MTLGR_API double mtlgr_weibull_pdf(double x, double shape, double scale);

#ifdef __cplusplus
}
#endif

#endif /* MTLGR_H */
