/* C interface to the btydnn library. Every object is an opaque handle owned
 * by the caller and released with the matching *_free function. Functions
 * return a btyd_status; on failure btyd_last_error() holds a message for the
 * calling thread. */
#ifndef BTYDNN_H
#define BTYDNN_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define BTYD_API __declspec(dllexport)
#else
#define BTYD_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum {
  BTYD_OK = 0,
  BTYD_E_INVALID_ARGUMENT = 1,
  BTYD_E_IO = 2,
  BTYD_E_PARSE = 3,
  BTYD_E_DOMAIN = 4,
  BTYD_E_STATE = 5,
  BTYD_E_INTERNAL = 6
} btyd_status;

typedef struct btyd_log btyd_log;
typedef struct btyd_cohort btyd_cohort;
typedef struct btyd_params btyd_params;
typedef struct btyd_model btyd_model;
typedef struct btyd_forecasts btyd_forecasts;
typedef struct btyd_report btyd_report;
typedef struct btyd_config btyd_config;

BTYD_API const char* btyd_version(void);
BTYD_API const char* btyd_status_name(btyd_status s);
/* Message of the last failure on this thread; "" if none. */
BTYD_API const char* btyd_last_error(void);

/* Per-stage seeds fanned out from one global seed, as used by a full run. */
typedef struct {
  uint64_t split, chain, network, synthetic;
} btyd_stage_seeds;

BTYD_API void btyd_derive_stage_seeds(uint64_t global_seed, btyd_stage_seeds* out);

/* ---- transaction logs ---------------------------------------------------- */

typedef struct {
  size_t records;
  size_t customers;
  int has_units;
  char start_date[11]; /* YYYY-MM-DD */
  char end_date[11];
} btyd_log_info;

/* format: "cdnow" (whitespace, YYYYMMDD) or "csv" (header-declared columns). */
BTYD_API btyd_status btyd_log_load(const char* path, const char* format, btyd_log** out);
BTYD_API btyd_status btyd_log_save_csv(const btyd_log* log, const char* path);
BTYD_API btyd_status btyd_log_info_get(const btyd_log* log, btyd_log_info* out);
BTYD_API void btyd_log_free(btyd_log* log);

typedef struct {
  size_t customers;
  uint64_t seed;
  double r, alpha, s, beta;
  long acquisition_window_days;
  long total_days;
} btyd_synthetic_options;

BTYD_API void btyd_synthetic_defaults(btyd_synthetic_options* opt);
/* truth may be NULL; otherwise receives the true (lambda, mu) per customer. */
BTYD_API btyd_status btyd_simulate(const btyd_synthetic_options* opt, btyd_log** log,
                                   btyd_params** truth);

/* ---- cohorts --------------------------------------------------------------- */

typedef struct {
  size_t train_customers;
  size_t test_customers;
  double holdout_weeks;
  char split_date[11];
} btyd_cohort_info;

/* covariates: comma-separated names (total_units, total_spend, mean_spend) or NULL. */
BTYD_API btyd_status btyd_cohort_prepare(const btyd_log* log, double train_fraction,
                                         uint64_t seed, const char* covariates,
                                         btyd_cohort** out);
BTYD_API btyd_status btyd_cohort_save(const btyd_cohort* c, const char* dir);
BTYD_API btyd_status btyd_cohort_load(const char* dir, btyd_cohort** out);
/* Test-only cohort from one summaries CSV. */
BTYD_API btyd_status btyd_cohort_from_summaries(const char* csv, double holdout_weeks,
                                                btyd_cohort** out);
BTYD_API btyd_status btyd_cohort_info_get(const btyd_cohort* c, btyd_cohort_info* out);
BTYD_API void btyd_cohort_free(btyd_cohort* c);

/* ---- MCMC labels ------------------------------------------------------------ */

typedef struct {
  int sweeps;
  int burn_in;
  int thin;
  uint64_t seed;
  double a0, b0;
} btyd_chain_config;

typedef struct {
  double r, alpha, s, beta;
} btyd_hyper;

BTYD_API void btyd_chain_defaults(btyd_chain_config* cfg);
/* Runs the chain over train and test customers. mean_hyper and trace_path may be NULL. */
BTYD_API btyd_status btyd_fit_mcmc(const btyd_cohort* c, const btyd_chain_config* cfg,
                                   btyd_params** labels, btyd_hyper* mean_hyper,
                                   const char* trace_path);

BTYD_API btyd_status btyd_params_save(const btyd_params* p, const char* path);
BTYD_API btyd_status btyd_params_load(const char* path, btyd_params** out);
BTYD_API size_t btyd_params_count(const btyd_params* p);
/* id points into the handle and lives as long as it. */
BTYD_API btyd_status btyd_params_get(const btyd_params* p, size_t i, const char** id,
                                     double* lambda, double* mu);
BTYD_API void btyd_params_free(btyd_params* p);

/* ---- neural surrogate -------------------------------------------------------- */

typedef struct {
  int hidden_layers;
  int hidden_width;
  double dropout;
  int epochs;
  int batch_size;
  double learning_rate;
  int patience; /* 0 disables early stopping */
  double validation_fraction;
  uint64_t seed;
} btyd_train_config;

BTYD_API void btyd_train_defaults(btyd_train_config* cfg);
/* loss: mse, mae, nll, nll_mse, nll_mae, ratio, ratio_mse, ratio_mae.
 * ratio: weighted_nll or abs_log_ratio; NULL means weighted_nll. */
BTYD_API btyd_status btyd_train(const btyd_cohort* c, const btyd_params* labels,
                                const btyd_train_config* cfg, const char* loss,
                                const char* ratio, btyd_model** out);
BTYD_API btyd_status btyd_model_save(const btyd_model* m, const char* path);
BTYD_API btyd_status btyd_model_load(const char* path, btyd_model** out);
BTYD_API btyd_status btyd_model_save_history(const btyd_model* m, const char* path);
/* Predicted (lambda, mu) for the cohort's test customers. */
BTYD_API btyd_status btyd_model_predict(const btyd_model* m, const btyd_cohort* c,
                                        btyd_params** out);
BTYD_API void btyd_model_free(btyd_model* m);

/* ---- forecasts and metrics ---------------------------------------------------- */

/* Forecasts for the test customers; params are matched by customer id.
 * rounding: "nearest" or "floor"; NULL means nearest. */
BTYD_API btyd_status btyd_forecast(const btyd_cohort* c, const btyd_params* p,
                                   double threshold, const char* rounding,
                                   btyd_forecasts** out);
BTYD_API btyd_status btyd_forecasts_save(const btyd_forecasts* f, const char* path);
BTYD_API btyd_status btyd_forecasts_load(const char* path, btyd_forecasts** out);
BTYD_API size_t btyd_forecasts_count(const btyd_forecasts* f);
BTYD_API void btyd_forecasts_free(btyd_forecasts* f);

/* baseline may be NULL (no consistency value). */
BTYD_API btyd_status btyd_evaluate(const btyd_cohort* c, const btyd_forecasts* f,
                                   const btyd_forecasts* baseline, int cap,
                                   const char* model_name, btyd_report** out);
/* JSON text owned by the handle. */
BTYD_API const char* btyd_report_json(const btyd_report* r);
BTYD_API btyd_status btyd_report_save_json(const btyd_report* r, const char* path);
BTYD_API void btyd_report_free(btyd_report* r);

/* ---- full experiment ------------------------------------------------------------ */

BTYD_API btyd_status btyd_config_default(btyd_config** out);
BTYD_API btyd_status btyd_config_load(const char* path, btyd_config** out);
BTYD_API btyd_status btyd_config_set(btyd_config* cfg, const char* key, const char* value);
BTYD_API const char* btyd_config_output_dir(const btyd_config* cfg);
/* Writes all artifacts under the configured output directory. */
BTYD_API btyd_status btyd_run_experiment(const btyd_config* cfg);
BTYD_API void btyd_config_free(btyd_config* cfg);

#ifdef __cplusplus
}
#endif

#endif
