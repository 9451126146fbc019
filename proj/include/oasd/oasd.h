#ifndef OASD_H
#define OASD_H

/* C interface to the OASD estimation library. All objects are opaque handles
 * owned by the caller and released with the matching *_free function. Every
 * fallible call returns an oasd_status; on failure oasd_last_error() holds a
 * message for the calling thread. Returned strings stay valid until the
 * owning handle is freed. */

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define OASD_API __declspec(dllexport)
#elif defined(__GNUC__)
#define OASD_API __attribute__((visibility("default")))
#else
#define OASD_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum oasd_status {
  OASD_OK = 0,
  OASD_ERR_INVALID_ARGUMENT = 1,
  OASD_ERR_CONFIG = 2,
  OASD_ERR_DATA = 3,
  OASD_ERR_NUMERICAL = 4,
  OASD_ERR_IO = 5,
  OASD_ERR_INTERNAL = 6
} oasd_status;

typedef struct oasd_dataset oasd_dataset;
typedef struct oasd_config oasd_config;
typedef struct oasd_estimate oasd_estimate;
typedef struct oasd_simulation oasd_simulation;
typedef struct oasd_derivative oasd_derivative;

/* One row of an estimate. Fields for an estimator that was not requested are 0. */
typedef struct oasd_interval_result {
  double y1, y2;
  int usable;
  double p_hat;
  double theta_adml, se_adml, ci_adml_lo, ci_adml_hi, band_adml_lo, band_adml_hi;
  double theta_naive, se_naive, ci_naive_lo, ci_naive_hi, band_naive_lo, band_naive_hi;
} oasd_interval_result;

typedef struct oasd_mc_cell {
  double rd2, ry2;
  char band[16];
  char estimator[8];
  double theta_true, mean_theta, bias_ratio, std, mse, coverage;
  int64_t reps;
} oasd_mc_cell;

OASD_API const char* oasd_version(void);
OASD_API const char* oasd_last_error(void);
OASD_API const char* oasd_status_name(oasd_status status);

/* Datasets. covariates is a comma-separated list or NULL/"" for every other column. */
OASD_API oasd_status oasd_dataset_load(const char* path, const char* outcome, const char* treatment,
                                       const char* covariates, oasd_dataset** out);
/* x is row-major n x k. */
OASD_API oasd_status oasd_dataset_from_arrays(size_t n, size_t k, const double* y, const double* d,
                                              const double* x, oasd_dataset** out);
OASD_API size_t oasd_dataset_rows(const oasd_dataset* data);
OASD_API size_t oasd_dataset_covariates(const oasd_dataset* data);
OASD_API const char* oasd_dataset_summary(const oasd_dataset* data);
OASD_API size_t oasd_dataset_warning_count(const oasd_dataset* data);
OASD_API const char* oasd_dataset_warning(const oasd_dataset* data, size_t index);
OASD_API void oasd_dataset_free(oasd_dataset* data);

/* Configuration. command is "estimate", "simulate" or "compare-derivative".
 * Unknown keys are rejected by oasd_config_set. */
OASD_API oasd_status oasd_config_create(const char* command, oasd_config** out);
OASD_API oasd_status oasd_config_set(oasd_config* cfg, const char* key, const char* value);
OASD_API oasd_status oasd_config_load_file(oasd_config* cfg, const char* path);
OASD_API oasd_status oasd_config_validate(const oasd_config* cfg);
/* Reads a string-valued setting ("out", "format", "input", "outcome", "treatment", "covariates").
 * The returned pointer is owned by cfg and valid until the next call on cfg. */
OASD_API const char* oasd_config_get(oasd_config* cfg, const char* key);
OASD_API void oasd_config_free(oasd_config* cfg);

/* Estimation on a dataset. */
OASD_API oasd_status oasd_run_estimate(const oasd_config* cfg, const oasd_dataset* data, oasd_estimate** out);
OASD_API uint64_t oasd_estimate_seed(const oasd_estimate* est);
OASD_API size_t oasd_estimate_interval_count(const oasd_estimate* est);
OASD_API oasd_status oasd_estimate_interval(const oasd_estimate* est, size_t index, oasd_interval_result* out);
OASD_API size_t oasd_estimate_warning_count(const oasd_estimate* est);
OASD_API const char* oasd_estimate_warning(const oasd_estimate* est, size_t index);
/* kind is "table", "json" or "csv". */
OASD_API const char* oasd_estimate_render(oasd_estimate* est, const char* kind);
/* Writes <prefix>.txt and <prefix>.json or <prefix>.csv. */
OASD_API oasd_status oasd_estimate_write(oasd_estimate* est, const char* prefix, const char* format);
OASD_API void oasd_estimate_free(oasd_estimate* est);

/* Monte Carlo reproduction of the main design. */
OASD_API oasd_status oasd_run_simulate(const oasd_config* cfg, oasd_simulation** out);
OASD_API uint64_t oasd_simulation_seed(const oasd_simulation* sim);
OASD_API size_t oasd_simulation_row_count(const oasd_simulation* sim);
OASD_API oasd_status oasd_simulation_row(const oasd_simulation* sim, size_t index, oasd_mc_cell* out);
/* Replication failures and other per-cell diagnostics. */
OASD_API size_t oasd_simulation_flag_count(const oasd_simulation* sim);
OASD_API const char* oasd_simulation_flag(const oasd_simulation* sim, size_t index);
OASD_API const char* oasd_simulation_render(oasd_simulation* sim, const char* kind);
OASD_API oasd_status oasd_simulation_write(oasd_simulation* sim, const char* prefix, const char* format);
OASD_API void oasd_simulation_free(oasd_simulation* sim);

/* Partial-difference versus direct derivative comparison. */
OASD_API oasd_status oasd_run_compare_derivative(const oasd_config* cfg, oasd_derivative** out);
OASD_API uint64_t oasd_derivative_seed(const oasd_derivative* cmp);
OASD_API size_t oasd_derivative_row_count(const oasd_derivative* cmp);
OASD_API oasd_status oasd_derivative_row(const oasd_derivative* cmp, size_t index, double* tau, double* partial,
                                         double* direct);
OASD_API const char* oasd_derivative_render(oasd_derivative* cmp, const char* kind);
OASD_API oasd_status oasd_derivative_write(oasd_derivative* cmp, const char* prefix, const char* format);
OASD_API void oasd_derivative_free(oasd_derivative* cmp);

#ifdef __cplusplus
}
#endif

#endif /* OASD_H */
