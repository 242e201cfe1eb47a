#ifndef UINJECT_UINJECT_H
#define UINJECT_UINJECT_H

/* C interface to libuinject.
 *
 * Every function returning uinject_status leaves a message for the calling
 * thread in uinject_last_error() when it fails. Handles are opaque and owned
 * by the caller; release them with the matching *_free function.
 *
 * Functions that return text copy it into (buf, cap) including the NUL and
 * always store the full length (without NUL) in *needed when needed is not
 * NULL. Pass buf = NULL, cap = 0 to query the size. A buffer that is too
 * small yields UINJECT_ERR_BUFFER and is left NUL-terminated but truncated.
 */

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(UINJECT_BUILDING_LIBRARY)
#    define UINJECT_API __declspec(dllexport)
#  else
#    define UINJECT_API __declspec(dllimport)
#  endif
#else
#  define UINJECT_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum uinject_status {
  UINJECT_OK = 0,
  UINJECT_ERR_USAGE = 1,    /* precondition violated by the caller */
  UINJECT_ERR_CONFIG = 2,   /* invalid configuration or dimensions */
  UINJECT_ERR_NUMERIC = 3,  /* singular or non-finite computation */
  UINJECT_ERR_FORMAT = 4,   /* malformed file contents */
  UINJECT_ERR_IO = 5,       /* file or directory access failed */
  UINJECT_ERR_BUFFER = 6,   /* output buffer too small */
  UINJECT_ERR_INTERNAL = 7  /* unexpected failure */
} uinject_status;

typedef struct uinject_config uinject_config;
typedef struct uinject_report uinject_report;
typedef struct uinject_model uinject_model;

UINJECT_API const char* uinject_version(void);
UINJECT_API const char* uinject_status_name(uinject_status status);
/* Message of the most recent failure on this thread, "" if none. */
UINJECT_API const char* uinject_last_error(void);

/* ---- configuration ---- */

/* environment: "mimo" or "d2d". */
UINJECT_API uinject_status uinject_config_new(const char* environment, uinject_config** out);
UINJECT_API uinject_status uinject_config_load(const char* path, uinject_config** out);
UINJECT_API uinject_status uinject_config_parse(const char* text, uinject_config** out);
UINJECT_API void uinject_config_free(uinject_config* config);

UINJECT_API uinject_status uinject_config_set(uinject_config* config, const char* key,
                                              const char* value);
UINJECT_API uinject_status uinject_config_get(const uinject_config* config, const char* key,
                                              char* buf, size_t cap, size_t* needed);
UINJECT_API uinject_status uinject_config_paper_scale(uinject_config* config);
UINJECT_API uinject_status uinject_config_validate(const uinject_config* config);
/* Every key as "key = value" lines. */
UINJECT_API uinject_status uinject_config_format(const uinject_config* config, char* buf,
                                                 size_t cap, size_t* needed);

/* ---- experiments ---- */

/* Trains the learned methods into experiment.output_dir. */
UINJECT_API uinject_status uinject_train(const uinject_config* config);
/* Evaluates every method, loading checkpoints from checkpoint_dir (NULL:
 * experiment.output_dir), and writes report, summary and CDF files. */
UINJECT_API uinject_status uinject_evaluate(const uinject_config* config,
                                            const char* checkpoint_dir, uinject_report** out);
/* Train and evaluate in one pass. */
UINJECT_API uinject_status uinject_run(const uinject_config* config, uinject_report** out);

/* MIMO alpha grid search. medians (may be NULL) receives one median
 * min-rate in bits/s per grid entry; *grid_size is the grid length. */
UINJECT_API uinject_status uinject_select_alpha(const uinject_config* config, double* alpha,
                                                double* medians, size_t medians_cap,
                                                size_t* grid_size);

/* ---- reports ---- */

UINJECT_API uinject_status uinject_report_load(const char* path, uinject_report** out);
UINJECT_API uinject_status uinject_report_save(const uinject_report* report, const char* path);
UINJECT_API void uinject_report_free(uinject_report* report);

UINJECT_API size_t uinject_report_method_count(const uinject_report* report);
/* name points into the report and lives as long as it does. Rates in bits/s. */
UINJECT_API uinject_status uinject_report_method(const uinject_report* report, size_t index,
                                                 const char** name, double* mean_nominal,
                                                 double* mean_robust);
UINJECT_API uinject_status uinject_report_json(const uinject_report* report, char* buf,
                                               size_t cap, size_t* needed);
UINJECT_API uinject_status uinject_report_summary_csv(const uinject_report* report, char* buf,
                                                      size_t cap, size_t* needed);
UINJECT_API uinject_status uinject_report_cdf_csv(const uinject_report* report,
                                                  const char* method, char* buf, size_t cap,
                                                  size_t* needed);
/* Ratio table; the order flags (may be NULL) receive 1 when the expected
 * robust / nominal orderings hold. */
UINJECT_API uinject_status uinject_report_compare_csv(const uinject_report* report, char* buf,
                                                      size_t cap, size_t* needed,
                                                      int* robust_order_holds,
                                                      int* nominal_order_holds);

/* ---- models ---- */

UINJECT_API uinject_status uinject_model_load(const char* path, uinject_model** out);
UINJECT_API void uinject_model_free(uinject_model* model);
UINJECT_API size_t uinject_model_input_dim(const uinject_model* model);
UINJECT_API size_t uinject_model_output_dim(const uinject_model* model);
UINJECT_API uinject_status uinject_model_forward(const uinject_model* model, const double* input,
                                                 size_t input_len, double* output,
                                                 size_t output_len);

/* ---- utilities ---- */

/* Empirical gamma-percentile (gamma in (0, 100)) with linear interpolation. */
UINJECT_API uinject_status uinject_percentile(const double* samples, size_t count, double gamma,
                                              double* value);

#ifdef __cplusplus
}
#endif

#endif /* UINJECT_UINJECT_H */
