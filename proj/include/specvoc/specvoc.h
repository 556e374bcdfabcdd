#ifndef SPECVOC_SPECVOC_H_
#define SPECVOC_SPECVOC_H_

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define SPECVOC_API __declspec(dllexport)
#else
#define SPECVOC_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum specvoc_status {
  SPECVOC_OK = 0,
  SPECVOC_ERR_INDEX_OUT_OF_RANGE = 1,
  SPECVOC_ERR_EMPTY_SHORTLIST = 2,
  SPECVOC_ERR_EMPTY_INPUT = 3,
  SPECVOC_ERR_INVALID_BUDGET = 4,
  SPECVOC_ERR_INVALID_TOKEN = 5,
  SPECVOC_ERR_NON_FINITE_LOSS = 6,
  SPECVOC_ERR_DEGENERATE_COLUMN = 7,
  SPECVOC_ERR_INVALID_CLUSTER_COUNT = 8,
  SPECVOC_ERR_INVALID_CLUSTER_ID = 9,
  SPECVOC_ERR_SHAPE = 10,
  SPECVOC_ERR_ZERO_MASS_SUBSET = 11,
  SPECVOC_ERR_INFEASIBLE_ENUMERATION = 12,
  SPECVOC_ERR_INVALID_PROPOSAL = 13,
  SPECVOC_ERR_EMPTY_TRACE = 14,
  SPECVOC_ERR_HASH_MISMATCH = 15,
  SPECVOC_ERR_IO = 16,
  SPECVOC_ERR_CONFIG = 17,
  SPECVOC_ERR_INVALID_ARGUMENT = 18,
  SPECVOC_ERR_INTERNAL = 19
} specvoc_status;

/* Stable name such as "HashMismatch"; "Unknown" for out-of-range values. */
SPECVOC_API const char* specvoc_status_name(specvoc_status status);

/* Message of the last failed call on this thread; empty after success. */
SPECVOC_API const char* specvoc_last_error_message(void);

SPECVOC_API const char* specvoc_version(void);

/* ---- Commands ---------------------------------------------------------- */

typedef struct specvoc_report specvoc_report;

/* Runs one of: pipeline, cluster, train-router, bench, theory, exactness,
 * plot-data. `config_json` overlays the built-in defaults (NULL or "" for
 * none). On success *out owns the report. */
SPECVOC_API specvoc_status specvoc_run(const char* command, const char* config_json,
                                       specvoc_report** out);

/* The default configuration as JSON; owned by the library. */
SPECVOC_API const char* specvoc_default_config(void);

/* Report as pretty-printed JSON; valid until specvoc_report_free. */
SPECVOC_API const char* specvoc_report_json(const specvoc_report* report);

/* 1 passed, 0 failed, -1 when the command performs no checks. */
SPECVOC_API int specvoc_report_passed(const specvoc_report* report);

SPECVOC_API void specvoc_report_free(specvoc_report* report);

/* ---- Closed-form quantities -------------------------------------------- */

SPECVOC_API specvoc_status specvoc_omega(double alpha, size_t gamma, double* out);
SPECVOC_API specvoc_status specvoc_speedup(double t_target, double t_draft, double t_verify,
                                           double alpha, size_t gamma, double* out);
SPECVOC_API specvoc_status specvoc_beta(const double* p, const double* q, size_t n, double* out);
SPECVOC_API specvoc_status specvoc_budget(size_t t, size_t k_max, size_t k_min, size_t* out);
SPECVOC_API specvoc_status specvoc_pafr_budget(size_t t, size_t k_max, size_t* out);

/* ---- Artifacts ------------------------------------------------------------ */

typedef struct specvoc_model specvoc_model;
typedef struct specvoc_partition specvoc_partition;
typedef struct specvoc_router specvoc_router;

SPECVOC_API specvoc_status specvoc_model_load(const char* dir, specvoc_model** out);
SPECVOC_API void specvoc_model_free(specvoc_model* model);
SPECVOC_API size_t specvoc_model_vocab_size(const specvoc_model* model);
SPECVOC_API size_t specvoc_model_hidden_dim(const specvoc_model* model);
/* Target next-token distribution after `tokens`; `out` holds vocab_size values. */
SPECVOC_API specvoc_status specvoc_model_next_distribution(const specvoc_model* model,
                                                           const int32_t* tokens, size_t n,
                                                           double* out, size_t out_len);

SPECVOC_API specvoc_status specvoc_partition_load(const char* json_path, specvoc_partition** out);
SPECVOC_API void specvoc_partition_free(specvoc_partition* partition);
SPECVOC_API size_t specvoc_partition_num_clusters(const specvoc_partition* partition);
SPECVOC_API specvoc_status specvoc_partition_cluster_of(const specvoc_partition* partition,
                                                        int32_t token, size_t* out);

SPECVOC_API specvoc_status specvoc_router_load(const char* dir, specvoc_router** out);
SPECVOC_API void specvoc_router_free(specvoc_router* router);
SPECVOC_API size_t specvoc_router_num_clusters(const specvoc_router* router);
/* Pre-sigmoid cluster scores for [prev_hidden | token_embedding], each of length d. */
SPECVOC_API specvoc_status specvoc_router_route(const specvoc_router* router,
                                                const double* prev_hidden,
                                                const double* token_embedding, size_t d,
                                                double* scores, size_t num_scores);

#ifdef __cplusplus
}
#endif

#endif  // SPECVOC_SPECVOC_H_
