#ifndef QHYP_QHYP_H
#define QHYP_QHYP_H

/* C interface to the toolkit. Handles are opaque; every call that can fail
 * returns a qhyp_status and leaves a message for qhyp_last_error() on the
 * calling thread. Result strings are JSON, owned by the caller and released
 * with qhyp_string_free(). */

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(_WIN32)
#define QHYP_API __declspec(dllexport)
#else
#define QHYP_API __attribute__((visibility("default")))
#endif

typedef enum qhyp_status {
  QHYP_OK = 0,
  QHYP_INPUT_ERROR = 2,
  QHYP_PRECONDITION_ERROR = 3,
  QHYP_INTERNAL_ERROR = 4
} qhyp_status;

typedef struct qhyp_domain qhyp_domain;
typedef struct qhyp_config qhyp_config;

QHYP_API const char* qhyp_version(void);
/* Message of the last failed call on this thread; "" when none. */
QHYP_API const char* qhyp_last_error(void);
QHYP_API void qhyp_string_free(char* s);

/* Run configuration: seed, tolerance overrides, worker count. */
QHYP_API qhyp_config* qhyp_config_new(void);
QHYP_API void qhyp_config_free(qhyp_config* cfg);
/* name is one of tol_ray, tol_opt, quad_tol, dist_tol, restarts, theta_grid,
 * sphere_samples_per_k, quad_order, max_vertices, workers. */
QHYP_API qhyp_status qhyp_config_set(qhyp_config* cfg, const char* name, double value);
QHYP_API qhyp_status qhyp_config_set_seed(qhyp_config* cfg, uint64_t seed);
/* Everything that can change a result: the worker count is left out. */
QHYP_API qhyp_status qhyp_config_json(const qhyp_config* cfg, char** out);

QHYP_API qhyp_status qhyp_domain_parse(const char* json, qhyp_domain** out);
QHYP_API void qhyp_domain_free(qhyp_domain* dom);
/* {"kind", "field", "dim", "real_dim", "bounded", "base_point"} */
QHYP_API qhyp_status qhyp_domain_info(const qhyp_domain* dom, char** out);
QHYP_API qhyp_status qhyp_domain_contains(const qhyp_domain* dom, const double* x, size_t n, int* inside);

/* Requests are JSON objects; vectors are real coordinates.
 *   metric     {"p", "v", "k"}
 *   distance   {"p", "q", "k"}
 *   hilbert    {"p", "q"}
 *   expansion  {"k", "boundary_points", "frames_per_point",
 *               "random_frames_per_point", "j_min", "j_max", "extra_points"}
 *   delta4     {"depths": [j...] for depth 2^-j, "count"}
 *   witness    {"k", "a", "gaps", "n", "pieces", "x", "frame"}
 * Omitted keys take their defaults; unknown keys are input errors. */
QHYP_API qhyp_status qhyp_metric(const qhyp_domain* dom, const qhyp_config* cfg, const char* request, char** out);
QHYP_API qhyp_status qhyp_distance(const qhyp_domain* dom, const qhyp_config* cfg, const char* request, char** out);
QHYP_API qhyp_status qhyp_hilbert(const qhyp_domain* dom, const qhyp_config* cfg, const char* request, char** out);
QHYP_API qhyp_status qhyp_expansion(const qhyp_domain* dom, const qhyp_config* cfg, const char* request, char** out);
QHYP_API qhyp_status qhyp_delta4(const qhyp_domain* dom, const qhyp_config* cfg, const char* request, char** out);
QHYP_API qhyp_status qhyp_witness(const qhyp_domain* dom, const qhyp_config* cfg, const char* request, char** out);

/* Model-metric filling runs.
 *   filling    {"metric": {"name", "mu"}, "trials", "max_N", "audit_trials",
 *               "min_length", "max_length", "certificates"}
 *   fill_star  {"metric", "star"} with star a word of V/H pieces */
QHYP_API qhyp_status qhyp_filling(const qhyp_config* cfg, const char* request, char** out);
QHYP_API qhyp_status qhyp_fill_star(const qhyp_config* cfg, const char* request, char** out);

#ifdef __cplusplus
}
#endif

#endif
