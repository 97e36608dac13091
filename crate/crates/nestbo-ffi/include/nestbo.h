#ifndef NESTBO_H
#define NESTBO_H

/* Generated by cbindgen from the nestbo-ffi crate; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define NESTBO_OK 0

// Invalid argument or configuration.
#define NESTBO_ERR_INVALID -1

// Runtime failure (numerical breakdown, I/O, aborted replicate).
#define NESTBO_ERR_RUNTIME -2

// A required pointer was null.
#define NESTBO_ERR_NULL -3

// A string argument was not valid UTF-8.
#define NESTBO_ERR_UTF8 -4

// Opaque experiment configuration handle.
typedef struct NestboConfig NestboConfig;

// Opaque run-trace handle.
typedef struct NestboTrace NestboTrace;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string; do not free.
const char *nestbo_version(void);

// Most recent error message on this thread, or null when no error has been
// recorded. Free with `nestbo_string_free`.
char *nestbo_last_error(void);

// Free a string produced by this library. Null is ignored.
//
// # Safety
// `s` must have been returned by a `nestbo_*` function and not freed yet.
void nestbo_string_free(char *s);

// Parse a TOML experiment configuration. On success writes a config handle
// to `out`; free it with `nestbo_config_free`.
//
// # Safety
// `toml` must point to a NUL-terminated string and `out` must be a valid
// pointer to pointer storage.
int nestbo_config_parse(const char *toml, struct NestboConfig **out);

// Free a config handle. Null is ignored.
//
// # Safety
// `cfg` must have come from `nestbo_config_parse` and not been freed.
void nestbo_config_free(struct NestboConfig *cfg);

// Override the base seed of a parsed configuration.
//
// # Safety
// `cfg` must be a live handle from `nestbo_config_parse`.
int nestbo_config_set_seed(struct NestboConfig *cfg, uint64_t seed);

// Execute one seeded replicate. On success writes a trace handle to `out`;
// free it with `nestbo_trace_free`. A replicate that aborted mid-run is
// reported as a runtime error (the partial trace is not returned).
//
// # Safety
// `cfg` must be a live config handle; `out` must be valid pointer storage.
int nestbo_run_replicate(const struct NestboConfig *cfg, struct NestboTrace **out);

// Free a trace handle. Null is ignored.
//
// # Safety
// `trace` must have come from `nestbo_run_replicate` and not been freed.
void nestbo_trace_free(struct NestboTrace *trace);

// Number of objective evaluations recorded in the trace.
//
// # Safety
// `trace` must be a live trace handle.
uint64_t nestbo_trace_len(const struct NestboTrace *trace);

// Best observed objective value at the end of the run.
//
// # Safety
// `trace` must be a live trace handle; `out` must be valid storage.
int nestbo_trace_final_best(const struct NestboTrace *trace, double *out);

// Final simple regret (best observed minus known optimum). Fails when the
// benchmark's optimum is unknown.
//
// # Safety
// `trace` must be a live trace handle; `out` must be valid storage.
int nestbo_trace_final_regret(const struct NestboTrace *trace, double *out);

// Serialize the full trace (evaluations, iterations, embedding log) as
// JSON. Free the string with `nestbo_string_free`.
//
// # Safety
// `trace` must be a live trace handle; `out` must be valid storage.
int nestbo_trace_to_json(const struct NestboTrace *trace, char **out);

// Run `replicates` seeded replicates (seed, seed+1, …) with up to `jobs`
// worker threads and write per-replicate trace files plus aggregate files
// into `out_dir`.
//
// # Safety
// `cfg` must be a live config handle; `out_dir` must be a NUL-terminated
// path string.
int nestbo_run_experiment(const struct NestboConfig *cfg,
                          uint64_t replicates,
                          uint64_t jobs,
                          const char *out_dir);

// Stencil power-function sweep for an isotropic SE kernel, rendered as CSV
// (one prior row plus one row per spacing). Free with `nestbo_string_free`.
//
// # Safety
// `spacings` must point to `num_spacings` doubles; `out` must be valid
// storage.
int nestbo_vpc_csv(uint64_t dim,
                   double lengthscale,
                   double signal_variance,
                   const double *spacings,
                   uint64_t num_spacings,
                   char **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NESTBO_H */
