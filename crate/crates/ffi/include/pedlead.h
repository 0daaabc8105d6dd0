#ifndef PEDLEAD_H
#define PEDLEAD_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum PlStatus {
  PL_STATUS_OK = 0,
  PL_STATUS_NULL_ARGUMENT = 1,
  PL_STATUS_INVALID_UTF8 = 2,
  PL_STATUS_PARSE = 3,
  PL_STATUS_STRUCTURE = 4,
  PL_STATUS_TIMING = 5,
  PL_STATUS_RANGE = 6,
  PL_STATUS_TOO_SHORT = 7,
  PL_STATUS_UNDEFINED = 8,
  PL_STATUS_CONFIG = 9,
  PL_STATUS_IO = 10,
  PL_STATUS_JSON = 11,
  PL_STATUS_OUT_OF_BOUNDS = 12,
  PL_STATUS_PANIC = 13,
} PlStatus;

typedef enum PlMode {
  PL_MODE_HEADING = 0,
  PL_MODE_SPEED = 1,
} PlMode;

/**
 * Results of analyzing one trial in one mode.
 */
typedef struct PlAnalysis PlAnalysis;

/**
 * A loaded or simulated trial.
 */
typedef struct PlTrial PlTrial;

/**
 * Analysis settings. Obtain defaults from [`pl_params_default`].
 */
typedef struct PlParams {
  enum PlMode mode;
  /**
   * Half-window in samples; 0 selects the per-mode default.
   */
  size_t omega;
  double tau_max_s;
  size_t windows;
  double theta;
  double heading_cutoff_hz;
  double speed_cutoff_hz;
} PlParams;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message describing the last failure on this thread, or NULL. The
 * pointer stays valid until the next library call on the same thread.
 */
const char *pl_last_error_message(void);

/**
 * # Safety
 * `s` must come from this library and not have been freed.
 */
void pl_string_free(char *s);

/**
 * Loads a long-format trial CSV from a file path.
 *
 * # Safety
 * `path` must be nul-terminated; `out` must be writable.
 */
enum PlStatus pl_trial_load_path(const char *path, struct PlTrial **out);

/**
 * Loads a long-format trial CSV from `len` bytes at `data`.
 *
 * # Safety
 * `data` must point to `len` readable bytes; `out` must be writable.
 */
enum PlStatus pl_trial_load_buffer(const uint8_t *data, size_t len, struct PlTrial **out);

/**
 * Simulates a trial from a JSON simulation config.
 *
 * # Safety
 * `config_json` must be nul-terminated; `out` must be writable.
 */
enum PlStatus pl_simulate_json(const char *config_json, struct PlTrial **out);

/**
 * # Safety
 * `trial` must come from this library and not have been freed.
 */
void pl_trial_free(struct PlTrial *trial);

/**
 * # Safety
 * `trial` must be a live handle; `out` must be writable.
 */
enum PlStatus pl_trial_agent_count(const struct PlTrial *trial, size_t *out);

/**
 * # Safety
 * `trial` must be a live handle; `out` must be writable.
 */
enum PlStatus pl_trial_sample_count(const struct PlTrial *trial, size_t *out);

/**
 * Copies the id of agent `index` into `buf` (nul-terminated, truncated
 * to `cap`), and the full length excluding the nul into `len_out`.
 *
 * # Safety
 * `trial` must be a live handle; `buf` must have `cap` writable bytes or
 * be NULL with `cap` 0; `len_out` must be writable.
 */
enum PlStatus pl_trial_agent_id(const struct PlTrial *trial,
                                size_t index,
                                char *buf,
                                size_t cap,
                                size_t *len_out);

/**
 * Drops `head_s` seconds from the start and `tail_s` from the end.
 *
 * # Safety
 * `trial` must be a live handle; `out` must be writable.
 */
enum PlStatus pl_trial_truncate(const struct PlTrial *trial,
                                double head_s,
                                double tail_s,
                                struct PlTrial **out);

struct PlParams pl_params_default(enum PlMode mode);

/**
 * Runs the full analysis in one mode.
 *
 * # Safety
 * `trial` and `params` must be valid; `out` must be writable.
 */
enum PlStatus pl_analyze(const struct PlTrial *trial,
                         const struct PlParams *params,
                         struct PlAnalysis **out);

/**
 * # Safety
 * `analysis` must come from this library and not have been freed.
 */
void pl_analysis_free(struct PlAnalysis *analysis);

/**
 * Leadership index of agent `agent`, in percent.
 *
 * # Safety
 * `analysis` must be a live handle; `out` must be writable.
 */
enum PlStatus pl_analysis_leadership_index(const struct PlAnalysis *analysis,
                                           size_t agent,
                                           double *out);

/**
 * # Safety
 * `analysis` must be a live handle; `out` must be writable.
 */
enum PlStatus pl_analysis_window_count(const struct PlAnalysis *analysis, size_t *out);

/**
 * Weight of edge `from -> to` in the pruned network of `window`; 0 when
 * the edge was removed.
 *
 * # Safety
 * `analysis` must be a live handle; `out` must be writable.
 */
enum PlStatus pl_analysis_edge_weight(const struct PlAnalysis *analysis,
                                      size_t window,
                                      size_t from,
                                      size_t to,
                                      double *out);

/**
 * Leadership and network reports as one JSON object
 * `{"leadership": ..., "network": ...}`. Free with [`pl_string_free`].
 *
 * # Safety
 * `analysis` must be a live handle; `out` must be writable.
 */
enum PlStatus pl_analysis_to_json(const struct PlAnalysis *analysis, char **out);

/**
 * DPI pruning of a dense `n x n` row-major weight matrix (`weights[i*n+j]`
 * is the edge i -> j; diagonal ignored, 0 means absent). The pruned
 * matrix is written to `out`, which may alias `weights`.
 *
 * # Safety
 * `weights` and `out` must each hold `n * n` doubles.
 */
enum PlStatus pl_dpi_prune(size_t n, const double *weights, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PEDLEAD_H */
