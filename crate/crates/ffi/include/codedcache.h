#ifndef CODEDCACHE_H
#define CODEDCACHE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum CcStatus {
  CC_STATUS_OK = 0,
  CC_STATUS_NULL_POINTER = 1,
  CC_STATUS_INVALID_UTF8 = 2,
  CC_STATUS_INVALID_PARAMETER = 3,
  CC_STATUS_CONSTRAINT_VIOLATION = 4,
  CC_STATUS_CAPACITY = 5,
  CC_STATUS_CONFIG = 6,
  CC_STATUS_PARSE = 7,
  CC_STATUS_SHAPE = 8,
  CC_STATUS_AGGREGATION = 9,
  CC_STATUS_CHECKPOINT = 10,
  CC_STATUS_SCHEMA = 11,
  CC_STATUS_IO = 12,
  CC_STATUS_BUFFER_TOO_SMALL = 13,
  CC_STATUS_PANIC = 14,
} CcStatus;

// Experiment configuration handle.
typedef struct CcConfig CcConfig;

// Loaded dueling Q-network handle.
typedef struct CcNet CcNet;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the most recent failure on this thread, or null. The pointer
// stays valid until the next failing call on the same thread.
const char *cc_last_error(void);

// Writes a configuration with every key at its default value to `*out`.
//
// # Safety
// `out` must be a valid pointer to writable storage for one handle.
enum CcStatus cc_config_default(struct CcConfig **out);

// Parses config text; omitted keys keep their defaults.
//
// # Safety
// `text` must be a NUL-terminated string and `out` writable.
enum CcStatus cc_config_parse(const char *text, struct CcConfig **out);

// # Safety
// `cfg` must be null or a handle from this library not yet freed.
void cc_config_free(struct CcConfig *cfg);

// Sets the output directory of `cc_run_experiment`.
//
// # Safety
// `cfg` must be a live handle and `dir` NUL-terminated.
enum CcStatus cc_config_set_out_dir(struct CcConfig *cfg, const char *dir);

// # Safety
// `cfg` must be a live handle and `seeds` must point to `n_seeds` values.
enum CcStatus cc_config_set_seeds(struct CcConfig *cfg, const uint64_t *seeds, size_t n_seeds);

// Overrides one of `M`, `Z`, `K`, `V` or `T` (slots).
//
// # Safety
// `cfg` must be a live handle and `name` NUL-terminated.
enum CcStatus cc_config_set_param(struct CcConfig *cfg, const char *name, double value);

// Restricts the run to a comma-separated list of scheme names.
//
// # Safety
// `cfg` must be a live handle and `schemes` NUL-terminated.
enum CcStatus cc_config_set_schemes(struct CcConfig *cfg, const char *schemes);

// Serializes the configuration. `*needed` receives the byte length
// including the terminating NUL; when `capacity` is too small nothing is
// written and `BufferTooSmall` is returned.
//
// # Safety
// `cfg` must be a live handle, `buf` writable for `capacity` bytes (or null
// with zero capacity) and `needed` writable.
enum CcStatus cc_config_emit(const struct CcConfig *cfg,
                             char *buf,
                             size_t capacity,
                             size_t *needed);

// Validates the configuration and runs every seed, writing results under
// its output directory. `*n_records` receives the number of metric rows.
//
// # Safety
// `cfg` must be a live handle; `n_records` may be null.
enum CcStatus cc_run_experiment(const struct CcConfig *cfg, size_t *n_records);

// Coded multicast load for `u` distinct cached requests among `k_faps`.
//
// # Safety
// `out` must be writable.
enum CcStatus cc_coded_multicast_load(size_t u, size_t k_faps, size_t t, double *out);

// Memory-sharing split for caching `n_cached` contents.
//
// # Safety
// All out pointers must be writable.
enum CcStatus cc_fragmentation_param(size_t k_faps,
                                     size_t cache_size,
                                     size_t n_cached,
                                     size_t *t_low,
                                     size_t *t_high,
                                     double *weight_low);

// Fills `out[0..n_contents]` with the Zipf probabilities for `alpha`.
//
// # Safety
// `out` must be writable for `n_contents` values.
enum CcStatus cc_zipf_profile(double alpha, size_t n_contents, double *out);

// Loads a network checkpoint written by the experiment driver.
//
// # Safety
// `path` must be NUL-terminated and `out` writable.
enum CcStatus cc_net_load(const char *path, struct CcNet **out);

// # Safety
// `net` must be null or a handle from this library not yet freed.
void cc_net_free(struct CcNet *net);

// State length the network expects, or 0 for a null handle.
//
// # Safety
// `net` must be null or a live handle.
size_t cc_net_input_dim(const struct CcNet *net);

// Number of actions, or 0 for a null handle.
//
// # Safety
// `net` must be null or a live handle.
size_t cc_net_n_actions(const struct CcNet *net);

// Q-values of one state. `state_len` must equal the input dimension and
// `q_len` the action count.
//
// # Safety
// `net` must be a live handle, `state` readable for `state_len` values and
// `q_out` writable for `q_len` values.
enum CcStatus cc_net_forward(const struct CcNet *net,
                             const double *state,
                             size_t state_len,
                             double *q_out,
                             size_t q_len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CODEDCACHE_H */
