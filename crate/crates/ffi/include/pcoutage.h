#ifndef PCOUTAGE_H
#define PCOUTAGE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stddef.h>

/**
 * Result of every call.
 */
typedef enum PcoStatus {
  PCO_STATUS_OK = 0,
  PCO_STATUS_NULL_POINTER = 1,
  PCO_STATUS_INVALID_UTF8 = 2,
  PCO_STATUS_IO = 3,
  PCO_STATUS_PARSE = 4,
  PCO_STATUS_INVALID_MODEL = 5,
  PCO_STATUS_INVALID_ARGUMENT = 6,
  PCO_STATUS_UNKNOWN_NODE = 7,
  PCO_STATUS_STATE_OUT_OF_RANGE = 8,
  PCO_STATUS_STATE_SPACE_TOO_LARGE = 9,
  PCO_STATUS_BUFFER_TOO_SMALL = 10,
  PCO_STATUS_PANIC = 11,
  PCO_STATUS_INTERNAL = 12,
} PcoStatus;

/**
 * Opaque handle to a loaded model.
 */
typedef struct PcoModel PcoModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null after a
 * successful call. The pointer stays valid until the next call on this
 * thread.
 */
const char *pco_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *pco_version(void);

/**
 * Loads a model file. On success `*out` receives a new handle.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum PcoStatus pco_model_load(const char *path, struct PcoModel **out);

/**
 * Parses a model from its JSON text. On success `*out` receives a new handle.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a valid pointer.
 */
enum PcoStatus pco_model_from_json(const char *json, struct PcoModel **out);

/**
 * Releases a handle. Null is ignored.
 *
 * # Safety
 * `model` must come from this library and not be used afterwards.
 */
void pco_model_free(struct PcoModel *model);

/**
 * Number of nodes, target included.
 *
 * # Safety
 * `model` must be a live handle and `out` a valid pointer.
 */
enum PcoStatus pco_model_node_count(const struct PcoModel *model, size_t *out);

/**
 * Index of the target node.
 *
 * # Safety
 * `model` must be a live handle and `out` a valid pointer.
 */
enum PcoStatus pco_model_target_index(const struct PcoModel *model, size_t *out);

/**
 * Number of states of node `index`.
 *
 * # Safety
 * `model` must be a live handle and `out` a valid pointer.
 */
enum PcoStatus pco_model_cardinality(const struct PcoModel *model, size_t index, size_t *out);

/**
 * Copies the name of node `index` into `buf` with a trailing NUL.
 *
 * `*out_len` (if not null) receives the name length in bytes without the
 * NUL, also when `buf` is too small, so callers can size a retry.
 *
 * # Safety
 * `model` must be a live handle and `buf` must hold `buf_len` bytes.
 */
enum PcoStatus pco_model_node_name(const struct PcoModel *model,
                                   size_t index,
                                   char *buf,
                                   size_t buf_len,
                                   size_t *out_len);

/**
 * Exact target posterior given `n` evidence pairs `(nodes[i], states[i])`.
 *
 * Writes one probability per target state into `out_probs`, which must
 * hold at least `out_len` doubles.
 *
 * # Safety
 * `nodes` and `states` must hold `n` entries each; `out_probs` must hold
 * `out_len` doubles.
 */
enum PcoStatus pco_model_posterior(const struct PcoModel *model,
                                   const size_t *nodes,
                                   const size_t *states,
                                   size_t n,
                                   double *out_probs,
                                   size_t out_len);

/**
 * Outage probability for one hour of raw weather readings.
 *
 * `values` holds one reading per factor node in node order (the target is
 * skipped), `n` of them. Readings are binned with the model's bin edges,
 * out-of-range values clamp, and NaN leaves that factor unobserved.
 *
 * # Safety
 * `values` must hold `n` doubles and `out` must be a valid pointer.
 */
enum PcoStatus pco_model_predict_raw(const struct PcoModel *model,
                                     const double *values,
                                     size_t n,
                                     double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PCOUTAGE_H */
