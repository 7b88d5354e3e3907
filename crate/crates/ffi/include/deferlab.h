/* C ABI for deferlab. Handles are opaque; functions return DeferlabStatus and set a thread-local message readable via deferlab_last_error_message(). */

#ifndef DEFERLAB_H
#define DEFERLAB_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of a C ABI call.
 */
typedef enum DeferlabStatus {
  DEFERLAB_STATUS_OK = 0,
  DEFERLAB_STATUS_NULL_ARGUMENT = 1,
  DEFERLAB_STATUS_INVALID_ARGUMENT = 2,
  DEFERLAB_STATUS_IO = 3,
  DEFERLAB_STATUS_PARSE = 4,
} DeferlabStatus;

/**
 * Calibration-noise family for bound simulation.
 */
typedef enum DeferlabNoiseKind {
  DEFERLAB_NOISE_KIND_GAUSSIAN = 0,
  DEFERLAB_NOISE_KIND_UNIFORM = 1,
  DEFERLAB_NOISE_KIND_LAPLACE = 2,
} DeferlabNoiseKind;

/**
 * Opaque handle to a loaded feed-forward network.
 */
typedef struct DeferlabNetwork DeferlabNetwork;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failing call on this thread. The pointer stays
 * valid until the next failing call on the same thread; do not free it.
 */
const char *deferlab_last_error_message(void);

/**
 * # Safety
 * `path` must be a valid NUL-terminated string; `out` must be a valid
 * pointer to receive the handle.
 */
enum DeferlabStatus deferlab_network_load(const char *path, struct DeferlabNetwork **out);

/**
 * # Safety
 * `net` must be a live handle from this library; `path` must be a
 * valid NUL-terminated string.
 */
enum DeferlabStatus deferlab_network_save(const struct DeferlabNetwork *net, const char *path);

/**
 * Frees a handle returned by [`deferlab_network_load`]. Null is a no-op.
 *
 * # Safety
 * `net` must be a handle from this library, not yet freed.
 */
void deferlab_network_free(struct DeferlabNetwork *net);

/**
 * Input width of the network; 0 for a null handle.
 *
 * # Safety
 * `net` must be null or a live handle from this library.
 */
uintptr_t deferlab_network_input_dim(const struct DeferlabNetwork *net);

/**
 * Output width of the network; 0 for a null handle.
 *
 * # Safety
 * `net` must be null or a live handle from this library.
 */
uintptr_t deferlab_network_output_dim(const struct DeferlabNetwork *net);

/**
 * Forward pass: writes the network outputs into `output`.
 *
 * # Safety
 * `input` must point to `input_len` doubles and `output` to
 * `output_len` doubles; `net` must be a live handle.
 */
enum DeferlabStatus deferlab_network_forward(const struct DeferlabNetwork *net,
                                             const double *input,
                                             uintptr_t input_len,
                                             double *output,
                                             uintptr_t output_len);

/**
 * Runs a K+1 rejector-classifier network as a system: argmax over the
 * outputs; the last output defers and substitutes `human_label`.
 * Writes the final label and whether the point was deferred.
 *
 * # Safety
 * `input` must point to `input_len` doubles; `label_out` and
 * `deferred_out` must be valid; `net` must be a live handle with at
 * least 2 outputs.
 */
enum DeferlabStatus deferlab_system_predict(const struct DeferlabNetwork *net,
                                            const double *input,
                                            uintptr_t input_len,
                                            uintptr_t human_label,
                                            uintptr_t *label_out,
                                            bool *deferred_out);

/**
 * The Chebyshev misclassification bound `min(1, 2 eps^2 / gap^2)`.
 * Returns NaN for confidences outside [0, 1] or a negative epsilon.
 */
double deferlab_chebyshev_bound(double human_confidence, double machine_confidence, double epsilon);

/**
 * Monte-Carlo misclassification rate of the confidence-comparison
 * router under calibration noise; writes the rate and its 99% CI
 * half-width. Needs at least 10^4 trials.
 *
 * # Safety
 * `rate_out` and `ci_out` must be valid pointers.
 */
enum DeferlabStatus deferlab_simulate_misclassification(double human_confidence,
                                                        double machine_confidence,
                                                        double epsilon,
                                                        enum DeferlabNoiseKind noise,
                                                        uint64_t trials,
                                                        uint64_t seed,
                                                        double *rate_out,
                                                        double *ci_out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DEFERLAB_H */
