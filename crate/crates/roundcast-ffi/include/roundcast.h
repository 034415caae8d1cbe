/* C interface to the roundcast round-outcome predictor. */

#ifndef ROUNDCAST_H
#define ROUNDCAST_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call in this interface.
 */
typedef enum RoundcastStatus {
  RoundcastStatus_Ok = 0,
  /**
   * A required pointer argument was null.
   */
  RoundcastStatus_NullArgument = 1,
  /**
   * An argument value is outside its documented range.
   */
  RoundcastStatus_InvalidArgument = 2,
  /**
   * The checkpoint file could not be read.
   */
  RoundcastStatus_Io = 3,
  /**
   * The checkpoint file exists but is malformed.
   */
  RoundcastStatus_Format = 4,
  /**
   * The sequence is longer than the model can accept.
   */
  RoundcastStatus_Capacity = 5,
  /**
   * An internal invariant failed; the message has details.
   */
  RoundcastStatus_Internal = 6,
} RoundcastStatus;

/**
 * Opaque handle to a model restored from a checkpoint file.
 */
typedef struct RoundcastModel RoundcastModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Loads a model from a checkpoint file written by `roundcast train`.
 *
 * On success writes a handle to `*out_model`; the caller owns it and must
 * release it with `roundcast_model_free`. On failure `*out_model` is null.
 *
 * # Safety
 *
 * `path` must be a NUL-terminated string and `out_model` a valid pointer.
 */
enum RoundcastStatus roundcast_model_load(const char *path, struct RoundcastModel **out_model);

/**
 * Releases a handle returned by `roundcast_model_load`. Null is a no-op.
 *
 * # Safety
 *
 * `model` must be null or a handle not yet freed.
 */
void roundcast_model_free(struct RoundcastModel *model);

/**
 * Win probability of the second player given the observed prefix of a
 * round.
 *
 * `p1_damaged` and `p2_damaged` each hold `len` health-damage percentages
 * in [0, 100], one per timestep from timestep 0: damage received by the
 * first and second player respectively. On success writes the probability
 * that the second player wins (the model's label 1) to `*out_probability`.
 *
 * # Safety
 *
 * The two arrays must be readable for `len` elements and `model` must be
 * a live handle. The handle must not be used from two threads at once.
 */
enum RoundcastStatus roundcast_predict(struct RoundcastModel *model,
                                       const double *p1_damaged,
                                       const double *p2_damaged,
                                       size_t len,
                                       double *out_probability);

/**
 * Message of the most recent failure on the calling thread, NUL-terminated.
 * The pointer stays valid until the next failing call on the same thread.
 * Empty if no call has failed yet.
 */
const char *roundcast_last_error(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ROUNDCAST_H */
