#ifndef EQUIVARIFY_H
#define EQUIVARIFY_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of an FFI call.
 */
typedef enum EqvStatus {
  /**
   * Success.
   */
  EqvStatusOk = 0,
  /**
   * A null pointer, out-of-range index, or malformed argument.
   */
  EqvStatusInvalidArgument = 1,
  /**
   * The operation itself failed (IO, format, arithmetic).
   */
  EqvStatusFailure = 2,
} EqvStatus;

/**
 * Opaque finite group handle.
 */
typedef struct EqvGroup EqvGroup;

/**
 * Opaque trained-model handle.
 */
typedef struct EqvModel EqvModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Creates the cyclic group of order `n`. Returns null on failure.
 */
struct EqvGroup *eqv_group_cyclic(uintptr_t n);

/**
 * Creates the dihedral group of order `2n`. Returns null on failure.
 */
struct EqvGroup *eqv_group_dihedral(uintptr_t n);

/**
 * Frees a group handle. Null is a no-op.
 */
void eqv_group_free(struct EqvGroup *group);

/**
 * Number of elements, or 0 for a null handle.
 */
uintptr_t eqv_group_order(const struct EqvGroup *group);

/**
 * Writes `a * b` to `out`.
 */
enum EqvStatus eqv_group_mul(const struct EqvGroup *group,
                             uintptr_t a,
                             uintptr_t b,
                             uintptr_t *out);

/**
 * Writes `a^-1` to `out`.
 */
enum EqvStatus eqv_group_inverse(const struct EqvGroup *group, uintptr_t a, uintptr_t *out);

/**
 * 1 when the multiplication table satisfies the group axioms, 0 when it
 * does not or the handle is null.
 */
int32_t eqv_group_axioms_ok(const struct EqvGroup *group);

/**
 * Rotates an `h x w x channels` row-major image by `quarter_turns` 90°
 * counterclockwise steps, as an exact index permutation. `input` and
 * `output` must each hold `h * w * channels` doubles and must not
 * alias. Requires `h == w`.
 */
enum EqvStatus eqv_rot90_apply(uintptr_t quarter_turns,
                               uintptr_t h,
                               uintptr_t w,
                               uintptr_t channels,
                               const double *input,
                               double *output);

/**
 * Writes the one-hot joint label for (digit, angle_index) into
 * `out[40]`, slot = angle * 10 + digit.
 */
enum EqvStatus eqv_encode_label(uint8_t digit, uint8_t angle_index, double *out);

/**
 * Loads a checkpoint produced by the CLI; the architecture is rebuilt
 * from the stored hyperparameters. Returns null on failure.
 */
struct EqvModel *eqv_model_load(const char *path);

/**
 * Frees a model handle. Null is a no-op.
 */
void eqv_model_free(struct EqvModel *model);

/**
 * Runs the model on a 28x28x1 row-major image and writes the 40 raw
 * logits (angle-major blocks of 10) to `logits_out[40]`.
 */
enum EqvStatus eqv_model_predict(const struct EqvModel *model,
                                 const double *input,
                                 double *logits_out);

/**
 * Convenience argmax over the joint logits: writes the predicted digit
 * and angle index.
 */
enum EqvStatus eqv_model_classify(const struct EqvModel *model,
                                  const double *input,
                                  uint8_t *digit_out,
                                  uint8_t *angle_out);

/**
 * Applies the induced C4 block-shift action of element `g` to a vector
 * of `4 * block_size` doubles (the G-product layout).
 */
enum EqvStatus eqv_block_shift_apply(uintptr_t g,
                                     uintptr_t block_size,
                                     const double *input,
                                     double *output);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* EQUIVARIFY_H */
