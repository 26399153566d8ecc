/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#ifndef SHIFTLAB_H
#define SHIFTLAB_H

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

// Result codes.
typedef enum ShiftlabStatus {
  SHIFTLAB_STATUS_OK = 0,
  SHIFTLAB_STATUS_NULL_POINTER = 1,
  SHIFTLAB_STATUS_INVALID_ARGUMENT = 2,
  // A size or depth outside the supported range.
  SHIFTLAB_STATUS_OUT_OF_RANGE = 3,
  // An evaluation point outside the operation's domain.
  SHIFTLAB_STATUS_DOMAIN = 4,
  SHIFTLAB_STATUS_BUFFER_TOO_SMALL = 5,
  // A Rust panic was caught at the boundary.
  SHIFTLAB_STATUS_INTERNAL = 6,
} ShiftlabStatus;

// A Haar expansion on `[0, 1)`.
typedef struct ShiftlabExpansion ShiftlabExpansion;

// Monte-Carlo norms of the two martingales driven by the walk.
typedef struct ShiftlabMcResult {
  // `‖M^f_T‖_p`.
  double norm_f;
  double standard_error_f;
  // `‖M^g_T‖_p`, where `M^g = S₀M^f`.
  double norm_g;
  double standard_error_g;
  double unstopped_fraction;
  double overshoot_fraction;
  double max_identity_defect;
} ShiftlabMcResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Version of the library as a static NUL-terminated string.
const char *shiftlab_version(void);

// Copies the last error message of this thread into `buffer`.
//
// Returns the message length without the terminator, or 0 when the last
// call succeeded. The copy is truncated to `capacity - 1` bytes and always
// NUL-terminated when `capacity > 0`.
//
// # Safety
// `buffer` must be null or valid for `capacity` writes.
size_t shiftlab_last_error_message(char *buffer, size_t capacity);

// Analyzes `len = 2^depth` equal-width samples into a new expansion.
//
// # Safety
// `samples` must be valid for `len` reads and `out` for one write.
enum ShiftlabStatus shiftlab_expansion_from_samples(const double *samples,
                                                    size_t len,
                                                    struct ShiftlabExpansion **out);

// A new expansion holding `S₀` applied to `e`.
//
// # Safety
// `e` must be a live handle and `out` valid for one write.
enum ShiftlabStatus shiftlab_expansion_apply_s0(const struct ShiftlabExpansion *e,
                                                struct ShiftlabExpansion **out);

// # Safety
// `e` must be a live handle and `out` valid for one write.
enum ShiftlabStatus shiftlab_expansion_depth(const struct ShiftlabExpansion *e, uint32_t *out);

// The mean (`level = -1`) or the coefficient of interval `(level, index)`.
//
// # Safety
// `e` must be a live handle and `out` valid for one write.
enum ShiftlabStatus shiftlab_expansion_coefficient(const struct ShiftlabExpansion *e,
                                                   int32_t level,
                                                   uint64_t index,
                                                   double *out);

// Writes the `2^depth` atom values of `e` into `out`.
//
// # Safety
// `e` must be a live handle and `out` valid for `len` writes.
enum ShiftlabStatus shiftlab_expansion_synthesize(const struct ShiftlabExpansion *e,
                                                  double *out,
                                                  size_t len);

// Releases a handle; null is ignored.
//
// # Safety
// `e` must be null or a handle not yet freed.
void shiftlab_expansion_free(struct ShiftlabExpansion *e);

// `c₀ = 8G/π²` from the Catalan series.
//
// # Safety
// `out` must be valid for one write.
enum ShiftlabStatus shiftlab_c0(double *out);

// `c₀` by quadrature of `(2/π) log tan(x/2)`.
//
// # Safety
// `out` must be valid for one write.
enum ShiftlabStatus shiftlab_c0_quadrature(size_t resolution, double *out);

// Catalan's constant to within `tolerance`.
//
// # Safety
// `out` must be valid for one write.
enum ShiftlabStatus shiftlab_catalan(double tolerance, double *out);

// `‖H‖_{p→p}` on the circle.
//
// # Safety
// `out` must be valid for one write.
enum ShiftlabStatus shiftlab_hp(double p, double *out);

// `K₀(t, x)` on the grid `α + r·I`, `r ∈ [1, 2)`.
//
// # Safety
// `out` must be valid for one write.
enum ShiftlabStatus shiftlab_kernel_value(double t, double x, double r, double alpha, double *out);

// `E_r E_α K₀(t, x)` with `resolution` dilation points.
//
// # Safety
// `out` must be valid for one write.
enum ShiftlabStatus shiftlab_average_full(double t, double x, size_t resolution, double *out);

// Monte-Carlo `L^p` norms for `f = a₀ + Σ cosᵢ cos(iθ) + sinᵢ sin(iθ)`
// (index from 1) at resolution `n` and horizon `horizon`.
//
// `strict` selects the step condition `n ≥ 2·horizon`. Results do not
// depend on the thread count.
//
// # Safety
// `cos` and `sin` must be valid for `n_cos` and `n_sin` reads, `out` for
// one write.
enum ShiftlabStatus shiftlab_mc_norms(double a0,
                                      const double *cos,
                                      size_t n_cos,
                                      const double *sin,
                                      size_t n_sin,
                                      double p,
                                      uint32_t n,
                                      double horizon,
                                      bool strict,
                                      uint64_t paths,
                                      uint64_t seed,
                                      struct ShiftlabMcResult *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SHIFTLAB_H */
