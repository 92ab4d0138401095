#ifndef CARNOT_H
#define CARNOT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum CarnotStatus {
  CARNOT_STATUS_OK = 0,
  CARNOT_STATUS_NULL_POINTER = 1,
  CARNOT_STATUS_INVALID_ARGUMENT = 2,
  CARNOT_STATUS_DIMENSION_MISMATCH = 3,
  CARNOT_STATUS_NUMERICAL = 4,
  CARNOT_STATUS_PANIC = 5,
} CarnotStatus;

// Opaque group handle.
typedef struct CarnotGroupHandle CarnotGroupHandle;

// Opaque operator handle.
typedef struct CarnotOperatorHandle CarnotOperatorHandle;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Copies the last error message into `buf` (NUL-terminated, truncated to `len`)
// and returns the full message length.
//
// # Safety
// `buf` must be null or point to `len` writable bytes.
uintptr_t carnot_last_error(char *buf, uintptr_t len);

// Toolkit version as a static NUL-terminated string.
const char *carnot_version(void);

// Builds a group from a registry name ("heisenberg1", "euclideanN") or a JSON document.
//
// # Safety
// `spec` must be a NUL-terminated string and `out` a valid pointer.
enum CarnotStatus carnot_group_new(const char *spec, struct CarnotGroupHandle **out);

// # Safety
// `g` must be null or a handle from [`carnot_group_new`] not yet freed.
void carnot_group_free(struct CarnotGroupHandle *g);

// Topological dimension, or 0 for a null handle.
//
// # Safety
// `g` must be null or a live group handle.
uintptr_t carnot_group_dim(const struct CarnotGroupHandle *g);

// Homogeneous dimension `Q`, or 0 for a null handle.
//
// # Safety
// `g` must be null or a live group handle.
double carnot_group_homogeneous_dim(const struct CarnotGroupHandle *g);

// `out = x o y`; all arrays have `n` entries.
//
// # Safety
// `x`, `y` must point to `n` readable doubles and `out` to `n` writable doubles.
enum CarnotStatus carnot_group_compose(const struct CarnotGroupHandle *g,
                                       const double *x,
                                       const double *y,
                                       uintptr_t n,
                                       double *out);

// `out = delta_r(x)`.
//
// # Safety
// `x` must point to `n` readable doubles and `out` to `n` writable doubles.
enum CarnotStatus carnot_group_dilate(const struct CarnotGroupHandle *g,
                                      double r,
                                      const double *x,
                                      uintptr_t n,
                                      double *out);

// Carnot-Caratheodory distance with default optimizer settings and the given seed.
// `gap` receives the optimizer's bound on the excess over the true distance.
//
// # Safety
// `x`, `y` must point to `n` readable doubles; `value` and `gap` must be valid.
enum CarnotStatus carnot_distance(const struct CarnotGroupHandle *g,
                                  const double *x,
                                  const double *y,
                                  uintptr_t n,
                                  uint64_t seed,
                                  double *value,
                                  double *gap);

// Heat kernel `Gamma0(x, t)` of the sub-Laplacian with pole at the origin.
//
// # Safety
// `x` must point to `n` readable doubles; `value` and `error` must be valid.
enum CarnotStatus carnot_heat_kernel(const struct CarnotGroupHandle *g,
                                     const double *x,
                                     uintptr_t n,
                                     double t,
                                     double *value,
                                     double *error);

// Builds an operator from its JSON spec.
//
// # Safety
// `json` must be a NUL-terminated string and `out` a valid pointer.
enum CarnotStatus carnot_operator_new(const char *json, struct CarnotOperatorHandle **out);

// Heat operator `Delta_G + c - d_t` on a registry group.
//
// # Safety
// `group` must be a NUL-terminated string and `out` a valid pointer.
enum CarnotStatus carnot_operator_heat(const char *group,
                                       double c,
                                       struct CarnotOperatorHandle **out);

// # Safety
// `op` must be null or a handle from an operator constructor not yet freed.
void carnot_operator_free(struct CarnotOperatorHandle *op);

// Fundamental solution `Gamma(x, t; xi, tau)` by the parametrix series of order `order`.
// `error` receives the combined quadrature and truncation budget.
//
// # Safety
// `x`, `xi` must point to `n` readable doubles; `value` and `error` must be valid.
enum CarnotStatus carnot_fundamental_solution(const struct CarnotOperatorHandle *op,
                                              const double *x,
                                              double t,
                                              const double *xi,
                                              double tau,
                                              uintptr_t n,
                                              uintptr_t order,
                                              double *value,
                                              double *error);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CARNOT_H */
