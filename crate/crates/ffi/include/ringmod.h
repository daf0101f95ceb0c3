#ifndef RINGMOD_H
#define RINGMOD_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum RingmodStatus {
  RINGMOD_STATUS_OK = 0,
  RINGMOD_STATUS_NULL_POINTER = 1,
  RINGMOD_STATUS_INVALID_UTF8 = 2,
  RINGMOD_STATUS_INVALID_JSON = 3,
  RINGMOD_STATUS_INVALID_ARGUMENT = 4,
  RINGMOD_STATUS_COMPUTATION = 5,
  RINGMOD_STATUS_DOMAIN = 6,
  RINGMOD_STATUS_PANIC = 7,
} RingmodStatus;

typedef enum RingmodWeightFunctional {
  /**
   * Mean of Q over S(center, a).
   */
  RINGMOD_WEIGHT_FUNCTIONAL_SPHERICAL_AVERAGE = 0,
  /**
   * ||Q||_{n-1} over S(center, a).
   */
  RINGMOD_WEIGHT_FUNCTIONAL_LQ_NORM = 1,
  /**
   * Integral of dr / ||Q||_{n-1}(r) over (a, b).
   */
  RINGMOD_WEIGHT_FUNCTIONAL_LOWER_CRITERION = 2,
  /**
   * Integral of dr / (r q(r)^{1/(n-1)}) over (a, b).
   */
  RINGMOD_WEIGHT_FUNCTIONAL_RING_CRITERION = 3,
} RingmodWeightFunctional;

typedef enum RingmodQuantity {
  /**
   * Conformal modulus of the concentric sphere family.
   */
  RINGMOD_QUANTITY_SPHERE_FAMILY_MODULUS = 0,
  RINGMOD_QUANTITY_RING_CAPACITY = 1,
  RINGMOD_QUANTITY_SEPARATING_MODULUS = 2,
} RingmodQuantity;

typedef enum RingmodCheck {
  RINGMOD_CHECK_LOWER_Q = 0,
  RINGMOD_CHECK_RING_Q = 1,
  RINGMOD_CHECK_MAIN_LEMMA_CHAIN = 2,
} RingmodCheck;

/**
 * Mapping from the analytic zoo.
 */
typedef struct RingmodMapping RingmodMapping;

/**
 * Weight field Q.
 */
typedef struct RingmodWeight RingmodWeight;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL. Valid until the
 * next failing call on the same thread.
 */
const char *ringmod_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *ringmod_version(void);

/**
 * # Safety
 * `s` must be NULL or a string returned by this library.
 */
void ringmod_string_free(char *s);

/**
 * Creates a mapping from a JSON kind object such as
 * `{"kind":"radial_stretch","alpha":2}`, centered at `center[0..dim]`.
 *
 * # Safety
 * Pointers must be valid; `center` must hold `dim` doubles.
 */
enum RingmodStatus ringmod_mapping_new(const char *kind_json,
                                       const double *center,
                                       size_t dim,
                                       struct RingmodMapping **out);

/**
 * # Safety
 * `h` must be NULL or a handle from [`ringmod_mapping_new`].
 */
void ringmod_mapping_free(struct RingmodMapping *h);

/**
 * Writes ||f'(x)||, J_f(x) and K_f(x) (INFINITY when unbounded).
 *
 * # Safety
 * `x` must hold as many doubles as the mapping's dimension; out pointers may
 * be NULL to skip a value.
 */
enum RingmodStatus ringmod_mapping_distortion(const struct RingmodMapping *h,
                                              const double *x,
                                              double *op_norm,
                                              double *jacobian_det,
                                              double *kf);

/**
 * Writes f(x) into `y`, which must hold the mapping's dimension.
 *
 * # Safety
 * `x` and `y` must hold as many doubles as the mapping's dimension.
 */
enum RingmodStatus ringmod_mapping_apply(const struct RingmodMapping *h,
                                         const double *x,
                                         double *y);

/**
 * Creates a weight from a JSON kind object such as `{"kind":"radial_log"}`.
 *
 * # Safety
 * Pointers must be valid; `center` must hold `dim` doubles.
 */
enum RingmodStatus ringmod_weight_new(const char *kind_json,
                                      const double *center,
                                      size_t dim,
                                      struct RingmodWeight **out);

/**
 * Q = N(f, D) K_f for a mapping, with N validated on the ring (r1, r2).
 *
 * # Safety
 * `mapping` must be a live handle and `out` valid.
 */
enum RingmodStatus ringmod_weight_from_mapping(const struct RingmodMapping *mapping,
                                               double r1,
                                               double r2,
                                               struct RingmodWeight **out);

/**
 * # Safety
 * `h` must be NULL or a weight handle.
 */
void ringmod_weight_free(struct RingmodWeight *h);

/**
 * Evaluates a scalar functional of the weight about its own center.
 * `b` is ignored for the single-radius functionals.
 *
 * # Safety
 * `h` must be a live weight handle, `out` valid.
 */
enum RingmodStatus ringmod_weight_functional(const struct RingmodWeight *h,
                                             enum RingmodWeightFunctional which,
                                             double a,
                                             double b,
                                             double *out);

/**
 * Closed-form value for the centered ring (r1, r2) in dimension `dim`.
 *
 * # Safety
 * `out` must be valid.
 */
enum RingmodStatus ringmod_closed_form(enum RingmodQuantity which,
                                       size_t dim,
                                       double r1,
                                       double r2,
                                       double *out);

/**
 * Runs a check about the mapping's center on (r1, r2) and returns the
 * report as JSON. `weight` may be NULL to use N(f, D) K_f (raised to n-1 for
 * the ring check). `holds` receives 1 when the inequality holds.
 *
 * # Safety
 * Handles must be live; `report_json` receives a string to release with
 * [`ringmod_string_free`].
 */
enum RingmodStatus ringmod_check(enum RingmodCheck which,
                                 const struct RingmodMapping *mapping,
                                 const struct RingmodWeight *weight,
                                 double r1,
                                 double r2,
                                 int *holds,
                                 char **report_json);

/**
 * Runs a full JSON configuration in memory. `exit_code` receives the
 * CLI exit status (0, 3 or 4); a malformed config returns
 * `RINGMOD_STATUS_INVALID_JSON` or `RINGMOD_STATUS_INVALID_ARGUMENT`.
 *
 * # Safety
 * `config_json` must be a valid string; out pointers valid.
 */
enum RingmodStatus ringmod_run_config(const char *config_json, int *exit_code, char **report_json);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RINGMOD_H */
