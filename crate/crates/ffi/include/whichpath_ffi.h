#ifndef WHICHPATH_FFI_H
#define WHICHPATH_FFI_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Outcome of a call.
 */
typedef enum WpStatus {
  WP_STATUS_OK = 0,
  WP_STATUS_NULL_POINTER = 1,
  WP_STATUS_INVALID_PARAMETER = 2,
  /**
   * The quantity is undefined at this point (a pointer state has zero weight).
   */
  WP_STATUS_DEGENERATE = 3,
  WP_STATUS_OUT_OF_RANGE = 4,
  WP_STATUS_INTERNAL = 5,
  WP_STATUS_PANIC = 6,
} WpStatus;

/**
 * Sampled self-homodyne visibility.
 */
typedef struct WpTrace WpTrace;

/**
 * Closed-form quantities at one `(γΔt, φ_R)` point, with `γ = 1`.
 */
typedef struct WpReport {
  double gamma_dt;
  double phi_r;
  double pe_minus;
  double pe_plus;
  double delta_p;
  double sigma_minus;
  double sigma_plus_re;
  double sigma_plus_im;
  double w_minus;
  /**
   * Zero when `w_plus_defined` is false.
   */
  double w_plus_re;
  double w_plus_im;
  bool w_plus_defined;
  /**
   * `1 − w⁻`.
   */
  double wp_before;
  /**
   * `1 − |w⁺|`, NaN when `w_plus_defined` is false.
   */
  double wp_after;
  /**
   * Largest gap between the closed forms and state evolution.
   */
  double max_discrepancy;
} WpReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *wp_version(void);

/**
 * Message for the last failed call on this thread, or null. The pointer
 * stays valid until the next call into the library from the same thread.
 */
const char *wp_last_error(void);

/**
 * Fills `out` with the closed-form report at `(gamma_dt, phi_r)`.
 *
 * A degenerate point (`p_e⁺` of 0 or 1) still fills `out` and returns
 * `WP_STATUS_OK`, with `w_plus_defined = false`.
 *
 * # Safety
 * Pointer arguments must be null or valid for writes of their type.
 */
enum WpStatus wp_report(double gamma_dt, double phi_r, struct WpReport *out);

/**
 * Population change `Δp` during the second pulse, in units of `ħω₀`.
 *
 * # Safety
 * Pointer arguments must be null or valid for writes of their type.
 */
enum WpStatus wp_absorption(double gamma_dt, double phi_r, double *out);

/**
 * Ensemble spin correlation at rate `w` after time `t` (`w·t` is what matters).
 */
double wp_spin_correlation(double w, double t);

/**
 * Spin lifetime `1/w` (units of `tau_p`) reproducing the contrast `ratio`.
 *
 * # Safety
 * Pointer arguments must be null or valid for writes of their type.
 */
enum WpStatus wp_infer_spin_lifetime(double ratio, double tau_p, double *out_lifetime);

/**
 * Samples the visibility on `samples` uniform points over `[0, γΔt + 8]`;
 * `samples = 0` selects the default resolution. On success `*out` owns a
 * new handle.
 *
 * # Safety
 * Pointer arguments must be null or valid for writes of their type.
 */
enum WpStatus wp_visibility_trace(double gamma_dt,
                                  double phi_r,
                                  double phi_hom,
                                  size_t samples,
                                  struct WpTrace **out);

/**
 * Number of samples in the trace (0 for a null handle).
 *
 * # Safety
 * `trace` must be null or a live handle from [`wp_visibility_trace`];
 * other pointers must be null or valid for writes.
 */
size_t wp_trace_len(const struct WpTrace *trace);

/**
 * Sample `index`: time (units of `1/γ`), visibility and intensity. The
 * visibility is NaN where the intensity vanishes.
 *
 * # Safety
 * `trace` must be null or a live handle from [`wp_visibility_trace`];
 * other pointers must be null or valid for writes.
 */
enum WpStatus wp_trace_sample(const struct WpTrace *trace,
                              size_t index,
                              double *out_t,
                              double *out_v,
                              double *out_intensity);

/**
 * Plateau values of the two bins. `*out_v2` is NaN and the status
 * `WP_STATUS_DEGENERATE` when the second bin receives no emission.
 *
 * # Safety
 * `trace` must be null or a live handle from [`wp_visibility_trace`];
 * other pointers must be null or valid for writes.
 */
enum WpStatus wp_trace_plateaus(const struct WpTrace *trace, double *out_v1, double *out_v2);

/**
 * Releases a handle. Null is ignored.
 *
 * # Safety
 * `trace` must be null or a handle from [`wp_visibility_trace`] that has
 * not been freed.
 */
void wp_trace_free(struct WpTrace *trace);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* WHICHPATH_FFI_H */
