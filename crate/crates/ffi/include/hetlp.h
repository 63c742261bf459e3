#ifndef HETLP_H
#define HETLP_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum HetlpStatus {
  HETLP_STATUS_OK = 0,
  HETLP_STATUS_NULL_POINTER = 1,
  HETLP_STATUS_INVALID_ARGUMENT = 2,
  HETLP_STATUS_NUMERICAL = 3,
  HETLP_STATUS_BUFFER_TOO_SMALL = 4,
  HETLP_STATUS_PANIC = 5,
} HetlpStatus;

typedef enum HetlpBandKind {
  HETLP_BAND_KIND_POINTWISE = 0,
  HETLP_BAND_KIND_SUPT = 1,
  HETLP_BAND_KIND_BONFERRONI = 2,
} HetlpBandKind;

// Opaque estimate handle.
typedef struct HetlpEstimate HetlpEstimate;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null. The pointer stays
// valid until the next failing call on the same thread.
const char *hetlp_last_error(void);

// Library version as a static NUL-terminated string.
const char *hetlp_version(void);

// Bootstrap bandwidth rule `round(0.75 T^{1/3})`, at least 1.
size_t hetlp_default_bandwidth(size_t t_len);

// Estimates responses, impact vector and scores.
//
// `data` holds `t_len * n` values period by period; `instrument` holds
// `t_len` values. `trend` is the polynomial degree, -1 for none.
//
// # Safety
// `data` and `instrument` must point to the stated number of doubles and
// `out` to writable storage for one pointer.
enum HetlpStatus hetlp_estimate_new(const double *data,
                                    size_t t_len,
                                    size_t n,
                                    const double *instrument,
                                    size_t lags,
                                    int32_t trend,
                                    size_t h1,
                                    size_t h2,
                                    size_t shock,
                                    struct HetlpEstimate **out);

// Releases an estimate. Null is ignored.
//
// # Safety
// `est` must be null or a handle from `hetlp_estimate_new` not yet freed.
void hetlp_estimate_free(struct HetlpEstimate *est);

// Writes the number of variables, `H1`, `H2` and the parameter-vector length.
// Any output pointer may be null.
//
// # Safety
// `est` must be a live handle; non-null outputs must be writable.
enum HetlpStatus hetlp_estimate_dims(const struct HetlpEstimate *est,
                                     size_t *n,
                                     size_t *h1,
                                     size_t *h2,
                                     size_t *theta_len);

// Flat parameter vector: `vec(Sigma)`, `vec(C_1..C_H1)`, `gamma`, column-major.
//
// # Safety
// `est` must be a live handle and `buf` must hold `len` doubles.
enum HetlpStatus hetlp_estimate_theta(const struct HetlpEstimate *est, double *buf, size_t len);

// Impact vector of a one-standard-deviation shock (`n` values).
//
// # Safety
// `est` must be a live handle and `buf` must hold `len` doubles.
enum HetlpStatus hetlp_estimate_impact(const struct HetlpEstimate *est, double *buf, size_t len);

// Structural response of `variable` at horizons `0..=H2` (`H2 + 1` values).
//
// # Safety
// `est` must be a live handle and `buf` must hold `len` doubles.
enum HetlpStatus hetlp_estimate_irf(const struct HetlpEstimate *est,
                                    size_t variable,
                                    double *buf,
                                    size_t len);

// Band for the structural response of `variable` at horizons `0..=H2` from
// `draws` dependent wild bootstrap draws. `bandwidth = 0` selects the rule.
// `lower` and `upper` each receive `H2 + 1` values.
//
// # Safety
// `est` must be a live handle; `lower` and `upper` must each hold `len` doubles.
enum HetlpStatus hetlp_estimate_bands(const struct HetlpEstimate *est,
                                      size_t variable,
                                      size_t draws,
                                      size_t bandwidth,
                                      uint64_t seed,
                                      double alpha,
                                      enum HetlpBandKind kind,
                                      double *lower,
                                      double *upper,
                                      size_t len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HETLP_H */
