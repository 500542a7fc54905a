#ifndef CODIM2_H
#define CODIM2_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum Codim2Status {
  CODIM2_STATUS_OK = 0,
  CODIM2_STATUS_NULL_POINTER = 1,
  CODIM2_STATUS_INVALID_UTF8 = 2,
  CODIM2_STATUS_INVALID_INPUT = 3,
  CODIM2_STATUS_DOMAIN_VIOLATION = 4,
  /**
   * Rank, frame or metric degeneracy at the requested point.
   */
  CODIM2_STATUS_DEGENERATE = 5,
  CODIM2_STATUS_NOT_APPLICABLE = 6,
  /**
   * Output buffer too small; the required length was written.
   */
  CODIM2_STATUS_BUFFER_TOO_SMALL = 7,
  /**
   * Any other numerical failure.
   */
  CODIM2_STATUS_NUMERICAL = 8,
  CODIM2_STATUS_PANIC = 9,
} Codim2Status;

/**
 * Stratum kind reported by [`codim2_classify`].
 */
typedef enum Codim2StratumKind {
  /**
   * ν ≥ 1; `index` holds ν.
   */
  CODIM2_STRATUM_KIND_REL_NULLITY = 0,
  /**
   * Complementary kernels; `index` holds k = rank B.
   */
  CODIM2_STRATUM_KIND_U = 1,
  /**
   * Trivial kernel intersection with rank A + rank B > n.
   */
  CODIM2_STRATUM_KIND_STRICT = 2,
} Codim2StratumKind;

/**
 * Opaque immersion handle.
 */
typedef struct Codim2Atlas Codim2Atlas;

typedef struct Codim2PointClass {
  enum Codim2StratumKind kind;
  size_t index;
  size_t rank_a;
  size_t rank_b;
  /**
   * Nonzero where the curvature operator vanishes.
   */
  int32_t flat;
} Codim2PointClass;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *codim2_version(void);

/**
 * Copies the last error message of this thread into `buf` (NUL terminated,
 * truncated to `len`). Returns the full message length without the NUL, or 0
 * when the last call succeeded.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
size_t codim2_last_error_message(char *buf, size_t len);

/**
 * Builds an atlas from a JSON descriptor.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a valid pointer.
 */
enum Codim2Status codim2_atlas_new(const char *json, struct Codim2Atlas **out);

/**
 * Releases an atlas. Null is ignored.
 *
 * # Safety
 * `atlas` must come from [`codim2_atlas_new`] and not be used afterwards.
 */
void codim2_atlas_free(struct Codim2Atlas *atlas);

/**
 * Manifold dimension n and chart count.
 *
 * # Safety
 * `atlas` must be a live handle; outputs may be null.
 */
enum Codim2Status codim2_atlas_info(const struct Codim2Atlas *atlas, size_t *n, size_t *charts);

/**
 * det(A + tB) for a PSD pair given as row-major `dim × dim` arrays.
 *
 * # Safety
 * `a` and `b` must point to `dim * dim` doubles and `out` must be valid.
 */
enum Codim2Status codim2_pencil_det(size_t dim,
                                    const double *a,
                                    const double *b,
                                    double t,
                                    double *out);

/**
 * Gauss-equation residual at a chart point.
 *
 * # Safety
 * `u` must point to `len` doubles and `out` must be valid.
 */
enum Codim2Status codim2_gauss_residual(const struct Codim2Atlas *atlas,
                                        size_t chart,
                                        const double *u,
                                        size_t len,
                                        double *out);

/**
 * Stratum of a chart point. `rank_tol` ≤ 0 selects the library default.
 *
 * # Safety
 * `u` must point to `len` doubles and `out` must be valid.
 */
enum Codim2Status codim2_classify(const struct Codim2Atlas *atlas,
                                  size_t chart,
                                  const double *u,
                                  size_t len,
                                  double rank_tol,
                                  struct Codim2PointClass *out);

/**
 * Type numbers by normal-bundle quadrature. `tau` and `err` receive n + 1
 * values each; `cap` is their capacity. `budget` and `theta_nodes` of 0 take
 * the defaults. On `CODIM2_STATUS_BUFFER_TOO_SMALL`, `out_len` holds n + 1.
 *
 * # Safety
 * `tau` and `err` must point to `cap` writable doubles (`err` may be null),
 * `out_len` must be valid.
 */
enum Codim2Status codim2_tau_quadrature(const struct Codim2Atlas *atlas,
                                        size_t budget,
                                        size_t theta_nodes,
                                        double *tau,
                                        double *err,
                                        size_t cap,
                                        size_t *out_len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CODIM2_H */
