#ifndef CASCADE_IV_H
#define CASCADE_IV_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum CivStatus {
  CIV_STATUS_OK = 0,
  CIV_STATUS_NULL_POINTER = 1,
  /**
   * Bad shapes, values or files.
   */
  CIV_STATUS_INVALID_INPUT = 2,
  /**
   * Singular systems, divergent series and other numerical failures.
   */
  CIV_STATUS_NUMERICAL = 3,
  /**
   * A Rust panic was caught at the boundary.
   */
  CIV_STATUS_PANIC = 4,
} CivStatus;

/**
 * Which per-treatment column of an estimate set to read.
 */
typedef enum CivColumn {
  CIV_COLUMN_BETA = 0,
  CIV_COLUMN_SE_BETA = 1,
  CIV_COLUMN_WALD = 2,
  CIV_COLUMN_SE_WALD = 3,
  CIV_COLUMN_DELTA = 4,
  CIV_COLUMN_SE_DELTA = 5,
  CIV_COLUMN_REDUCED_FORM = 6,
  /**
   * Total effect from the cascade solve (equals `Beta` up to rounding).
   */
  CIV_COLUMN_TOTAL = 7,
} CivColumn;

/**
 * Opaque dataset handle.
 */
typedef struct CivDataset CivDataset;

/**
 * Opaque estimate-set handle.
 */
typedef struct CivEstimates CivEstimates;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *civ_version(void);

/**
 * Message of the last error on this thread, or NULL. Valid until the next
 * call into the library from the same thread.
 */
const char *civ_last_error_message(void);

/**
 * Stable dotted error code of the last error (e.g. `cascade.divergent_cascade`), or NULL.
 */
const char *civ_last_error_code(void);

/**
 * Builds a dataset from `n` rows, `k` treatments/instruments and `p`
 * control columns (one of which must be constant). `clusters` holds one
 * integer cluster id per row.
 *
 * # Safety
 * Pointers must reference arrays of the stated lengths; `out` must be writable.
 */
enum CivStatus civ_dataset_new(size_t n,
                               size_t k,
                               size_t p,
                               const double *y,
                               const double *a,
                               const double *z,
                               const double *x,
                               const uint64_t *clusters,
                               struct CivDataset **out);

/**
 * # Safety
 * `ds` must come from [`civ_dataset_new`] and not be used afterwards. NULL is ignored.
 */
void civ_dataset_free(struct CivDataset *ds);

/**
 * Fits 2SLS, Wald ratios and cascade effects with cluster-robust errors.
 *
 * # Safety
 * `ds` must be a live dataset handle and `out` writable.
 */
enum CivStatus civ_estimate(const struct CivDataset *ds, struct CivEstimates **out);

/**
 * Number of treatments in an estimate set (0 for NULL).
 *
 * # Safety
 * `est` must be NULL or a live handle.
 */
size_t civ_estimates_k(const struct CivEstimates *est);

/**
 * Copies one column into `buf`, which must hold `len >= k` values.
 *
 * # Safety
 * `est` must be a live handle and `buf` writable for `len` values.
 */
enum CivStatus civ_estimates_get(const struct CivEstimates *est,
                                 enum CivColumn column,
                                 double *buf,
                                 size_t len);

/**
 * # Safety
 * `est` must come from [`civ_estimate`] and not be used afterwards. NULL is ignored.
 */
void civ_estimates_free(struct CivEstimates *est);

/**
 * Total effects `t` and cascade terms `delta` from a K x K first-stage
 * matrix (rows = treatments, columns = instruments) and the reduced form.
 *
 * # Safety
 * `pi` holds k*k values; `rf`, `t_out` and `delta_out` hold k values each.
 */
enum CivStatus civ_cascade_solve(size_t k,
                                 const double *pi,
                                 const double *rf,
                                 double *t_out,
                                 double *delta_out);

/**
 * Sums the cascade round by round from a first-stage matrix and Wald
 * ratios. Writes the total effects and the number of rounds used.
 *
 * # Safety
 * `pi` holds k*k values; `wald` and `t_out` hold k values; `rounds_out` is writable or NULL.
 */
enum CivStatus civ_neumann_solve(size_t k,
                                 const double *pi,
                                 const double *wald,
                                 double tol,
                                 size_t max_rounds,
                                 double *t_out,
                                 size_t *rounds_out);

/**
 * Upper bound on the spectral radius of |M| for a K x K vacancy matrix.
 *
 * # Safety
 * `m` holds k*k values and `out` is writable.
 */
enum CivStatus civ_spectral_radius(size_t k, const double *m, double *out);

/**
 * Closed-form 2SLS coefficient for the second program in the two-program
 * design, from complier shares and the three pairwise effects.
 *
 * # Safety
 * `out` must be writable.
 */
enum CivStatus civ_three_program_beta2(double p02,
                                       double p12,
                                       double e20,
                                       double e21,
                                       double e10,
                                       double *out);

/**
 * Runs the embedded reference-table checks. Writes the number of checks
 * and the number that failed.
 *
 * # Safety
 * `total` and `failed` must be writable or NULL.
 */
enum CivStatus civ_fixture_checks(size_t *total, size_t *failed);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CASCADE_IV_H */
