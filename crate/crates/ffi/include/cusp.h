#ifndef CUSP_H
#define CUSP_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every function.
 */
typedef enum CuspStatus {
  CUSP_STATUS_OK = 0,
  CUSP_STATUS_NULL_POINTER = 1,
  CUSP_STATUS_DOMAIN = 2,
  CUSP_STATUS_SINGULAR = 3,
  CUSP_STATUS_GRAZING = 4,
  CUSP_STATUS_NUMERICAL = 5,
  CUSP_STATUS_CONSTRUCTION = 6,
  CUSP_STATUS_EXTRACTION = 7,
  CUSP_STATUS_SEGMENTATION = 8,
  CUSP_STATUS_HYPOTHESIS = 9,
  CUSP_STATUS_INCONCLUSIVE = 10,
  CUSP_STATUS_CONFIG = 11,
  CUSP_STATUS_IO = 12,
  CUSP_STATUS_UTF8 = 13,
  CUSP_STATUS_BUFFER_TOO_SMALL = 14,
  CUSP_STATUS_PANIC = 15,
} CuspStatus;

/**
 * A mean-zero observable bound to a table.
 */
typedef struct CuspObservable CuspObservable;

/**
 * An orbit of the collision map on a table it borrows.
 */
typedef struct CuspOrbit CuspOrbit;

/**
 * A billiard table.
 */
typedef struct CuspTable CuspTable;

/**
 * Summary of one corner series.
 */
typedef struct CuspCornerSummary {
  uint64_t n;
  uint64_t n_prime;
  uint64_t n1;
  uint64_t n2;
  uint64_t n3;
  double c_n;
  double c_n_prime;
} CuspCornerSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the last error message of this thread into `buf` as a
 * NUL-terminated string. `len` receives the message length without the NUL.
 *
 * # Safety
 * `buf` must point to `cap` writable bytes or be null with `cap == 0`.
 */
enum CuspStatus cusp_last_error(char *buf, size_t cap, size_t *len);

/**
 * Builds the one-cusp table.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum CuspStatus cusp_table_one_cusp(double beta,
                                    double c_plus,
                                    double c_minus,
                                    double wall_length,
                                    double epsilon,
                                    struct CuspTable **out);

/**
 * Builds the two-cusp table; cusp `a` has label 1 and cusp `b` label 2.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum CuspStatus cusp_table_two_cusp(double beta_a,
                                    double c_a,
                                    double beta_b,
                                    double c_b,
                                    double wall_length,
                                    double epsilon,
                                    struct CuspTable **out);

/**
 * Builds the table described by the `[table]` section of a run config.
 *
 * # Safety
 * `toml` must be a NUL-terminated string and `out` a valid pointer.
 */
enum CuspStatus cusp_table_from_config(const char *toml, struct CuspTable **out);

/**
 * # Safety
 * `table` must come from a `cusp_table_*` constructor or be null; orbits and
 * observables built on it must be freed first.
 */
void cusp_table_free(struct CuspTable *table);

/**
 * Perimeter, stability index and number of cusps.
 *
 * # Safety
 * All pointers must be valid.
 */
enum CuspStatus cusp_table_info(const struct CuspTable *table,
                                double *perimeter,
                                double *alpha,
                                uint32_t *cusp_count);

/**
 * Draws a collision `(r, φ)` from the invariant measure, reproducibly in
 * `(seed, task)`.
 *
 * # Safety
 * All pointers must be valid.
 */
enum CuspStatus cusp_sample_mu(const struct CuspTable *table,
                               uint64_t seed,
                               uint64_t task,
                               double *r,
                               double *phi);

/**
 * Starts an orbit at the collision `(r, φ)`.
 *
 * # Safety
 * `table` must outlive the orbit; `out` must be valid.
 */
enum CuspStatus cusp_orbit_new(const struct CuspTable *table,
                               double r,
                               double phi,
                               struct CuspOrbit **out);

/**
 * Applies the collision map once and reports the new collision and the
 * free path travelled. The orbit is unchanged on failure.
 *
 * # Safety
 * All pointers must be valid.
 */
enum CuspStatus cusp_orbit_step(struct CuspOrbit *orbit, double *r, double *phi, double *free_path);

/**
 * # Safety
 * `orbit` must come from `cusp_orbit_new` or be null.
 */
void cusp_orbit_free(struct CuspOrbit *orbit);

/**
 * First return to the base set from `(r, φ)`: return time, label of the
 * visited cusp (0 for none) and the return point.
 *
 * # Safety
 * All pointers must be valid.
 */
enum CuspStatus cusp_return_map(const struct CuspTable *table,
                                double r,
                                double phi,
                                uint64_t *return_time,
                                uint32_t *cusp_label,
                                double *r_out,
                                double *phi_out);

/**
 * Bump observable on the walls of one cusp, centred under the invariant
 * measure.
 *
 * # Safety
 * `table` must outlive the observable; `out` must be valid.
 */
enum CuspStatus cusp_observable_cusp_bump(const struct CuspTable *table,
                                          uint32_t label,
                                          double weight,
                                          double width,
                                          struct CuspObservable **out);

/**
 * # Safety
 * `obs` must come from a `cusp_observable_*` constructor or be null.
 */
void cusp_observable_free(struct CuspObservable *obs);

/**
 * Fills `out[0..reps]` with `S_n f / n^{1/α}` from independent invariant
 * starts.
 *
 * # Safety
 * `out` must point to `reps` writable doubles.
 */
enum CuspStatus cusp_birkhoff_samples(const struct CuspTable *table,
                                      const struct CuspObservable *obs,
                                      uint64_t n,
                                      uint64_t reps,
                                      uint64_t seed,
                                      double *out);

/**
 * CDF of the strictly stable law with parameters `(α, ξ, scale)` at `x`.
 *
 * # Safety
 * `out` must be valid.
 */
enum CuspStatus cusp_stable_cdf(double alpha, double xi, double scale, double x, double *out);

/**
 * Corner series of a launch aimed to make about `n_target` reflections on
 * the first wall of a cusp with walls `±c± s^β/β`.
 *
 * # Safety
 * `out` must be valid.
 */
enum CuspStatus cusp_corner_series(double beta,
                                   double c_plus,
                                   double c_minus,
                                   bool first_plus,
                                   double n_target,
                                   bool extended,
                                   struct CuspCornerSummary *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CUSP_H */
