/* C interface of the frustrated-diffusions toolkit. */

#pragma once

/* Generated by cbindgen from the Rust sources; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Period estimator selector for [`fd_period`].
 */
typedef enum FdPeriodMethod {
  FdPeriodMethod_Poincare = 0,
  FdPeriodMethod_Dft = 1,
} FdPeriodMethod;

/**
 * Outcome of an API call. The numeric values match the CLI exit codes so
 * embedders and scripts can share error tables.
 */
typedef enum FdStatus {
  FdStatus_Ok = 0,
  /**
   * Invalid arguments, null pointers, or malformed input.
   */
  FdStatus_Invalid = 2,
  /**
   * The simulation left the numerical trust region.
   */
  FdStatus_Divergence = 3,
  /**
   * The computation ran but the requested quantity does not exist
   * (no rhythm, no convergence, no bracketed root).
   */
  FdStatus_Analysis = 4,
} FdStatus;

/**
 * Simulation parameters (opaque).
 */
typedef struct FdParams FdParams;

/**
 * A uniformly sampled mean trajectory (opaque).
 */
typedef struct FdTrajectory FdTrajectory;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Last error message of the current thread, or null when the most recent
 * call succeeded. The pointer stays valid until the next failing call on
 * the same thread.
 */
const char *fd_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *fd_version(void);

/**
 * Parameters of the reference parameterization: alpha = 1/2,
 * theta11 = theta22 = 8, theta12 = 2A, theta21 = -2B, N = 1000,
 * dt = 0.005, 200000 steps, seed 1. Returns null (with `fd_last_error`
 * set) when the resulting parameter set is invalid.
 */
struct FdParams *fd_params_new(double a, double b, double sigma);

/**
 * Parse a flat key=value configuration (same format as the CLI
 * `--config` file). Returns null with `fd_last_error` set on failure.
 *
 * # Safety
 * `text` must be a NUL-terminated string or null.
 */
struct FdParams *fd_params_from_config(const char *text);

/**
 * Release a parameter handle. A null pointer is a no-op.
 *
 * # Safety
 * `p` must be null or a pointer obtained from this library that has not
 * been freed yet.
 */
void fd_params_free(struct FdParams *p);

/**
 * Set one scalar field by name. Keys are the config-file keys: alpha,
 * theta11, theta12, theta21, theta22, sigma, dt, n1, n2, steps, seed.
 * Values are validated when the parameters are used, not here.
 *
 * # Safety
 * `p` must be a live handle from this library; `key` a NUL-terminated
 * string.
 */
enum FdStatus fd_params_set(struct FdParams *p, const char *key, double value);

/**
 * Read one scalar field by name (same keys as [`fd_params_set`]).
 * Returns NaN for a null handle or unknown key.
 *
 * # Safety
 * `p` must be null or a live handle; `key` a NUL-terminated string.
 */
double fd_params_get(const struct FdParams *p, const char *key);

/**
 * Check the full parameter set without running anything.
 *
 * # Safety
 * `p` must be null or a live handle.
 */
enum FdStatus fd_params_validate(const struct FdParams *p);

/**
 * Integrate the N-particle system. Every particle of both populations
 * starts at `ic_value`; the empirical means are recorded every `stride`
 * steps. On success `*out` receives a trajectory handle.
 *
 * # Safety
 * `p` must be a live handle, `out` a valid pointer to a pointer slot.
 */
enum FdStatus fd_simulate(const struct FdParams *p,
                          double ic_value,
                          size_t stride,
                          struct FdTrajectory **out);

/**
 * Integrate the Gaussian moment closure from `init = {m1, m2, v1, v2}`
 * over `t_end` with step `dt_ode`. On success `*out` receives a
 * trajectory handle carrying variance columns.
 *
 * # Safety
 * `p` must be a live handle, `init` must point at four doubles, `out` at
 * a pointer slot.
 */
enum FdStatus fd_moments(const struct FdParams *p,
                         double t_end,
                         double dt_ode,
                         const double *init,
                         struct FdTrajectory **out);

/**
 * Release a trajectory handle. A null pointer is a no-op.
 *
 * # Safety
 * `t` must be null or a pointer obtained from this library that has not
 * been freed yet.
 */
void fd_trajectory_free(struct FdTrajectory *t);

/**
 * Number of samples; 0 for a null handle.
 *
 * # Safety
 * `t` must be null or a live handle.
 */
size_t fd_trajectory_len(const struct FdTrajectory *t);

/**
 * Time of the first sample; NaN for a null handle.
 *
 * # Safety
 * `t` must be null or a live handle.
 */
double fd_trajectory_t0(const struct FdTrajectory *t);

/**
 * Sampling interval; NaN for a null handle.
 *
 * # Safety
 * `t` must be null or a live handle.
 */
double fd_trajectory_dt(const struct FdTrajectory *t);

/**
 * Borrowed pointer to the m1 column (`fd_trajectory_len` entries), null
 * for a null handle.
 *
 * # Safety
 * `t` must be null or a live handle; the pointer dies with the handle.
 */
const double *fd_trajectory_m1(const struct FdTrajectory *t);

/**
 * Borrowed pointer to the m2 column, null for a null handle.
 *
 * # Safety
 * `t` must be null or a live handle; the pointer dies with the handle.
 */
const double *fd_trajectory_m2(const struct FdTrajectory *t);

/**
 * Borrowed pointer to the v1 column, or null when the trajectory has no
 * variance columns (particle runs, as opposed to closure runs).
 *
 * # Safety
 * `t` must be null or a live handle; the pointer dies with the handle.
 */
const double *fd_trajectory_v1(const struct FdTrajectory *t);

/**
 * Borrowed pointer to the v2 column, or null when absent.
 *
 * # Safety
 * `t` must be null or a live handle; the pointer dies with the handle.
 */
const double *fd_trajectory_v2(const struct FdTrajectory *t);

/**
 * Write the canonical CSV representation (t,m1,m2 or t,m1,m2,v1,v2).
 *
 * # Safety
 * `t` must be a live handle, `path` a NUL-terminated string.
 */
enum FdStatus fd_trajectory_write_csv(const struct FdTrajectory *t, const char *path);

/**
 * Read a trajectory from its CSV representation.
 *
 * # Safety
 * `path` must be a NUL-terminated string, `out` a pointer slot.
 */
enum FdStatus fd_trajectory_read_csv(const char *path, struct FdTrajectory **out);

/**
 * Estimate the oscillation period of a trajectory. `burn_in` is absolute
 * time units discarded from the start. `mean` and `std` receive the
 * estimate; `events` (optional, may be null) receives the crossing count
 * for the Poincare method or the replica count for the DFT.
 *
 * # Safety
 * `t` must be a live handle; `mean` and `std` must be valid pointers;
 * `events` may be null.
 */
enum FdStatus fd_period(const struct FdTrajectory *t,
                        enum FdPeriodMethod method,
                        double burn_in,
                        double *mean,
                        double *std,
                        size_t *events);

/**
 * Critical noise intensity of the moment closure in `[sigma_lo,
 * sigma_hi]`. Fails with `FdStatus::Analysis` when the bracket does not
 * straddle the bifurcation.
 *
 * # Safety
 * `p` must be a live handle, `out` a valid pointer.
 */
enum FdStatus fd_sigma_c(const struct FdParams *p, double sigma_lo, double sigma_hi, double *out);

/**
 * Equilibria of the noiseless planar system with couplings A, B as a
 * JSON document (points, eigenvalues, classification, regime). Returns
 * null with `fd_last_error` set on failure; release the string with
 * [`fd_string_free`].
 */
char *fd_equilibria_json(double a, double b);

/**
 * Release a string returned by this library. A null pointer is a no-op.
 *
 * # Safety
 * `s` must be null or a string returned by this library that has not
 * been freed yet.
 */
void fd_string_free(char *s);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus
