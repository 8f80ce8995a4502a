#ifndef GIBBSFLOW_H
#define GIBBSFLOW_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum GfStatus {
  GF_STATUS_OK = 0,
  GF_STATUS_NULL_POINTER = 1,
  GF_STATUS_INVALID_ARGUMENT = 2,
  GF_STATUS_NUMERICAL = 3,
  GF_STATUS_PANIC = 4,
} GfStatus;

// Potential selector for [`gf_operator_new`].
typedef enum GfPotential {
  // `-½Δ + c|u|² - ½`.
  GF_POTENTIAL_HARMONIC = 0,
  // `-½Δ + c|u|² + |u|⁴ - ½`.
  GF_POTENTIAL_HARMONIC_PLUS_QUARTIC = 1,
} GfPotential;

// Opaque discretized Schrödinger operator.
typedef struct GfOperator GfOperator;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread; empty after success. The
// pointer stays valid until the next call on this thread.
const char *gf_last_error(void);

// One Ornstein-Uhlenbeck path with covariance `½e^{-|x-y|}` on `n_points`
// equispaced points of `[x_min, x_max]`, from stream `stream` of `seed`.
// Writes real and imaginary parts into arrays of length `n_points`.
//
// # Safety
// `re_out` and `im_out` must be valid for `n_points` writes.
enum GfStatus gf_sample_ou_line(double x_min,
                                double x_max,
                                size_t n_points,
                                uint64_t seed,
                                uint64_t stream,
                                double *re_out,
                                double *im_out);

// Mehler kernel of `e^{-x(-½d² + ½u² - ½)}` at `(u1, u2)`, `x > 0`.
//
// # Safety
// `out` must be valid for one write.
enum GfStatus gf_mehler_kernel(double x, double u1, double u2, double *out);

// Builds the finite-difference operator on `[-u_max, u_max]^dimension` with
// `n_u` points per axis and stores a new handle in `*out`.
//
// # Safety
// `out` must be valid for one write.
enum GfStatus gf_operator_new(double u_max,
                              size_t n_u,
                              size_t dimension,
                              enum GfPotential potential,
                              struct GfOperator **out);

// Releases a handle; null is ignored.
//
// # Safety
// `op` must come from [`gf_operator_new`] and not be used afterwards.
void gf_operator_free(struct GfOperator *op);

// Number of grid states, `n_u^dimension`.
//
// # Safety
// `op` must be a live handle and `out` valid for one write.
enum GfStatus gf_operator_n_states(const struct GfOperator *op, size_t *out);

// Lowest eigenvalue.
//
// # Safety
// `op` must be a live handle and `out` valid for one write.
enum GfStatus gf_operator_ground_energy(const struct GfOperator *op, double *out);

// Positive ground state, normalized with `Σ Ω² · cell_volume = 1`, written
// into `out` of length `len` (must equal the number of states; row-major in
// two dimensions).
//
// # Safety
// `op` must be a live handle and `out` valid for `len` writes.
enum GfStatus gf_operator_ground_state(const struct GfOperator *op, double *out, size_t len);

// Evolves `i∂_t u = -u_xx + g|u|²u` on the periodic box `[-L/2, L/2)` with
// `n` points from `t = 0` to `t_final` (negative runs backward) with step
// `dt` and no dealiasing. Input and output arrays may alias.
//
// # Safety
// The input arrays must be valid for `n` reads and the output arrays for `n`
// writes.
enum GfStatus gf_evolve(const double *re,
                        const double *im,
                        size_t n,
                        double length,
                        double coupling,
                        double dt,
                        double t_final,
                        double *re_out,
                        double *im_out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GIBBSFLOW_H */
