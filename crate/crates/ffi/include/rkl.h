/* Generated by cbindgen from crates/ffi; do not edit. */

#ifndef RKL_H
#define RKL_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Kernel family `M_0` (derivative form).
 */
#define RKL_FAMILY_M0 0

/**
 * Kernel family `M_1` (multiplication by `e^u`).
 */
#define RKL_FAMILY_M1 1

/**
 * Result code of every fallible call.
 */
typedef enum RklStatus {
  RKL_STATUS_OK = 0,
  RKL_STATUS_NULL_POINTER = 1,
  RKL_STATUS_INVALID_ARGUMENT = 2,
  RKL_STATUS_CONFIG = 3,
  RKL_STATUS_OVERFLOW = 4,
  RKL_STATUS_CONVERGENCE = 5,
  RKL_STATUS_ILL_CONDITIONED = 6,
  RKL_STATUS_LINEAR_ALGEBRA = 7,
  RKL_STATUS_IO = 8,
  /**
   * A verification run finished but some report differs from its
   * expectation.
   */
  RKL_STATUS_VERIFICATION_FAILED = 9,
  RKL_STATUS_PANIC = 10,
} RklStatus;

/**
 * Uniform grid on the real line.
 */
typedef struct RklGrid RklGrid;

/**
 * Dense operator on a grid.
 */
typedef struct RklOperator RklOperator;

/**
 * Sampled weight with its estimated `A_2` characteristic.
 */
typedef struct RklWeight RklWeight;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *rkl_version(void);

/**
 * Copies the last error message of the calling thread into `buf` (always
 * NUL-terminated when `len > 0`, truncated if needed) and returns its full
 * length in bytes, excluding the terminator. `buf` may be `NULL` to query
 * the length.
 */
size_t rkl_last_error_message(char *buf, size_t len);

/**
 * Clears the last error message of the calling thread.
 */
void rkl_clear_error(void);

/**
 * `J_nu(x)` for `nu >= 0`, `x >= 0`. `rel_err` is optional.
 */
enum RklStatus rkl_bessel_j(double nu, double x, double *value, double *rel_err);

/**
 * `I_nu(x)`; fails with `RKL_STATUS_OVERFLOW` where it exceeds `double`.
 * `rel_err` is optional.
 */
enum RklStatus rkl_bessel_i(double nu, double x, double *value, double *rel_err);

/**
 * `K_nu(x)`; fails with `RKL_STATUS_OVERFLOW` where it leaves the `double`
 * range. `rel_err` is optional.
 */
enum RklStatus rkl_bessel_k(double nu, double x, double *value, double *rel_err);

/**
 * `K_nu(x) = mantissa * exp(exponent_offset)`, valid at any `x > 0`.
 */
enum RklStatus rkl_bessel_k_scaled(double nu, double x, double *mantissa, double *exponent_offset);

/**
 * Homogeneous derivative `(d/du + d/dv)^n` of the kernel of `family` at a
 * fixed `t` in `(0, 1/2]`. `abs_err` is optional.
 */
enum RklStatus rkl_kernel_t(int32_t family_code,
                            size_t n,
                            double t,
                            double u,
                            double v,
                            double *value,
                            double *abs_err);

/**
 * The kernel integrated over `t` in `(0, 1/2)` to relative tolerance
 * `tol`. `abs_err` is optional.
 */
enum RklStatus rkl_kernel_integrated(int32_t family_code,
                                     size_t n,
                                     double u,
                                     double v,
                                     double tol,
                                     double *value,
                                     double *abs_err);

/**
 * `g(lambda) = lambda^{-1/2} arctan(lambda^{-1/2} / 2)` for `lambda > 0`.
 */
enum RklStatus rkl_subordination_g(double lambda, double *value);

/**
 * `count` points from `u_min` to `u_max` inclusive.
 */
enum RklStatus rkl_grid_new(double u_min, double u_max, size_t count, struct RklGrid **out);

enum RklStatus rkl_grid_count(const struct RklGrid *grid, size_t *count);

enum RklStatus rkl_grid_point(const struct RklGrid *grid, size_t i, double *u);

void rkl_grid_free(struct RklGrid *grid);

/**
 * Finite-difference `H(xi) = -d^2/du^2 + xi^2 e^{2u}` with Dirichlet ends.
 */
enum RklStatus rkl_operator_hamiltonian(double xi,
                                        const struct RklGrid *grid,
                                        struct RklOperator **out);

/**
 * `(t^2 + H(xi))^{-1}` of the finite-difference operator.
 */
enum RklStatus rkl_operator_resolvent(double xi,
                                      double t,
                                      const struct RklGrid *grid,
                                      struct RklOperator **out);

/**
 * Discretised `(xi d/dxi)^n M_j(xi)` built from the integrated kernels.
 */
enum RklStatus rkl_operator_multiplier(int32_t family_code,
                                       size_t n,
                                       double xi,
                                       const struct RklGrid *grid,
                                       struct RklOperator **out);

enum RklStatus rkl_operator_dim(const struct RklOperator *op, size_t *dim);

enum RklStatus rkl_operator_get(const struct RklOperator *op, size_t i, size_t j, double *value);

/**
 * Copies the entries in row-major order; `len` must be at least `dim^2`.
 */
enum RklStatus rkl_operator_copy(const struct RklOperator *op, double *buf, size_t len);

enum RklStatus rkl_operator_spectral_norm(const struct RklOperator *op, double *norm);

/**
 * Norm of the operator on `L^2(w)`; the weight must live on the same grid.
 */
enum RklStatus rkl_operator_weighted_norm(const struct RklOperator *op,
                                          const struct RklWeight *weight,
                                          double *norm);

void rkl_operator_free(struct RklOperator *op);

/**
 * Samples the weight family named by `id` (for example
 * `"power:a=0.3:center=0"`) on `grid`.
 */
enum RklStatus rkl_weight_new(const char *id, const struct RklGrid *grid, struct RklWeight **out);

enum RklStatus rkl_weight_a2(const struct RklWeight *weight, double *a2);

void rkl_weight_free(struct RklWeight *weight);

/**
 * Runs a verification suite (`bessel`, `kernels`, `estimates`,
 * `operators` or `all`) and writes its reports to `out_dir`.
 *
 * `preset` (`default` or `quick`) and `out_dir` may be `NULL`; the output
 * directory then defaults to `reports`. `parallel = 0` uses all cores.
 * `failing`, optional, receives the number of reports that differ from
 * their expectation; any such report makes the call return
 * `RKL_STATUS_VERIFICATION_FAILED`.
 */
enum RklStatus rkl_verify(const char *suite,
                          const char *preset,
                          const char *out_dir,
                          size_t parallel,
                          size_t *failing);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RKL_H */
