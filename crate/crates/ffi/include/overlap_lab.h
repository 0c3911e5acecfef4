#ifndef OVERLAP_LAB_H
#define OVERLAP_LAB_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define OL_FAMILY_CUBIC 0

#define OL_FAMILY_TORUS 1

#define OL_COUPLING_MU_ONLY 0

#define OL_COUPLING_EPS_MU 1

#define OL_VERDICT_CONFINED 0

#define OL_VERDICT_OVERLAPPED 1

#define OL_VERDICT_UNDETERMINED 2

typedef enum OlStatus {
  OL_STATUS_OK = 0,
  OL_STATUS_NULL_POINTER = 1,
  OL_STATUS_INVALID_ARGUMENT = 2,
  OL_STATUS_PARSE = 3,
  OL_STATUS_NOT_A_SADDLE = 4,
  OL_STATUS_NO_CONVERGENCE = 5,
  OL_STATUS_NOT_HYPERBOLIC = 6,
  OL_STATUS_INTEGRATION = 7,
  OL_STATUS_NO_SUCH_CONNECTION = 8,
  OL_STATUS_INSUFFICIENT_ARCLENGTH = 9,
  OL_STATUS_IO = 10,
  OL_STATUS_PANIC = 11,
} OlStatus;

/**
 * Opaque model handle.
 */
typedef struct OlModel OlModel;

/**
 * Opaque Melnikov profile handle.
 */
typedef struct OlProfile OlProfile;

/**
 * Integrator settings. Pass `NULL` wherever one is accepted to use the
 * defaults of [`ol_integrator_default`].
 */
typedef struct OlIntegrator {
  double abs_tol;
  double rel_tol;
  double max_step;
} OlIntegrator;

typedef struct OlHyperbolicOrbit {
  double x;
  double y;
  double t;
  double lambda_u;
  double lambda_s;
  double v_u[2];
  double v_s[2];
  double residual;
  double parent_x;
  double parent_y;
} OlHyperbolicOrbit;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Default integrator settings (absolute 1e-12, relative 1e-10).
 */
struct OlIntegrator ol_integrator_default(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *ol_version(void);

/**
 * Copies the calling thread's last error message into `buf` (truncated,
 * always NUL-terminated when `len > 0`). Returns the full message length
 * excluding the terminator, or 0 when there is no error.
 *
 * # Safety
 * `buf` must be NULL or point to `len` writable bytes.
 */
size_t ol_last_error_message(char *buf, size_t len);

/**
 * Creates a model. `f_expr` is an inline perturbation such as
 * `"cos(x+2y+t)"`; NULL selects that default.
 *
 * # Safety
 * `f_expr` must be NULL or a valid C string; `out` must be writable.
 */
enum OlStatus ol_model_new(uint32_t family,
                           double epsilon,
                           double mu,
                           uint32_t coupling,
                           const char *f_expr,
                           struct OlModel **out);

/**
 * Releases a model. NULL is ignored.
 *
 * # Safety
 * `m` must be NULL or a handle from `ol_model_new` not yet freed.
 */
void ol_model_free(struct OlModel *m);

/**
 * `H(x, y, t)`.
 *
 * # Safety
 * `m` must be a live handle and `out` writable.
 */
enum OlStatus ol_energy(const struct OlModel *m, double x, double y, double t, double *out);

/**
 * `(ẋ, ẏ)` at `(x, y, t)`.
 *
 * # Safety
 * `m` must be a live handle and `dx`, `dy` writable.
 */
enum OlStatus ol_vector_field(const struct OlModel *m,
                              double x,
                              double y,
                              double t,
                              double *dx,
                              double *dy);

/**
 * `n` iterates of the time-2π map from `(x, y)` at phase `t0`, written to
 * `xs[0..n]` and `ys[0..n]` as lifted coordinates.
 *
 * # Safety
 * `m` must be a live handle; `xs` and `ys` must hold `n` doubles;
 * `cfg` may be NULL.
 */
enum OlStatus ol_strobe(const struct OlModel *m,
                        double x,
                        double y,
                        double t0,
                        size_t n,
                        const struct OlIntegrator *cfg,
                        double *xs,
                        double *ys);

/**
 * Jacobian of the time-2π map, row-major into `out[0..4]`.
 *
 * # Safety
 * `m` must be a live handle and `out` hold 4 doubles; `cfg` may be NULL.
 */
enum OlStatus ol_strobe_jacobian(const struct OlModel *m,
                                 double x,
                                 double y,
                                 double t0,
                                 const struct OlIntegrator *cfg,
                                 double *out);

/**
 * Newton refinement of a fixed point of the time-2π map at phase `t0`.
 *
 * # Safety
 * `m` must be a live handle and `out` writable; `cfg` may be NULL.
 */
enum OlStatus ol_refine_fixed_point(const struct OlModel *m,
                                    double x,
                                    double y,
                                    double t0,
                                    const struct OlIntegrator *cfg,
                                    struct OlHyperbolicOrbit *out);

/**
 * Melnikov profile (per unit `μ`) of the model's perturbation along the
 * unperturbed connection from saddle `(from_x, from_y)` to `(to_x, to_y)`.
 *
 * # Safety
 * `m` must be a live handle and `out` writable.
 */
enum OlStatus ol_melnikov_profile(const struct OlModel *m,
                                  double from_x,
                                  double from_y,
                                  double to_x,
                                  double to_y,
                                  size_t n_t0,
                                  struct OlProfile **out);

/**
 * Number of sampled phases.
 *
 * # Safety
 * `p` must be NULL or a live profile handle.
 */
size_t ol_profile_len(const struct OlProfile *p);

/**
 * Copies up to `cap` samples into `t0` and `values`; returns the number copied.
 *
 * # Safety
 * `p` must be a live handle; `t0` and `values` must hold `cap` doubles.
 */
size_t ol_profile_samples(const struct OlProfile *p, double *t0, double *values, size_t cap);

/**
 * Profile value at any phase, from its harmonic expansion.
 *
 * # Safety
 * `p` must be a live profile handle.
 */
double ol_profile_eval(const struct OlProfile *p, double t0);

/**
 * Copies up to `cap` simple zeros into `zeros`; returns the number copied.
 *
 * # Safety
 * `p` must be a live handle and `zeros` hold `cap` doubles.
 */
size_t ol_profile_zeros(const struct OlProfile *p, double *zeros, size_t cap);

/**
 * # Safety
 * `p` must be NULL or a handle from `ol_melnikov_profile` not yet freed.
 */
void ol_profile_free(struct OlProfile *p);

/**
 * Confinement test with `n_orbits` seeds and `n_strobe` iterates each;
 * writes one of the `OL_VERDICT_*` values. Zero budgets select defaults.
 *
 * # Safety
 * `m` must be a live handle and `verdict` writable.
 */
enum OlStatus ol_confinement_test(const struct OlModel *m,
                                  size_t n_orbits,
                                  size_t n_strobe,
                                  uint32_t *verdict);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* OVERLAP_LAB_H */
