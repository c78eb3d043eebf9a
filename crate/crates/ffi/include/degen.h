#ifndef DEGEN_H
#define DEGEN_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

typedef enum DegenStatus {
  DEGEN_STATUS_OK = 0,
  DEGEN_STATUS_NULL_POINTER = 1,
  DEGEN_STATUS_INVALID_UTF8 = 2,
  // Problem file or expression syntax, or an unreadable file.
  DEGEN_STATUS_PARSE = 3,
  DEGEN_STATUS_DIMENSION = 4,
  // Domain cannot be located, or the point lies outside it.
  DEGEN_STATUS_DOMAIN = 5,
  DEGEN_STATUS_INVALID_ARGUMENT = 6,
  // Estimate rejected for too many unexited paths.
  DEGEN_STATUS_REJECTED = 7,
  // Non-finite bracket values at the point.
  DEGEN_STATUS_NON_FINITE = 8,
  DEGEN_STATUS_PANIC = 9,
} DegenStatus;

// Compiled scalar expression.
typedef struct DegenExpr DegenExpr;

// Loaded problem with its located domain.
typedef struct DegenProblem DegenProblem;

typedef struct DegenPathOptions {
  double dt;
  // Path horizon; zero or negative selects the default.
  double t_max;
  uint64_t seed;
  bool bridge;
} DegenPathOptions;

typedef struct DegenEstimate {
  double value;
  double stderr;
  uint64_t n_paths;
  uint64_t n_used;
  double unexited_frac;
  double mean_tau;
  double t_max;
} DegenEstimate;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread; empty after success.
// The pointer stays valid until the next call on the thread.
const char *degen_last_error(void);

// Load a problem file. On success `*out` owns a new handle.
//
// # Safety
// `path` must be a NUL-terminated string and `out` a valid pointer.
enum DegenStatus degen_problem_load(const char *path, struct DegenProblem **out);

// Parse a problem from text in the problem-file format.
//
// # Safety
// `text` must be a NUL-terminated string and `out` a valid pointer.
enum DegenStatus degen_problem_parse(const char *text, struct DegenProblem **out);

// # Safety
// `problem` must come from a `degen_problem_*` constructor or be null.
void degen_problem_free(struct DegenProblem *problem);

// Dimension `d`, or 0 for a null handle.
//
// # Safety
// `problem` must be a live handle or null.
uintptr_t degen_problem_dim(const struct DegenProblem *problem);

// Number of noise fields `n`, or 0 for a null handle.
//
// # Safety
// `problem` must be a live handle or null.
uintptr_t degen_problem_noise_count(const struct DegenProblem *problem);

// Parse an expression in variables `x1..x{dim}`.
//
// # Safety
// `source` must be a NUL-terminated string and `out` a valid pointer.
enum DegenStatus degen_expr_parse(const char *source, uintptr_t dim, struct DegenExpr **out);

// # Safety
// `e` must come from [`degen_expr_parse`] or be null.
void degen_expr_free(struct DegenExpr *e);

// # Safety
// `x` must point to `len` doubles and `out` to one.
enum DegenStatus degen_expr_eval(const struct DegenExpr *e,
                                 const double *x,
                                 uintptr_t len,
                                 double *out);

// `λ^(k)` of the problem's fields at `x`.
//
// # Safety
// `x` must point to `len` doubles and `out` to one.
enum DegenStatus degen_lambda_k(const struct DegenProblem *problem,
                                uintptr_t k,
                                const double *x,
                                uintptr_t len,
                                double *out);

// Default path options: `dt = 1e-4`, default horizon, seed 0, no bridge.
struct DegenPathOptions degen_path_options_default(void);

// Monte Carlo estimate of `u(x)` from `n_paths` paths. A rejected estimate
// returns [`DegenStatus::Rejected`] and still fills `*out`.
//
// # Safety
// `x` must point to `len` doubles, `options` and `out` to one struct each.
enum DegenStatus degen_estimate_point(const struct DegenProblem *problem,
                                      const double *x,
                                      uintptr_t len,
                                      uint64_t n_paths,
                                      const struct DegenPathOptions *options,
                                      struct DegenEstimate *out);

// Run the hypothesis checks and return the report as a JSON string in
// `*json` (release with [`degen_string_free`]) and the verdict exit code
// (0 pass, 2 fail, 3 inconclusive) in `*verdict`.
//
// # Safety
// `json` and `verdict` must be valid pointers.
enum DegenStatus degen_check_report(const struct DegenProblem *problem,
                                    uintptr_t k_max,
                                    uintptr_t grid_res,
                                    char **json,
                                    int32_t *verdict);

// Release a string returned by this library.
//
// # Safety
// `s` must come from this library or be null.
void degen_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DEGEN_H */
