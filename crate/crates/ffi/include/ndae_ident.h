#ifndef NDAE_IDENT_H
#define NDAE_IDENT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every entry point.
typedef enum NdaeStatus {
  NDAE_STATUS_OK = 0,
  NDAE_STATUS_NULL_POINTER = 1,
  NDAE_STATUS_INVALID_ARGUMENT = 2,
  NDAE_STATUS_DIMENSION_MISMATCH = 3,
  NDAE_STATUS_SINGULAR_MATRIX = 4,
  NDAE_STATUS_NO_CONVERGENCE = 5,
  NDAE_STATUS_SOLVER_FAILURE = 6,
  NDAE_STATUS_NOT_POSITIVE_DEFINITE = 7,
  NDAE_STATUS_NOT_SYMMETRIC = 8,
  NDAE_STATUS_NOT_HURWITZ = 9,
  NDAE_STATUS_IO = 10,
  NDAE_STATUS_JSON = 11,
  NDAE_STATUS_PANIC = 12,
  NDAE_STATUS_OTHER = 13,
} NdaeStatus;

// Opaque network checkpoint (algebraic map or differential network).
typedef struct NdaeCheckpoint NdaeCheckpoint;

// Opaque model handle.
typedef struct NdaeModelHandle NdaeModelHandle;

// Opaque simulation result.
typedef struct NdaeTrajectory NdaeTrajectory;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null. Valid until
// the next failing call on the same thread.
const char *ndae_last_error(void);

// Library version as a static string.
const char *ndae_version(void);

// Releases a string returned by this library.
void ndae_string_free(char *s);

// Synthetic `n_gen`-generator model.
enum NdaeStatus ndae_model_synthetic(size_t n_gen, uint64_t seed, struct NdaeModelHandle **out);

enum NdaeStatus ndae_model_from_json(const char *json, struct NdaeModelHandle **out);

// Serializes the model; release the string with [`ndae_string_free`].
enum NdaeStatus ndae_model_to_json(const struct NdaeModelHandle *model, char **out);

void ndae_model_free(struct NdaeModelHandle *model);

// Writes the state and input sizes; any output pointer may be null.
enum NdaeStatus ndae_model_dims(const struct NdaeModelHandle *model,
                                size_t *n_d,
                                size_t *n_a,
                                size_t *m);

// `out[n_d] = f̃(x_d, x_a, u)`.
enum NdaeStatus ndae_model_rhs(const struct NdaeModelHandle *model,
                               const double *xd,
                               const double *xa,
                               const double *u,
                               double *out);

// `out[n_a] = g̃(x_d, x_a)`.
enum NdaeStatus ndae_model_residual(const struct NdaeModelHandle *model,
                                    const double *xd,
                                    const double *xa,
                                    double *out);

// Solves `g̃(x_d0, x_a) = 0` from `xa_guess` (null means zeros).
enum NdaeStatus ndae_model_consistent_init(const struct NdaeModelHandle *model,
                                           const double *xd0,
                                           const double *xa_guess,
                                           double *out);

// Fixed-step simulation under `u_k(t) = offset_k + amplitude_k·sin(2π·frequency·t + phase_k)`.
// `amplitude` and `phase` may be null for a constant input.
enum NdaeStatus ndae_simulate(const struct NdaeModelHandle *model,
                              const char *tableau_name,
                              double delta,
                              double t_end,
                              const double *xd0,
                              const double *offset,
                              const double *amplitude,
                              const double *phase,
                              double frequency,
                              struct NdaeTrajectory **out);

// Number of output times.
enum NdaeStatus ndae_trajectory_len(const struct NdaeTrajectory *traj, size_t *len);

// Copies the output times into `out[len]`.
enum NdaeStatus ndae_trajectory_times(const struct NdaeTrajectory *traj, double *out, size_t len);

// Copies the differential states, row-major `len × n_d`.
enum NdaeStatus ndae_trajectory_states_d(const struct NdaeTrajectory *traj,
                                         double *out,
                                         size_t len);

// Copies the algebraic states, row-major `len × n_a`.
enum NdaeStatus ndae_trajectory_states_a(const struct NdaeTrajectory *traj,
                                         double *out,
                                         size_t len);

void ndae_trajectory_free(struct NdaeTrajectory *traj);

// `sqrt(c0 / (λ_min(P)·λ_min(P^{-1/2} W P^{-1/2})))` for `n × n` `P`, `W`.
enum NdaeStatus ndae_prop1_bound(const double *p,
                                 const double *w,
                                 size_t n,
                                 double c0,
                                 double *out);

// Checks `AᵀP + PA + P·L⁻¹·P + c1·K + W ⪯ 0`; writes the verdict and
// `−λ_max` of the left-hand side.
enum NdaeStatus ndae_check_assumption3(const double *a,
                                       const double *p,
                                       const double *w,
                                       const double *l,
                                       const double *k,
                                       size_t n,
                                       double c1,
                                       bool *feasible,
                                       double *margin);

// Loads a checkpoint JSON file written by the command-line tool.
enum NdaeStatus ndae_checkpoint_load(const char *path, struct NdaeCheckpoint **out);

enum NdaeStatus ndae_checkpoint_from_json(const char *json, struct NdaeCheckpoint **out);

// Input and output sizes of the network: `(n_d, n_a)` for an algebraic
// map, `(n, n)` for a differential network with `m` inputs.
enum NdaeStatus ndae_checkpoint_dims(const struct NdaeCheckpoint *ckpt,
                                     size_t *n_in,
                                     size_t *n_out,
                                     size_t *m);

// Evaluates `ℓ̂(x)` for an algebraic map or `ẋ = dnn(x, u)` for a
// differential network (`u` ignored for algebraic maps).
enum NdaeStatus ndae_checkpoint_eval(const struct NdaeCheckpoint *ckpt,
                                     const double *x,
                                     const double *u,
                                     double *out);

void ndae_checkpoint_free(struct NdaeCheckpoint *ckpt);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NDAE_IDENT_H */
