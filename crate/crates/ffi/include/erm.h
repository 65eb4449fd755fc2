#ifndef ERM_H
#define ERM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum ErmStatus {
  ERM_STATUS_OK = 0,
  ERM_STATUS_INVALID_CONFIG = 1,
  ERM_STATUS_USAGE = 2,
  ERM_STATUS_RESOURCE = 3,
  ERM_STATUS_NUMERICAL = 4,
  ERM_STATUS_INSUFFICIENT_DATA = 5,
  ERM_STATUS_IO = 6,
  ERM_STATUS_FORMAT = 7,
  ERM_STATUS_CHECKSUM = 8,
  ERM_STATUS_NULL_POINTER = 9,
  ERM_STATUS_PANIC = 10,
} ErmStatus;

/**
 * Sampled atomic cloud.
 */
typedef struct ErmCloud ErmCloud;

/**
 * Emission-rate matrix of a cloud.
 */
typedef struct ErmMatrix ErmMatrix;

/**
 * Ascending eigenvalues with their provenance.
 */
typedef struct ErmSpectrum ErmSpectrum;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent failure on this thread, or null if none.
 * The pointer stays valid until the next failing call on the same thread.
 */
const char *erm_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *erm_version(void);

/**
 * Samples `n_atoms` standard-Gaussian positions for realization
 * `realization_index` of `base_seed`.
 *
 * # Safety
 * `out` must be valid for one pointer write.
 */
enum ErmStatus erm_cloud_sample(size_t n_atoms,
                                double b,
                                uint64_t base_seed,
                                uint64_t realization_index,
                                struct ErmCloud **out);

/**
 * Builds a cloud from `n_atoms` xyz triples stored contiguously.
 *
 * # Safety
 * `xyz` must point to `3 * n_atoms` doubles and `out` must be valid for one
 * pointer write.
 */
enum ErmStatus erm_cloud_from_positions(const double *xyz,
                                        size_t n_atoms,
                                        double b,
                                        struct ErmCloud **out);

/**
 * # Safety
 * `cloud` must be null or a handle from this library not yet freed.
 */
void erm_cloud_free(struct ErmCloud *cloud);

/**
 * Number of atoms, or 0 for a null handle.
 *
 * # Safety
 * `cloud` must be null or a live handle.
 */
size_t erm_cloud_len(const struct ErmCloud *cloud);

/**
 * Copies the positions as xyz triples into `out` (`3 * len` doubles).
 *
 * # Safety
 * `cloud` must be a live handle and `out` valid for `capacity` doubles.
 */
enum ErmStatus erm_cloud_positions(const struct ErmCloud *cloud, double *out, size_t capacity);

/**
 * # Safety
 * `cloud` must be a live handle and `out` valid for one pointer write.
 */
enum ErmStatus erm_matrix_build(const struct ErmCloud *cloud, struct ErmMatrix **out);

/**
 * # Safety
 * `matrix` must be null or a live handle.
 */
void erm_matrix_free(struct ErmMatrix *matrix);

/**
 * Matrix dimension, or 0 for a null handle.
 *
 * # Safety
 * `matrix` must be null or a live handle.
 */
size_t erm_matrix_n(const struct ErmMatrix *matrix);

/**
 * Copies the `N * N` row-major entries into `out`.
 *
 * # Safety
 * `matrix` must be a live handle and `out` valid for `capacity` doubles.
 */
enum ErmStatus erm_matrix_entries(const struct ErmMatrix *matrix, double *out, size_t capacity);

/**
 * Diagonalizes the matrix and checks the spectral invariants.
 *
 * # Safety
 * `matrix` must be a live handle and `out` valid for one pointer write.
 */
enum ErmStatus erm_spectrum_compute(const struct ErmMatrix *matrix, struct ErmSpectrum **out);

/**
 * # Safety
 * `spectrum` must be null or a live handle.
 */
void erm_spectrum_free(struct ErmSpectrum *spectrum);

/**
 * Number of eigenvalues, or 0 for a null handle.
 *
 * # Safety
 * `spectrum` must be null or a live handle.
 */
size_t erm_spectrum_len(const struct ErmSpectrum *spectrum);

/**
 * Copies the ascending eigenvalues into `out`.
 *
 * # Safety
 * `spectrum` must be a live handle and `out` valid for `capacity` doubles.
 */
enum ErmStatus erm_spectrum_eigenvalues(const struct ErmSpectrum *spectrum,
                                        double *out,
                                        size_t capacity);

/**
 * # Safety
 * `spectrum` must be a live handle and `out` valid for one write.
 */
enum ErmStatus erm_spectrum_min(const struct ErmSpectrum *spectrum, double *out);

/**
 * Number of eigenvalues strictly below `threshold`.
 *
 * # Safety
 * `spectrum` must be a live handle and `out` valid for one write.
 */
enum ErmStatus erm_spectrum_count_condensate(const struct ErmSpectrum *spectrum,
                                             double threshold,
                                             size_t *out);

/**
 * Writes the binary archive into directory `dir` under its canonical name.
 *
 * # Safety
 * `spectrum` must be a live handle and `dir` a NUL-terminated string.
 */
enum ErmStatus erm_spectrum_write_archive(const struct ErmSpectrum *spectrum, const char *dir);

/**
 * # Safety
 * `path` must be a NUL-terminated string and `out` valid for one pointer
 * write.
 */
enum ErmStatus erm_spectrum_read_archive(const char *path, struct ErmSpectrum **out);

/**
 * Survival probability of the normalized state `initial` at each of the
 * `n_times` ascending times; `survival` receives `n_times` values.
 *
 * # Safety
 * `matrix` must be a live handle, `initial` must hold `n_initial` doubles,
 * and `times` and `survival` must hold `n_times` doubles each.
 */
enum ErmStatus erm_decay_curve(const struct ErmMatrix *matrix,
                               const double *initial,
                               size_t n_initial,
                               const double *times,
                               size_t n_times,
                               double *survival);

/**
 * Unnormalized cardinal sine.
 */
double erm_sinc(double x);

/**
 * `(2 pi b)^{3/2} / sqrt(N)`.
 *
 * # Safety
 * `out` must be valid for one write.
 */
enum ErmStatus erm_peak_density(size_t n_atoms, double b, double *out);

/**
 * `exp(1 - gamma/2)`.
 */
double erm_lbar_analytic(void);

/**
 * `lbar^2 e`.
 *
 * # Safety
 * `out` must be valid for one write.
 */
enum ErmStatus erm_b_c0(double lbar, double *out);

/**
 * Monte Carlo geometric-mean pair distance; `stderr` may be null.
 *
 * # Safety
 * `estimate` must be valid for one write; `stderr` null or valid.
 */
enum ErmStatus erm_lbar_monte_carlo(uint64_t n_pairs,
                                    uint64_t seed,
                                    double *estimate,
                                    double *stderr);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ERM_H */
