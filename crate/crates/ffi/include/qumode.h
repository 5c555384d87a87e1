#ifndef QUMODE_H
#define QUMODE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum QumodeStatus {
  QUMODE_STATUS_OK = 0,
  QUMODE_STATUS_INVALID_ARGUMENT = 1,
  QUMODE_STATUS_NULL_POINTER = 2,
  QUMODE_STATUS_SHARED_FACTOR = 3,
  QUMODE_STATUS_REJECTED = 4,
  QUMODE_STATUS_BUDGET_EXHAUSTED = 5,
  QUMODE_STATUS_NUMERIC = 6,
  QUMODE_STATUS_IO = 7,
  QUMODE_STATUS_PANIC = 8,
} QumodeStatus;

/**
 * Momentum distribution handle.
 */
typedef struct QumodeMixture QumodeMixture;

/**
 * Eigenphase spectrum handle.
 */
typedef struct QumodeSpectrum QumodeSpectrum;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *qumode_last_error(void);

/**
 * Forgets the last error message on this thread.
 */
void qumode_clear_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *qumode_version(void);

/**
 * Spectrum of `l -> lq mod N`.
 *
 * # Safety
 * `out_spec` must be valid for writes.
 */
enum QumodeStatus qumode_spectrum_modular(uint64_t modulus,
                                          uint64_t base,
                                          struct QumodeSpectrum **out_spec);

/**
 * Spectrum parsed from JSON.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out_spec` valid for writes.
 */
enum QumodeStatus qumode_spectrum_from_json(const char *json, struct QumodeSpectrum **out_spec);

/**
 * Spectrum from `count` phases with multiplicities on an `n_qubits` register.
 *
 * # Safety
 * `phases` and `multiplicities` must hold `count` elements; `out_spec`
 * must be valid for writes.
 */
enum QumodeStatus qumode_spectrum_from_phases(uint32_t n_qubits,
                                              const double *phases,
                                              const uint64_t *multiplicities,
                                              size_t count,
                                              struct QumodeSpectrum **out_spec);

/**
 * # Safety
 * `spec` must come from a spectrum constructor and not be freed twice.
 */
void qumode_spectrum_free(struct QumodeSpectrum *spec);

/**
 * Number of distinct eigenphases.
 *
 * # Safety
 * `spec` must be a live handle and `out_len` valid for writes.
 */
enum QumodeStatus qumode_spectrum_len(const struct QumodeSpectrum *spec, size_t *out_len);

/**
 * Phase in radians and multiplicity of entry `index`.
 *
 * # Safety
 * `spec` must be a live handle; the out pointers must be valid for writes.
 */
enum QumodeStatus qumode_spectrum_entry(const struct QumodeSpectrum *spec,
                                        size_t index,
                                        double *out_phase,
                                        uint64_t *out_multiplicity);

/**
 * `Tr(exp(iHt))/2^n`.
 *
 * # Safety
 * `spec` must be a live handle; the out pointers must be valid for writes.
 */
enum QumodeStatus qumode_spectrum_trace(const struct QumodeSpectrum *spec,
                                        double t,
                                        double *out_re,
                                        double *out_im);

/**
 * Momentum distribution for a squeezed control state.
 *
 * # Safety
 * `spec` must be a live handle and `out_mix` valid for writes.
 */
enum QumodeStatus qumode_mixture_squeezed(const struct QumodeSpectrum *spec,
                                          double s0,
                                          double tau,
                                          double x0,
                                          struct QumodeMixture **out_mix);

/**
 * Momentum distribution for a coherent control state `alpha`.
 *
 * # Safety
 * `spec` must be a live handle and `out_mix` valid for writes.
 */
enum QumodeStatus qumode_mixture_coherent(const struct QumodeSpectrum *spec,
                                          double alpha_re,
                                          double alpha_im,
                                          double tau,
                                          double x0,
                                          struct QumodeMixture **out_mix);

/**
 * # Safety
 * `mix` must come from a mixture constructor and not be freed twice.
 */
void qumode_mixture_free(struct QumodeMixture *mix);

/**
 * Density at `p_e`.
 *
 * # Safety
 * `mix` must be a live handle and `out_density` valid for writes.
 */
enum QumodeStatus qumode_mixture_density(const struct QumodeMixture *mix,
                                         double p_e,
                                         double *out_density);

/**
 * Fills `out_samples[0..count]` with draws; identical to the library's
 * sampler for the same seed.
 *
 * # Safety
 * `mix` must be a live handle and `out_samples` valid for `count` writes.
 */
enum QumodeStatus qumode_mixture_sample(const struct QumodeMixture *mix,
                                        size_t count,
                                        uint64_t seed,
                                        double *out_samples);

/**
 * Probability that one draw lands within `delta_e` of an eigenphase.
 *
 * # Safety
 * `spec` must be a live handle and `out_p` valid for writes.
 */
enum QumodeStatus qumode_success_probability(const struct QumodeSpectrum *spec,
                                             double s0,
                                             double tau,
                                             double delta_e,
                                             double *out_p);

/**
 * Sample count for a trace estimate within `delta` componentwise.
 *
 * # Safety
 * `out_count` must be valid for writes.
 */
enum QumodeStatus qumode_required_samples(double delta_re,
                                          double delta_im,
                                          double s0,
                                          uint64_t *out_count);

/**
 * Corrected normalized-trace estimate from samples taken at `tau = 1`.
 *
 * # Safety
 * `samples` must hold `count` values; the out pointers must be valid for writes.
 */
enum QumodeStatus qumode_estimate_trace(const double *samples,
                                        size_t count,
                                        double s0,
                                        double *out_re,
                                        double *out_im);

/**
 * Continued-fraction recovery of `m/r` from `p_prime`. `*out_found` is
 * false when no fraction lies within `1/(2N^2)`.
 *
 * # Safety
 * The out pointers must be valid for writes.
 */
enum QumodeStatus qumode_continued_fraction(double p_prime,
                                            uint64_t modulus,
                                            bool *out_found,
                                            uint64_t *out_m,
                                            uint64_t *out_r);

/**
 * Multiplicative order of `q` modulo `N`.
 *
 * # Safety
 * `out_order` must be valid for writes.
 */
enum QumodeStatus qumode_order(uint64_t modulus, uint64_t base, uint64_t *out_order);

/**
 * Factors `N` by simulated order finding; `t_bound` caps the total runs.
 *
 * # Safety
 * The out pointers must be valid for writes.
 */
enum QumodeStatus qumode_factor(uint64_t modulus,
                                double s0,
                                double tau,
                                uint64_t t_bound,
                                uint64_t seed,
                                uint64_t *out_p,
                                uint64_t *out_q);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* QUMODE_H */
