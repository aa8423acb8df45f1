#ifndef SEQDEPTH_H
#define SEQDEPTH_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stddef.h>
#include <stdint.h>

/**
 * Result code of every call.
 */
typedef enum SdStatus {
  SD_STATUS_OK = 0,
  SD_STATUS_NULL_POINTER = 1,
  SD_STATUS_INVALID_ARGUMENT = 2,
  SD_STATUS_DIMENSION_MISMATCH = 3,
  SD_STATUS_SIZE_LIMIT = 4,
  SD_STATUS_IO = 5,
  SD_STATUS_PARSE = 6,
  SD_STATUS_SOLVER = 7,
  SD_STATUS_PANIC = 8,
} SdStatus;

/**
 * Cell-weight scenario.
 */
typedef enum SdScenario {
  SD_SCENARIO_UNIFORM = 0,
  SD_SCENARIO_COUPLED = 1,
  SD_SCENARIO_INDEPENDENT = 2,
} SdScenario;

/**
 * Treatment of cells that receive no reads.
 */
typedef enum SdUnseen {
  /**
   * Measured profile is the uniform vector.
   */
  SD_UNSEEN_UNIFORM = 0,
  /**
   * Cell is left out of the noisy measure.
   */
  SD_UNSEEN_DROP = 1,
} SdUnseen;

/**
 * Opaque discrete distribution on the simplex.
 */
typedef struct SdDistribution SdDistribution;

/**
 * Opaque population: a distribution plus its cell-weight scenario.
 */
typedef struct SdPopulation SdPopulation;

typedef struct SdStats {
  double mean_l0;
  double mean_sq_l2;
  size_t ambient_dim;
  size_t atom_count;
} SdStats;

/**
 * Distances from one simulated trial.
 */
typedef struct SdTrial {
  double w_noisy_vs_mu;
  double w_noisy_vs_mun;
  double w_mun_vs_mu;
} SdTrial;

typedef struct SdAllocationParams {
  double p;
  double alpha;
  double c_star;
  double c_alloc;
  double k;
  double mean_l0;
  double mean_sq_l2;
} SdAllocationParams;

/**
 * Optimal allocation and error bounds for one read budget.
 */
typedef struct SdAllocation {
  double n_opt;
  uint64_t n_cells;
  double exponent;
  double upper_bound;
  double lower_bound;
  /**
   * Nonzero when the read-budget condition of the lower bound holds.
   */
  int32_t lower_bound_valid;
  double m0;
  int32_t below_m0;
} SdAllocation;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null after a success.
 * The pointer stays valid until the next call on the same thread.
 */
const char *sd_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *sd_version(void);

/**
 * Builds a distribution from `n_atoms` dense rows of length `dim`
 * (row-major). Each row is renormalized onto the simplex. `weights` may be
 * null for uniform weights; otherwise it holds `n_atoms` probabilities.
 *
 * # Safety
 * `values` must point to `n_atoms * dim` doubles, `weights` to `n_atoms`
 * doubles or be null, and `out` must be writable.
 */
enum SdStatus sd_distribution_from_dense(const double *values,
                                         size_t n_atoms,
                                         size_t dim,
                                         const double *weights,
                                         struct SdDistribution **out);

/**
 * # Safety
 * `dist` must be null or a handle from this library, freed at most once.
 */
void sd_distribution_free(struct SdDistribution *dist);

/**
 * # Safety
 * `dist` must be a live handle and `out` writable.
 */
enum SdStatus sd_distribution_stats(const struct SdDistribution *dist, struct SdStats *out);

/**
 * Exact `W_p` between two distributions under the `l_q` ground metric
 * (`q` may be `INFINITY`).
 *
 * # Safety
 * `a` and `b` must be live handles and `out` writable.
 */
enum SdStatus sd_wasserstein(const struct SdDistribution *a,
                             const struct SdDistribution *b,
                             double p,
                             double q,
                             double *out);

/**
 * PCA intrinsic dimension: components needed to capture `threshold` of the
 * variance.
 *
 * # Safety
 * `dist` must be a live handle and `out_k` writable.
 */
enum SdStatus sd_pca_dim(const struct SdDistribution *dist, double threshold, size_t *out_k);

/**
 * Loads a population directory, or a CSV / MatrixMarket counts file.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` writable.
 */
enum SdStatus sd_population_load(const char *path, struct SdPopulation **out);

/**
 * Wraps a copy of `dist` as a population with uniform frequencies.
 *
 * # Safety
 * `dist` must be a live handle and `out` writable.
 */
enum SdStatus sd_population_from_distribution(const struct SdDistribution *dist,
                                              struct SdPopulation **out);

/**
 * # Safety
 * `pop` must be null or a handle from this library, freed at most once.
 */
void sd_population_free(struct SdPopulation *pop);

/**
 * # Safety
 * `pop` must be a live handle and `out` writable.
 */
enum SdStatus sd_population_stats(const struct SdPopulation *pop, struct SdStats *out);

/**
 * Runs one shallow-sequencing trial with `n` cells and `m` reads. The same
 * seed gives the same result as trial 0 of a sweep with that master seed.
 *
 * # Safety
 * `pop` must be a live handle and `out` writable.
 */
enum SdStatus sd_simulate(const struct SdPopulation *pop,
                          size_t n,
                          uint64_t m,
                          enum SdScenario scenario,
                          enum SdUnseen unseen,
                          double p,
                          double q,
                          uint64_t seed,
                          struct SdTrial *out);

/**
 * Default allocation parameters.
 *
 * # Safety
 * `out` must be writable.
 */
enum SdStatus sd_allocation_params_default(struct SdAllocationParams *out);

/**
 * Number of cells `(C m / E|P|_0)^(1 - 2/(k+2))` for a read budget `m`.
 *
 * # Safety
 * `params` must be readable and `out` writable.
 */
enum SdStatus sd_optimal_cells(double m, const struct SdAllocationParams *params, double *out);

/**
 * Optimal allocation together with the upper and lower error bounds.
 *
 * # Safety
 * `params` must be readable and `out` writable.
 */
enum SdStatus sd_allocate(double m,
                          const struct SdAllocationParams *params,
                          struct SdAllocation *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SEQDEPTH_H */
