#ifndef MODECLUST_H
#define MODECLUST_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum McStatus {
  MC_STATUS_OK = 0,
  MC_STATUS_INVALID_ARGUMENT = 1,
  MC_STATUS_NULL_POINTER = 2,
  MC_STATUS_BUFFER_TOO_SMALL = 3,
  MC_STATUS_NUMERICAL = 4,
  MC_STATUS_PARSE = 5,
  MC_STATUS_IO = 6,
  MC_STATUS_PANIC = 7,
} McStatus;

// Row-stochastic transition matrix.
typedef struct McChain McChain;

// Clustering result with the aggregated chain.
typedef struct McReduced McReduced;

// Value and applicability of an error bound.
typedef struct McBound {
  // Bound value; NaN when not applicable.
  double value;
  // Measured quantity the bound controls, NaN when not computed.
  double actual;
  bool applicable;
  // The value exceeds the trivial cap of the bounded quantity.
  bool vacuous;
} McBound;

// Scalars of the misclustering-rate bound.
typedef struct McMrInputs {
  double sigma_r_bar;
  double sigma_1_bar;
  double delta_norm;
  double pi_min;
  double pi_max;
  double tau_star;
  double eta;
  double eps1;
  double eps2;
  double largest_cluster;
  double smallest_cluster;
  double n;
  double r;
  double samples;
} McMrInputs;

// Scalars of the transition-matrix error bound.
typedef struct McPDiffInputs {
  double n;
  double pi_min;
  double sigma_1;
  double eps2;
  double eta;
  double delta_inf;
  bool mr_zero;
} McPDiffInputs;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Copies the calling thread's last error message, nul-terminated, into
// `buf` and returns the full message length excluding the terminator.
// Pass a null `buf` to query the length. Returns 0 when there is none.
//
// # Safety
// `buf` must be null or point to `len` writable bytes.
size_t mc_last_error_message(char *buf, size_t len);

// Library version as a static nul-terminated string.
const char *mc_version(void);

// Builds a chain from `n * n` row-major entries.
//
// # Safety
// `data` must point to `n * n` readable doubles; `out` must be writable.
enum McStatus mc_chain_new(size_t n, const double *data, struct McChain **out);

// # Safety
// `chain` must be null or a handle from [`mc_chain_new`] not yet freed.
void mc_chain_free(struct McChain *chain);

// Number of states, or 0 for a null handle.
//
// # Safety
// `chain` must be null or a live handle.
size_t mc_chain_size(const struct McChain *chain);

// Stationary distribution by the power method with the default tolerance.
//
// # Safety
// `chain` must be a live handle and `out` must hold `len` doubles.
enum McStatus mc_chain_stationary(const struct McChain *chain, double *out, size_t len);

// Smallest `k <= max_k` with worst-row total variation to stationarity at
// most `eps`.
//
// # Safety
// `chain` must be a live handle and `out` writable.
enum McStatus mc_chain_mixing_time(const struct McChain *chain,
                                   double eps,
                                   size_t max_k,
                                   size_t *out);

// Clusters `n` modes into `r` groups from an observed mode sequence.
// `restarts == 0` selects the default number of k-means restarts.
//
// # Safety
// `modes` must hold `len` values and `out` must be writable.
enum McStatus mc_cluster_modes(const size_t *modes,
                               size_t len,
                               size_t n,
                               size_t r,
                               size_t restarts,
                               uint64_t seed,
                               struct McReduced **out);

// Full pipeline from observations: `params` holds `n * (n_a + n_c)`
// row-major model coefficients, `y` and `u` hold `len` samples each.
//
// # Safety
// All buffers must be readable for the stated sizes; `out` writable.
enum McStatus mc_pipeline_run(size_t n,
                              size_t n_a,
                              size_t n_c,
                              const double *params,
                              const double *y,
                              const double *u,
                              size_t len,
                              size_t r,
                              size_t restarts,
                              uint64_t seed,
                              struct McReduced **out);

// # Safety
// `h` must be null or a live handle.
void mc_reduced_free(struct McReduced *h);

// Number of modes, or 0 for a null handle.
//
// # Safety
// `h` must be null or a live handle.
size_t mc_reduced_n(const struct McReduced *h);

// Number of clusters, or 0 for a null handle.
//
// # Safety
// `h` must be null or a live handle.
size_t mc_reduced_r(const struct McReduced *h);

// Mistake rate of the mode estimate; NaN when the truth was unavailable.
//
// # Safety
// `h` must be null or a live handle.
double mc_reduced_mistake_rate(const struct McReduced *h);

// Writes the 0-based cluster label of each mode into `out[0..n]`.
//
// # Safety
// `h` must be a live handle and `out` must hold `len` values.
enum McStatus mc_reduced_labels(const struct McReduced *h, size_t *out, size_t len);

// Writes the expanded `n x n` reduced transition matrix, row-major.
//
// # Safety
// `h` must be a live handle and `out` must hold `len` doubles.
enum McStatus mc_reduced_matrix(const struct McReduced *h, double *out, size_t len);

// Stationary distribution of the reduced chain via the factored product.
//
// # Safety
// `h` must be a live handle and `out` must hold `len` doubles.
enum McStatus mc_reduced_stationary(const struct McReduced *h, double *out, size_t len);

// Empirical transition matrix of a mode sequence, `n * n` row-major.
//
// # Safety
// `modes` must hold `len` values and `out` must hold `out_len` doubles.
enum McStatus mc_empirical_matrix(const size_t *modes,
                                  size_t len,
                                  size_t n,
                                  double *out,
                                  size_t out_len);

// Stationary-distribution difference bound between `p` and `p_tilde`.
//
// # Safety
// Both handles must be live and `out` writable.
enum McStatus mc_bound_stationary_diff(const struct McChain *p,
                                       const struct McChain *p_tilde,
                                       struct McBound *out);

// # Safety
// `inputs` must be readable and `out` writable.
enum McStatus mc_bound_mr(const struct McMrInputs *inputs, struct McBound *out);

// # Safety
// `inputs` must be readable and `out` writable.
enum McStatus mc_bound_p_diff(const struct McPDiffInputs *inputs, struct McBound *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MODECLUST_H */
