/* C ABI for the srwin simulator and analytics library.
 *
 * Generated by cbindgen from crates/srwin-ffi (see the header_is_current
 * test, which regenerates and compares). Link against libsrwin_ffi, built
 * with `cargo build -p srwin-ffi --release`. */

#ifndef SRWIN_H
#define SRWIN_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every FFI entry point.
 */
typedef enum SrwinStatus {
  SRWIN_STATUS_OK = 0,
  SRWIN_STATUS_INVALID_PARAMETER = 1,
  SRWIN_STATUS_INSUFFICIENT_DATA = 2,
  SRWIN_STATUS_INVARIANT_VIOLATION = 3,
  SRWIN_STATUS_NULL_POINTER = 4,
  SRWIN_STATUS_UTF8 = 5,
  SRWIN_STATUS_PANIC = 6,
} SrwinStatus;

/**
 * Opaque experiment configuration handle.
 */
typedef struct SrwinConfig SrwinConfig;

/**
 * Flat, C-layout summary of a replicated simulation run.
 *
 * Fields that do not apply to a protocol (for example block statistics under
 * ARQ) are NaN, matching the library's reports.
 */
typedef struct SrwinReport {
  double throughput_mean;
  double throughput_stderr;
  double occupancy_mean;
  double occupancy_stderr;
  double delay_mean;
  double delay_stderr;
  double window_max_tx_mean;
  double window_max_tx_stderr;
  double block_tx_mean;
  double block_tx_stderr;
  double per_packet_tx_mean;
  double per_packet_tx_stderr;
  double littles_residual_mean;
  double littles_residual_stderr;
  uint64_t delivered_total;
  uint32_t replications;
} SrwinReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Returns the library version as a static NUL-terminated string.
 */
const char *srwin_version(void);

/**
 * Returns a static human-readable name for a status code.
 */
const char *srwin_status_name(enum SrwinStatus status);

/**
 * Allocates a configuration handle with the library defaults
 * (ARQ, W = 64, p = 0.1, 10 replications). Free with `srwin_config_free`.
 */
struct SrwinConfig *srwin_config_new(void);

/**
 * Frees a configuration handle. Passing NULL is a no-op.
 *
 * # Safety
 * `config` must be a pointer returned by `srwin_config_new` that has not
 * already been freed.
 */
void srwin_config_free(struct SrwinConfig *config);

/**
 * Sets one configuration field by key. Keys match the CLI configuration-file
 * keys: `protocol`, `W`, `B`, `p`, `pa`, `R`, `copies`, `horizon`, `warmup`,
 * `seed`, `reps`. Values are parsed from their string form.
 *
 * # Safety
 * `config` must be a live handle from `srwin_config_new`; `key` and `value`
 * must be NUL-terminated strings.
 */
enum SrwinStatus srwin_config_set(struct SrwinConfig *config, const char *key, const char *value);

/**
 * Validates the configuration without running it.
 *
 * # Safety
 * `config` must be a live handle from `srwin_config_new`.
 */
enum SrwinStatus srwin_config_validate(const struct SrwinConfig *config);

/**
 * Runs the configured experiment (all replications) and fills `report`.
 * Identical configurations produce identical reports.
 *
 * # Safety
 * `config` must be a live handle from `srwin_config_new`; `report` must point
 * to writable memory for one `SrwinReport`.
 */
enum SrwinStatus srwin_run(const struct SrwinConfig *config, struct SrwinReport *report);

/**
 * Expected per-window maximum transmission count for selective-repeat ARQ
 * (exact finite-W value).
 *
 * # Safety
 * `out` must point to writable memory for one double.
 */
enum SrwinStatus srwin_arq_max_retx_exact(uint32_t w, double p, double *out);

/**
 * Asymptotic (large-W) counterpart of `srwin_arq_max_retx_exact`.
 *
 * # Safety
 * `out` must point to writable memory for one double.
 */
enum SrwinStatus srwin_arq_max_retx_asymptotic(uint32_t w, double p, double *out);

/**
 * Expected transmissions per packet for block coding with ideal (always
 * innovative) packets: 1/(1-p).
 *
 * # Safety
 * `out` must point to writable memory for one double.
 */
enum SrwinStatus srwin_fec_per_packet_tx(uint32_t b, double p, double *out);

/**
 * Expected transmissions to decode a B-packet block with uniformly random
 * (possibly dependent) coded packets over a lossless channel.
 *
 * # Safety
 * `out` must point to writable memory for one double.
 */
enum SrwinStatus srwin_dependent_tx_expected(uint32_t b, double p, double *out);

/**
 * Probability that B + delta uniformly random GF(2) combinations of B packets
 * have full rank.
 */
double srwin_decode_success_prob(uint32_t b, uint32_t delta);

/**
 * Throughput of ARQ when each data packet is acknowledged by `n_acks`
 * copies over a feedback link with loss probability `pa`.
 */
double srwin_lossy_feedback_throughput(double p, double pa, uint32_t n_acks, double capacity);

/**
 * Inverse of the Gaussian tail function Q.
 *
 * # Safety
 * `out` must point to writable memory for one double.
 */
enum SrwinStatus srwin_inverse_q(double p, double *out);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* SRWIN_H */
