#ifndef OTAFL_H
#define OTAFL_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible call.
 */
typedef enum OtaflStatus {
  OTAFL_STATUS_OK = 0,
  OTAFL_STATUS_NULL_POINTER = 1,
  OTAFL_STATUS_INVALID_ARGUMENT = 2,
  /**
   * The round has no feasible design.
   */
  OTAFL_STATUS_INFEASIBLE = 3,
  OTAFL_STATUS_BUFFER_TOO_SMALL = 4,
  /**
   * A Rust panic was caught at the boundary.
   */
  OTAFL_STATUS_INTERNAL = 5,
} OtaflStatus;

/**
 * Beamforming method.
 */
typedef enum OtaflMethod {
  OTAFL_METHOD_POMFL = 0,
  /**
   * Accounts for the CSI error level in the design.
   */
  OTAFL_METHOD_POMFL_IMCSI = 1,
  OTAFL_METHOD_MMSE = 2,
  OTAFL_METHOD_BOUNDED_MSE = 3,
} OtaflMethod;

/**
 * One round of channels (true and estimated).
 */
typedef struct OtaflChannels OtaflChannels;

/**
 * A designed round together with the context it was designed for.
 */
typedef struct OtaflSolution OtaflSolution;

/**
 * Channel model parameters.
 */
typedef struct OtaflChannelParams {
  size_t num_devices;
  size_t num_antennas;
  double min_distance_m;
  double max_distance_m;
  double noise_power_dbm;
  double csi_error;
  uint64_t seed;
  /**
   * Nonzero redraws channels every round.
   */
  uint8_t time_varying;
} OtaflChannelParams;

/**
 * Per-round design parameters.
 */
typedef struct OtaflRoundParams {
  enum OtaflMethod method;
  double alpha;
  double delta;
  double beta;
  /**
   * Absolute MSE cap, used by the bounded-MSE method only.
   */
  double eta;
  double power_cap_dbm;
  size_t dim;
  uint64_t seed;
} OtaflRoundParams;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *otafl_last_error(void);

/**
 * Generates round `round` of the channel process.
 *
 * # Safety
 * `params` must point to a valid struct and `out` to writable storage.
 */
enum OtaflStatus otafl_channels_generate(const struct OtaflChannelParams *params,
                                         uint64_t round,
                                         struct OtaflChannels **out);

/**
 * # Safety
 * `ch` must come from [`otafl_channels_generate`] or be null.
 */
void otafl_channels_free(struct OtaflChannels *ch);

/**
 * Copies the channel estimate (`estimate != 0`) or the true channel of
 * `device` into split real/imaginary buffers of at least `len` entries.
 *
 * # Safety
 * `ch` must be a live handle; `re`/`im` must hold `len` doubles.
 */
enum OtaflStatus otafl_channels_get(const struct OtaflChannels *ch,
                                    size_t device,
                                    uint8_t estimate,
                                    double *re,
                                    double *im,
                                    size_t len);

/**
 * Designs one round on the channel estimates.
 *
 * `norms` holds the per-device gradient norms divided by `sqrt(dim)` and
 * `samples` the per-device sample counts, both of length `num_devices`.
 *
 * # Safety
 * Pointers must be valid; `norms` and `samples` must hold `num_devices`
 * entries.
 */
enum OtaflStatus otafl_design_round(const struct OtaflChannels *ch,
                                    const struct OtaflRoundParams *params,
                                    const double *norms,
                                    const uint64_t *samples,
                                    struct OtaflSolution **out);

/**
 * # Safety
 * `sol` must come from [`otafl_design_round`] or be null.
 */
void otafl_solution_free(struct OtaflSolution *sol);

/**
 * Total transmit power in watts; NaN for a null handle.
 *
 * # Safety
 * `sol` must be a live handle or null.
 */
double otafl_solution_sum_power(const struct OtaflSolution *sol);

/**
 * Bias bound of the design; NaN for a null handle.
 *
 * # Safety
 * `sol` must be a live handle or null.
 */
double otafl_solution_bias_bound(const struct OtaflSolution *sol);

/**
 * MSE bound of the design; NaN for a null handle.
 *
 * # Safety
 * `sol` must be a live handle or null.
 */
double otafl_solution_mse_bound(const struct OtaflSolution *sol);

/**
 * Copies the receive vector (`num_antennas` entries).
 *
 * # Safety
 * `sol` must be a live handle; `re`/`im` must hold `len` doubles.
 */
enum OtaflStatus otafl_solution_receive(const struct OtaflSolution *sol,
                                        double *re,
                                        double *im,
                                        size_t len);

/**
 * Copies the transmit weights (`num_devices` entries).
 *
 * # Safety
 * `sol` must be a live handle; `re`/`im` must hold `len` doubles.
 */
enum OtaflStatus otafl_solution_weights(const struct OtaflSolution *sol,
                                        double *re,
                                        double *im,
                                        size_t len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* OTAFL_H */
