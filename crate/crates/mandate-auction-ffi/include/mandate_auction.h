#ifndef MANDATE_AUCTION_H
#define MANDATE_AUCTION_H

/* Generated by cbindgen from mandate-auction-ffi; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status code returned by every API function.
 */
typedef enum MaStatus {
  /**
   * Success.
   */
  MA_STATUS_OK = 0,
  /**
   * A required pointer argument was null.
   */
  MA_STATUS_NULL_POINTER = 1,
  /**
   * An argument was malformed (wrong range, too few bids, bad grid).
   */
  MA_STATUS_INVALID_ARGUMENT = 2,
  /**
   * The inputs left the model's domain (yield rule, existence condition,
   * mandate/market mismatch).
   */
  MA_STATUS_DOMAIN_ERROR = 3,
  /**
   * The provided buffer is too small; the required size was written.
   */
  MA_STATUS_BUFFER_TOO_SMALL = 4,
} MaStatus;

/**
 * Opaque market-parameter handle.
 */
typedef struct MaMarketParams MaMarketParams;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Creates a market-parameter handle. The handle owns its memory; release it
 * with [`ma_market_params_free`]. Invariants are NOT enforced here; query
 * them with [`ma_market_params_violations`].
 * # Safety
 * `out` must be a valid pointer to a handle slot.
 */
enum MaStatus ma_market_params_new(double benchmark_yield,
                                   double demand_sensitivity,
                                   uint32_t bidders,
                                   double expected_resale_yield,
                                   double risk_free_yield,
                                   double max_yield,
                                   double min_bid,
                                   struct MaMarketParams **out);

/**
 * Releases a handle created by [`ma_market_params_new`]. Null is a no-op.
 * # Safety
 * `params` must be null or a handle from [`ma_market_params_new`] not yet freed.
 */
void ma_market_params_free(struct MaMarketParams *params);

/**
 * Writes the newline-joined invariant violations (empty string when valid)
 * as a NUL-terminated UTF-8 string. `written` receives the required byte
 * count including the terminator; when the buffer is too small the status
 * is [`MaStatus::BufferTooSmall`] and the buffer is left untouched.
 * # Safety
 * `params` must be a live handle; `buffer` must hold `capacity` bytes; `written` must be a valid pointer.
 */
enum MaStatus ma_market_params_violations(const struct MaMarketParams *params,
                                          char *buffer,
                                          size_t capacity,
                                          size_t *written);

/**
 * Market-power factor and its existence condition.
 * # Safety
 * `params` must be a live handle; the out-pointers must be valid.
 */
enum MaStatus ma_xi(const struct MaMarketParams *params, double *value, bool *condition_satisfied);

/**
 * Smallest admissible bid implied by a risk limit.
 * # Safety
 * `params` must be a live handle; `out` must be a valid pointer.
 */
enum MaStatus ma_infimum_bid_for_risk_limit(const struct MaMarketParams *params,
                                            double risk_limit,
                                            double *out);

/**
 * Symmetric risk limit implied by a minimum bid.
 * # Safety
 * `params` must be a live handle; `out` must be a valid pointer.
 */
enum MaStatus ma_symmetric_risk_limit(const struct MaMarketParams *params,
                                      double min_bid,
                                      double *out);

/**
 * Prices aggregate demand through the linear stop-out rule.
 * # Safety
 * `params` must be a live handle; `out` must be a valid pointer.
 */
enum MaStatus ma_stop_out_yield(const struct MaMarketParams *params, double demand, double *out);

/**
 * Symmetric equilibrium bid at `budget` for a mandate floored at
 * `budget_floor`, under the linear allocation rule
 * `alloc_intercept + alloc_slope * budget`.
 * # Safety
 * `params` must be a live handle; the out-pointers must be valid.
 */
enum MaStatus ma_equilibrium_bid(const struct MaMarketParams *params,
                                 double budget,
                                 double budget_floor,
                                 double alloc_slope,
                                 double alloc_intercept,
                                 double *bid,
                                 double *weight,
                                 double *stop_out);

/**
 * Clears an auction of `len` bids given as parallel quantity/yield arrays.
 * `allocations` must hold `len` doubles and is filled in bid order.
 * # Safety
 * `params` must be a live handle; `quantities` and `yields` must hold `len` doubles, `allocations` must have room for `len` doubles; scalar out-pointers must be valid.
 */
enum MaStatus ma_clear(const struct MaMarketParams *params,
                       const double *quantities,
                       const double *yields,
                       size_t len,
                       double *allocations,
                       double *stop_out,
                       bool *issued,
                       double *aggregate_demand);

/**
 * Maximum residual of the equilibrium schedule in the symmetric bid ODE
 * over an evenly spaced budget grid, using the analytic derivative.
 * # Safety
 * `params` must be a live handle; `out` must be a valid pointer.
 */
enum MaStatus ma_ode_max_residual(const struct MaMarketParams *params,
                                  double budget_floor,
                                  double budget_cap,
                                  size_t grid_points,
                                  double alloc_slope,
                                  double alloc_intercept,
                                  double *out);

/**
 * Static description of a status code.
 */
const char *ma_status_message(enum MaStatus status);

/**
 * Library version as a static NUL-terminated string.
 */
const char *ma_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MANDATE_AUCTION_H */
