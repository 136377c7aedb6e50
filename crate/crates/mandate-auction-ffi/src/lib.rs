//! C ABI for the mandate-auction engine.
//!
//! Market parameters travel behind an opaque handle; every function returns
//! an [`MaStatus`] code and writes results through out-pointers. The header
//! is generated into `include/mandate_auction.h` at build time.

use std::ffi::{c_char, CStr};

use mandate_auction::clearing;
use mandate_auction::equilibrium::{self, AllocationRule};
use mandate_auction::market::{self, BidPoint, BidderId, MarketParams};
use mandate_auction::verify::{self, DerivativeMode};
use mandate_auction::Error;

/// Status code returned by every API function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaStatus {
    /// Success.
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// An argument was malformed (wrong range, too few bids, bad grid).
    InvalidArgument = 2,
    /// The inputs left the model's domain (yield rule, existence condition,
    /// mandate/market mismatch).
    DomainError = 3,
    /// The provided buffer is too small; the required size was written.
    BufferTooSmall = 4,
}

fn status_of(error: &Error) -> MaStatus {
    match error {
        Error::YieldRuleDomain { .. }
        | Error::NonPositiveSpread { .. }
        | Error::MandateMarketMismatch { .. }
        | Error::InfeasibleMandate { .. }
        | Error::RiskLimitOutOfRange { .. }
        | Error::AllocationOutOfRange { .. } => MaStatus::DomainError,
        _ => MaStatus::InvalidArgument,
    }
}

/// Opaque market-parameter handle.
pub struct MaMarketParams(MarketParams);

/// Creates a market-parameter handle. The handle owns its memory; release it
/// with [`ma_market_params_free`]. Invariants are NOT enforced here; query
/// them with [`ma_market_params_violations`].
/// # Safety
/// `out` must be a valid pointer to a handle slot.
#[no_mangle]
pub unsafe extern "C" fn ma_market_params_new(
    benchmark_yield: f64,
    demand_sensitivity: f64,
    bidders: u32,
    expected_resale_yield: f64,
    risk_free_yield: f64,
    max_yield: f64,
    min_bid: f64,
    out: *mut *mut MaMarketParams,
) -> MaStatus {
    if out.is_null() {
        return MaStatus::NullPointer;
    }
    let params = MarketParams {
        benchmark_yield,
        demand_sensitivity,
        bidders,
        expected_resale_yield,
        risk_free_yield,
        max_yield,
        min_bid,
    };
    unsafe {
        *out = Box::into_raw(Box::new(MaMarketParams(params)));
    }
    MaStatus::Ok
}

/// Releases a handle created by [`ma_market_params_new`]. Null is a no-op.
/// # Safety
/// `params` must be null or a handle from [`ma_market_params_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ma_market_params_free(params: *mut MaMarketParams) {
    if !params.is_null() {
        drop(unsafe { Box::from_raw(params) });
    }
}

unsafe fn params_ref<'a>(params: *const MaMarketParams) -> Option<&'a MarketParams> {
    unsafe { params.as_ref().map(|p| &p.0) }
}

/// Writes the newline-joined invariant violations (empty string when valid)
/// as a NUL-terminated UTF-8 string. `written` receives the required byte
/// count including the terminator; when the buffer is too small the status
/// is [`MaStatus::BufferTooSmall`] and the buffer is left untouched.
/// # Safety
/// `params` must be a live handle; `buffer` must hold `capacity` bytes; `written` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ma_market_params_violations(
    params: *const MaMarketParams,
    buffer: *mut c_char,
    capacity: usize,
    written: *mut usize,
) -> MaStatus {
    let Some(p) = (unsafe { params_ref(params) }) else {
        return MaStatus::NullPointer;
    };
    if written.is_null() {
        return MaStatus::NullPointer;
    }
    let text = market::validate_params(p)
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("\n");
    let needed = text.len() + 1;
    unsafe {
        *written = needed;
    }
    if capacity < needed {
        return MaStatus::BufferTooSmall;
    }
    if buffer.is_null() {
        return MaStatus::NullPointer;
    }
    unsafe {
        std::ptr::copy_nonoverlapping(text.as_ptr(), buffer.cast::<u8>(), text.len());
        *buffer.add(text.len()) = 0;
    }
    MaStatus::Ok
}

/// Market-power factor and its existence condition.
/// # Safety
/// `params` must be a live handle; the out-pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn ma_xi(
    params: *const MaMarketParams,
    value: *mut f64,
    condition_satisfied: *mut bool,
) -> MaStatus {
    let Some(p) = (unsafe { params_ref(params) }) else {
        return MaStatus::NullPointer;
    };
    if value.is_null() || condition_satisfied.is_null() {
        return MaStatus::NullPointer;
    }
    match equilibrium::xi(p) {
        Ok(factor) => {
            unsafe {
                *value = factor.value;
                *condition_satisfied = factor.condition_satisfied;
            }
            MaStatus::Ok
        }
        Err(e) => status_of(&e),
    }
}

/// Smallest admissible bid implied by a risk limit.
/// # Safety
/// `params` must be a live handle; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ma_infimum_bid_for_risk_limit(
    params: *const MaMarketParams,
    risk_limit: f64,
    out: *mut f64,
) -> MaStatus {
    let Some(p) = (unsafe { params_ref(params) }) else {
        return MaStatus::NullPointer;
    };
    if out.is_null() {
        return MaStatus::NullPointer;
    }
    match market::infimum_bid_for_risk_limit(risk_limit, p) {
        Ok(min_bid) => {
            unsafe { *out = min_bid };
            MaStatus::Ok
        }
        Err(e) => status_of(&e),
    }
}

/// Symmetric risk limit implied by a minimum bid.
/// # Safety
/// `params` must be a live handle; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ma_symmetric_risk_limit(
    params: *const MaMarketParams,
    min_bid: f64,
    out: *mut f64,
) -> MaStatus {
    let Some(p) = (unsafe { params_ref(params) }) else {
        return MaStatus::NullPointer;
    };
    if out.is_null() {
        return MaStatus::NullPointer;
    }
    match equilibrium::symmetric_risk_limit(min_bid, p) {
        Ok(value) => {
            unsafe { *out = value };
            MaStatus::Ok
        }
        Err(e) => status_of(&e),
    }
}

/// Prices aggregate demand through the linear stop-out rule.
/// # Safety
/// `params` must be a live handle; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ma_stop_out_yield(
    params: *const MaMarketParams,
    demand: f64,
    out: *mut f64,
) -> MaStatus {
    let Some(p) = (unsafe { params_ref(params) }) else {
        return MaStatus::NullPointer;
    };
    if out.is_null() {
        return MaStatus::NullPointer;
    }
    match clearing::stop_out_yield(demand, p) {
        Ok(value) => {
            unsafe { *out = value };
            MaStatus::Ok
        }
        Err(e) => status_of(&e),
    }
}

/// Symmetric equilibrium bid at `budget` for a mandate floored at
/// `budget_floor`, under the linear allocation rule
/// `alloc_intercept + alloc_slope * budget`.
/// # Safety
/// `params` must be a live handle; the out-pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn ma_equilibrium_bid(
    params: *const MaMarketParams,
    budget: f64,
    budget_floor: f64,
    alloc_slope: f64,
    alloc_intercept: f64,
    bid: *mut f64,
    weight: *mut f64,
    stop_out: *mut f64,
) -> MaStatus {
    let Some(p) = (unsafe { params_ref(params) }) else {
        return MaStatus::NullPointer;
    };
    if bid.is_null() || weight.is_null() || stop_out.is_null() {
        return MaStatus::NullPointer;
    }
    let rule = match AllocationRule::new(alloc_slope, alloc_intercept) {
        Ok(rule) => rule,
        Err(e) => return status_of(&e),
    };
    match equilibrium::equilibrium_bid(budget, budget_floor, &rule, p) {
        Ok(point) => {
            unsafe {
                *bid = point.bid;
                *weight = point.weight;
                *stop_out = point.stop_out;
            }
            MaStatus::Ok
        }
        Err(e) => status_of(&e),
    }
}

/// Clears an auction of `len` bids given as parallel quantity/yield arrays.
/// `allocations` must hold `len` doubles and is filled in bid order.
/// # Safety
/// `params` must be a live handle; `quantities` and `yields` must hold `len` doubles, `allocations` must have room for `len` doubles; scalar out-pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn ma_clear(
    params: *const MaMarketParams,
    quantities: *const f64,
    yields: *const f64,
    len: usize,
    allocations: *mut f64,
    stop_out: *mut f64,
    issued: *mut bool,
    aggregate_demand: *mut f64,
) -> MaStatus {
    let Some(p) = (unsafe { params_ref(params) }) else {
        return MaStatus::NullPointer;
    };
    if quantities.is_null()
        || yields.is_null()
        || allocations.is_null()
        || stop_out.is_null()
        || issued.is_null()
        || aggregate_demand.is_null()
    {
        return MaStatus::NullPointer;
    }
    let quantities = unsafe { std::slice::from_raw_parts(quantities, len) };
    let yields = unsafe { std::slice::from_raw_parts(yields, len) };
    let mut bids = Vec::with_capacity(len);
    for i in 0..len {
        match BidPoint::new(quantities[i], yields[i], BidderId(i as u32)) {
            Ok(bid) => bids.push(bid),
            Err(e) => return status_of(&e),
        }
    }
    match clearing::clear(&bids, p) {
        Ok(outcome) => {
            unsafe {
                std::ptr::copy_nonoverlapping(outcome.allocations.as_ptr(), allocations, len);
                *stop_out = outcome.stop_out;
                *issued = outcome.issued;
                *aggregate_demand = outcome.aggregate_demand;
            }
            MaStatus::Ok
        }
        Err(e) => status_of(&e),
    }
}

/// Maximum residual of the equilibrium schedule in the symmetric bid ODE
/// over an evenly spaced budget grid, using the analytic derivative.
/// # Safety
/// `params` must be a live handle; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ma_ode_max_residual(
    params: *const MaMarketParams,
    budget_floor: f64,
    budget_cap: f64,
    grid_points: usize,
    alloc_slope: f64,
    alloc_intercept: f64,
    out: *mut f64,
) -> MaStatus {
    let Some(p) = (unsafe { params_ref(params) }) else {
        return MaStatus::NullPointer;
    };
    if out.is_null() {
        return MaStatus::NullPointer;
    }
    // NaN bounds must be rejected, hence the negated comparison.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    if grid_points < 2 || !(budget_floor < budget_cap) {
        return MaStatus::InvalidArgument;
    }
    let rule = match AllocationRule::new(alloc_slope, alloc_intercept) {
        Ok(rule) => rule,
        Err(e) => return status_of(&e),
    };
    let grid: Vec<f64> = (0..grid_points)
        .map(|k| budget_floor + (budget_cap - budget_floor) * k as f64 / (grid_points - 1) as f64)
        .collect();
    match verify::ode_residual(&grid, budget_floor, &rule, p, DerivativeMode::Analytic) {
        Ok(value) => {
            unsafe { *out = value };
            MaStatus::Ok
        }
        Err(e) => status_of(&e),
    }
}

/// Static description of a status code.
#[no_mangle]
pub extern "C" fn ma_status_message(status: MaStatus) -> *const c_char {
    let message: &CStr = match status {
        MaStatus::Ok => c"ok",
        MaStatus::NullPointer => c"a required pointer argument was null",
        MaStatus::InvalidArgument => c"an argument was malformed",
        MaStatus::DomainError => c"the inputs left the model's domain",
        MaStatus::BufferTooSmall => c"the provided buffer is too small",
    };
    message.as_ptr()
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ma_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
