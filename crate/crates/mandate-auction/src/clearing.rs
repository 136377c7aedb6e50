//! Uniform-price clearing: demand aggregation, the linear stop-out rule, and
//! allocation with pro-rata rationing at the margin.
//!
//! The engine clears whatever bids it is given; admissibility against
//! mandates is checked upstream.

use crate::error::{Error, Result};
use crate::market::{BidPoint, MarketParams};

/// Face value of the issuance; quantities are fractions of it.
pub const FACE_VALUE: f64 = 1.0;

/// Result of one auction.
#[derive(Debug, Clone, PartialEq)]
pub struct AuctionOutcome {
    /// Stop-out yield paid by every winner; 0 when the bond is not issued.
    pub stop_out: f64,
    /// Per-bidder allocations, aligned with the input bid order.
    pub allocations: Vec<f64>,
    /// Whether aggregate demand covered the face value.
    pub issued: bool,
    pub aggregate_demand: f64,
}

/// Neumaier-compensated sum. Demand totals sit exactly on the issuance
/// threshold in the symmetric scenarios, so naive summation is not enough.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0;
    let mut compensation = 0.0;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            compensation += (sum - t) + v;
        } else {
            compensation += (v - t) + sum;
        }
        sum = t;
    }
    sum + compensation
}

fn validate_bids(bids: &[BidPoint]) -> Result<()> {
    if bids.len() < 2 {
        return Err(Error::TooFewBids {
            min: 2,
            got: bids.len(),
        });
    }
    for (index, bid) in bids.iter().enumerate() {
        if !bid.quantity.is_finite() || bid.quantity < 0.0 {
            return Err(Error::InvalidBid {
                index,
                reason: format!("quantity {} must be finite and non-negative", bid.quantity),
            });
        }
        if !bid.yield_req.is_finite() {
            return Err(Error::InvalidBid {
                index,
                reason: format!("yield {} is not finite", bid.yield_req),
            });
        }
    }
    Ok(())
}

/// Aggregate demand: the sum of all submitted quantities.
pub fn aggregate_demand(bids: &[BidPoint]) -> Result<f64> {
    validate_bids(bids)?;
    Ok(compensated_sum(bids.iter().map(|b| b.quantity)))
}

/// The linear stop-out rule: `benchmark - sensitivity * demand` once demand
/// covers the face value, 0 otherwise.
///
/// Parameterizations where the rule would go non-positive
/// (`benchmark <= sensitivity * demand`) are outside its domain and rejected
/// rather than clamped.
pub fn stop_out_yield(demand: f64, p: &MarketParams) -> Result<f64> {
    if demand < FACE_VALUE {
        return Ok(0.0);
    }
    let scaled = p.demand_sensitivity * demand;
    if p.benchmark_yield <= scaled {
        return Err(Error::YieldRuleDomain {
            benchmark: p.benchmark_yield,
            scaled_demand: scaled,
        });
    }
    Ok(p.benchmark_yield - scaled)
}

/// Clears the auction.
///
/// Under-subscription (demand below face value) means no issuance: zero
/// stop-out and zero allocations. Otherwise bids are filled in ascending
/// yield order; the group at the marginal yield is prorated in proportion to
/// quantity, and the demand actually priced is exactly the face value, so the
/// stop-out is the linear rule evaluated at 1. Over-subscription beyond the
/// marginal group does not move the stop-out.
pub fn clear(bids: &[BidPoint], p: &MarketParams) -> Result<AuctionOutcome> {
    let demand = aggregate_demand(bids)?;
    let mut allocations = vec![0.0; bids.len()];

    if demand < FACE_VALUE {
        return Ok(AuctionOutcome {
            stop_out: 0.0,
            allocations,
            issued: false,
            aggregate_demand: demand,
        });
    }

    let stop_out = stop_out_yield(FACE_VALUE, p)?;

    let mut order: Vec<usize> = (0..bids.len()).collect();
    order.sort_by(|&a, &b| bids[a].yield_req.total_cmp(&bids[b].yield_req));

    let mut remaining = FACE_VALUE;
    let mut start = 0;
    while start < order.len() && remaining > 0.0 {
        let group_yield = bids[order[start]].yield_req;
        let mut end = start;
        while end < order.len() && bids[order[end]].yield_req == group_yield {
            end += 1;
        }
        let group = &order[start..end];
        let group_demand = compensated_sum(group.iter().map(|&k| bids[k].quantity));

        if group_demand <= remaining {
            for &k in group {
                allocations[k] = bids[k].quantity;
            }
            remaining -= group_demand;
        } else {
            // Marginal group: prorate the remainder in proportion to quantity.
            let ratio = remaining / group_demand;
            for &k in group {
                allocations[k] = bids[k].quantity * ratio;
            }
            remaining = 0.0;
        }
        start = end;
    }

    Ok(AuctionOutcome {
        stop_out,
        allocations,
        issued: true,
        aggregate_demand: demand,
    })
}
