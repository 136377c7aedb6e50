//! Monte Carlo auction campaigns and comparative-statics sweeps.
//!
//! Replicates are seeded independently from the master seed and the
//! replicate index, so campaign output is bit-identical regardless of worker
//! count or execution order.

use rayon::prelude::*;

use crate::clearing::{clear, compensated_sum};
use crate::equilibrium::{equilibrium_bid, equilibrium_strategy, xi, AllocationRule};
use crate::error::{Error, Result};
use crate::market::{
    sample_types, validate_params, BidPoint, BidderId, BidderType, MarketParams, TypeDistribution,
};
use crate::seeding::derive_seed;

/// How sampled types are mapped to bids.
#[derive(Debug, Clone, PartialEq)]
pub enum BidStrategy {
    /// Report budgets through the symmetric equilibrium schedule; the
    /// requested yield is the symmetric stop-out of the bidder's own bid.
    Equilibrium {
        rule: AllocationRule,
        budget_floor: f64,
    },
    /// Report the budget limit itself at the bidder's own risk limit.
    TruthfulBudget,
    /// Every bidder submits the same fixed point.
    Fixed { quantity: f64, yield_req: f64 },
}

/// One cleared replicate. Full allocations are digested, not stored.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ReplicateRecord {
    pub replicate: u64,
    pub seed: u64,
    pub aggregate_demand: f64,
    pub stop_out: f64,
    pub issued: bool,
    pub allocations_digest: u64,
    /// Set when the strategy was undefined for some sampled type (budget
    /// below the mandate floor, or a bid outside `[0, 1)` mapped to
    /// abstention). Flagged replicates stay in the record set.
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CampaignSummary {
    pub replicates: usize,
    pub issuance_rate: f64,
    pub mean_stop_out: f64,
    pub min_stop_out: f64,
    pub max_stop_out: f64,
    /// `(probability, value)` pairs at 5/25/50/75/95%.
    pub stop_out_quantiles: [(f64, f64); 5],
    pub flagged: usize,
}

/// Order statistics of a stop-out sample. Deterministic: the sample is
/// sorted by total order and summed with compensation, so recomputing from
/// re-parsed records reproduces the stored summary bit-exactly.
pub fn stop_out_statistics(stop_outs: &[f64]) -> (f64, f64, f64, [(f64, f64); 5]) {
    let mut sorted = stop_outs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mean = compensated_sum(sorted.iter().copied()) / sorted.len() as f64;
    let quantiles = [0.05, 0.25, 0.5, 0.75, 0.95].map(|q| (q, quantile(&sorted, q)));
    (
        mean,
        sorted.first().copied().unwrap_or(f64::NAN),
        sorted.last().copied().unwrap_or(f64::NAN),
        quantiles,
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct CampaignResult {
    pub records: Vec<ReplicateRecord>,
    pub summary: CampaignSummary,
}

impl CampaignResult {
    /// Recomputes the summary from the stored replicates. Must reproduce the
    /// stored summary bit-exactly.
    pub fn recompute_summary(&self) -> CampaignSummary {
        summarize(&self.records)
    }
}

/// FNV-1a over the allocation vector's bit patterns.
fn digest_allocations(allocations: &[f64]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for a in allocations {
        for byte in a.to_le_bytes() {
            hash ^= u64::from(byte);
            hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    hash
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let position = q * (sorted.len() - 1) as f64;
    let lower = position.floor() as usize;
    let upper = position.ceil() as usize;
    let fraction = position - lower as f64;
    sorted[lower] * (1.0 - fraction) + sorted[upper] * fraction
}

fn summarize(records: &[ReplicateRecord]) -> CampaignSummary {
    let m = records.len();
    let issued = records.iter().filter(|r| r.issued).count();
    let flagged = records.iter().filter(|r| r.flagged).count();
    let stop_outs: Vec<f64> = records.iter().map(|r| r.stop_out).collect();
    let (mean, min, max, quantiles) = stop_out_statistics(&stop_outs);
    CampaignSummary {
        replicates: m,
        issuance_rate: issued as f64 / m as f64,
        mean_stop_out: mean,
        min_stop_out: min,
        max_stop_out: max,
        stop_out_quantiles: quantiles,
        flagged,
    }
}

/// Maps sampled types to bid points under the strategy. The flag is set when
/// the strategy was undefined for some type (budget below the mandate floor,
/// or a bid outside `[0, 1)` turned into abstention).
pub fn bids_for_types(
    types: &[BidderType],
    strategy: &BidStrategy,
    p: &MarketParams,
) -> Result<(Vec<BidPoint>, bool)> {
    let schedule = match strategy {
        BidStrategy::Equilibrium { rule, budget_floor } => {
            Some(equilibrium_strategy(*budget_floor, rule, p)?)
        }
        _ => None,
    };
    let mut flagged = false;
    let bids = types
        .iter()
        .enumerate()
        .map(|(i, t)| bid_for_type(t, i as u32, strategy, schedule.as_ref(), p, &mut flagged))
        .collect();
    Ok((bids, flagged))
}

fn bid_for_type(
    t: &BidderType,
    index: u32,
    strategy: &BidStrategy,
    schedule: Option<&(impl Fn(f64) -> f64 + Sync)>,
    p: &MarketParams,
    flagged: &mut bool,
) -> BidPoint {
    let id = BidderId(index);
    let (quantity, yield_req) = match strategy {
        BidStrategy::Equilibrium { budget_floor, .. } => {
            if t.budget < *budget_floor {
                *flagged = true;
            }
            let quantity = schedule.expect("equilibrium schedule")(t.budget);
            let yield_req = (p.benchmark_yield - p.demand_sensitivity * p.n() * quantity)
                .clamp(p.risk_free_yield, p.max_yield);
            (quantity, yield_req)
        }
        BidStrategy::TruthfulBudget => (t.budget, t.risk_limit),
        BidStrategy::Fixed {
            quantity,
            yield_req,
        } => (*quantity, *yield_req),
    };
    // A bid the mechanism cannot accept maps to abstention, flagged.
    BidPoint::new(quantity, yield_req, id).unwrap_or_else(|_| {
        *flagged = true;
        BidPoint {
            quantity: 0.0,
            yield_req: p.max_yield,
            bidder: id,
        }
    })
}

/// Runs `replicates` independent auctions: sample types, map to bids, clear.
///
/// `workers = 0` runs on the current thread; any other count uses a rayon
/// pool of that size. Output is identical either way.
pub fn run_campaign(
    dist: &TypeDistribution,
    strategy: &BidStrategy,
    p: &MarketParams,
    replicates: u64,
    seed: u64,
    workers: usize,
) -> Result<CampaignResult> {
    if replicates == 0 {
        return Err(Error::NoReplicates);
    }
    dist.validate()?;

    let schedule = match strategy {
        BidStrategy::Equilibrium { rule, budget_floor } => {
            Some(equilibrium_strategy(*budget_floor, rule, p)?)
        }
        _ => None,
    };

    let run_one = |index: u64| -> Result<ReplicateRecord> {
        let replicate_seed = derive_seed(seed, index);
        let types = sample_types(dist, p.bidders, replicate_seed)?;
        let mut flagged = false;
        let bids: Vec<BidPoint> = types
            .iter()
            .enumerate()
            .map(|(i, t)| bid_for_type(t, i as u32, strategy, schedule.as_ref(), p, &mut flagged))
            .collect();
        let outcome = clear(&bids, p)?;
        Ok(ReplicateRecord {
            replicate: index,
            seed: replicate_seed,
            aggregate_demand: outcome.aggregate_demand,
            stop_out: outcome.stop_out,
            issued: outcome.issued,
            allocations_digest: digest_allocations(&outcome.allocations),
            flagged,
        })
    };

    let records: Vec<ReplicateRecord> = if workers == 0 {
        (0..replicates).map(run_one).collect::<Result<_>>()?
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| Error::Scenario(format!("worker pool: {e}")))?;
        pool.install(|| {
            (0..replicates)
                .into_par_iter()
                .map(run_one)
                .collect::<Result<Vec<_>>>()
        })?
    };

    let summary = summarize(&records);
    Ok(CampaignResult { records, summary })
}

/// Swept parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    /// Demand sensitivity of the stop-out rule.
    Sensitivity,
    /// Number of bidders.
    Bidders,
    /// Minimum bid.
    MinBid,
    /// Expected secondary-market yield.
    ExpectedResaleYield,
    /// Mandate budget floor.
    BudgetFloor,
}

impl SweepAxis {
    pub fn name(&self) -> &'static str {
        match self {
            SweepAxis::Sensitivity => "sensitivity",
            SweepAxis::Bidders => "bidders",
            SweepAxis::MinBid => "min_bid",
            SweepAxis::ExpectedResaleYield => "expected_resale_yield",
            SweepAxis::BudgetFloor => "budget_floor",
        }
    }
}

/// A comparative-statics sweep: one axis, strictly monotone values, all other
/// parameters frozen at the baseline.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    /// Bidder-count sweeps only: recalibrate the minimum bid so
    /// `min_bid * n` stays at its baseline value.
    pub hold_scaled_min_bid: bool,
}

/// Baseline the sweep perturbs.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepBaseline {
    pub params: MarketParams,
    pub rule: AllocationRule,
    pub budget_floor: f64,
    /// Budget at which equilibrium quantities are evaluated.
    pub eval_budget: f64,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SweepRow {
    pub axis_value: f64,
    pub bid: f64,
    pub stop_out: f64,
    pub xi: f64,
    /// Warning flags for this row (xi-condition, parameter violations,
    /// evaluation errors). Empty for clean rows.
    pub flags: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Monotonicity {
    StrictlyDecreasing,
    StrictlyIncreasing,
    Constant,
    NonMonotone,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    pub axis: SweepAxis,
    pub rows: Vec<SweepRow>,
    /// Direction of the bid column across rows with finite bids.
    pub bid_monotonicity: Monotonicity,
    /// Distance of the final row's bid from the (row-local) minimum bid.
    pub final_gap_to_min_bid: f64,
}

fn classify(values: &[f64]) -> Monotonicity {
    let finite: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    if finite.len() < 2 {
        return Monotonicity::Constant;
    }
    let decreasing = finite.windows(2).all(|w| w[1] < w[0]);
    let increasing = finite.windows(2).all(|w| w[1] > w[0]);
    let constant = finite.windows(2).all(|w| w[1] == w[0]);
    if constant {
        Monotonicity::Constant
    } else if decreasing {
        Monotonicity::StrictlyDecreasing
    } else if increasing {
        Monotonicity::StrictlyIncreasing
    } else {
        Monotonicity::NonMonotone
    }
}

/// Evaluates equilibrium quantities along the sweep axis, one row per value,
/// with per-row warning flags.
pub fn run_sweep(spec: &SweepSpec, baseline: &SweepBaseline) -> Result<SweepTable> {
    if spec.values.is_empty() {
        return Err(Error::InvalidSweep("no axis values".into()));
    }
    let monotone_up = spec.values.windows(2).all(|w| w[1] > w[0]);
    let monotone_down = spec.values.windows(2).all(|w| w[1] < w[0]);
    if !(monotone_up || monotone_down) {
        return Err(Error::InvalidSweep(
            "axis values must be strictly monotone".into(),
        ));
    }
    if spec.hold_scaled_min_bid && spec.axis != SweepAxis::Bidders {
        return Err(Error::InvalidSweep(
            "hold_scaled_min_bid applies only to bidder-count sweeps".into(),
        ));
    }

    let mut rows = Vec::with_capacity(spec.values.len());
    let mut last_min_bid = baseline.params.min_bid;
    for &value in &spec.values {
        let mut flags = Vec::new();
        let mut params = baseline.params;
        let mut floor = baseline.budget_floor;
        match spec.axis {
            SweepAxis::Sensitivity => params.demand_sensitivity = value,
            SweepAxis::Bidders => {
                if value.fract() != 0.0 || value < 3.0 {
                    return Err(Error::InvalidSweep(format!(
                        "bidder count {value} must be an integer >= 3"
                    )));
                }
                params.bidders = value as u32;
                if spec.hold_scaled_min_bid {
                    params.min_bid = baseline.params.min_bid * baseline.params.n() / params.n();
                }
            }
            SweepAxis::MinBid => params.min_bid = value,
            SweepAxis::ExpectedResaleYield => params.expected_resale_yield = value,
            SweepAxis::BudgetFloor => floor = value,
        }
        last_min_bid = params.min_bid;

        for violation in validate_params(&params) {
            flags.push(format!("invalid:{}", violation.invariant));
        }

        let xi_value = match xi(&params) {
            Ok(factor) => {
                if !factor.condition_satisfied {
                    flags.push("xi-condition".into());
                }
                factor.value
            }
            Err(e) => {
                flags.push(format!("error:{e}"));
                f64::NAN
            }
        };

        let (bid, stop_out) =
            match equilibrium_bid(baseline.eval_budget, floor, &baseline.rule, &params) {
                Ok(point) => (point.bid, point.stop_out),
                Err(e) => {
                    flags.push(format!("error:{e}"));
                    (f64::NAN, f64::NAN)
                }
            };

        rows.push(SweepRow {
            axis_value: value,
            bid,
            stop_out,
            xi: xi_value,
            flags,
        });
    }

    let bids: Vec<f64> = rows.iter().map(|r| r.bid).collect();
    let final_gap_to_min_bid = rows
        .last()
        .map(|r| (r.bid - last_min_bid).abs())
        .unwrap_or(f64::NAN);
    Ok(SweepTable {
        axis: spec.axis,
        rows,
        bid_monotonicity: classify(&bids),
        final_gap_to_min_bid,
    })
}
