//! Closed-form symmetric equilibrium: the market-power factor, the
//! equilibrium bid, the symmetric risk limit and stop-out yield, and the
//! limit behavior as mandates tighten.

use crate::error::{Error, Result};
use crate::market::MarketParams;

/// Linear allocation rule `alpha(c) = intercept + slope * c`.
///
/// The rule must be strictly increasing and map the budget domain into
/// `(0, 1)`; linearity is load-bearing for the second-order flatness of the
/// symmetric payoff.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AllocationRule {
    slope: f64,
    intercept: f64,
}

impl AllocationRule {
    pub fn new(slope: f64, intercept: f64) -> Result<Self> {
        if !(slope > 0.0) || !slope.is_finite() || !intercept.is_finite() {
            return Err(Error::NonPositiveSlope(slope));
        }
        Ok(Self { slope, intercept })
    }

    /// The identity rule `alpha(c) = c`: each winner's quota is the reported
    /// budget.
    pub fn identity() -> Self {
        Self {
            slope: 1.0,
            intercept: 0.0,
        }
    }

    /// The line through two (budget, allocation) points.
    pub fn through(a: (f64, f64), b: (f64, f64)) -> Result<Self> {
        let slope = (b.1 - a.1) / (b.0 - a.0);
        let intercept = a.1 - slope * a.0;
        Self::new(slope, intercept)
    }

    pub fn slope(&self) -> f64 {
        self.slope
    }

    pub fn intercept(&self) -> f64 {
        self.intercept
    }

    pub fn value(&self, budget: f64) -> f64 {
        self.intercept + self.slope * budget
    }

    /// Allocation value, rejecting budgets the rule maps outside `(0, 1)`.
    pub fn value_checked(&self, budget: f64) -> Result<f64> {
        let value = self.value(budget);
        if value > 0.0 && value < 1.0 {
            Ok(value)
        } else {
            Err(Error::AllocationOutOfRange { budget, value })
        }
    }

    /// Relative rate of change `alpha'(c) / alpha(c)`.
    pub fn relative_rate(&self, budget: f64) -> f64 {
        self.slope / self.value(budget)
    }
}

/// Normalized market-power coefficient with its equilibrium-existence
/// condition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct XiFactor {
    /// `sensitivity / (benchmark - expected resale yield)`.
    pub value: f64,
    /// The condition bound `1 / (min_bid * n)`.
    pub condition_bound: f64,
    /// Whether `value < 1 / (min_bid * n)` holds. Violations are flagged, not
    /// fatal, so out-of-condition parameterizations stay runnable.
    pub condition_satisfied: bool,
}

/// Computes the market-power factor and flags its existence condition.
pub fn xi(p: &MarketParams) -> Result<XiFactor> {
    let spread = p.resale_spread();
    if !(spread > 0.0) {
        return Err(Error::NonPositiveSpread {
            benchmark: p.benchmark_yield,
            resale: p.expected_resale_yield,
        });
    }
    let value = p.demand_sensitivity / spread;
    let condition_bound = 1.0 / (p.min_bid * p.n());
    Ok(XiFactor {
        value,
        condition_bound,
        condition_satisfied: value < condition_bound,
    })
}

/// A point on the symmetric equilibrium schedule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquilibriumPoint {
    /// Budget at which the schedule is evaluated.
    pub budget: f64,
    /// Equilibrium bid: `min_bid * w + (1 - w) / (xi * n)` with
    /// `w = alpha(floor) / alpha(budget)`.
    pub bid: f64,
    pub xi: XiFactor,
    /// Symmetric stop-out yield at this point.
    pub stop_out: f64,
    /// Allocation weight `alpha(floor) / alpha(budget)`, in `(0, 1]`.
    pub weight: f64,
}

/// Symmetric risk limit implied by the minimum bid:
/// `benchmark - sensitivity * n * min_bid`.
///
/// A value below the risk-free rate signals a mandate/market mismatch and is
/// reported as an error.
pub fn symmetric_risk_limit(min_bid: f64, p: &MarketParams) -> Result<f64> {
    let value = symmetric_risk_limit_value(min_bid, p);
    if value < p.risk_free_yield {
        return Err(Error::MandateMarketMismatch {
            value,
            risk_free: p.risk_free_yield,
        });
    }
    Ok(value)
}

fn symmetric_risk_limit_value(min_bid: f64, p: &MarketParams) -> f64 {
    p.benchmark_yield - p.demand_sensitivity * p.n() * min_bid
}

/// Evaluates the symmetric equilibrium bid at `budget`, for a mandate whose
/// floor is `budget_floor`.
pub fn equilibrium_bid(
    budget: f64,
    budget_floor: f64,
    rule: &AllocationRule,
    p: &MarketParams,
) -> Result<EquilibriumPoint> {
    if budget < budget_floor {
        return Err(Error::BudgetBelowFloor {
            eval: budget,
            floor: budget_floor,
        });
    }
    if !(p.demand_sensitivity > 0.0) {
        return Err(Error::NonPositiveSensitivity(p.demand_sensitivity));
    }
    let xi = xi(p)?;
    let alloc_floor = rule.value_checked(budget_floor)?;
    let alloc_eval = rule.value_checked(budget)?;
    let weight = alloc_floor / alloc_eval;

    let competitive_bid = 1.0 / (xi.value * p.n());
    let bid = p.min_bid * weight + competitive_bid * (1.0 - weight);

    let risk_limit = symmetric_risk_limit_value(p.min_bid, p);
    let stop_out = p.expected_resale_yield + (risk_limit - p.expected_resale_yield) * weight;

    Ok(EquilibriumPoint {
        budget,
        bid,
        xi,
        stop_out,
        weight,
    })
}

/// Symmetric stop-out yield at `budget`:
/// `E[resale] + (symmetric risk limit - E[resale]) * w`.
///
/// Algebraically identical to pricing the symmetric aggregate demand through
/// the linear rule, `benchmark - sensitivity * n * bid`.
pub fn symmetric_stop_out(
    budget: f64,
    budget_floor: f64,
    rule: &AllocationRule,
    p: &MarketParams,
) -> Result<f64> {
    equilibrium_bid(budget, budget_floor, rule, p).map(|point| point.stop_out)
}

/// The symmetric equilibrium bid schedule as a reusable closure.
///
/// Evaluates identically to [`equilibrium_bid`] but hoists the per-call
/// validation, so verification loops can probe it densely.
pub fn equilibrium_strategy(
    budget_floor: f64,
    rule: &AllocationRule,
    p: &MarketParams,
) -> Result<impl Fn(f64) -> f64> {
    if !(p.demand_sensitivity > 0.0) {
        return Err(Error::NonPositiveSensitivity(p.demand_sensitivity));
    }
    let xi = xi(p)?;
    let alloc_floor = rule.value_checked(budget_floor)?;
    let competitive_bid = 1.0 / (xi.value * p.n());
    let min_bid = p.min_bid;
    let rule = *rule;
    Ok(move |budget: f64| {
        let weight = alloc_floor / rule.value(budget);
        min_bid * weight + competitive_bid * (1.0 - weight)
    })
}

/// Equilibrium bids along an increasing sequence of mandate floors, holding
/// the evaluation budget fixed. As the floor rises toward the evaluation
/// budget the bids move monotonically to the minimum bid.
pub fn mandate_tightening_sweep(
    floor_sequence: &[f64],
    budget: f64,
    rule: &AllocationRule,
    p: &MarketParams,
) -> Result<Vec<f64>> {
    if floor_sequence.is_empty() {
        return Err(Error::BadBudgetSequence);
    }
    for pair in floor_sequence.windows(2) {
        if !(pair[0] < pair[1]) {
            return Err(Error::BadBudgetSequence);
        }
    }
    if *floor_sequence.last().unwrap() > budget {
        return Err(Error::BadBudgetSequence);
    }
    floor_sequence
        .iter()
        .map(|&floor| equilibrium_bid(budget, floor, rule, p).map(|pt| pt.bid))
        .collect()
}
