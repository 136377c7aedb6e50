//! Domain types for the auction environment.
//!
//! Everything downstream (clearing, equilibrium, verification, experiments)
//! consumes the types defined here: the market parameters, bidder mandates
//! expressed as types `(budget, risk_limit)`, discrete bid points, and the
//! distributions bidder types are sampled from.
//!
//! All yields are decimal fractions per annum (`0.046` means 4.6%), never
//! percentages. All quantities are fractions of the unit face value.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use statrs::distribution::{Continuous, ContinuousCDF, Normal};
use std::fmt;

use crate::error::{Error, Result};

/// Auction environment shared by every operation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarketParams {
    /// Benchmark high-yield ("junk") bond rate: the fire-sale rate and the
    /// intercept of the inverse demand rule.
    pub benchmark_yield: f64,
    /// Sensitivity of the stop-out yield to aggregate demand. Aggregate
    /// convention: it multiplies total demand, never a single bid.
    pub demand_sensitivity: f64,
    /// Number of bidders.
    pub bidders: u32,
    /// Expectation of the secondary-market yield.
    pub expected_resale_yield: f64,
    /// Risk-free rate; lower bound of the eligible yield domain.
    pub risk_free_yield: f64,
    /// Upper bound of the eligible yield domain.
    pub max_yield: f64,
    /// Minimum bid tied to the symmetric risk limit.
    pub min_bid: f64,
}

impl MarketParams {
    pub fn n(&self) -> f64 {
        f64::from(self.bidders)
    }

    /// Spread between the benchmark rate and the expected resale yield.
    pub fn resale_spread(&self) -> f64 {
        self.benchmark_yield - self.expected_resale_yield
    }
}

/// A violated parameter invariant, naming the constraint and the offending
/// value(s).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamViolation {
    pub invariant: &'static str,
    pub detail: String,
}

impl fmt::Display for ParamViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} violated: {}", self.invariant, self.detail)
    }
}

/// Checks every `MarketParams` invariant and reports all violations.
///
/// This is a reporting operation: an empty list means the parameters are
/// valid. Callers that need a hard failure turn the list into an error.
pub fn validate_params(p: &MarketParams) -> Vec<ParamViolation> {
    let mut violations = Vec::new();
    let mut push = |invariant: &'static str, detail: String| {
        violations.push(ParamViolation { invariant, detail });
    };

    let fields = [
        ("benchmark_yield", p.benchmark_yield),
        ("demand_sensitivity", p.demand_sensitivity),
        ("expected_resale_yield", p.expected_resale_yield),
        ("risk_free_yield", p.risk_free_yield),
        ("max_yield", p.max_yield),
        ("min_bid", p.min_bid),
    ];
    for (name, value) in fields {
        if !value.is_finite() {
            push("all parameters finite", format!("{name} = {value}"));
        }
    }

    if p.bidders < 3 {
        push("bidders >= 3", format!("bidders = {}", p.bidders));
    }
    if !(p.min_bid > 0.0 && p.min_bid < 1.0) {
        push("0 < min_bid < 1", format!("min_bid = {}", p.min_bid));
    }
    if !(p.benchmark_yield > p.expected_resale_yield) {
        push(
            "benchmark_yield > expected_resale_yield",
            format!(
                "benchmark_yield = {}, expected_resale_yield = {}",
                p.benchmark_yield, p.expected_resale_yield
            ),
        );
    }
    if !(p.risk_free_yield <= p.expected_resale_yield) {
        push(
            "risk_free_yield <= expected_resale_yield",
            format!(
                "risk_free_yield = {}, expected_resale_yield = {}",
                p.risk_free_yield, p.expected_resale_yield
            ),
        );
    }
    if !(p.expected_resale_yield <= p.max_yield) {
        push(
            "expected_resale_yield <= max_yield",
            format!(
                "expected_resale_yield = {}, max_yield = {}",
                p.expected_resale_yield, p.max_yield
            ),
        );
    }
    if !(p.max_yield < p.benchmark_yield) {
        push(
            "max_yield < benchmark_yield",
            format!(
                "max_yield = {}, benchmark_yield = {}",
                p.max_yield, p.benchmark_yield
            ),
        );
    }
    if !(p.demand_sensitivity > 0.0) {
        push(
            "demand_sensitivity > 0",
            format!("demand_sensitivity = {}", p.demand_sensitivity),
        );
    }

    violations
}

/// A bidder's mandate pair: budget limit and risk limit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BidderType {
    /// Budget limit: the largest fraction of face value the mandate allows.
    pub budget: f64,
    /// Risk limit: the supremum acceptable yield under the mandate.
    pub risk_limit: f64,
}

/// Opaque bidder identifier carried on bid points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BidderId(pub u32);

/// A reported (quantity, yield) pair in the direct mechanism.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BidPoint {
    /// Demanded fraction of face value, in `[0, 1)`.
    pub quantity: f64,
    /// Yield at which the quantity is demanded.
    pub yield_req: f64,
    pub bidder: BidderId,
}

impl BidPoint {
    pub fn new(quantity: f64, yield_req: f64, bidder: BidderId) -> Result<Self> {
        if !quantity.is_finite() || !(0.0..1.0).contains(&quantity) {
            return Err(Error::InvalidBid {
                index: bidder.0 as usize,
                reason: format!("quantity {quantity} is outside [0, 1)"),
            });
        }
        if !yield_req.is_finite() {
            return Err(Error::InvalidBid {
                index: bidder.0 as usize,
                reason: format!("yield {yield_req} is not finite"),
            });
        }
        Ok(Self {
            quantity,
            yield_req,
            bidder,
        })
    }
}

/// Closed interval used as marginal support.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

/// Normal marginal truncated to `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncatedNormalParams {
    pub mean: f64,
    pub std_dev: f64,
    pub lo: f64,
    pub hi: f64,
}

impl TruncatedNormalParams {
    fn support(&self) -> Interval {
        Interval::new(self.lo, self.hi)
    }

    fn normal(&self) -> Normal {
        // std_dev > 0 is checked in TypeDistribution::validate.
        Normal::new(self.mean, self.std_dev).expect("validated truncated normal")
    }

    fn mass(&self) -> f64 {
        let n = self.normal();
        n.cdf(self.hi) - n.cdf(self.lo)
    }

    fn cdf(&self, x: f64) -> f64 {
        if x <= self.lo {
            return 0.0;
        }
        if x >= self.hi {
            return 1.0;
        }
        let n = self.normal();
        (n.cdf(x) - n.cdf(self.lo)) / self.mass()
    }

    fn pdf(&self, x: f64) -> f64 {
        if x < self.lo || x > self.hi {
            return 0.0;
        }
        self.normal().pdf(x) / self.mass()
    }
}

/// Joint distribution of bidder types: independent marginals for the budget
/// and the risk limit, each fully supported on its interval.
#[derive(Debug, Clone, PartialEq)]
pub enum TypeDistribution {
    /// Independent uniform marginals.
    Uniform {
        budget: Interval,
        risk_limit: Interval,
    },
    /// Independent truncated-normal marginals.
    TruncatedNormal {
        budget: TruncatedNormalParams,
        risk_limit: TruncatedNormalParams,
    },
    /// Degenerate distribution: every bidder has exactly this type.
    PointMass { budget: f64, risk_limit: f64 },
    /// Two atoms `(budget, risk_limit)`; `low_weight` is the probability of
    /// the low atom.
    TwoPoint {
        low: (f64, f64),
        high: (f64, f64),
        low_weight: f64,
    },
}

impl TypeDistribution {
    pub fn validate(&self) -> Result<()> {
        let err = |msg: String| Err(Error::InvalidDistribution(msg));
        match self {
            TypeDistribution::Uniform { budget, risk_limit } => {
                for (name, iv) in [("budget", budget), ("risk_limit", risk_limit)] {
                    if !(iv.lo.is_finite() && iv.hi.is_finite() && iv.lo < iv.hi) {
                        return err(format!(
                            "{name} interval [{}, {}] must be finite and non-degenerate",
                            iv.lo, iv.hi
                        ));
                    }
                }
                Ok(())
            }
            TypeDistribution::TruncatedNormal { budget, risk_limit } => {
                for (name, tn) in [("budget", budget), ("risk_limit", risk_limit)] {
                    if !(tn.std_dev > 0.0 && tn.std_dev.is_finite()) {
                        return err(format!("{name} std_dev {} must be positive", tn.std_dev));
                    }
                    if !(tn.lo.is_finite() && tn.hi.is_finite() && tn.lo < tn.hi) {
                        return err(format!(
                            "{name} truncation [{}, {}] must be finite and non-degenerate",
                            tn.lo, tn.hi
                        ));
                    }
                    if tn.mass() <= 0.0 {
                        return err(format!(
                            "{name} truncation [{}, {}] carries no probability mass",
                            tn.lo, tn.hi
                        ));
                    }
                }
                Ok(())
            }
            TypeDistribution::PointMass { budget, risk_limit } => {
                if budget.is_finite() && risk_limit.is_finite() {
                    Ok(())
                } else {
                    err("point mass coordinates must be finite".to_string())
                }
            }
            TypeDistribution::TwoPoint {
                low,
                high,
                low_weight,
            } => {
                if !(low.0.is_finite()
                    && low.1.is_finite()
                    && high.0.is_finite()
                    && high.1.is_finite())
                {
                    return err("two-point atoms must be finite".to_string());
                }
                if low.0 >= high.0 {
                    return err(format!(
                        "two-point budgets must satisfy low < high, got {} >= {}",
                        low.0, high.0
                    ));
                }
                if !(*low_weight > 0.0 && *low_weight < 1.0) {
                    return err(format!("low_weight {low_weight} must lie in (0, 1)"));
                }
                Ok(())
            }
        }
    }

    /// Support of the budget marginal.
    pub fn budget_support(&self) -> Interval {
        match self {
            TypeDistribution::Uniform { budget, .. } => *budget,
            TypeDistribution::TruncatedNormal { budget, .. } => budget.support(),
            TypeDistribution::PointMass { budget, .. } => Interval::new(*budget, *budget),
            TypeDistribution::TwoPoint { low, high, .. } => Interval::new(low.0, high.0),
        }
    }

    /// Support of the risk-limit marginal.
    pub fn risk_support(&self) -> Interval {
        match self {
            TypeDistribution::Uniform { risk_limit, .. } => *risk_limit,
            TypeDistribution::TruncatedNormal { risk_limit, .. } => risk_limit.support(),
            TypeDistribution::PointMass { risk_limit, .. } => {
                Interval::new(*risk_limit, *risk_limit)
            }
            TypeDistribution::TwoPoint { low, high, .. } => {
                Interval::new(low.1.min(high.1), low.1.max(high.1))
            }
        }
    }

    /// Budget-marginal atoms for the discrete kinds, with probabilities.
    pub fn budget_atoms(&self) -> Option<Vec<(f64, f64)>> {
        match self {
            TypeDistribution::PointMass { budget, .. } => Some(vec![(*budget, 1.0)]),
            TypeDistribution::TwoPoint {
                low,
                high,
                low_weight,
            } => Some(vec![(low.0, *low_weight), (high.0, 1.0 - low_weight)]),
            _ => None,
        }
    }

    /// CDF of the budget marginal.
    pub fn budget_cdf(&self, x: f64) -> f64 {
        match self {
            TypeDistribution::Uniform { budget, .. } => {
                ((x - budget.lo) / budget.width()).clamp(0.0, 1.0)
            }
            TypeDistribution::TruncatedNormal { budget, .. } => budget.cdf(x),
            TypeDistribution::PointMass { budget, .. } => {
                if x >= *budget {
                    1.0
                } else {
                    0.0
                }
            }
            TypeDistribution::TwoPoint {
                low,
                high,
                low_weight,
            } => {
                if x < low.0 {
                    0.0
                } else if x < high.0 {
                    *low_weight
                } else {
                    1.0
                }
            }
        }
    }

    /// Density of the budget marginal. Discrete kinds have no density;
    /// callers route them through [`TypeDistribution::budget_atoms`].
    pub fn budget_pdf(&self, x: f64) -> f64 {
        match self {
            TypeDistribution::Uniform { budget, .. } => {
                if budget.contains(x) {
                    1.0 / budget.width()
                } else {
                    0.0
                }
            }
            TypeDistribution::TruncatedNormal { budget, .. } => budget.pdf(x),
            TypeDistribution::PointMass { .. } | TypeDistribution::TwoPoint { .. } => f64::NAN,
        }
    }

    pub(crate) fn sample_one(
        &self,
        rng: &mut impl Rng,
        rejections: &mut u64,
    ) -> Result<BidderType> {
        match self {
            TypeDistribution::Uniform { budget, risk_limit } => Ok(BidderType {
                budget: rng.gen_range(budget.lo..=budget.hi),
                risk_limit: rng.gen_range(risk_limit.lo..=risk_limit.hi),
            }),
            TypeDistribution::TruncatedNormal { budget, risk_limit } => {
                let budget = sample_truncated_normal(budget, rng, rejections)?;
                let risk_limit = sample_truncated_normal(risk_limit, rng, rejections)?;
                Ok(BidderType { budget, risk_limit })
            }
            TypeDistribution::PointMass { budget, risk_limit } => Ok(BidderType {
                budget: *budget,
                risk_limit: *risk_limit,
            }),
            TypeDistribution::TwoPoint {
                low,
                high,
                low_weight,
            } => {
                let (budget, risk_limit) = if rng.gen::<f64>() < *low_weight {
                    *low
                } else {
                    *high
                };
                Ok(BidderType { budget, risk_limit })
            }
        }
    }
}

const MAX_REJECTIONS_PER_DRAW: u64 = 100_000;

fn sample_truncated_normal(
    tn: &TruncatedNormalParams,
    rng: &mut impl Rng,
    rejections: &mut u64,
) -> Result<f64> {
    let normal = tn.normal();
    for _ in 0..MAX_REJECTIONS_PER_DRAW {
        let draw = rng.sample(normal);
        if tn.support().contains(draw) {
            return Ok(draw);
        }
        *rejections += 1;
    }
    Err(Error::SamplingStalled {
        attempts: MAX_REJECTIONS_PER_DRAW,
    })
}

/// Outcome of a sampling run, including how many raw draws the rejection
/// sampler discarded. Box-supported kinds never reject.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleReport {
    pub rejected: u64,
}

/// Draws `count` i.i.d. bidder types. Deterministic for a fixed seed.
pub fn sample_types(dist: &TypeDistribution, count: u32, seed: u64) -> Result<Vec<BidderType>> {
    sample_types_with_report(dist, count, seed).map(|(types, _)| types)
}

/// As [`sample_types`], also reporting the rejection count.
pub fn sample_types_with_report(
    dist: &TypeDistribution,
    count: u32,
    seed: u64,
) -> Result<(Vec<BidderType>, SampleReport)> {
    dist.validate()?;
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut rejections = 0u64;
    let types = (0..count)
        .map(|_| dist.sample_one(&mut rng, &mut rejections))
        .collect::<Result<Vec<_>>>()?;
    Ok((
        types,
        SampleReport {
            rejected: rejections,
        },
    ))
}

/// Smallest admissible bid for a bidder whose mandate caps risk at
/// `risk_limit`: inverts the symmetric stop-out rule, so the minimum bid and
/// the risk limit round-trip exactly.
///
/// A result outside `(0, 1)` means the mandate cannot participate in this
/// market and is reported as an error.
pub fn infimum_bid_for_risk_limit(risk_limit: f64, p: &MarketParams) -> Result<f64> {
    if !(risk_limit >= p.risk_free_yield && risk_limit < p.benchmark_yield) {
        return Err(Error::RiskLimitOutOfRange {
            risk_limit,
            risk_free: p.risk_free_yield,
            benchmark: p.benchmark_yield,
        });
    }
    let scale = p.demand_sensitivity * p.n();
    if !(scale > 0.0) {
        return Err(Error::InfeasibleMandate { min_bid: f64::NAN });
    }
    let min_bid = (p.benchmark_yield - risk_limit) / scale;
    if !(min_bid > 0.0 && min_bid < 1.0) {
        return Err(Error::InfeasibleMandate { min_bid });
    }
    Ok(min_bid)
}

/// Whether a bid point lies in the bidder's participation region: quantity
/// between the risk-implied minimum bid and the budget limit, yield between
/// the risk-free rate and the risk limit.
pub fn is_admissible(bid: &BidPoint, t: &BidderType, p: &MarketParams) -> bool {
    let Ok(floor) = infimum_bid_for_risk_limit(t.risk_limit, p) else {
        return false;
    };
    bid.quantity >= floor
        && bid.quantity <= t.budget
        && bid.yield_req >= p.risk_free_yield
        && bid.yield_req <= t.risk_limit
}
