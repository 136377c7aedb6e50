//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("distribution is invalid: {0}")]
    InvalidDistribution(String),

    #[error("sampling stalled: {attempts} rejected draws without an accepted one")]
    SamplingStalled { attempts: u64 },

    #[error(
        "risk limit {risk_limit} is outside [risk_free, benchmark) = [{risk_free}, {benchmark})"
    )]
    RiskLimitOutOfRange {
        risk_limit: f64,
        risk_free: f64,
        benchmark: f64,
    },

    #[error("mandate is infeasible for these market parameters: implied minimum bid {min_bid} lies outside (0, 1)")]
    InfeasibleMandate { min_bid: f64 },

    #[error("need at least {min} bids, got {got}")]
    TooFewBids { min: usize, got: usize },

    #[error("bid {index} is invalid: {reason}")]
    InvalidBid { index: usize, reason: String },

    #[error(
        "yield rule domain violated: benchmark {benchmark} <= sensitivity * demand = {scaled_demand}"
    )]
    YieldRuleDomain { benchmark: f64, scaled_demand: f64 },

    #[error("benchmark yield {benchmark} must exceed the expected resale yield {resale}")]
    NonPositiveSpread { benchmark: f64, resale: f64 },

    #[error("allocation rule must be strictly increasing: slope {0} is not positive")]
    NonPositiveSlope(f64),

    #[error("demand sensitivity {0} must be positive")]
    NonPositiveSensitivity(f64),

    #[error("allocation value {value} at budget {budget} is outside (0, 1)")]
    AllocationOutOfRange { budget: f64, value: f64 },

    #[error("evaluation budget {eval} is below the mandate floor {floor}")]
    BudgetBelowFloor { eval: f64, floor: f64 },

    #[error("symmetric risk limit {value} falls below the risk-free rate {risk_free}: mandate and market parameters are mismatched")]
    MandateMarketMismatch { value: f64, risk_free: f64 },

    #[error("budget sequence must be strictly increasing and bounded by the evaluation budget")]
    BadBudgetSequence,

    #[error("{what} resolution {got} is below the minimum {min}")]
    ResolutionTooLow {
        what: &'static str,
        got: usize,
        min: usize,
    },

    #[error(
        "finite-difference step {step} pushes the probe outside the budget support [{lo}, {hi}]"
    )]
    StepOutOfDomain { step: f64, lo: f64, hi: f64 },

    #[error("probe budget {budget} is not interior to the budget support [{lo}, {hi}]")]
    BudgetNotInterior { budget: f64, lo: f64, hi: f64 },

    #[error("grid is empty or extends outside the budget support")]
    BadGrid,

    #[error("sweep specification is invalid: {0}")]
    InvalidSweep(String),

    #[error("replicate count must be at least 1")]
    NoReplicates,

    #[error("scenario error:\n{0}")]
    Scenario(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
