//! Independent numerical checks of the closed-form symmetric equilibrium:
//! expected-payoff evaluation, first-order-condition and second-order
//! residuals, the bid-schedule ODE residual, and a brute-force best-response
//! search over reported budgets.
//!
//! # Payoff state model
//!
//! A bidder who reports budget `c` bids `strategy(c)`. The opponents' state
//! is summarized by the component-wise highest of the other `n - 1` types:
//! at state `y` all opponents bid `strategy(y)`, and under independence the
//! highest budget has CDF `F(y)^(n-1)`. Inside a state the stop-out is the
//! linear rule priced at the raw aggregate demand of the state (no issuance,
//! and zero payoff, when demand falls short of the face value), and the
//! bidder's payoff weight is the allocation rule at the reported budget.
//!
//! The stationarity checks (`foc_residual`, `second_order_flatness`,
//! `best_response_search`) evaluate the payoff along the symmetric section:
//! the conjectured common opponent budget moves with the probed report, which
//! is the evaluation point of the symmetric first-order condition (all
//! bidders share the probed type). Against a frozen opponent state the
//! equilibrium schedule is not a stationary point; the symmetric section is
//! what the closed form solves.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::clearing::{stop_out_yield, FACE_VALUE};
use crate::equilibrium::{equilibrium_strategy, xi, AllocationRule, XiFactor};
use crate::error::{Error, Result};
use crate::market::{Interval, MarketParams, TypeDistribution};
use crate::quadrature::GaussLegendre;
use crate::seeding::derive_seed;

/// Estimator used for an expected-payoff evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PayoffMethod {
    /// Composite Gauss-Legendre over the opponent state; `nodes` is the
    /// total node budget. Exact atom summation for discrete distributions.
    Quadrature { nodes: usize },
    /// Monte Carlo over sampled opponent profiles with per-replicate seeds.
    MonteCarlo { replicates: usize, seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimateKind {
    Quadrature,
    MonteCarlo,
}

/// An expected-payoff estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PayoffEstimate {
    pub value: f64,
    /// Standard error of the estimate; quadrature reports 0.
    pub std_error: f64,
    pub method: EstimateKind,
    /// States where the linear yield rule left its domain. They contribute
    /// zero payoff and are reported here instead of aborting the estimate.
    pub clearing_faults: usize,
}

const MIN_QUADRATURE_NODES: usize = 16;
const MIN_MC_REPLICATES: usize = 10_000;
const PANEL_POINTS: usize = 16;

/// Payoff of one state: own report `own`, all opponents at level `opp`.
fn state_payoff<S, W>(
    own: f64,
    opp: f64,
    strategy: &S,
    weight: &W,
    p: &MarketParams,
    faults: &mut usize,
) -> f64
where
    S: Fn(f64) -> f64 + ?Sized,
    W: Fn(f64) -> f64 + ?Sized,
{
    let demand = strategy(own) + (p.n() - 1.0) * strategy(opp);
    if demand < FACE_VALUE {
        return 0.0;
    }
    match stop_out_yield(demand, p) {
        Ok(r_hat) => weight(own) * (r_hat - p.expected_resale_yield),
        Err(_) => {
            *faults += 1;
            0.0
        }
    }
}

/// Expected payoff of reporting `own_budget` against opponents playing
/// `strategy`, under the type distribution `dist`.
pub fn expected_payoff<S: Fn(f64) -> f64>(
    own_budget: f64,
    strategy: &S,
    dist: &TypeDistribution,
    rule: &AllocationRule,
    p: &MarketParams,
    method: PayoffMethod,
) -> Result<PayoffEstimate> {
    dist.validate()?;
    let support = dist.budget_support();
    rule.value_checked(own_budget)?;
    rule.value_checked(support.lo)?;
    rule.value_checked(support.hi)?;
    let weight = |c: f64| rule.value(c);

    match method {
        PayoffMethod::Quadrature { nodes } => {
            if nodes < MIN_QUADRATURE_NODES {
                return Err(Error::ResolutionTooLow {
                    what: "quadrature node",
                    got: nodes,
                    min: MIN_QUADRATURE_NODES,
                });
            }
            let mut faults = 0usize;
            let value = if let Some(atoms) = dist.budget_atoms() {
                // Discrete: the highest of n-1 draws, summed exactly.
                let n_minus_1 = p.n() - 1.0;
                let mut cumulative_prev: f64 = 0.0;
                let mut total = 0.0;
                for (atom, prob) in atoms {
                    let cumulative = cumulative_prev + prob;
                    let weight_max = cumulative.powf(n_minus_1) - cumulative_prev.powf(n_minus_1);
                    total += weight_max
                        * state_payoff(own_budget, atom, strategy, &weight, p, &mut faults);
                    cumulative_prev = cumulative;
                }
                total
            } else {
                integrate_over_states(own_budget, strategy, &weight, dist, p, nodes, &mut faults)
            };
            Ok(PayoffEstimate {
                value,
                std_error: 0.0,
                method: EstimateKind::Quadrature,
                clearing_faults: faults,
            })
        }
        PayoffMethod::MonteCarlo { replicates, seed } => {
            if replicates < MIN_MC_REPLICATES {
                return Err(Error::ResolutionTooLow {
                    what: "monte-carlo replicate",
                    got: replicates,
                    min: MIN_MC_REPLICATES,
                });
            }
            let mut faults = 0usize;
            let mut sum = 0.0;
            let mut sum_sq = 0.0;
            for index in 0..replicates {
                let mut rng = ChaCha12Rng::seed_from_u64(derive_seed(seed, index as u64));
                let mut rejections = 0u64;
                let mut highest = f64::NEG_INFINITY;
                for _ in 1..p.bidders {
                    let t = dist.sample_one(&mut rng, &mut rejections)?;
                    highest = highest.max(t.budget);
                }
                let payoff = state_payoff(own_budget, highest, strategy, &weight, p, &mut faults);
                sum += payoff;
                sum_sq += payoff * payoff;
            }
            let m = replicates as f64;
            let mean = sum / m;
            let variance = ((sum_sq / m) - mean * mean).max(0.0);
            Ok(PayoffEstimate {
                value: mean,
                std_error: (variance / m).sqrt(),
                method: EstimateKind::MonteCarlo,
                clearing_faults: faults,
            })
        }
    }
}

/// Quadrature over the continuous highest-opponent density
/// `(n-1) F(y)^(n-2) f(y)`, splitting the domain at the issuance-gate
/// crossing so each segment is smooth.
fn integrate_over_states<S, W>(
    own_budget: f64,
    strategy: &S,
    weight: &W,
    dist: &TypeDistribution,
    p: &MarketParams,
    nodes: usize,
    faults: &mut usize,
) -> f64
where
    S: Fn(f64) -> f64,
    W: Fn(f64) -> f64,
{
    let support = dist.budget_support();
    let n_minus_1 = p.n() - 1.0;
    let density =
        |y: f64| n_minus_1 * dist.budget_cdf(y).powf(n_minus_1 - 1.0) * dist.budget_pdf(y);
    let excess = |y: f64| strategy(own_budget) + n_minus_1 * strategy(y) - FACE_VALUE;

    let mut cuts = vec![support.lo, support.hi];
    if let Some(crossing) = bisect_root(&excess, support.lo, support.hi) {
        cuts.insert(1, crossing);
    }

    let rule = GaussLegendre::new(PANEL_POINTS);
    let panels = nodes.div_ceil(PANEL_POINTS).max(1);
    let mut total = 0.0;
    // The integrand must be Fn, so the fault counter rides in a Cell.
    for pair in cuts.windows(2) {
        let fault_cell = std::cell::Cell::new(0usize);
        total += rule.integrate_composite(pair[0], pair[1], panels, |y| {
            let mut local = 0usize;
            let value = state_payoff(own_budget, y, strategy, weight, p, &mut local) * density(y);
            fault_cell.set(fault_cell.get() + local);
            value
        });
        *faults += fault_cell.get();
    }
    total
}

fn bisect_root<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64) -> Option<f64> {
    let (mut a, mut b) = (lo, hi);
    let (fa, fb) = (f(a), f(b));
    if fa == 0.0 {
        return Some(a);
    }
    if fb == 0.0 {
        return Some(b);
    }
    if fa.signum() == fb.signum() {
        return None;
    }
    let mut fa = fa;
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        let fm = f(mid);
        if fm == 0.0 || (b - a) <= f64::EPSILON * (1.0 + mid.abs()) {
            return Some(mid);
        }
        if fa.signum() == fm.signum() {
            a = mid;
            fa = fm;
        } else {
            b = mid;
        }
    }
    Some(0.5 * (a + b))
}

/// Expected payoff of the symmetric profile where every bidder's budget is
/// `budget` — the section along which the first- and second-order conditions
/// hold. Equals [`expected_payoff`] under a point-mass belief at the probe.
pub fn symmetric_payoff<S, W>(
    budget: f64,
    strategy: &S,
    payoff_weight: &W,
    p: &MarketParams,
) -> Result<f64>
where
    S: Fn(f64) -> f64 + ?Sized,
    W: Fn(f64) -> f64 + ?Sized,
{
    let mut faults = 0usize;
    let value = state_payoff(budget, budget, strategy, payoff_weight, p, &mut faults);
    if faults > 0 {
        let demand = strategy(budget) * p.n();
        return Err(Error::YieldRuleDomain {
            benchmark: p.benchmark_yield,
            scaled_demand: p.demand_sensitivity * demand,
        });
    }
    Ok(value)
}

fn check_probe(c_star: f64, step: f64, support: Interval) -> Result<()> {
    if !(c_star > support.lo && c_star < support.hi) {
        return Err(Error::BudgetNotInterior {
            budget: c_star,
            lo: support.lo,
            hi: support.hi,
        });
    }
    if !(step > 0.0) || c_star - step < support.lo || c_star + step > support.hi {
        return Err(Error::StepOutOfDomain {
            step,
            lo: support.lo,
            hi: support.hi,
        });
    }
    Ok(())
}

/// Central-difference first-order-condition residual at `c_star` under the
/// symmetric equilibrium strategy. Near zero at the equilibrium; its sign
/// diagnoses over- or under-bidding of a perturbed strategy.
pub fn foc_residual(
    c_star: f64,
    rule: &AllocationRule,
    dist: &TypeDistribution,
    p: &MarketParams,
    step: f64,
) -> Result<f64> {
    let support = dist.budget_support();
    let strategy = equilibrium_strategy(support.lo, rule, p)?;
    foc_residual_for(&strategy, c_star, support, rule, p, step)
}

/// As [`foc_residual`] for an arbitrary symmetric strategy.
pub fn foc_residual_for<S: Fn(f64) -> f64>(
    strategy: &S,
    c_star: f64,
    support: Interval,
    rule: &AllocationRule,
    p: &MarketParams,
    step: f64,
) -> Result<f64> {
    check_probe(c_star, step, support)?;
    let weight = |c: f64| rule.value(c);
    let up = symmetric_payoff(c_star + step, strategy, &weight, p)?;
    let down = symmetric_payoff(c_star - step, strategy, &weight, p)?;
    Ok((up - down) / (2.0 * step))
}

/// Central second difference of the symmetric payoff at `c_star` under the
/// equilibrium strategy; near zero when the allocation rule is linear.
pub fn second_order_flatness(
    c_star: f64,
    rule: &AllocationRule,
    dist: &TypeDistribution,
    p: &MarketParams,
    step: f64,
) -> Result<f64> {
    let support = dist.budget_support();
    let strategy = equilibrium_strategy(support.lo, rule, p)?;
    let weight = |c: f64| rule.value(c);
    second_order_flatness_for(&strategy, &weight, c_star, support, p, step)
}

/// As [`second_order_flatness`] with the payoff weight decoupled from the
/// strategy's allocation rule. Passing a curved weight (diagnostic mode)
/// shows the linearity assumption is load-bearing: the flatness breaks.
pub fn second_order_flatness_for<S, W>(
    strategy: &S,
    payoff_weight: &W,
    c_star: f64,
    support: Interval,
    p: &MarketParams,
    step: f64,
) -> Result<f64>
where
    S: Fn(f64) -> f64,
    W: Fn(f64) -> f64,
{
    check_probe(c_star, step, support)?;
    let up = symmetric_payoff(c_star + step, strategy, payoff_weight, p)?;
    let mid = symmetric_payoff(c_star, strategy, payoff_weight, p)?;
    let down = symmetric_payoff(c_star - step, strategy, payoff_weight, p)?;
    Ok((up - 2.0 * mid + down) / (step * step))
}

/// Derivative route for the ODE residual.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DerivativeMode {
    /// Differentiate the closed form exactly.
    Analytic,
    /// Central finite difference with the given step.
    FiniteDifference { step: f64 },
}

/// Maximum residual of the equilibrium schedule in the symmetric first-order
/// ODE `b' + rho b = rho / (xi n)` over a budget grid, with `rho` the
/// allocation rule's relative rate of change.
///
/// The closed form solves the ODE identically, so the analytic route is
/// rounding noise; the finite-difference route adds only discretization
/// error.
pub fn ode_residual(
    grid: &[f64],
    budget_floor: f64,
    rule: &AllocationRule,
    p: &MarketParams,
    mode: DerivativeMode,
) -> Result<f64> {
    if grid.is_empty() || grid.iter().any(|c| !c.is_finite() || *c < budget_floor) {
        return Err(Error::BadGrid);
    }
    let xi = xi(p)?;
    if !(p.demand_sensitivity > 0.0) {
        return Err(Error::NonPositiveSensitivity(p.demand_sensitivity));
    }
    let competitive = 1.0 / (xi.value * p.n());
    let alloc_floor = rule.value_checked(budget_floor)?;
    let constant = alloc_floor * (p.min_bid - competitive);
    let bid = |c: f64| competitive + constant / rule.value(c);

    let mut worst: f64 = 0.0;
    for &c in grid {
        rule.value_checked(c)?;
        let derivative = match mode {
            DerivativeMode::Analytic => -constant * rule.slope() / rule.value(c).powi(2),
            DerivativeMode::FiniteDifference { step } => {
                if !(step > 0.0) {
                    return Err(Error::StepOutOfDomain {
                        step,
                        lo: budget_floor,
                        hi: *grid.last().unwrap(),
                    });
                }
                (bid(c + step) - bid(c - step)) / (2.0 * step)
            }
        };
        let rho = rule.relative_rate(c);
        let residual = derivative + rho * bid(c) - rho * competitive;
        worst = worst.max(residual.abs());
    }
    Ok(worst)
}

/// Result of a best-response grid search over reported budgets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BestResponseReport {
    /// Grid point with the highest symmetric-section payoff.
    pub argmax_budget: f64,
    /// Highest payoff on the grid minus the payoff at the evaluation budget.
    pub payoff_gap: f64,
    pub payoff_at_eval: f64,
    /// Existence-condition stamp; a violated condition marks the gap as
    /// outside the theorem's premises.
    pub xi: XiFactor,
    /// Grid points where the yield rule left its domain; they score zero.
    pub clearing_faults: usize,
}

/// Grid search over unilateral budget reports against the symmetric
/// equilibrium strategy. At the equilibrium the payoff gap is at most
/// rounding noise. Yield-rule domain faults (possible on out-of-condition
/// markets) are counted, not fatal, so the gap stays reportable.
pub fn best_response_search(
    grid: &[f64],
    c_star: f64,
    dist: &TypeDistribution,
    rule: &AllocationRule,
    p: &MarketParams,
) -> Result<BestResponseReport> {
    if grid.is_empty() || grid.iter().any(|c| !c.is_finite()) {
        return Err(Error::BadGrid);
    }
    let support = dist.budget_support();
    let strategy = equilibrium_strategy(support.lo, rule, p)?;
    let weight = |c: f64| rule.value(c);

    let mut faults = 0usize;
    let payoff_at_eval = state_payoff(c_star, c_star, &strategy, &weight, p, &mut faults);
    let mut argmax_budget = grid[0];
    let mut best = f64::NEG_INFINITY;
    for &c in grid {
        let value = state_payoff(c, c, &strategy, &weight, p, &mut faults);
        if value > best {
            best = value;
            argmax_budget = c;
        }
    }
    Ok(BestResponseReport {
        argmax_budget,
        payoff_gap: best - payoff_at_eval,
        payoff_at_eval,
        xi: xi(p)?,
        clearing_faults: faults,
    })
}
