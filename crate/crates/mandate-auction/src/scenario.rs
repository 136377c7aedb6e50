//! Scenario files: the line-oriented configuration format behind the CLI.
//!
//! A scenario is a set of `[section]` headers with `key = value` lines and
//! `#` comments. Unknown keys are fatal, never ignored; missing required
//! keys are all reported at once, with line numbers where available. A
//! parsed configuration serializes back to a canonical form that re-parses
//! to an identical value.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use crate::equilibrium::{symmetric_risk_limit, xi, AllocationRule};
use crate::error::{Error, Result};
use crate::experiments::{BidStrategy, SweepAxis, SweepBaseline, SweepSpec};
use crate::market::{
    infimum_bid_for_risk_limit, validate_params, Interval, MarketParams, TruncatedNormalParams,
    TypeDistribution,
};

/// Which mandate key the scenario supplied; the other is derived.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MandateGiven {
    MinBid(f64),
    RiskLimit(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MandateConfig {
    pub budget_floor: f64,
    pub budget_cap: f64,
    /// Budget at which equilibrium quantities are evaluated.
    pub eval_budget: f64,
    /// Common risk limit (given or derived from the minimum bid).
    pub risk_limit: f64,
    pub given: MandateGiven,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StrategyKind {
    Equilibrium,
    TruthfulBudget,
    Fixed,
}

impl StrategyKind {
    fn name(&self) -> &'static str {
        match self {
            StrategyKind::Equilibrium => "equilibrium",
            StrategyKind::TruthfulBudget => "truthful-budget",
            StrategyKind::Fixed => "fixed",
        }
    }
}

/// Verification tolerances, pinned in the scenario.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub foc: f64,
    pub ode_analytic: f64,
    pub ode_finite_difference: f64,
    pub gap_relative: f64,
    pub second_order: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            foc: 1e-6,
            ode_analytic: 1e-12,
            ode_finite_difference: 1e-6,
            gap_relative: 1e-5,
            second_order: 1e-4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub replicates: u64,
    pub workers: usize,
    pub quadrature_nodes: usize,
    pub mc_replicates: usize,
    pub grid_points: usize,
    pub fd_step: f64,
    /// Step for the finite-difference route of the ODE residual.
    pub ode_fd_step: f64,
    pub second_order_step: f64,
    pub strategy: StrategyKind,
    pub fixed_quantity: f64,
    pub fixed_yield: f64,
    pub tolerances: Tolerances,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepConfig {
    pub axis: SweepAxis,
    pub start: f64,
    pub stop: f64,
    pub points: usize,
    pub hold_scaled_min_bid: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    JsonLines,
}

impl fmt::Display for OutputFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OutputFormat::Csv => write!(f, "csv"),
            OutputFormat::JsonLines => write!(f, "jsonl"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputConfig {
    pub directory: PathBuf,
    pub formats: Vec<OutputFormat>,
}

/// A fully validated experiment description.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub market: MarketParams,
    pub mandate: MandateConfig,
    pub rule: AllocationRule,
    pub distribution: TypeDistribution,
    pub run: RunConfig,
    pub sweep: Option<SweepConfig>,
    pub output: OutputConfig,
    /// Non-fatal findings attached at parse time (existence-condition
    /// violations, stop-out outside the yield domain, support mismatches).
    pub warnings: Vec<String>,
}

impl ScenarioConfig {
    /// Evenly spaced budget grid over the mandate box.
    pub fn budget_grid(&self) -> Vec<f64> {
        let points = self.run.grid_points.max(2);
        let lo = self.mandate.budget_floor;
        let hi = self.mandate.budget_cap;
        (0..points)
            .map(|k| lo + (hi - lo) * k as f64 / (points - 1) as f64)
            .collect()
    }

    pub fn bid_strategy(&self) -> BidStrategy {
        match self.run.strategy {
            StrategyKind::Equilibrium => BidStrategy::Equilibrium {
                rule: self.rule,
                budget_floor: self.mandate.budget_floor,
            },
            StrategyKind::TruthfulBudget => BidStrategy::TruthfulBudget,
            StrategyKind::Fixed => BidStrategy::Fixed {
                quantity: self.run.fixed_quantity,
                yield_req: self.run.fixed_yield,
            },
        }
    }

    pub fn sweep_plan(&self) -> Option<(SweepSpec, SweepBaseline)> {
        let sweep = self.sweep.as_ref()?;
        let values = (0..sweep.points)
            .map(|k| {
                sweep.start
                    + (sweep.stop - sweep.start) * k as f64 / (sweep.points - 1).max(1) as f64
            })
            .collect();
        Some((
            SweepSpec {
                axis: sweep.axis,
                values,
                hold_scaled_min_bid: sweep.hold_scaled_min_bid,
            },
            SweepBaseline {
                params: self.market,
                rule: self.rule,
                budget_floor: self.mandate.budget_floor,
                eval_budget: self.mandate.eval_budget,
            },
        ))
    }
}

// ---------------------------------------------------------------------------
// Lexing
// ---------------------------------------------------------------------------

struct RawValue {
    value: String,
    line: usize,
}

type Section = BTreeMap<String, RawValue>;

struct Raw {
    sections: BTreeMap<String, Section>,
    issues: Vec<String>,
}

fn strip_comment(line: &str) -> &str {
    if line.starts_with('#') {
        return "";
    }
    match line.find(" #") {
        Some(pos) => &line[..pos],
        None => line,
    }
}

fn lex(text: &str) -> Raw {
    let mut sections: BTreeMap<String, Section> = BTreeMap::new();
    let mut issues = Vec::new();
    let mut current: Option<String> = None;

    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = strip_comment(raw_line).trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
            let name = name.trim().to_string();
            sections.entry(name.clone()).or_default();
            current = Some(name);
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            issues.push(format!(
                "line {line_no}: expected `key = value`, got `{line}`"
            ));
            continue;
        };
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        let Some(section) = &current else {
            issues.push(format!(
                "line {line_no}: key `{key}` appears before any [section] header"
            ));
            continue;
        };
        let entry = sections.get_mut(section).expect("section exists");
        if entry.contains_key(&key) {
            issues.push(format!("line {line_no}: duplicate key `{section}.{key}`"));
            continue;
        }
        entry.insert(
            key,
            RawValue {
                value,
                line: line_no,
            },
        );
    }

    Raw { sections, issues }
}

// ---------------------------------------------------------------------------
// Typed extraction
// ---------------------------------------------------------------------------

struct Extractor {
    raw: Raw,
}

impl Extractor {
    fn take(&mut self, section: &str, key: &str) -> Option<RawValue> {
        self.raw.sections.get_mut(section)?.remove(key)
    }

    fn has(&self, section: &str, key: &str) -> bool {
        self.raw
            .sections
            .get(section)
            .is_some_and(|s| s.contains_key(key))
    }

    fn issue(&mut self, message: String) {
        self.raw.issues.push(message);
    }

    fn required_f64(&mut self, section: &str, key: &str) -> Option<f64> {
        match self.take(section, key) {
            None => {
                self.issue(format!("missing required key `{section}.{key}`"));
                None
            }
            Some(raw) => self.parse_f64(section, key, raw),
        }
    }

    fn optional_f64(&mut self, section: &str, key: &str) -> Option<f64> {
        let raw = self.take(section, key)?;
        self.parse_f64(section, key, raw)
    }

    fn f64_or(&mut self, section: &str, key: &str, default: f64) -> f64 {
        self.optional_f64(section, key).unwrap_or(default)
    }

    fn parse_f64(&mut self, section: &str, key: &str, raw: RawValue) -> Option<f64> {
        match raw.value.parse::<f64>() {
            Ok(v) if v.is_finite() => Some(v),
            _ => {
                self.issue(format!(
                    "line {}: `{section}.{key}` expects a finite number, got `{}`",
                    raw.line, raw.value
                ));
                None
            }
        }
    }

    fn u64_or(&mut self, section: &str, key: &str, default: u64) -> u64 {
        match self.take(section, key) {
            None => default,
            Some(raw) => match raw.value.parse::<u64>() {
                Ok(v) => v,
                Err(_) => {
                    self.issue(format!(
                        "line {}: `{section}.{key}` expects a non-negative integer, got `{}`",
                        raw.line, raw.value
                    ));
                    default
                }
            },
        }
    }

    fn required_u64(&mut self, section: &str, key: &str) -> Option<u64> {
        match self.take(section, key) {
            None => {
                self.issue(format!("missing required key `{section}.{key}`"));
                None
            }
            Some(raw) => match raw.value.parse::<u64>() {
                Ok(v) => Some(v),
                Err(_) => {
                    self.issue(format!(
                        "line {}: `{section}.{key}` expects a non-negative integer, got `{}`",
                        raw.line, raw.value
                    ));
                    None
                }
            },
        }
    }

    fn bool_or(&mut self, section: &str, key: &str, default: bool) -> bool {
        match self.take(section, key) {
            None => default,
            Some(raw) => match raw.value.as_str() {
                "true" => true,
                "false" => false,
                other => {
                    self.issue(format!(
                        "line {}: `{section}.{key}` expects true or false, got `{other}`",
                        raw.line
                    ));
                    default
                }
            },
        }
    }

    fn string_or(&mut self, section: &str, key: &str, default: &str) -> String {
        match self.take(section, key) {
            None => default.to_string(),
            Some(raw) => raw.value,
        }
    }

    fn required_string(&mut self, section: &str, key: &str) -> Option<String> {
        match self.take(section, key) {
            None => {
                self.issue(format!("missing required key `{section}.{key}`"));
                None
            }
            Some(raw) => Some(raw.value),
        }
    }

    /// Every key not consumed by the schema is unknown and fatal.
    fn reject_leftovers(&mut self, known_sections: &[&str]) {
        let mut leftovers = Vec::new();
        for (section, keys) in &self.raw.sections {
            if !known_sections.contains(&section.as_str()) {
                for raw in keys.values() {
                    leftovers.push(format!("line {}: unknown section `[{section}]`", raw.line));
                }
                if keys.is_empty() {
                    leftovers.push(format!("unknown section `[{section}]`"));
                }
                continue;
            }
            for (key, raw) in keys {
                leftovers.push(format!("line {}: unknown key `{section}.{key}`", raw.line));
            }
        }
        leftovers.sort();
        for issue in leftovers {
            self.raw.issues.push(issue);
        }
    }
}

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

const KNOWN_SECTIONS: [&str; 7] = [
    "market",
    "mandate",
    "allocation",
    "distribution",
    "run",
    "sweep",
    "output",
];

/// Parses and validates a scenario. All errors are collected and reported
/// together.
pub fn parse_scenario(text: &str) -> Result<ScenarioConfig> {
    let mut ex = Extractor { raw: lex(text) };
    let mut warnings: Vec<String> = Vec::new();

    // [market]
    let benchmark_yield = ex.required_f64("market", "benchmark_yield");
    let demand_sensitivity = ex.required_f64("market", "demand_sensitivity");
    let bidders = ex.required_u64("market", "bidders");
    let expected_resale_yield = ex.required_f64("market", "expected_resale_yield");
    let risk_free_yield = ex.required_f64("market", "risk_free_yield");
    let max_yield = ex.required_f64("market", "max_yield");

    // [mandate]
    let budget_floor = ex.required_f64("mandate", "budget_floor");
    let budget_cap = ex.required_f64("mandate", "budget_cap");
    let has_min_bid = ex.has("mandate", "min_bid");
    let has_risk_limit = ex.has("mandate", "risk_limit");
    let min_bid_given = ex.optional_f64("mandate", "min_bid");
    let risk_limit_given = ex.optional_f64("mandate", "risk_limit");
    let eval_budget = ex.optional_f64("mandate", "eval_budget");

    // [allocation]
    let slope = ex.required_f64("allocation", "slope");
    let intercept = ex.f64_or("allocation", "intercept", 0.0);

    // [distribution]
    let dist_kind = ex.required_string("distribution", "kind");
    let distribution = dist_kind
        .as_deref()
        .and_then(|kind| parse_distribution(&mut ex, kind));

    // [run]
    let seed = ex.required_u64("run", "seed");
    let replicates = ex.u64_or("run", "replicates", 1000);
    let workers = ex.u64_or("run", "workers", 0) as usize;
    let quadrature_nodes = ex.u64_or("run", "quadrature_nodes", 64) as usize;
    let mc_replicates = ex.u64_or("run", "mc_replicates", 20_000) as usize;
    let grid_points = ex.u64_or("run", "grid_points", 1001) as usize;
    let fd_step = ex.f64_or("run", "fd_step", 1e-4);
    let ode_fd_step = ex.f64_or("run", "ode_fd_step", 1e-5);
    let second_order_step = ex.f64_or("run", "second_order_step", 1e-3);
    let strategy_name = ex.string_or("run", "strategy", "equilibrium");
    let fixed_quantity = ex.optional_f64("run", "fixed_quantity");
    let fixed_yield = ex.optional_f64("run", "fixed_yield");
    let tolerances = Tolerances {
        foc: ex.f64_or("run", "foc_tolerance", 1e-6),
        ode_analytic: ex.f64_or("run", "ode_tolerance_analytic", 1e-12),
        ode_finite_difference: ex.f64_or("run", "ode_tolerance_fd", 1e-6),
        gap_relative: ex.f64_or("run", "gap_tolerance_relative", 1e-5),
        second_order: ex.f64_or("run", "second_order_tolerance", 1e-4),
    };
    let strategy = match strategy_name.as_str() {
        "equilibrium" => StrategyKind::Equilibrium,
        "truthful-budget" => StrategyKind::TruthfulBudget,
        "fixed" => StrategyKind::Fixed,
        other => {
            ex.issue(format!(
                "`run.strategy` must be equilibrium, truthful-budget or fixed, got `{other}`"
            ));
            StrategyKind::Equilibrium
        }
    };

    // [sweep] (optional)
    let sweep = if ex.raw.sections.contains_key("sweep") {
        parse_sweep(&mut ex)
    } else {
        None
    };

    // [output]
    let directory = PathBuf::from(ex.string_or("output", "directory", "out"));
    let formats_raw = ex.string_or("output", "formats", "csv");
    let mut formats = Vec::new();
    for token in formats_raw
        .split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
    {
        match token {
            "csv" => formats.push(OutputFormat::Csv),
            "jsonl" | "json-lines" => formats.push(OutputFormat::JsonLines),
            other => ex.issue(format!(
                "`output.formats` entries must be csv or jsonl, got `{other}`"
            )),
        }
    }

    ex.reject_leftovers(&KNOWN_SECTIONS);

    // Mandate resolution: exactly one of min_bid / risk_limit.
    let mut market: Option<MarketParams> = None;
    let mut mandate: Option<MandateConfig> = None;
    if let (
        Some(benchmark_yield),
        Some(demand_sensitivity),
        Some(bidders),
        Some(expected_resale_yield),
        Some(risk_free_yield),
        Some(max_yield),
        Some(budget_floor),
        Some(budget_cap),
    ) = (
        benchmark_yield,
        demand_sensitivity,
        bidders,
        expected_resale_yield,
        risk_free_yield,
        max_yield,
        budget_floor,
        budget_cap,
    ) {
        let mut params = MarketParams {
            benchmark_yield,
            demand_sensitivity,
            bidders: bidders as u32,
            expected_resale_yield,
            risk_free_yield,
            max_yield,
            min_bid: f64::NAN,
        };
        match (has_min_bid, has_risk_limit) {
            (true, true) => {
                // Always fatal: the mandate must supply exactly one side.
                let detail = match (min_bid_given, risk_limit_given) {
                    (Some(min_bid), Some(risk_limit)) => {
                        params.min_bid = min_bid;
                        let implied =
                            symmetric_risk_limit(min_bid, &params).map(|v| (v - risk_limit).abs());
                        match implied {
                            Ok(delta) if delta <= 1e-12 => {
                                "the values are numerically consistent, but only one may be given"
                                    .to_string()
                            }
                            Ok(delta) => format!(
                                "the values are inconsistent: round-tripping min_bid implies a \
                                 risk limit off by {delta:e}"
                            ),
                            Err(e) => format!("additionally, min_bid is unusable: {e}"),
                        }
                    }
                    _ => "both keys are present".to_string(),
                };
                ex.issue(format!(
                    "`mandate.min_bid` and `mandate.risk_limit` are mutually exclusive; {detail}"
                ));
            }
            (false, false) => {
                ex.issue(
                    "the mandate needs exactly one of `mandate.min_bid` or `mandate.risk_limit`"
                        .to_string(),
                );
            }
            (true, false) => {
                if let Some(min_bid) = min_bid_given {
                    params.min_bid = min_bid;
                    // A derived risk limit below the risk-free rate is kept
                    // as a warning, not an error, so out-of-condition
                    // reference parameterizations stay runnable.
                    let risk_limit = match symmetric_risk_limit(min_bid, &params) {
                        Ok(value) => value,
                        Err(e) => {
                            warnings.push(format!("mandate/market mismatch: {e}"));
                            params.benchmark_yield
                                - params.demand_sensitivity * params.n() * min_bid
                        }
                    };
                    mandate = Some(MandateConfig {
                        budget_floor,
                        budget_cap,
                        eval_budget: eval_budget.unwrap_or(budget_cap),
                        risk_limit,
                        given: MandateGiven::MinBid(min_bid),
                    });
                }
            }
            (false, true) => {
                if let Some(risk_limit) = risk_limit_given {
                    match infimum_bid_for_risk_limit(risk_limit, &params) {
                        Ok(min_bid) => {
                            params.min_bid = min_bid;
                            mandate = Some(MandateConfig {
                                budget_floor,
                                budget_cap,
                                eval_budget: eval_budget.unwrap_or(budget_cap),
                                risk_limit,
                                given: MandateGiven::RiskLimit(risk_limit),
                            });
                        }
                        Err(e) => ex.issue(format!("mandate/market mismatch: {e}")),
                    }
                }
            }
        }
        market = Some(params);
    }

    // Cross-validation once both halves exist.
    let rule = AllocationRule::new(slope.unwrap_or(1.0), intercept);
    if let Err(e) = &rule {
        ex.issue(format!("allocation rule: {e}"));
    }

    if let (Some(params), Some(m)) = (&market, &mandate) {
        for violation in validate_params(params) {
            ex.issue(format!("market parameters: {violation}"));
        }
        if !(m.budget_floor > 0.0 && m.budget_floor < m.budget_cap) {
            ex.issue(format!(
                "mandate budgets must satisfy 0 < budget_floor < budget_cap, got [{}, {}]",
                m.budget_floor, m.budget_cap
            ));
        }
        if m.budget_cap > 1.0 {
            ex.issue(format!(
                "budget_cap {} exceeds the face value; no bidder may take the full issuance",
                m.budget_cap
            ));
        }
        if !(m.eval_budget >= m.budget_floor && m.eval_budget <= m.budget_cap) {
            ex.issue(format!(
                "eval_budget {} must lie inside the mandate box [{}, {}]",
                m.eval_budget, m.budget_floor, m.budget_cap
            ));
        }
        if let Ok(rule) = &rule {
            for budget in [m.budget_floor, m.budget_cap] {
                if let Err(e) = rule.value_checked(budget) {
                    ex.issue(format!("allocation rule: {e}"));
                }
            }
        }
        if validate_params(params).is_empty() {
            match xi(params) {
                Ok(factor) if !factor.condition_satisfied => {
                    warnings.push(format!(
                        "xi-condition violated: xi = {} is not below 1/(min_bid * n) = {}; \
                         equilibrium-validity claims are suppressed",
                        factor.value, factor.condition_bound
                    ));
                }
                Ok(_) => {}
                Err(e) => ex.issue(format!("market parameters: {e}")),
            }
            let issued_stop_out = params.benchmark_yield - params.demand_sensitivity;
            if issued_stop_out < params.risk_free_yield || issued_stop_out > params.max_yield {
                warnings.push(format!(
                    "issued stop-out {issued_stop_out} falls outside the yield domain [{}, {}]",
                    params.risk_free_yield, params.max_yield
                ));
            }
        }
        if let Some(dist) = &distribution {
            let support = dist.budget_support();
            if support.lo < m.budget_floor || support.hi > m.budget_cap {
                warnings.push(format!(
                    "budget support [{}, {}] strays outside the mandate box [{}, {}]; \
                     affected replicates will be flagged",
                    support.lo, support.hi, m.budget_floor, m.budget_cap
                ));
            }
        }
    }

    if let Some(dist) = &distribution {
        if let Err(e) = dist.validate() {
            ex.issue(format!("distribution: {e}"));
        }
    }
    if strategy == StrategyKind::Fixed && fixed_quantity.is_none() {
        ex.issue("`run.fixed_quantity` is required when `run.strategy = fixed`".to_string());
    }

    if !ex.raw.issues.is_empty() {
        let mut issues = ex.raw.issues;
        issues.sort();
        return Err(Error::Scenario(issues.join("\n")));
    }

    let market = market.expect("validated");
    let mandate = mandate.expect("validated");
    Ok(ScenarioConfig {
        market,
        mandate,
        rule: rule.expect("validated"),
        distribution: distribution.expect("validated"),
        run: RunConfig {
            seed: seed.expect("validated"),
            replicates,
            workers,
            quadrature_nodes,
            mc_replicates,
            grid_points,
            fd_step,
            ode_fd_step,
            second_order_step,
            strategy,
            fixed_quantity: fixed_quantity.unwrap_or(market.min_bid),
            fixed_yield: fixed_yield.unwrap_or(mandate.risk_limit),
            tolerances,
        },
        sweep,
        output: OutputConfig { directory, formats },
        warnings,
    })
}

fn parse_distribution(ex: &mut Extractor, kind: &str) -> Option<TypeDistribution> {
    match kind {
        "uniform" => {
            let b_lo = ex.required_f64("distribution", "budget_low")?;
            let b_hi = ex.required_f64("distribution", "budget_high")?;
            let r_lo = ex.required_f64("distribution", "risk_low")?;
            let r_hi = ex.required_f64("distribution", "risk_high")?;
            Some(TypeDistribution::Uniform {
                budget: Interval::new(b_lo, b_hi),
                risk_limit: Interval::new(r_lo, r_hi),
            })
        }
        "truncated-normal" => {
            let budget = TruncatedNormalParams {
                mean: ex.required_f64("distribution", "budget_mean")?,
                std_dev: ex.required_f64("distribution", "budget_stddev")?,
                lo: ex.required_f64("distribution", "budget_low")?,
                hi: ex.required_f64("distribution", "budget_high")?,
            };
            let risk_limit = TruncatedNormalParams {
                mean: ex.required_f64("distribution", "risk_mean")?,
                std_dev: ex.required_f64("distribution", "risk_stddev")?,
                lo: ex.required_f64("distribution", "risk_low")?,
                hi: ex.required_f64("distribution", "risk_high")?,
            };
            Some(TypeDistribution::TruncatedNormal { budget, risk_limit })
        }
        "point-mass" => {
            let budget = ex.required_f64("distribution", "budget")?;
            let risk_limit = ex.required_f64("distribution", "risk")?;
            Some(TypeDistribution::PointMass { budget, risk_limit })
        }
        "two-point" => {
            let low = (
                ex.required_f64("distribution", "budget_low")?,
                ex.required_f64("distribution", "risk_low")?,
            );
            let high = (
                ex.required_f64("distribution", "budget_high")?,
                ex.required_f64("distribution", "risk_high")?,
            );
            let low_weight = ex.required_f64("distribution", "low_weight")?;
            Some(TypeDistribution::TwoPoint {
                low,
                high,
                low_weight,
            })
        }
        other => {
            ex.issue(format!(
                "`distribution.kind` must be uniform, truncated-normal, point-mass or two-point, \
                 got `{other}`"
            ));
            None
        }
    }
}

fn parse_sweep(ex: &mut Extractor) -> Option<SweepConfig> {
    let axis_name = ex.required_string("sweep", "axis")?;
    let axis = match axis_name.as_str() {
        "sensitivity" => SweepAxis::Sensitivity,
        "bidders" => SweepAxis::Bidders,
        "min_bid" => SweepAxis::MinBid,
        "expected_resale_yield" => SweepAxis::ExpectedResaleYield,
        "budget_floor" => SweepAxis::BudgetFloor,
        other => {
            ex.issue(format!(
                "`sweep.axis` must be sensitivity, bidders, min_bid, expected_resale_yield or \
                 budget_floor, got `{other}`"
            ));
            return None;
        }
    };
    let start = ex.required_f64("sweep", "start")?;
    let stop = ex.required_f64("sweep", "stop")?;
    let points = ex.u64_or("sweep", "points", 50) as usize;
    let hold_scaled_min_bid = ex.bool_or("sweep", "hold_scaled_min_bid", false);
    if points < 2 {
        ex.issue("`sweep.points` must be at least 2".to_string());
        return None;
    }
    Some(SweepConfig {
        axis,
        start,
        stop,
        points,
        hold_scaled_min_bid,
    })
}

/// Reads and parses a scenario file.
pub fn load_scenario(path: &Path) -> Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_scenario(&text)
}

/// Canonical serialization; re-parsing yields an identical configuration.
pub fn serialize_scenario(config: &ScenarioConfig) -> String {
    use std::fmt::Write;
    let mut out = String::new();
    let p = &config.market;
    let m = &config.mandate;

    writeln!(out, "[market]").unwrap();
    writeln!(out, "benchmark_yield = {}", p.benchmark_yield).unwrap();
    writeln!(out, "demand_sensitivity = {}", p.demand_sensitivity).unwrap();
    writeln!(out, "bidders = {}", p.bidders).unwrap();
    writeln!(out, "expected_resale_yield = {}", p.expected_resale_yield).unwrap();
    writeln!(out, "risk_free_yield = {}", p.risk_free_yield).unwrap();
    writeln!(out, "max_yield = {}", p.max_yield).unwrap();

    writeln!(out).unwrap();
    writeln!(out, "[mandate]").unwrap();
    writeln!(out, "budget_floor = {}", m.budget_floor).unwrap();
    writeln!(out, "budget_cap = {}", m.budget_cap).unwrap();
    writeln!(out, "eval_budget = {}", m.eval_budget).unwrap();
    match m.given {
        MandateGiven::MinBid(v) => writeln!(out, "min_bid = {v}").unwrap(),
        MandateGiven::RiskLimit(v) => writeln!(out, "risk_limit = {v}").unwrap(),
    }

    writeln!(out).unwrap();
    writeln!(out, "[allocation]").unwrap();
    writeln!(out, "slope = {}", config.rule.slope()).unwrap();
    writeln!(out, "intercept = {}", config.rule.intercept()).unwrap();

    writeln!(out).unwrap();
    writeln!(out, "[distribution]").unwrap();
    match &config.distribution {
        TypeDistribution::Uniform { budget, risk_limit } => {
            writeln!(out, "kind = uniform").unwrap();
            writeln!(out, "budget_low = {}", budget.lo).unwrap();
            writeln!(out, "budget_high = {}", budget.hi).unwrap();
            writeln!(out, "risk_low = {}", risk_limit.lo).unwrap();
            writeln!(out, "risk_high = {}", risk_limit.hi).unwrap();
        }
        TypeDistribution::TruncatedNormal { budget, risk_limit } => {
            writeln!(out, "kind = truncated-normal").unwrap();
            writeln!(out, "budget_mean = {}", budget.mean).unwrap();
            writeln!(out, "budget_stddev = {}", budget.std_dev).unwrap();
            writeln!(out, "budget_low = {}", budget.lo).unwrap();
            writeln!(out, "budget_high = {}", budget.hi).unwrap();
            writeln!(out, "risk_mean = {}", risk_limit.mean).unwrap();
            writeln!(out, "risk_stddev = {}", risk_limit.std_dev).unwrap();
            writeln!(out, "risk_low = {}", risk_limit.lo).unwrap();
            writeln!(out, "risk_high = {}", risk_limit.hi).unwrap();
        }
        TypeDistribution::PointMass { budget, risk_limit } => {
            writeln!(out, "kind = point-mass").unwrap();
            writeln!(out, "budget = {budget}").unwrap();
            writeln!(out, "risk = {risk_limit}").unwrap();
        }
        TypeDistribution::TwoPoint {
            low,
            high,
            low_weight,
        } => {
            writeln!(out, "kind = two-point").unwrap();
            writeln!(out, "budget_low = {}", low.0).unwrap();
            writeln!(out, "risk_low = {}", low.1).unwrap();
            writeln!(out, "budget_high = {}", high.0).unwrap();
            writeln!(out, "risk_high = {}", high.1).unwrap();
            writeln!(out, "low_weight = {low_weight}").unwrap();
        }
    }

    let r = &config.run;
    writeln!(out).unwrap();
    writeln!(out, "[run]").unwrap();
    writeln!(out, "seed = {}", r.seed).unwrap();
    writeln!(out, "replicates = {}", r.replicates).unwrap();
    writeln!(out, "workers = {}", r.workers).unwrap();
    writeln!(out, "quadrature_nodes = {}", r.quadrature_nodes).unwrap();
    writeln!(out, "mc_replicates = {}", r.mc_replicates).unwrap();
    writeln!(out, "grid_points = {}", r.grid_points).unwrap();
    writeln!(out, "fd_step = {}", r.fd_step).unwrap();
    writeln!(out, "ode_fd_step = {}", r.ode_fd_step).unwrap();
    writeln!(out, "second_order_step = {}", r.second_order_step).unwrap();
    writeln!(out, "strategy = {}", r.strategy.name()).unwrap();
    writeln!(out, "fixed_quantity = {}", r.fixed_quantity).unwrap();
    writeln!(out, "fixed_yield = {}", r.fixed_yield).unwrap();
    writeln!(out, "foc_tolerance = {}", r.tolerances.foc).unwrap();
    writeln!(
        out,
        "ode_tolerance_analytic = {}",
        r.tolerances.ode_analytic
    )
    .unwrap();
    writeln!(
        out,
        "ode_tolerance_fd = {}",
        r.tolerances.ode_finite_difference
    )
    .unwrap();
    writeln!(
        out,
        "gap_tolerance_relative = {}",
        r.tolerances.gap_relative
    )
    .unwrap();
    writeln!(
        out,
        "second_order_tolerance = {}",
        r.tolerances.second_order
    )
    .unwrap();

    if let Some(sweep) = &config.sweep {
        writeln!(out).unwrap();
        writeln!(out, "[sweep]").unwrap();
        writeln!(out, "axis = {}", sweep.axis.name()).unwrap();
        writeln!(out, "start = {}", sweep.start).unwrap();
        writeln!(out, "stop = {}", sweep.stop).unwrap();
        writeln!(out, "points = {}", sweep.points).unwrap();
        writeln!(out, "hold_scaled_min_bid = {}", sweep.hold_scaled_min_bid).unwrap();
    }

    let formats: Vec<String> = config
        .output
        .formats
        .iter()
        .map(|f| f.to_string())
        .collect();
    writeln!(out).unwrap();
    writeln!(out, "[output]").unwrap();
    writeln!(out, "directory = {}", config.output.directory.display()).unwrap();
    writeln!(out, "formats = {}", formats.join(",")).unwrap();

    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const VALID: &str = r#"
# reference market
[market]
benchmark_yield = 0.08
demand_sensitivity = 0.034
bidders = 10
expected_resale_yield = 0.04
risk_free_yield = 0.0
max_yield = 0.06

[mandate]
budget_floor = 0.1
budget_cap = 0.169
risk_limit = 0.046

[allocation]
slope = 1.0
intercept = 0.0

[distribution]
kind = uniform
budget_low = 0.1
budget_high = 0.169
risk_low = 0.04
risk_high = 0.05

[run]
seed = 42
"#;

    #[test]
    fn valid_scenario_parses_and_derives_the_minimum_bid() {
        let config = parse_scenario(VALID).unwrap();
        assert!((config.market.min_bid - 0.1).abs() < 1e-15);
        assert_eq!(config.mandate.eval_budget, 0.169);
        assert_eq!(config.run.strategy, StrategyKind::Equilibrium);
        assert!(config.warnings.is_empty());
        assert_eq!(config.run.seed, 42);
    }

    #[test]
    fn min_bid_derives_the_risk_limit() {
        let text = VALID.replace("risk_limit = 0.046", "min_bid = 0.1");
        let config = parse_scenario(&text).unwrap();
        assert!((config.mandate.risk_limit - 0.046).abs() < 1e-12);
        assert!(matches!(config.mandate.given, MandateGiven::MinBid(_)));
    }

    #[test]
    fn empty_input_lists_every_missing_required_key() {
        let err = parse_scenario("").unwrap_err().to_string();
        for key in [
            "market.benchmark_yield",
            "market.demand_sensitivity",
            "market.bidders",
            "market.expected_resale_yield",
            "market.risk_free_yield",
            "market.max_yield",
            "mandate.budget_floor",
            "mandate.budget_cap",
            "allocation.slope",
            "distribution.kind",
            "run.seed",
        ] {
            assert!(err.contains(key), "missing mention of {key}:\n{err}");
        }
    }

    #[test]
    fn unknown_keys_are_fatal_with_line_numbers() {
        let text = format!("{VALID}\n[market]\n");
        // Re-opening a section is allowed; an unknown key is not.
        let text = text.replace(
            "risk_free_yield = 0.0",
            "risk_free_yield = 0.0\nrisk_fre = 0.0",
        );
        let err = parse_scenario(&text).unwrap_err().to_string();
        assert!(err.contains("unknown key `market.risk_fre`"), "{err}");
        assert!(err.contains("line "), "{err}");
    }

    #[test]
    fn supplying_both_mandate_keys_is_fatal_even_when_consistent() {
        let text = VALID.replace("risk_limit = 0.046", "risk_limit = 0.046\nmin_bid = 0.1");
        let err = parse_scenario(&text).unwrap_err().to_string();
        assert!(err.contains("mutually exclusive"), "{err}");
        assert!(err.contains("numerically consistent"), "{err}");
    }

    #[test]
    fn supplying_inconsistent_mandate_keys_reports_the_inconsistency() {
        let text = VALID.replace("risk_limit = 0.046", "risk_limit = 0.05\nmin_bid = 0.1");
        let err = parse_scenario(&text).unwrap_err().to_string();
        assert!(err.contains("inconsistent"), "{err}");
    }

    #[test]
    fn out_of_condition_market_parses_with_a_warning() {
        // Raw-convention reference parameters: both the existence condition
        // and the derived risk limit break, and both attach as warnings.
        let text = VALID
            .replace("demand_sensitivity = 0.034", "demand_sensitivity = 0.34")
            .replace("risk_limit = 0.046", "min_bid = 0.1");
        let config = parse_scenario(&text).unwrap();
        assert!(config
            .warnings
            .iter()
            .any(|w| w.contains("xi-condition violated")));
        assert!(config
            .warnings
            .iter()
            .any(|w| w.contains("mandate/market mismatch")));
    }

    #[test]
    fn type_mismatch_reports_line_and_path() {
        let text = VALID.replace("bidders = 10", "bidders = ten");
        let err = parse_scenario(&text).unwrap_err().to_string();
        assert!(err.contains("market.bidders"), "{err}");
        assert!(err.contains("ten"), "{err}");
    }

    #[test]
    fn serialization_round_trips_to_an_identical_value() {
        let config = parse_scenario(VALID).unwrap();
        let text = serialize_scenario(&config);
        let reparsed = parse_scenario(&text).unwrap();
        assert_eq!(config, reparsed);
    }

    #[test]
    fn two_point_distribution_round_trips() {
        let text = VALID
            .replace(
                "kind = uniform\nbudget_low = 0.1\nbudget_high = 0.169\nrisk_low = 0.04\nrisk_high = 0.05",
                "kind = two-point\nbudget_low = 0.25\nrisk_low = 0.045\nbudget_high = 0.32\nrisk_high = 0.05\nlow_weight = 0.4",
            )
            .replace("budget_floor = 0.1", "budget_floor = 0.25")
            .replace("budget_cap = 0.169", "budget_cap = 0.32")
            .replace("risk_limit = 0.046", "min_bid = 0.25")
            .replace("bidders = 10", "bidders = 4");
        let config = parse_scenario(&text).unwrap();
        assert!(matches!(
            config.distribution,
            TypeDistribution::TwoPoint { .. }
        ));
        let reparsed = parse_scenario(&serialize_scenario(&config)).unwrap();
        assert_eq!(config, reparsed);
    }

    #[test]
    fn sweep_section_is_parsed_into_a_plan() {
        let text = format!(
            "{VALID}\n[sweep]\naxis = sensitivity\nstart = 0.01\nstop = 0.08\npoints = 50\n"
        );
        let config = parse_scenario(&text).unwrap();
        let (spec, baseline) = config.sweep_plan().unwrap();
        assert_eq!(spec.values.len(), 50);
        assert_eq!(baseline.eval_budget, 0.169);
        assert!((spec.values[0] - 0.01).abs() < 1e-15);
        assert!((spec.values[49] - 0.08).abs() < 1e-15);
    }

    #[test]
    fn malformed_lines_are_reported() {
        let text = format!("{VALID}\nnot a key value line\n");
        let err = parse_scenario(&text).unwrap_err().to_string();
        assert!(err.contains("expected `key = value`"), "{err}");
    }
}
