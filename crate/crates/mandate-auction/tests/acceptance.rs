//! Acceptance suite: one test per criterion, each printing a PASS line with
//! the measured values (visible under `--nocapture`). Tolerances are pinned
//! in the assertions.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use mandate_auction::clearing::{clear, compensated_sum};
use mandate_auction::equilibrium::{equilibrium_bid, xi, AllocationRule};
use mandate_auction::experiments::{
    run_campaign, run_sweep, BidStrategy, Monotonicity, SweepAxis, SweepBaseline, SweepSpec,
};
use mandate_auction::market::{BidPoint, BidderId, MarketParams, TypeDistribution};
use mandate_auction::report::emit_campaign;
use mandate_auction::scenario::{load_scenario, OutputFormat};
use mandate_auction::verify::{
    best_response_search, foc_residual, ode_residual, second_order_flatness, DerivativeMode,
};

fn scenario_path(name: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(name)
}

fn reference_raw_params() -> MarketParams {
    MarketParams {
        benchmark_yield: 0.08,
        demand_sensitivity: 0.34,
        bidders: 10,
        expected_resale_yield: 0.04,
        risk_free_yield: 0.0,
        max_yield: 0.06,
        min_bid: 0.1,
    }
}

fn reference_aggregate_params() -> MarketParams {
    MarketParams {
        demand_sensitivity: 0.034,
        ..reference_raw_params()
    }
}

fn reported_allocation_rule() -> AllocationRule {
    AllocationRule::through((0.1, 0.1), (0.169, 0.148)).unwrap()
}

#[test]
fn criterion_01_reference_equilibrium_bid() {
    let rule = reported_allocation_rule();
    let params = reference_raw_params();
    // Warm-up, then timed evaluation.
    let _ = equilibrium_bid(0.169, 0.1, &rule, &params).unwrap();
    let started = Instant::now();
    let point = equilibrium_bid(0.169, 0.1, &rule, &params).unwrap();
    let elapsed = started.elapsed();

    assert!(
        (point.bid - 0.07138).abs() <= 5e-4,
        "bid {} vs 0.07138",
        point.bid
    );
    assert!(
        (point.bid - 0.0711).abs() <= 5e-4,
        "bid {} vs reported 0.0711",
        point.bid
    );
    assert!(elapsed.as_secs_f64() < 1e-3, "took {elapsed:?}");
    println!(
        "criterion 01 (reference equilibrium bid): PASS — bid = {:.7}, |bid - 0.0711| = {:.1e}, {elapsed:?}",
        point.bid,
        (point.bid - 0.0711).abs()
    );
}

#[test]
fn criterion_02_reference_symmetric_stop_out() {
    let params = reference_aggregate_params();
    let bids: Vec<BidPoint> = (0..10)
        .map(|i| BidPoint::new(0.1, 0.046, BidderId(i)).unwrap())
        .collect();
    let outcome = clear(&bids, &params).unwrap();
    assert!(outcome.issued);
    assert!(
        (outcome.stop_out - 0.046).abs() <= 1e-12,
        "stop-out {}",
        outcome.stop_out
    );
    for alloc in &outcome.allocations {
        assert!((alloc - 0.1).abs() <= 1e-12, "allocation {alloc}");
    }

    let dist = TypeDistribution::PointMass {
        budget: 0.1,
        risk_limit: 0.046,
    };
    let strategy = BidStrategy::Equilibrium {
        rule: AllocationRule::identity(),
        budget_floor: 0.1,
    };
    let campaign = run_campaign(&dist, &strategy, &params, 100, 42, 0).unwrap();
    assert_eq!(campaign.summary.issuance_rate, 1.0);
    for record in &campaign.records {
        assert!((record.stop_out - 0.046).abs() <= 1e-12);
    }
    println!(
        "criterion 02 (reference symmetric stop-out): PASS — stop-out = {:.12}, issuance rate = {}",
        outcome.stop_out, campaign.summary.issuance_rate
    );
}

#[test]
fn criterion_03_reference_residual_supply() {
    let point = equilibrium_bid(
        0.169,
        0.1,
        &reported_allocation_rule(),
        &reference_raw_params(),
    )
    .unwrap();
    let residual_supply = 1.0 - 10.0 * point.bid;
    assert!(
        (residual_supply - 0.2862).abs() <= 0.01,
        "residual supply {residual_supply}"
    );
    println!(
        "criterion 03 (reference residual supply): PASS — 1 - n*b = {residual_supply:.6} vs 0.2862"
    );
}

#[test]
fn criterion_04_xi_condition_audit() {
    let factor = xi(&reference_raw_params()).unwrap();
    assert!((factor.value - 8.5).abs() < 1e-12);
    assert!((factor.condition_bound - 1.0).abs() < 1e-12);
    assert!(!factor.condition_satisfied);

    // The flag must also surface in the paper-example command output.
    let output = std::process::Command::new(env!("CARGO_BIN_EXE_mandate-auction"))
        .args(["paper-example", "--scenario"])
        .arg(scenario_path("paper_example.scenario"))
        .output()
        .expect("paper-example runs");
    assert!(output.status.success());
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("VIOLATED"), "missing flag:\n{stdout}");
    assert!(stdout.contains("8.5"), "missing xi value:\n{stdout}");
    println!(
        "criterion 04 (xi-condition audit): PASS — xi = {} > bound {} and flag printed by paper-example",
        factor.value, factor.condition_bound
    );
}

#[test]
fn criterion_05_ode_oracle() {
    let mut rng = ChaCha12Rng::seed_from_u64(501);
    let rule = AllocationRule::identity();
    let started = Instant::now();
    let mut worst_analytic: f64 = 0.0;
    let mut worst_fd: f64 = 0.0;
    for _ in 0..3 {
        let bidders = *[5u32, 10, 20].get(rng.gen_range(0..3)).unwrap();
        let benchmark: f64 = rng.gen_range(0.06..0.12);
        let resale = rng.gen_range(0.02..benchmark - 0.02);
        let min_bid = rng.gen_range(0.02..0.3);
        // Existence condition by construction.
        let sensitivity =
            rng.gen_range(0.05..0.95) * (benchmark - resale) / (min_bid * f64::from(bidders));
        let params = MarketParams {
            benchmark_yield: benchmark,
            demand_sensitivity: sensitivity,
            bidders,
            expected_resale_yield: resale,
            risk_free_yield: 0.0,
            max_yield: resale,
            min_bid,
        };
        let grid: Vec<f64> = (0..1000).map(|k| 0.1 + 0.2 * k as f64 / 999.0).collect();
        let analytic = ode_residual(&grid, 0.1, &rule, &params, DerivativeMode::Analytic).unwrap();
        let fd = ode_residual(
            &grid,
            0.1,
            &rule,
            &params,
            DerivativeMode::FiniteDifference { step: 1e-5 },
        )
        .unwrap();
        assert!(analytic < 1e-12, "analytic residual {analytic}");
        assert!(fd < 1e-6, "finite-difference residual {fd}");
        worst_analytic = worst_analytic.max(analytic);
        worst_fd = worst_fd.max(fd);
    }
    let elapsed = started.elapsed();
    assert!(elapsed.as_millis() < 100, "took {elapsed:?}");
    println!(
        "criterion 05 (ODE oracle): PASS — worst analytic {worst_analytic:.2e} < 1e-12, worst fd {worst_fd:.2e} < 1e-6, {elapsed:?}"
    );
}

#[test]
fn criterion_06_stop_out_identity() {
    let mut rng = ChaCha12Rng::seed_from_u64(601);
    let rule = AllocationRule::identity();
    let benchmark = 0.08;
    let resale = 0.04;
    let mut worst: f64 = 0.0;
    let mut cases = 0usize;
    for _ in 0..10 {
        let min_bid: f64 = rng.gen_range(0.02..0.3);
        for _ in 0..10 {
            // Sensitivity sampled inside the existence condition.
            let sensitivity = rng.gen_range(0.05..0.95) * (benchmark - resale) / (min_bid * 10.0);
            for _ in 0..10 {
                let weight: f64 = rng.gen_range(0.05..=1.0);
                let eval_budget = 0.5;
                let floor = weight * eval_budget;
                let params = MarketParams {
                    benchmark_yield: benchmark,
                    demand_sensitivity: sensitivity,
                    bidders: 10,
                    expected_resale_yield: resale,
                    risk_free_yield: 0.0,
                    max_yield: 0.06,
                    min_bid,
                };
                let point = equilibrium_bid(eval_budget, floor, &rule, &params).unwrap();
                assert!(point.xi.condition_satisfied);
                let priced = benchmark - sensitivity * 10.0 * point.bid;
                let gap = (point.stop_out - priced).abs();
                assert!(gap < 1e-12, "identity gap {gap}");
                worst = worst.max(gap);
                cases += 1;
            }
        }
    }
    assert_eq!(cases, 1000);
    println!(
        "criterion 06 (stop-out identity): PASS — worst |formula - priced| = {worst:.2e} over {cases} cases"
    );
}

#[test]
fn criterion_07_best_response_property() {
    let started = Instant::now();
    let config = load_scenario(&scenario_path("two_point_best_response.scenario")).unwrap();
    assert!(config.warnings.is_empty());

    let mut reports = Vec::new();
    for bidders in [3u32, 4, 5] {
        let params = MarketParams {
            bidders,
            min_bid: 1.0 / f64::from(bidders),
            ..config.market
        };
        assert!(xi(&params).unwrap().condition_satisfied);
        let grid: Vec<f64> = (0..101)
            .map(|k| {
                config.mandate.budget_floor
                    + (config.mandate.budget_cap - config.mandate.budget_floor) * k as f64 / 100.0
            })
            .collect();
        let report = best_response_search(
            &grid,
            config.mandate.eval_budget,
            &config.distribution,
            &config.rule,
            &params,
        )
        .unwrap();
        let relative = report.payoff_gap / report.payoff_at_eval;
        assert!(
            relative.abs() <= 1e-5,
            "n={bidders}: relative gap {relative}"
        );

        let foc = foc_residual(
            config.mandate.eval_budget,
            &config.rule,
            &config.distribution,
            &params,
            1e-4,
        )
        .unwrap();
        assert!(foc.abs() < 1e-6, "n={bidders}: foc residual {foc}");

        let flat = second_order_flatness(
            config.mandate.eval_budget,
            &config.rule,
            &config.distribution,
            &params,
            1e-3,
        )
        .unwrap();
        assert!(flat.abs() < 1e-4, "n={bidders}: second difference {flat}");
        reports.push((bidders, relative, foc, flat));
    }
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs() < 30, "took {elapsed:?}");
    for (bidders, relative, foc, flat) in &reports {
        println!(
            "criterion 07 (best response, n={bidders}): PASS — relative gap {relative:.2e}, foc {foc:.2e}, flatness {flat:.2e}"
        );
    }
    println!("criterion 07 (best-response property): PASS — all bidder counts, {elapsed:?}");
}

#[test]
fn criterion_08_comparative_statics() {
    let baseline = SweepBaseline {
        params: reference_aggregate_params(),
        rule: AllocationRule::identity(),
        budget_floor: 0.1,
        eval_budget: 0.169,
    };

    let sensitivity_values: Vec<f64> = (0..50).map(|k| 0.01 + 0.07 * k as f64 / 49.0).collect();
    let sensitivity_table = run_sweep(
        &SweepSpec {
            axis: SweepAxis::Sensitivity,
            values: sensitivity_values,
            hold_scaled_min_bid: false,
        },
        &baseline,
    )
    .unwrap();
    assert_eq!(
        sensitivity_table.bid_monotonicity,
        Monotonicity::StrictlyDecreasing
    );

    let floor_values: Vec<f64> = (0..50).map(|k| 0.1 + 0.069 * k as f64 / 49.0).collect();
    let floor_table = run_sweep(
        &SweepSpec {
            axis: SweepAxis::BudgetFloor,
            values: floor_values,
            hold_scaled_min_bid: false,
        },
        &baseline,
    )
    .unwrap();
    assert_eq!(
        floor_table.bid_monotonicity,
        Monotonicity::StrictlyDecreasing
    );
    assert!(floor_table.final_gap_to_min_bid <= 1e-12);
    let bids: Vec<f64> = floor_table.rows.iter().map(|r| r.bid).collect();
    assert!(bids.iter().all(|b| *b >= 0.1 - 1e-15));

    println!(
        "criterion 08 (comparative statics): PASS — sensitivity sweep strictly decreasing over 50 rows; floor sweep decreasing with final gap {:.2e}",
        floor_table.final_gap_to_min_bid
    );
}

#[test]
fn criterion_09_clearing_property_suite() {
    let started = Instant::now();
    let mut rng = ChaCha12Rng::seed_from_u64(901);
    let cases = 10_000;
    for case in 0..cases {
        let params = MarketParams {
            benchmark_yield: 0.08,
            demand_sensitivity: rng.gen_range(0.005..0.05),
            bidders: 10,
            expected_resale_yield: 0.04,
            risk_free_yield: 0.0,
            max_yield: 0.06,
            min_bid: 0.1,
        };
        let count = rng.gen_range(2..=40);
        let bids: Vec<BidPoint> = (0..count)
            .map(|i| {
                BidPoint::new(
                    rng.gen_range(0.0..0.4),
                    0.02 + 0.002 * f64::from(rng.gen_range(0u8..6)),
                    BidderId(i),
                )
                .unwrap()
            })
            .collect();
        let outcome = clear(&bids, &params).unwrap();

        // Conservation and the zero outcome.
        let total = compensated_sum(outcome.allocations.iter().copied());
        if outcome.issued {
            assert!((total - 1.0).abs() <= 1e-12, "case {case}: sum {total}");
            assert!(outcome.stop_out > 0.0);
        } else {
            assert_eq!(total, 0.0, "case {case}");
            assert_eq!(outcome.stop_out, 0.0, "case {case}");
            assert!(outcome.aggregate_demand < 1.0);
        }

        // Per-bidder cap; winners all pay the single stop-out.
        for (alloc, bid) in outcome.allocations.iter().zip(&bids) {
            assert!(*alloc <= bid.quantity + 1e-15, "case {case}");
            assert!(*alloc >= 0.0);
        }

        // Permutation equivariance.
        let rotation = rng.gen_range(1..bids.len());
        let mut permuted = bids.clone();
        permuted.rotate_left(rotation);
        let outcome_p = clear(&permuted, &params).unwrap();
        assert_eq!(outcome_p.issued, outcome.issued);
        assert!((outcome_p.stop_out - outcome.stop_out).abs() <= 1e-15);
        let mut expected = outcome.allocations.clone();
        expected.rotate_left(rotation);
        for (got, want) in outcome_p.allocations.iter().zip(&expected) {
            assert!((got - want).abs() <= 1e-12, "case {case}");
        }

        // Monotonicity: raising one bid weakly raises demand and, within the
        // issued regime, weakly lowers the stop-out.
        let mut raised = bids.clone();
        let idx = rng.gen_range(0..raised.len());
        raised[idx].quantity = (raised[idx].quantity + 0.3).min(0.99);
        let outcome_r = clear(&raised, &params).unwrap();
        assert!(outcome_r.aggregate_demand >= outcome.aggregate_demand - 1e-15);
        if outcome.issued && outcome_r.issued {
            assert!(outcome_r.stop_out <= outcome.stop_out + 1e-15);
        }
    }
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs() < 10, "took {elapsed:?}");
    println!(
        "criterion 09 (clearing property suite): PASS — {cases} randomized cases, {elapsed:?}"
    );
}

#[test]
fn criterion_10_determinism() {
    let config = load_scenario(&scenario_path("valid_rescaled.scenario")).unwrap();
    let formats = [OutputFormat::Csv, OutputFormat::JsonLines];

    let mut reference_bytes: Option<Vec<Vec<u8>>> = None;
    for (attempt, workers) in [(0usize, 0usize), (1, 1), (2, 4), (3, 0)] {
        let result = run_campaign(
            &config.distribution,
            &config.bid_strategy(),
            &config.market,
            500,
            config.run.seed,
            workers,
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let files = emit_campaign(&result, dir.path(), &formats, "campaign").unwrap();
        let bytes: Vec<Vec<u8>> = files.iter().map(|f| std::fs::read(f).unwrap()).collect();
        match &reference_bytes {
            None => reference_bytes = Some(bytes),
            Some(reference) => {
                assert_eq!(
                    reference, &bytes,
                    "attempt {attempt} (workers {workers}) diverged"
                );
            }
        }
    }
    println!(
        "criterion 10 (determinism): PASS — byte-identical campaign outputs across repeats and worker counts 0/1/4"
    );
}
