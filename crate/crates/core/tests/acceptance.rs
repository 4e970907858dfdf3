//! Acceptance suite: one test per criterion, each printing a PASS/FAIL line
//! with the measured values. Criteria map onto the bundled verification
//! checks where those exist; the long gas experiment runs here directly.
//!
//! Run with `cargo test --test acceptance -- --nocapture` to see every line.

use std::time::Instant;

use intricacy::kmc::{self, GasParams, SourceGeometry, SourceSpec, SourceTiming};
use intricacy::verify;

fn report(criterion: &str, passed: bool, detail: &str, elapsed_s: f64, budget_s: f64) {
    println!(
        "{} {criterion}: {detail} [{elapsed_s:.1}s / budget {budget_s:.0}s]",
        if passed { "PASS" } else { "FAIL" },
    );
    assert!(passed, "{criterion}: {detail}");
    assert!(
        elapsed_s < budget_s,
        "{criterion} exceeded its runtime budget: {elapsed_s:.1}s > {budget_s}s"
    );
}

fn run_named_check(criterion: &str, name: &str, budget_s: f64) {
    let start = Instant::now();
    let results = verify::run_all_filtered(&[name]);
    let elapsed = start.elapsed().as_secs_f64();
    let result = results
        .iter()
        .find(|r| r.name == name)
        .unwrap_or_else(|| panic!("check {name} not found"));
    report(criterion, result.passed, &result.detail, elapsed, budget_s);
}

#[test]
fn criterion_01_algebra_suite() {
    run_named_check("criterion-01-algebra", "algebra-identities", 1.0);
}

#[test]
fn criterion_02_consistency_theorem() {
    let start = Instant::now();
    let results = verify::run_all_filtered(&["intertwining-operator", "intertwining-trajectory"]);
    let elapsed = start.elapsed().as_secs_f64();
    let passed = results.iter().all(|r| r.passed);
    let detail: Vec<String> = results.iter().map(|r| r.detail.clone()).collect();
    report(
        "criterion-02-consistency",
        passed,
        &detail.join("; "),
        elapsed,
        60.0,
    );
}

#[test]
fn criterion_03_oracle_equivalence() {
    run_named_check("criterion-03-dense-oracle", "dense-exponential-oracle", 60.0);
}

#[test]
fn criterion_04_measure_identity() {
    run_named_check("criterion-04-measures", "measure-identity", 60.0);
}

#[test]
fn criterion_05_tail_exponent() {
    run_named_check("criterion-05-tail-exponent", "tail-exponent", 1.0);
}

#[test]
fn criterion_06_front_profile() {
    run_named_check("criterion-06-front-profile", "front-profile", 1.0);
}

#[test]
fn criterion_07_constrained_front() {
    run_named_check("criterion-07-constrained-front", "constrained-front-speed", 10.0);
}

#[test]
fn criterion_08_pulled_front() {
    run_named_check("criterion-08-pulled-front", "pulled-front-speed", 60.0);
}

#[test]
fn criterion_09_multichannel_limit() {
    run_named_check("criterion-09-multichannel", "multichannel-limit", 10.0);
}

/// The full gas experiment: 1e5 particles, contagion on, plus the
/// contagion-disabled diffusion control.
#[test]
fn criterion_10_kmc_kinetics() {
    let start = Instant::now();
    let params = GasParams::new(100_000, [20.0, 20.0, 60.0], 12345);
    let source = SourceSpec {
        geometry: SourceGeometry::Plane {
            z0: 30.0,
            half_thickness: 0.5,
        },
        timing: SourceTiming::Initial,
        channel: 1,
    };

    let mut gas = kmc::init_gas(&params).expect("init");
    gas.inject_source(&source).expect("source");
    let history = gas.run_contagion(30.0, 1.0, 0.5).expect("run");

    // Tagged count non-decreasing.
    let mut monotone = true;
    let mut prev = 0usize;
    for stats in &history.stats {
        if stats.tag_counts[1] < prev {
            monotone = false;
        }
        prev = stats.tag_counts[1];
    }

    // Energy conservation over the whole run.
    let e0 = history.stats.first().unwrap().kinetic_energy;
    let e1 = history.stats.last().unwrap().kinetic_energy;
    let energy_drift = ((e1 - e0) / e0).abs();

    // Ballistic front at the default detection threshold.
    let fit = kmc::fit_front(&history, 0.05, 5.0).expect("front fit");
    let ballistic = fit.r2 > 0.99 && fit.linear_sse < fit.sqrt_sse;
    let speed_in_window = (0.4..=1.0).contains(&fit.speed);

    // Diffusion control: contagion disabled, tags conserved, sublinear.
    let mut control_params = GasParams::new(100_000, [20.0, 20.0, 60.0], 12345);
    control_params.contagion_enabled = false;
    let mut control = kmc::init_gas(&control_params).expect("control init");
    let control_source = SourceSpec {
        geometry: SourceGeometry::Plane {
            z0: 30.0,
            half_thickness: 1.0,
        },
        timing: SourceTiming::Initial,
        channel: 1,
    };
    let control_tagged = control.inject_source(&control_source).expect("source");
    let control_history = control.run_contagion(22.0, 1.0, 0.5).expect("control run");
    let control_conserved = control_history
        .stats
        .iter()
        .all(|s| s.tag_counts[1] == control_tagged);
    let control_fit = kmc::fit_front(&control_history, 0.05, 5.0).expect("control fit");
    let control_sublinear = control_fit.sqrt_sse < control_fit.linear_sse;

    let elapsed = start.elapsed().as_secs_f64();
    let passed = monotone
        && energy_drift < 1e-10
        && ballistic
        && speed_in_window
        && control_conserved
        && control_sublinear;
    report(
        "criterion-10-kmc",
        passed,
        &format!(
            "tags monotone: {monotone}; energy drift {energy_drift:.2e} (tol 1e-10); \
             front r² = {:.5} ballistic: {ballistic}; speed {:.4}·v in [0.4, 1.0]: \
             {speed_in_window}; control conserved: {control_conserved}, sublinear: \
             {control_sublinear}",
            fit.r2, fit.speed
        ),
        elapsed,
        600.0,
    );
}

#[test]
fn criterion_11_census() {
    run_named_check("criterion-11-census", "wave-census", 1.0);
}
