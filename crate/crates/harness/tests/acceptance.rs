//! Acceptance suite on the baseline problem: one test per criterion, each
//! printing a single pass/fail line.

use nullctl_harness::acceptance::evaluate;
use nullctl_harness::config::ExperimentConfig;

fn check(id: usize) {
    let outcome = evaluate(id, &ExperimentConfig::default());
    println!("{}", outcome.line());
    assert!(outcome.passed, "{}", outcome.line());
}

#[test]
fn criterion_1_duality_identity() {
    check(1);
}

#[test]
fn criterion_2_hum_null_control() {
    check(2);
}

#[test]
fn criterion_3_penalization_convergence() {
    check(3);
}

#[test]
fn criterion_4_control_linearity() {
    check(4);
}

#[test]
fn criterion_5_observability_quotient() {
    check(5);
}

#[test]
fn criterion_6_semilinear_fixed_point() {
    check(6);
}

#[test]
fn criterion_7_eps_relaxation() {
    check(7);
}

#[test]
fn criterion_8_galerkin_oracle() {
    check(8);
}

#[test]
fn criterion_9_weight_machinery() {
    check(9);
}
