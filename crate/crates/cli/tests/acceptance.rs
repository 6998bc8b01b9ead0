//! Acceptance gate: one test per criterion of the verification suite.
//!
//! Each test runs a criterion at the pinned default tolerances and seed
//! and prints its single pass/fail line; `capax verify` runs the same
//! checks from the command line.

use capax_cli::verify::{run_criterion, Overrides, VerifyContext, CRITERIA};

fn check(name: &str) {
    let scratch = std::env::temp_dir().join(format!(
        "capax-acceptance-{}-{name}",
        std::process::id()
    ));
    let ctx = VerifyContext {
        seed: 0,
        binary: Some(std::path::PathBuf::from(env!("CARGO_BIN_EXE_capax"))),
        scratch,
    };
    let out = run_criterion(name, Overrides::default(), &ctx);
    println!(
        "criterion {}: {} ({})",
        out.name,
        if out.pass { "PASS" } else { "FAIL" },
        out.summary
    );
    assert!(out.pass, "criterion {name} failed: {}", out.summary);
}

#[test]
fn suite_lists_every_criterion_once() {
    assert_eq!(CRITERIA.len(), 10);
    let mut names = CRITERIA.to_vec();
    names.sort_unstable();
    names.dedup();
    assert_eq!(names.len(), 10);
}

#[test]
fn oracle_equivalence() {
    check("oracle_equivalence");
}

#[test]
fn gateaux_characterization() {
    check("gateaux_characterization");
}

#[test]
fn pbss_characterization() {
    check("pbss_characterization");
}

#[test]
fn torsion_support() {
    check("torsion_support");
}

#[test]
fn radon_approximation() {
    check("radon_approximation");
}

#[test]
fn sum_theorem() {
    check("sum_theorem");
}

#[test]
fn strange_term() {
    check("strange_term");
}

#[test]
fn control_path_audits() {
    check("control_path_audits");
}

#[test]
fn comparison_principle() {
    check("comparison_principle");
}

#[test]
fn determinism() {
    check("determinism");
}
