use std::collections::BTreeSet;

use braidforge::braid_words::parse_loop_word;
use braidforge::constructors::{algorithm1, BuildConfig, ConstructionResult, LambdaChoice};
use braidforge::poly_algebra::{LaurentPoly, Var};
use braidforge::verifier::{
    grid_scan, max_norm, select_lambda, verify, CheckName, Status, VerifierConfig, VerifyError,
};
use num_complex::Complex64;

const LOOP_EXAMPLE: &str = "r1^-1 r2 s1 r2 r1^-1";

fn low_floor() -> BuildConfig {
    let mut config = BuildConfig::default();
    config.verifier.delta_floor = 5e-4;
    config
}

fn loop_example(lambda: f64) -> ConstructionResult {
    let w = parse_loop_word(LOOP_EXAMPLE, 3).unwrap();
    algorithm1(&w, LambdaChoice::Value(lambda), &low_floor()).unwrap()
}

#[test]
fn default_floor_rejects_the_thin_band_of_the_loop_example() {
    let r = loop_example(0.1);
    match select_lambda(&r, &VerifierConfig::default()) {
        Err(VerifyError::DeltaBelowFloor { radius, .. }) => {
            assert!(radius > 0.99 && radius < 1.0, "fold at r = {radius}")
        }
        other => panic!("expected a floor error, got {other:?}"),
    }
}

#[test]
fn loop_example_passes_with_a_lower_floor() {
    let config = low_floor().verifier;
    let unit = loop_example(1.0);
    let sel = select_lambda(&unit, &config).unwrap();
    assert!(sel.delta > 5e-4 && sel.delta < 2e-3, "delta {}", sel.delta);
    let r = unit.with_lambda(sel.lambda).unwrap();
    let report = verify(&r, &config, &BTreeSet::new());
    assert!(report.passed(), "{report:#?}");
}

#[test]
fn max_norm_is_linear_in_lambda() {
    let config = low_floor().verifier;
    let a = max_norm(&loop_example(0.05), 0.999, &config);
    let b = max_norm(&loop_example(0.1), 0.999, &config);
    assert!(a.is_finite() && a > 0.0);
    assert!((b - 2.0 * a).abs() < 1e-9 * b, "{a} {b}");
}

#[test]
fn grid_scan_finds_a_planted_extra_component() {
    let config = low_floor().verifier;
    let mut r = loop_example(0.01);
    let clean = grid_scan(&r, 0.999, 1.0, &config);
    assert!(clean.unmatched.is_empty(), "{:?}", clean.unmatched);

    // (x - 0.6) + i(y + 0.4) vanishes on a vertical line far from every ring
    let line = LaurentPoly::var(Var::X)
        .add(&LaurentPoly::constant(Complex64::new(-0.6, 0.4)))
        .add(&LaurentPoly::var(Var::Y).scale(Complex64::i()));
    r.f = r.f.mul(&line).unwrap();
    let planted = grid_scan(&r, 0.999, 1.0, &config);
    assert!(!planted.unmatched.is_empty());
    for (_, p) in &planted.unmatched {
        assert!(
            (p[0] - 0.6).abs() < 1e-6 && (p[1] + 0.4).abs() < 1e-6,
            "{p:?}"
        );
    }
}

#[test]
fn oversized_lambda_fails_containment_and_skips_are_reported() {
    let config = low_floor().verifier;
    let r = loop_example(10.0);
    let skip: BTreeSet<_> = [CheckName::Grid, CheckName::Reextract].into();
    let report = verify(&r, &config, &skip);
    assert!(!report.passed());
    let status = |c: CheckName| report.checks.iter().find(|k| k.check == c).unwrap().status;
    assert_eq!(status(CheckName::Containment), Status::Fail);
    assert_eq!(status(CheckName::Grid), Status::Skipped);
    assert_eq!(status(CheckName::Reextract), Status::Skipped);
}
