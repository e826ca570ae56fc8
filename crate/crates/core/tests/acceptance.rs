//! Acceptance criteria 1-11. Runs as a plain binary so every criterion prints
//! one PASS/FAIL line, then exits non-zero if any failed.

use std::collections::BTreeMap;
use std::f64::consts::{PI, TAU};
use std::time::{Duration, Instant};

use braidforge::braid_words::{
    parse_classical_word, parse_loop_word, random_loop_word, strand_components, BraidWord,
    LoopBraidWord,
};
use braidforge::constructors::{
    algorithm1, algorithm2, degree_bound, sampling_identity_error, vanishing_residual, BoundInput,
    BuildConfig, LambdaChoice,
};
use braidforge::poly_algebra::{LaurentPoly, Var};
use braidforge::strand_param::{
    build_f, extract_x_data, loop_strand_system, separation_threshold, shared_height_contacts,
    LaneDirection, PipelineConfig, RingContact, StrandLabel,
};
use braidforge::trig_interp::{hermite_interpolate, interpolate, HermiteNode, TrigPoly};
use braidforge::vector_field::{FieldForm, FieldSource};
use braidforge::verifier::{fibration_check, reextract_braid, VerifierConfig};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const LOOP_EXAMPLE: &str = "r1^-1 r2 s1 r2 r1^-1";
const WHITEHEAD: &str = "s1^-1 s2 s1^-1 s2 s1^-1";

// pinned tolerances
const COEFF_TOL_EXACT: f64 = 1e-9;
const COEFF_TOL_ROUNDED: f64 = 2e-3;
const VANISH_TOL: f64 = 1e-6;
const IDENTITY_TOL: f64 = 1e-9;
const DIVERGENCE_TOL: f64 = 1e-6;
const PARALLEL_TOL: f64 = 1e-8;
const TANGENCY_TOL: f64 = 1e-4;
const FIBRATION_TOL: f64 = 1e-6;
const INTERP_ORACLE_TOL: f64 = 1e-9;
const PARTIALS_TOL: f64 = 1e-5;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn coeff_vec(p: &TrigPoly, degree: usize) -> Vec<f64> {
    let mut v = vec![p.constant];
    for k in 1..=degree {
        v.push(p.cos_coeff(k));
        v.push(p.sin_coeff(k));
    }
    v
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn fmt_coeffs(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|c| format!("{c:.3}")).collect();
    format!("[{}]", parts.join(", "))
}

fn loop_corpus() -> Vec<LoopBraidWord> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    (0..20).map(|_| random_loop_word(&mut rng, 4, 6)).collect()
}

// ---- criteria ----

fn hermite_golden() -> Outcome {
    let p = hermite_interpolate(&[
        HermiteNode {
            angle: PI / 2.0,
            value: 0.0,
            slope: -1.0,
        },
        HermiteNode {
            angle: 3.0 * PI / 2.0,
            value: 0.0,
            slope: 1.0,
        },
    ]);
    let Ok(p) = p else {
        return outcome(false, format!("{p:?}"));
    };
    let deg = p.degree().max(1);
    let mut want = vec![0.0; 2 * deg + 1];
    want[1] = 1.0;
    let err = max_diff(&coeff_vec(&p, deg), &want);
    outcome(
        err < COEFF_TOL_EXACT,
        format!("H = cos t, max coefficient error {err:.2e}"),
    )
}

fn lagrange_golden() -> Outcome {
    let Ok(p) = interpolate(&[(PI / 2.0, 1.0), (3.0 * PI / 2.0, 2.0)]) else {
        return outcome(false, "interpolation failed");
    };
    let err = max_diff(&coeff_vec(&p, 1), &[1.5, 0.0, -0.5]);
    outcome(
        err < COEFF_TOL_EXACT && p.degree() <= 1,
        format!("R = 1.5 - 0.5 sin t, max coefficient error {err:.2e}"),
    )
}

fn whitehead_f() -> Outcome {
    let w = parse_classical_word(WHITEHEAD, 3).unwrap();
    let d = strand_components(&w);
    let nodes = match extract_x_data(&w, &d, LaneDirection::Descending) {
        Ok(n) => n,
        Err(e) => return outcome(false, e.to_string()),
    };
    let lanes: Vec<f64> = {
        let mut v: Vec<f64> = nodes.iter().flatten().map(|n| n.1).collect();
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    };
    let (f, _) = build_f(&nodes).unwrap();
    let (c1, c2) = (&f[0], &f[1]);
    let shape = c1.degree() == 2 && c2.degree() == 5 && c2.sin_coeff(5) == 0.0;
    let got = [c1.constant, c1.cos_coeff(1), c1.cos_coeff(2)];
    let err = max_diff(&got, &[-0.200, 1.047, 0.153]);
    let sines = (1..=2).map(|k| c1.sin_coeff(k).abs()).fold(0.0, f64::max);
    let unit_lanes = lanes == [-1.0, 0.0, 1.0];
    outcome(
        shape && unit_lanes && err < COEFF_TOL_ROUNDED && sines < COEFF_TOL_ROUNDED,
        format!(
            "deg F_C1 = {}, deg F_C2 = {}, sin 5t = {:.1e}, lanes {:?}, F_C1 {} (error {err:.1e})",
            c1.degree(),
            c2.degree(),
            c2.sin_coeff(5),
            lanes,
            fmt_coeffs(&got)
        ),
    )
}

fn g_golden() -> Outcome {
    let nodes = [(0.794, -1.0), (1.857, 1.0), (4.426, -1.0), (5.490, 1.0)];
    let Ok(p) = interpolate(&nodes) else {
        return outcome(false, "interpolation failed");
    };
    let got = coeff_vec(&p, 2);
    let want = [0.520, -0.721, -0.341, 0.860, -1.243];
    let err = max_diff(&got, &want);
    let printed = |t: f64| {
        0.520 - 0.721 * t.cos() - 0.341 * t.sin() + 0.860 * (2.0 * t).cos()
            - 1.243 * (2.0 * t).sin()
    };
    let node_miss = nodes
        .iter()
        .map(|&(t, y)| (printed(t) - y).abs())
        .fold(0.0, f64::max);
    outcome(
        err < COEFF_TOL_ROUNDED,
        format!(
            "G_C1 {} vs expected {}, max error {err:.3}; the expected polynomial misses its own nodes by {node_miss:.3}",
            fmt_coeffs(&got),
            fmt_coeffs(&want)
        ),
    )
}

fn epsilon_threshold() -> Outcome {
    let label = |component, strand| StrandLabel { component, strand };
    let distance = 1.129;
    // C2 strand 1 (radius 1) and strand 2 (radius 2) share a centre at t = π; C1 has radius 1
    let contacts = [
        RingContact {
            a: label(0, 0),
            b: label(1, 0),
            time: PI,
            distance,
            radius_a: 1.0,
            radius_b: 1.0,
        },
        RingContact {
            a: label(0, 0),
            b: label(1, 1),
            time: PI,
            distance,
            radius_a: 1.0,
            radius_b: 2.0,
        },
    ];
    let threshold = separation_threshold(&contacts);
    let mut detail = format!("threshold {threshold:.4} from centre distance {distance}");
    let w = parse_loop_word(LOOP_EXAMPLE, 3).unwrap();
    if let Ok(sys) = loop_strand_system(&w, &PipelineConfig::default()) {
        if let Ok(measured) = shared_height_contacts(&sys) {
            let m = separation_threshold(&measured);
            let d = measured
                .iter()
                .map(|c| c.distance)
                .fold(f64::INFINITY, f64::min);
            detail.push_str(&format!(
                "; pipeline geometry: nearest centre distance {d:.3}, threshold {m:.3}"
            ));
        }
    }
    outcome((threshold - 0.376).abs() < COEFF_TOL_ROUNDED, detail)
}

fn degree_bound_example() -> Outcome {
    let w = parse_loop_word(LOOP_EXAMPLE, 3).unwrap();
    let report = degree_bound(BoundInput::Loop(&w));
    let built = match algorithm1(&w, LambdaChoice::Value(0.1), &BuildConfig::default()) {
        Ok(r) => r,
        Err(e) => return outcome(false, e.to_string()),
    };
    let total = built.f.degrees().total;
    outcome(
        report.bound == 52 && total <= 52,
        format!(
            "bound {} (contributions {:?}), total degree of f = {total}",
            report.bound, report.contributions
        ),
    )
}

fn vanishing_suite() -> Outcome {
    let mut words = vec![parse_loop_word(LOOP_EXAMPLE, 3).unwrap()];
    words.extend(loop_corpus());
    let cfg = BuildConfig::default();
    let (mut worst_g, mut worst_id) = (0.0f64, 0.0f64);
    let mut failures = Vec::new();
    for (i, w) in words.iter().enumerate() {
        match algorithm1(w, LambdaChoice::Value(0.1), &cfg) {
            Ok(r) => {
                let g = vanishing_residual(&r, 256, 64);
                let id = sampling_identity_error(&r, 64, i as u64);
                worst_g = worst_g.max(g);
                worst_id = worst_id.max(id);
                if !(g < VANISH_TOL && id < IDENTITY_TOL) {
                    failures.push(format!("'{}': |g| {g:.1e}, identity {id:.1e}", w.to_text()));
                }
            }
            Err(e) => failures.push(format!(
                "'{}' ({} strands): {e}",
                w.to_text(),
                w.strand_count()
            )),
        }
    }
    outcome(
        failures.is_empty(),
        format!(
            "{} words, max |g| = {worst_g:.2e}, max f-vs-g identity error = {worst_id:.2e}{}",
            words.len(),
            if failures.is_empty() {
                String::new()
            } else {
                format!("; failures: {}", failures.join("; "))
            }
        ),
    )
}

fn norm(v: [f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

fn cross(u: [f64; 3], v: [f64; 3]) -> [f64; 3] {
    [
        u[1] * v[2] - u[2] * v[1],
        u[2] * v[0] - u[0] * v[2],
        u[0] * v[1] - u[1] * v[0],
    ]
}

fn vector_field_suite() -> Outcome {
    let w = parse_loop_word(LOOP_EXAMPLE, 3).unwrap();
    let r = match algorithm1(&w, LambdaChoice::Value(1.0), &BuildConfig::default()) {
        Ok(r) => r,
        Err(e) => return outcome(false, e.to_string()),
    };
    let src = FieldSource::new(&r.g).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let (mut div, mut par) = (0.0f64, 0.0f64);
    let mut wave = Vec::new();
    for _ in 0..1000 {
        let p = [
            rng.gen_range(-3.0..3.0),
            rng.gen_range(-3.0..3.0),
            rng.gen_range(-1.5..1.5),
        ];
        let t = rng.gen_range(0.0..TAU);
        let (Ok(a), Ok(b)) = (
            src.sample(FieldForm::Ranada, p, t),
            src.sample(FieldForm::Cross4, p, t),
        ) else {
            return outcome(false, "field evaluation failed");
        };
        div = div.max(a.divergence.abs() / a.divergence_scale.max(f64::MIN_POSITIVE));
        par = par.max(norm(cross(a.vector, b.vector)) / (norm(a.vector) * norm(b.vector)));
        wave.push(norm(a.wave_residual) / norm(a.vector));
    }
    wave.sort_by(f64::total_cmp);
    let wave_median = wave[wave.len() / 2];

    let sys = r.system.as_ref().unwrap();
    let mut tangency = 0.0f64;
    let labels = sys.labels();
    for k in 0..256 {
        let t = TAU * (k as f64 + 0.37) / 256.0;
        let label = labels[k % labels.len()];
        let theta = 0.7 + k as f64;
        let p = sys.ring_point(label, t, theta);
        let v = src.sample(FieldForm::Ranada, p, t).unwrap().vector;
        let tangent = [-theta.sin(), theta.cos(), 0.0];
        let c = (v[0] * tangent[0] + v[1] * tangent[1] + v[2] * tangent[2]).abs() / norm(v);
        tangency = tangency.max(c.min(1.0).acos());
    }
    let pass =
        div < DIVERGENCE_TOL && par < PARALLEL_TOL && tangency < TANGENCY_TOL && wave_median > 1e-3;
    outcome(
        pass,
        format!(
            "relative divergence {div:.2e}, forms parallel to {par:.2e}, tangency {tangency:.2e} rad, \
             median wave residual / |V| = {wave_median:.2e}"
        ),
    )
}

fn fibration() -> Outcome {
    let cfg = VerifierConfig::default();
    let mut details = Vec::new();
    let mut pass = true;
    for (word, strands) in [("s1", 2), (WHITEHEAD, 3)] {
        let w = parse_classical_word(word, strands).unwrap();
        let r = match algorithm2(&w, 1, &PipelineConfig::default()) {
            Ok(r) => r,
            Err(e) => return outcome(false, e.to_string()),
        };
        match fibration_check(&r, 100, &cfg) {
            Ok(Some(f)) => {
                pass &= f.pass && f.max_relative_error < FIBRATION_TOL && f.samples == 100;
                details.push(format!(
                    "'{word}': s*n = {}, max relative error {:.1e}",
                    f.expected, f.max_relative_error
                ));
            }
            other => {
                pass = false;
                details.push(format!("'{word}': {other:?}"));
            }
        }
    }
    outcome(pass, details.join("; "))
}

fn reextraction() -> Outcome {
    let mut bad = Vec::new();
    let mut intervals = 0;
    for w in loop_corpus() {
        let sys = match loop_strand_system(&w, &PipelineConfig::default()) {
            Ok(s) => s,
            Err(e) => {
                bad.push(format!("'{}': {e}", w.to_text()));
                continue;
            }
        };
        match reextract_braid(&sys) {
            Ok(r) => {
                intervals += r.intervals.len();
                if !r.agreement {
                    bad.push(format!("'{}'", w.to_text()));
                }
            }
            Err(e) => bad.push(format!("'{}': {e}", w.to_text())),
        }
    }
    outcome(
        bad.is_empty(),
        format!(
            "20 words, {intervals} intervals, mismatches: {}",
            if bad.is_empty() {
                "none".into()
            } else {
                bad.join("; ")
            }
        ),
    )
}

fn random_sparse(rng: &mut ChaCha8Rng, vars: &[Var]) -> LaurentPoly {
    let terms: Vec<(Vec<i16>, Complex64)> = (0..rng.gen_range(1..8))
        .map(|_| {
            let e = vars
                .iter()
                .map(|v| {
                    if v.allows_negative() {
                        rng.gen_range(-3..=3)
                    } else {
                        rng.gen_range(0..=3)
                    }
                })
                .collect();
            (
                e,
                Complex64::new(rng.gen_range(-5..=5) as f64, rng.gen_range(-5..=5) as f64),
            )
        })
        .collect();
    LaurentPoly::from_terms(vars, terms)
}

fn term_map(p: &LaurentPoly, vars: &[Var]) -> BTreeMap<Vec<i16>, Complex64> {
    let idx: Vec<Option<usize>> = vars.iter().map(|v| p.var_index(*v)).collect();
    p.terms()
        .map(|(e, c)| (idx.iter().map(|i| i.map_or(0, |i| e[i])).collect(), c))
        .collect()
}

fn oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let vars = [Var::X, Var::Y, Var::Eit];

    // products against schoolbook expansion
    let mut mul_mismatch = 0;
    for _ in 0..100 {
        let (a, b) = (
            random_sparse(&mut rng, &vars),
            random_sparse(&mut rng, &vars),
        );
        let mut naive: BTreeMap<Vec<i16>, Complex64> = BTreeMap::new();
        for (ea, ca) in term_map(&a, &vars) {
            for (eb, cb) in term_map(&b, &vars) {
                let e: Vec<i16> = ea.iter().zip(&eb).map(|(x, y)| x + y).collect();
                *naive.entry(e).or_default() += ca * cb;
            }
        }
        naive.retain(|_, c| *c != Complex64::new(0.0, 0.0));
        let prod = a.mul(&b).expect("product");
        if term_map(&prod, &vars) != naive {
            mul_mismatch += 1;
        }
    }

    // interpolation against a dense SVD solve in the same basis
    let mut interp_err = 0.0f64;
    for n in 1..=9usize {
        for _ in 0..5 {
            let mut t: Vec<f64> = Vec::new();
            while t.len() < n {
                let c = rng.gen_range(0.0..TAU);
                if t.iter()
                    .all(|s: &f64| (s - c).abs() > 0.2 && (TAU - (s - c).abs()) > 0.2)
                {
                    t.push(c);
                }
            }
            let y: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let nodes: Vec<(f64, f64)> = t.iter().copied().zip(y.iter().copied()).collect();
            let p = interpolate(&nodes).expect("well separated nodes");
            let m = n / 2;
            let t0 = t[0];
            let basis = |s: f64, col: usize| -> f64 {
                if col == 0 {
                    return 1.0;
                }
                let k = col.div_ceil(2);
                match (n % 2 == 0 && k == m, col % 2) {
                    (true, _) => (k as f64 * (s - t0)).cos(),
                    (false, 1) => (k as f64 * s).cos(),
                    _ => (k as f64 * s).sin(),
                }
            };
            let a = DMatrix::from_fn(n, n, |r, c| basis(t[r], c));
            let x = a
                .svd(true, true)
                .solve(&DVector::from_vec(y.clone()), 1e-14)
                .unwrap();
            for k in 0..64 {
                let s = TAU * k as f64 / 64.0;
                let oracle: f64 = (0..n).map(|c| x[c] * basis(s, c)).sum();
                interp_err = interp_err.max((oracle - p.eval(s)).abs());
            }
        }
    }

    // symbolic partials against central differences
    let mut fd_err = 0.0f64;
    for _ in 0..50 {
        let p = random_sparse(&mut rng, &vars);
        let x: Vec<f64> = vars.iter().map(|_| rng.gen_range(0.5..1.5)).collect();
        let at = |x: &[f64]| {
            p.eval_with(
                &vars
                    .iter()
                    .zip(x)
                    .map(|(v, &a)| (*v, Complex64::new(a, 0.0)))
                    .collect::<Vec<_>>(),
            )
            .unwrap()
        };
        for (i, v) in vars.iter().enumerate() {
            let d = p.derivative(*v);
            let exact = d
                .eval_with(
                    &vars
                        .iter()
                        .zip(&x)
                        .map(|(v, &a)| (*v, Complex64::new(a, 0.0)))
                        .collect::<Vec<_>>(),
                )
                .unwrap();
            let h = 1e-6;
            let (mut xp, mut xm) = (x.clone(), x.clone());
            xp[i] += h;
            xm[i] -= h;
            let fd = (at(&xp) - at(&xm)) / (2.0 * h);
            fd_err = fd_err.max((fd - exact).norm() / (1.0 + exact.norm()));
        }
    }

    outcome(
        mul_mismatch == 0 && interp_err < INTERP_ORACLE_TOL && fd_err < PARTIALS_TOL,
        format!(
            "product mismatches {mul_mismatch}/100, interpolation vs dense solve {interp_err:.2e}, \
             partials vs central differences {fd_err:.2e}"
        ),
    )
}

fn main() {
    let criteria: [(&str, Duration, fn() -> Outcome); 11] = [
        (
            "Hermite interpolation golden",
            Duration::from_secs(1),
            hermite_golden,
        ),
        (
            "Lagrange interpolation golden",
            Duration::from_secs(1),
            lagrange_golden,
        ),
        (
            "Whitehead x interpolation",
            Duration::from_secs(1),
            whitehead_f,
        ),
        (
            "G interpolation with reference nodes",
            Duration::from_secs(1),
            g_golden,
        ),
        (
            "ring scaling threshold",
            Duration::from_secs(1),
            epsilon_threshold,
        ),
        (
            "degree bound of the loop example",
            Duration::from_secs(30),
            degree_bound_example,
        ),
        (
            "vanishing by construction",
            Duration::from_secs(300),
            vanishing_suite,
        ),
        ("vector field", Duration::from_secs(120), vector_field_suite),
        ("spinning fibration", Duration::from_secs(60), fibration),
        ("re-extraction", Duration::from_secs(120), reextraction),
        ("oracle equivalence", Duration::from_secs(60), oracles),
    ];
    let mut failed = 0;
    for (i, (name, budget, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let o = run();
        let elapsed = start.elapsed();
        let in_time = elapsed <= *budget;
        let pass = o.pass && in_time;
        if !pass {
            failed += 1;
        }
        println!(
            "criterion {:>2} {} {name}: {} [{:.2} s of {} s]",
            i + 1,
            if pass { "PASS" } else { "FAIL" },
            o.detail,
            elapsed.as_secs_f64(),
            budget.as_secs()
        );
    }
    println!(
        "acceptance: {} of {} criteria pass",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
