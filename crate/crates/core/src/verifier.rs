//! Numeric evidence for constructions: scale selection, slice zeros on
//! `|v| = r`, extra-component scans, braid re-extraction and the fibration
//! check for spinning braids.
//!
//! Nothing here is a proof. Every check samples and reports margins.

use std::collections::BTreeSet;
use std::f64::consts::TAU;

use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::braid_words::{
    parse_classical_word, parse_loop_word, BraidWord, GeneratorKind, LoopBraidWord,
};
use crate::constructors::{strand_points, Algorithm, ConstructionResult};
use crate::poly_algebra::{LaurentPoly, SpatialPoly, Var};
use crate::strand_param::{periodic_roots, StrandLabel, StrandSystem};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VerifyError {
    #[error("construction has no strand system to seed from")]
    NoStrandSystem,
    #[error("ring tracking fails at r = {radius:.4} (t = {time:.4}); admissible band is below the floor {floor}")]
    DeltaBelowFloor { radius: f64, time: f64, floor: f64 },
    #[error("no admissible scale: tracked rings reach |p| = {0:.3e}")]
    NoAdmissibleLambda(f64),
    #[error("checks of this kind need a {0} construction")]
    WrongAlgorithm(&'static str),
    #[error("ambiguous crossing in interval {interval}: {reason}")]
    Ambiguous { interval: usize, reason: String },
    #[error("root finder failed: {0}")]
    RootFinder(String),
    #[error("stored word does not parse: {0}")]
    Word(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VerifierConfig {
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    /// Smallest singular value of the 3×3 slice Jacobian allowed on a tracked ring.
    pub regularity_floor: f64,
    /// `|f|` allowed at a tracked point.
    pub vanish_tol: f64,
    pub delta_floor: f64,
    /// Continuation never goes below this radius.
    pub r_min: f64,
    pub continuation_step: f64,
    pub bisection_iters: usize,
    pub t_samples: usize,
    pub ring_samples: usize,
    pub grid: usize,
    /// Times at which the grid scan runs.
    pub grid_times: usize,
    /// `λ` is chosen with `λ·M(1, 1-δ) < margin·√(δ(2-δ))`.
    pub containment_margin: f64,
    pub lambda_max: f64,
    pub fibration_samples: usize,
    pub fibration_tol: f64,
    pub seed: u64,
}

impl Default for VerifierConfig {
    fn default() -> Self {
        VerifierConfig {
            newton_tol: 1e-12,
            newton_max_iter: 50,
            regularity_floor: 1e-6,
            vanish_tol: 1e-8,
            delta_floor: 0.05,
            r_min: 0.5,
            continuation_step: 1e-2,
            bisection_iters: 20,
            t_samples: 256,
            ring_samples: 64,
            grid: 32,
            grid_times: 8,
            containment_margin: 0.9,
            lambda_max: 1.0,
            fibration_samples: 100,
            fibration_tol: 1e-6,
            seed: 0,
        }
    }
}

// ---- slices ----

/// `f(·, r e^{it})` for one `t`, as a polynomial in `r` with spatial coefficients.
pub struct SliceFamily {
    /// `(k, P_k)`: `f = Σ r^k P_k(x, y, z)`.
    powers: Vec<(i32, SpatialPoly)>,
}

impl SliceFamily {
    pub fn new(f: &LaurentPoly, t: f64) -> SliceFamily {
        let iv = f.var_index(Var::V);
        let ib = f.var_index(Var::Vbar);
        let mut ks: BTreeSet<i32> = BTreeSet::new();
        for (e, _) in f.terms() {
            ks.insert(iv.map_or(0, |i| e[i] as i32) + ib.map_or(0, |i| e[i] as i32));
        }
        let powers = ks
            .into_iter()
            .map(|k| {
                let p = f
                    .to_spatial(|e| {
                        let a = iv.map_or(0, |i| e[i] as i32);
                        let b = ib.map_or(0, |i| e[i] as i32);
                        if a + b == k {
                            Complex64::from_polar(1.0, (a - b) as f64 * t)
                        } else {
                            Complex64::new(0.0, 0.0)
                        }
                    })
                    .expect("slice polynomial has nonnegative spatial exponents");
                (k, p)
            })
            .collect();
        SliceFamily { powers }
    }

    pub fn at(&self, r: f64) -> SpatialPoly {
        self.powers
            .iter()
            .fold(SpatialPoly::default(), |acc, (k, p)| {
                acc.add_scaled(p, Complex64::new(r.powi(*k), 0.0))
            })
    }
}

/// Where to look for a zero: near `point`, on the half-plane through `center`
/// at angle `angle` around the vertical.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Seed {
    pub label: StrandLabel,
    pub point: [f64; 3],
    pub center: [f64; 3],
    pub angle: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedResult {
    pub point: [f64; 3],
    pub residual: f64,
    /// Smallest singular value of the Jacobian of `(Re f, Im f, ray)`.
    pub margin: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn newton_system(p: &SpatialPoly, seed: &Seed, x: [f64; 3]) -> (Vector3<f64>, Matrix3<f64>) {
    let (v, g) = p.eval_grad(x);
    let n = [-seed.angle.sin(), seed.angle.cos(), 0.0];
    let ray = n[0] * (x[0] - seed.center[0]) + n[1] * (x[1] - seed.center[1]);
    let rhs = Vector3::new(v.re, v.im, ray);
    let jac = Matrix3::new(
        g[0].re, g[1].re, g[2].re, g[0].im, g[1].im, g[2].im, n[0], n[1], n[2],
    );
    (rhs, jac)
}

fn min_singular(m: &Matrix3<f64>) -> f64 {
    m.singular_values()
        .iter()
        .fold(f64::INFINITY, |a, &b| a.min(b))
}

/// Damped Newton on `(Re f, Im f, ray constraint)` from `start`.
pub fn refine_seed(
    p: &SpatialPoly,
    seed: &Seed,
    start: [f64; 3],
    config: &VerifierConfig,
) -> SeedResult {
    let mut x = start;
    let (mut rhs, mut jac) = newton_system(p, seed, x);
    let mut iterations = 0;
    let mut converged = false;
    let scale = 1.0 + x.iter().map(|c| c.abs()).fold(0.0, f64::max);
    while iterations < config.newton_max_iter {
        iterations += 1;
        let Some(step) = jac.lu().solve(&rhs) else {
            break;
        };
        let norm = rhs.norm();
        let mut damp = 1.0;
        let mut accepted = false;
        for _ in 0..12 {
            let trial = [
                x[0] - damp * step[0],
                x[1] - damp * step[1],
                x[2] - damp * step[2],
            ];
            let (r2, j2) = newton_system(p, seed, trial);
            if r2.norm() <= norm || damp < 1e-3 {
                x = trial;
                rhs = r2;
                jac = j2;
                accepted = true;
                break;
            }
            damp *= 0.5;
        }
        if !accepted {
            break;
        }
        if damp * step.norm() <= config.newton_tol * scale {
            converged = true;
            break;
        }
    }
    let residual = Complex64::new(rhs[0], rhs[1]).norm();
    SeedResult {
        point: x,
        residual,
        margin: min_singular(&jac),
        iterations,
        converged: converged || residual == 0.0,
    }
}

/// Refine every seed on the slice `v = r e^{it}` of `f`.
pub fn slice_zeroes(
    f: &LaurentPoly,
    t: f64,
    r: f64,
    seeds: &[Seed],
    config: &VerifierConfig,
) -> Vec<SeedResult> {
    let p = SliceFamily::new(f, t).at(r);
    seeds
        .par_iter()
        .map(|s| refine_seed(&p, s, s.point, config))
        .collect()
}

/// Seeds from the parametrized strands of `result` at time `t`.
pub fn seeds_at(result: &ConstructionResult, t: f64, per_strand: usize) -> Vec<Seed> {
    let Some(system) = &result.system else {
        return Vec::new();
    };
    let lambda = result.lambda;
    strand_points(result, t, per_strand)
        .into_iter()
        .flat_map(|(label, pts)| {
            let c = system.center(label, t);
            let center = [lambda * c[0], lambda * c[1], lambda * c[2]];
            pts.into_iter().map(move |p| Seed {
                label,
                point: p,
                center,
                angle: (p[1] - center[1]).atan2(p[0] - center[0]),
            })
        })
        .collect()
}

// ---- tracking ----

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadiusSample {
    pub r: f64,
    /// Largest `|p|` over tracked points: `M(λ, r)` for the construction's `λ`.
    pub max_norm: f64,
    pub max_residual: f64,
    pub min_margin: f64,
    /// Smallest distance between points of different strands.
    pub min_separation: f64,
    pub failed_seeds: usize,
    pub points: usize,
}

#[derive(Clone, Debug)]
struct TimeTrack {
    /// Last radius with a valid tracked configuration.
    last_ok: f64,
    failure: Option<f64>,
    samples: Vec<RadiusSample>,
}

struct StepOutcome {
    points: Vec<SeedResult>,
    ok: bool,
}

fn step_to(
    family: &SliceFamily,
    seeds: &[Seed],
    from: &[[f64; 3]],
    r: f64,
    jump: f64,
    config: &VerifierConfig,
) -> StepOutcome {
    let p = family.at(r);
    let points: Vec<SeedResult> = seeds
        .iter()
        .zip(from)
        .map(|(s, x)| refine_seed(&p, s, *x, config))
        .collect();
    let ok = points.iter().zip(from).all(|(res, x)| {
        let moved = ((res.point[0] - x[0]).powi(2)
            + (res.point[1] - x[1]).powi(2)
            + (res.point[2] - x[2]).powi(2))
        .sqrt();
        res.converged
            && res.residual <= config.vanish_tol
            && res.margin >= config.regularity_floor
            && moved <= jump
    }) && separation(seeds, &points) > 0.0;
    StepOutcome { points, ok }
}

fn separation(seeds: &[Seed], points: &[SeedResult]) -> f64 {
    let mut best = f64::INFINITY;
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            if seeds[i].label == seeds[j].label {
                continue;
            }
            let d = (0..3)
                .map(|k| (points[i].point[k] - points[j].point[k]).powi(2))
                .sum::<f64>()
                .sqrt();
            best = best.min(d);
        }
    }
    if best < 1e-9 {
        0.0
    } else {
        best
    }
}

fn sample_of(
    r: f64,
    seeds: &[Seed],
    points: &[SeedResult],
    config: &VerifierConfig,
) -> RadiusSample {
    RadiusSample {
        r,
        max_norm: points
            .iter()
            .map(|p| p.point.iter().map(|c| c * c).sum::<f64>().sqrt())
            .fold(0.0, f64::max),
        max_residual: points.iter().map(|p| p.residual).fold(0.0, f64::max),
        min_margin: points
            .iter()
            .map(|p| p.margin)
            .fold(f64::INFINITY, f64::min),
        min_separation: separation(seeds, points),
        failed_seeds: points
            .iter()
            .filter(|p| {
                !(p.converged
                    && p.residual <= config.vanish_tol
                    && p.margin >= config.regularity_floor)
            })
            .count(),
        points: points.len(),
    }
}

/// Continue the rings from `r = 1` down to `stop`, recording the requested radii.
fn track_time(
    result: &ConstructionResult,
    t: f64,
    per_strand: usize,
    stop: f64,
    checkpoints: &[f64],
    config: &VerifierConfig,
) -> TimeTrack {
    let seeds = seeds_at(result, t, per_strand);
    let family = SliceFamily::new(&result.f, t);
    let jump = jump_limit(result, t);
    let start = family.at(1.0);
    let mut current: Vec<SeedResult> = seeds
        .iter()
        .map(|s| refine_seed(&start, s, s.point, config))
        .collect();
    let mut samples = Vec::new();
    let mut pending: Vec<f64> = checkpoints.to_vec();
    pending.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut r = 1.0;
    if pending.first().is_some_and(|&c| c >= 1.0) {
        samples.push(sample_of(1.0, &seeds, &current, config));
        pending.remove(0);
    }
    let initial_ok = current.iter().all(|p| {
        p.converged && p.residual <= config.vanish_tol && p.margin >= config.regularity_floor
    }) && separation(&seeds, &current) > 0.0;
    if !initial_ok {
        return TimeTrack {
            last_ok: 1.0,
            failure: Some(1.0),
            samples,
        };
    }
    let min_step = config.continuation_step / 64.0;
    let mut h = config.continuation_step;
    while r > stop + 1e-15 {
        let next_stop = pending
            .first()
            .copied()
            .filter(|&c| c > stop)
            .unwrap_or(stop);
        let target = (r - h).max(next_stop);
        let from: Vec<[f64; 3]> = current.iter().map(|p| p.point).collect();
        let outcome = step_to(&family, &seeds, &from, target, jump, config);
        if outcome.ok {
            current = outcome.points;
            r = target;
            if pending.first().is_some_and(|&c| (c - r).abs() < 1e-15) {
                samples.push(sample_of(r, &seeds, &current, config));
                pending.remove(0);
            }
            h = (h * 2.0).min(config.continuation_step);
            continue;
        }
        if h > min_step {
            h *= 0.5;
            continue;
        }
        // locate the failure radius inside the last step
        let (mut good, mut bad) = (r, target);
        let from: Vec<[f64; 3]> = current.iter().map(|p| p.point).collect();
        for _ in 0..config.bisection_iters {
            let mid = 0.5 * (good + bad);
            if step_to(&family, &seeds, &from, mid, jump, config).ok {
                good = mid;
            } else {
                bad = mid;
            }
        }
        return TimeTrack {
            last_ok: good,
            failure: Some(bad),
            samples,
        };
    }
    TimeTrack {
        last_ok: r,
        failure: None,
        samples,
    }
}

/// Largest allowed movement of a tracked point per step.
fn jump_limit(result: &ConstructionResult, t: f64) -> f64 {
    let Some(system) = &result.system else {
        return f64::INFINITY;
    };
    let r = system
        .labels()
        .iter()
        .map(|&l| system.radius(l, t))
        .fold(f64::INFINITY, f64::min);
    let pattern = if result.satellites.is_some() {
        0.25
    } else {
        1.0
    };
    0.25 * pattern * result.lambda * r.max(1e-6)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LambdaSelection {
    pub lambda: f64,
    pub delta: f64,
    /// `M(1, 1-δ)` estimated from tracked rings.
    pub m_unit: f64,
    /// `√(δ(2-δ))`.
    pub containment_radius: f64,
    /// Radius and time where tracking first failed, if it did before `r_min`.
    pub failure: Option<(f64, f64)>,
}

/// Largest `δ` for which the rings track from `r = 1`, then the scale.
pub fn select_lambda(
    result: &ConstructionResult,
    config: &VerifierConfig,
) -> Result<LambdaSelection, VerifyError> {
    let (delta, failure) = find_delta(result, config)?;
    let r = 1.0 - delta;
    let m = (0..config.t_samples)
        .into_par_iter()
        .map(|k| {
            let t = TAU * k as f64 / config.t_samples as f64;
            let tr = track_time(result, t, config.ring_samples, r, &[r], config);
            tr.samples.last().map_or(f64::INFINITY, |s| s.max_norm)
        })
        .reduce(|| 0.0, f64::max);
    let m_unit = m / result.lambda;
    let containment_radius = (delta * (2.0 - delta)).sqrt();
    if !(m_unit.is_finite() && m_unit > 0.0) {
        return Err(VerifyError::NoAdmissibleLambda(m_unit));
    }
    let lambda =
        (0.99 * config.containment_margin * containment_radius / m_unit).min(config.lambda_max);
    Ok(LambdaSelection {
        lambda,
        delta,
        m_unit,
        containment_radius,
        failure,
    })
}

type Failure = Option<(f64, f64)>;

fn find_delta(
    result: &ConstructionResult,
    config: &VerifierConfig,
) -> Result<(f64, Failure), VerifyError> {
    if result.system.is_none() {
        return Err(VerifyError::NoStrandSystem);
    }
    let tracks: Vec<(f64, TimeTrack)> = (0..config.t_samples)
        .into_par_iter()
        .map(|k| {
            let t = TAU * k as f64 / config.t_samples as f64;
            (
                t,
                track_time(result, t, config.ring_samples, config.r_min, &[], config),
            )
        })
        .collect();
    let mut worst = (config.r_min, None);
    for (t, tr) in &tracks {
        if let Some(fail) = tr.failure {
            if tr.last_ok > worst.0 {
                worst = (tr.last_ok, Some((fail, *t)));
            }
        }
    }
    // half the tracked band when tracking failed, so finer sampling at the
    // checkpoints stays inside it
    let delta = if worst.1.is_some() {
        0.5 * (1.0 - worst.0)
    } else {
        1.0 - config.r_min
    };
    if delta < config.delta_floor {
        let (radius, time) = worst.1.unwrap_or((worst.0, 0.0));
        return Err(VerifyError::DeltaBelowFloor {
            radius,
            time,
            floor: config.delta_floor,
        });
    }
    Ok((delta, worst.1))
}

/// `M(λ, r)`: largest `|p|` over tracked ring points on `v = r e^{it}`.
pub fn max_norm(result: &ConstructionResult, r: f64, config: &VerifierConfig) -> f64 {
    (0..config.t_samples)
        .into_par_iter()
        .map(|k| {
            let t = TAU * k as f64 / config.t_samples as f64;
            let tr = track_time(result, t, config.ring_samples, r, &[r], config);
            tr.samples.last().map_or(f64::INFINITY, |s| s.max_norm)
        })
        .reduce(|| 0.0, f64::max)
}

// ---- grid scan ----

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridScan {
    pub r: f64,
    pub half_width: f64,
    pub grid: usize,
    /// Zeros that no tracked strand accounts for, as `(t, point)`.
    pub unmatched: Vec<(f64, [f64; 3])>,
    pub matched: usize,
}

/// Coarse scan of the box `[-w, w]³` on `v = r e^{it}` for zeros away from the
/// tracked strands. Candidates are local minima of `|f|` on the grid refined
/// by Gauss-Newton.
pub fn grid_scan(
    result: &ConstructionResult,
    r: f64,
    half_width: f64,
    config: &VerifierConfig,
) -> GridScan {
    let n = config.grid.max(4);
    let h = 2.0 * half_width / (n - 1) as f64;
    let per_time: Vec<(usize, Vec<(f64, [f64; 3])>)> = (0..config.grid_times)
        .into_par_iter()
        .map(|k| {
            let t = TAU * (k as f64 + 0.5) / config.grid_times as f64;
            let p = SliceFamily::new(&result.f, t).at(r);
            let tracked = tracked_points(result, t, r, config);
            let coord = |i: usize| -half_width + h * i as f64;
            let mut vals = vec![0.0f64; n * n * n];
            for a in 0..n {
                for b in 0..n {
                    for c in 0..n {
                        vals[(a * n + b) * n + c] = p.eval([coord(a), coord(b), coord(c)]).norm();
                    }
                }
            }
            let mut found: Vec<[f64; 3]> = Vec::new();
            let mut matched = 0;
            for a in 1..n - 1 {
                for b in 1..n - 1 {
                    for c in 1..n - 1 {
                        let v = vals[(a * n + b) * n + c];
                        let is_min = (-1i32..=1).all(|da| {
                            (-1i32..=1).all(|db| {
                                (-1i32..=1).all(|dc| {
                                    let idx = (((a as i32 + da) as usize * n
                                        + (b as i32 + db) as usize)
                                        * n)
                                        + (c as i32 + dc) as usize;
                                    vals[idx] >= v
                                })
                            })
                        });
                        if !is_min {
                            continue;
                        }
                        let Some(z) = gauss_newton(&p, [coord(a), coord(b), coord(c)], config)
                        else {
                            continue;
                        };
                        if z.iter().any(|c| c.abs() > half_width) {
                            continue;
                        }
                        let near = |q: &[f64; 3]| {
                            (0..3).map(|k| (q[k] - z[k]).powi(2)).sum::<f64>().sqrt() < 2.0 * h
                        };
                        if tracked.iter().any(near) {
                            matched += 1;
                        } else if !found.iter().any(near) {
                            found.push(z);
                        }
                    }
                }
            }
            (matched, found.into_iter().map(|z| (t, z)).collect())
        })
        .collect();
    let matched = per_time.iter().map(|p| p.0).sum();
    let unmatched = per_time.into_iter().flat_map(|p| p.1).collect();
    GridScan {
        r,
        half_width,
        grid: n,
        unmatched,
        matched,
    }
}

fn tracked_points(
    result: &ConstructionResult,
    t: f64,
    r: f64,
    config: &VerifierConfig,
) -> Vec<[f64; 3]> {
    // dense ring sampling so that grid minima on a strand are matched
    let seeds = seeds_at(result, t, 4 * config.grid.max(16));
    let family = SliceFamily::new(&result.f, t);
    let jump = jump_limit(result, t);
    let start = family.at(1.0);
    let mut pts: Vec<[f64; 3]> = seeds
        .iter()
        .map(|s| refine_seed(&start, s, s.point, config).point)
        .collect();
    let mut cur = 1.0;
    while cur > r + 1e-15 {
        let next = (cur - config.continuation_step).max(r);
        let out = step_to(&family, &seeds, &pts, next, jump, config);
        pts = out.points.iter().map(|p| p.point).collect();
        cur = next;
    }
    pts
}

/// Minimum-norm Gauss-Newton for `f = 0` (two real equations in three unknowns).
fn gauss_newton(p: &SpatialPoly, start: [f64; 3], config: &VerifierConfig) -> Option<[f64; 3]> {
    let mut x = start;
    for _ in 0..config.newton_max_iter {
        let (v, g) = p.eval_grad(x);
        let j = nalgebra::Matrix2x3::new(g[0].re, g[1].re, g[2].re, g[0].im, g[1].im, g[2].im);
        let jjt = j * j.transpose();
        let rhs = nalgebra::Vector2::new(v.re, v.im);
        let y = jjt.lu().solve(&rhs)?;
        let step = j.transpose() * y;
        for k in 0..3 {
            x[k] -= step[k];
        }
        if step.norm() < 1e-13 * (1.0 + x.iter().map(|c| c.abs()).fold(0.0, f64::max)) {
            break;
        }
    }
    let scale = p.abs_sum(x).max(1e-300);
    (p.eval(x).norm() <= config.vanish_tol.max(1e-10 * scale)).then_some(x)
}

// ---- re-extraction ----

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntervalEvidence {
    pub interval: usize,
    pub expected_index: usize,
    pub expected_kind: GeneratorKind,
    pub expected_sign: i8,
    /// Adjacent positions swapped between the interval ends, if exactly one pair is.
    pub transposition: Option<(usize, usize)>,
    pub kind: Option<GeneratorKind>,
    pub sign: Option<i8>,
    pub crossings: usize,
    pub matches: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Reextraction {
    pub intervals: Vec<IntervalEvidence>,
    pub agreement: bool,
}

/// Recover per-interval transpositions, crossing kinds and signs from the
/// strand parametrization alone and compare them with the stored word.
pub fn reextract_braid(system: &StrandSystem) -> Result<Reextraction, VerifyError> {
    let word_err = |e: crate::braid_words::BraidError| VerifyError::Word(e.to_string());
    // classical crossings are read like exchange moves, keeping their over/under sign
    let (word, signs): (LoopBraidWord, Vec<i8>) = if system.is_loop() {
        let w = parse_loop_word(&system.word, system.strand_count).map_err(word_err)?;
        let signs = w.crossing_signs();
        (w, signs)
    } else {
        let w = parse_classical_word(&system.word, system.strand_count).map_err(word_err)?;
        (w.to_loop_word(), w.crossing_signs())
    };
    let len = word.len();
    let labels = system.labels();
    let indices = word.generator_indices();
    let kinds = word
        .kinds()
        .unwrap_or_else(|| vec![GeneratorKind::Rho; len]);

    let order_at = |t: f64| -> Vec<StrandLabel> {
        let mut l = labels.clone();
        // diagram position 1 has the largest x under the default lane direction
        let dir = match system.config.lane_direction {
            crate::strand_param::LaneDirection::Descending => -1.0,
            crate::strand_param::LaneDirection::Ascending => 1.0,
        };
        l.sort_by(|a, b| {
            (dir * system.x(*a, t))
                .partial_cmp(&(dir * system.x(*b, t)))
                .unwrap()
        });
        l
    };

    // all x-crossings of all pairs, once
    let mut crossings: Vec<(f64, StrandLabel, StrandLabel)> = Vec::new();
    for (i, &a) in labels.iter().enumerate() {
        for &b in &labels[i + 1..] {
            let diff = |t: f64| system.x(a, t) - system.x(b, t);
            let roots = periodic_roots(
                &diff,
                system.config.samples,
                1e-12,
                system.config.tangency_tol,
            )
            .map_err(|t| VerifyError::Ambiguous {
                interval: interval_of(t, len),
                reason: format!("tangential x-crossing of {a} and {b}"),
            })?;
            crossings.extend(roots.into_iter().map(|t| (t, a, b)));
        }
    }

    let mut intervals = Vec::with_capacity(len);
    for k in 0..len {
        let t0 = TAU * k as f64 / len as f64;
        let t1 = TAU * (k + 1) as f64 / len as f64;
        let before = order_at(t0 + 1e-9);
        let after = order_at(t1 - 1e-9);
        let moved: Vec<usize> = (0..before.len())
            .filter(|&p| before[p] != after[p])
            .collect();
        let transposition =
            (moved.len() == 2 && moved[1] == moved[0] + 1 && before[moved[0]] == after[moved[1]])
                .then(|| (moved[0] + 1, moved[1] + 1));
        let (mut kind, mut sign) = (None, None);
        let mut count = 0;
        if let Some((i, _)) = transposition {
            let (a, b) = (before[i - 1], before[i]);
            let pair: Vec<f64> = crossings
                .iter()
                .filter(|(t, p, q)| {
                    *t >= t0 && *t < t1 && ((*p == a && *q == b) || (*p == b && *q == a))
                })
                .map(|c| c.0)
                .collect();
            count = pair.len();
            let tol = 1e-6;
            let pass = pair.iter().copied().find(|&t| {
                (system.y(a, t) - system.y(b, t)).abs() < tol
                    && (system.z(a, t) - system.z(b, t)).abs() < tol
                    && (system.unscaled_radius(a, t) - system.unscaled_radius(b, t)).abs() > tol
            });
            if let Some(t) = pass {
                kind = Some(GeneratorKind::Sigma);
                let a_inner = system.radius(a, t) < system.radius(b, t);
                let (inner, outer) = if a_inner { (a, b) } else { (b, a) };
                let down = system.z_rate(inner, t) < system.z_rate(outer, t);
                sign = match (a_inner, down) {
                    (true, true) => Some(1),
                    (false, false) => Some(-1),
                    _ => {
                        return Err(VerifyError::Ambiguous {
                            interval: k,
                            reason: "inner strand moves against the nesting order".into(),
                        })
                    }
                };
            } else if !pair.is_empty() {
                kind = Some(GeneratorKind::Rho);
                let over: Vec<bool> = pair
                    .iter()
                    .map(|&t| system.y(a, t) > system.y(b, t))
                    .collect();
                if over.iter().any(|&o| o != over[0]) {
                    return Err(VerifyError::Ambiguous {
                        interval: k,
                        reason: "over/under order changes".into(),
                    });
                }
                sign = Some(if over[0] { 1 } else { -1 });
            }
        }
        let matches = transposition == Some((indices[k], indices[k] + 1))
            && kind == Some(kinds[k])
            && sign == Some(signs[k]);
        intervals.push(IntervalEvidence {
            interval: k,
            expected_index: indices[k],
            expected_kind: kinds[k],
            expected_sign: signs[k],
            transposition,
            kind,
            sign,
            crossings: count,
            matches,
        });
    }
    let agreement = intervals.iter().all(|i| i.matches);
    Ok(Reextraction {
        intervals,
        agreement,
    })
}

fn interval_of(t: f64, len: usize) -> usize {
    ((t * len as f64 / TAU).floor() as usize).min(len.saturating_sub(1))
}

// ---- fibration ----

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FibrationReport {
    pub n: i64,
    pub strands: usize,
    pub expected: f64,
    pub samples: usize,
    /// `∂arg g/∂χ` at every critical point of `g(·, φ, χ)`.
    pub values: Vec<f64>,
    pub max_relative_error: f64,
    pub pass: bool,
}

/// Roots of `Σ c_k u^k` by Durand-Kerner followed by Newton polishing.
pub fn polynomial_roots(coeffs: &[Complex64]) -> Result<Vec<Complex64>, VerifyError> {
    let mut c = coeffs.to_vec();
    while c.len() > 1 && c.last().unwrap().norm() == 0.0 {
        c.pop();
    }
    let deg = c.len() - 1;
    if deg == 0 {
        return Ok(Vec::new());
    }
    let lead = c[deg];
    let monic: Vec<Complex64> = c.iter().map(|x| x / lead).collect();
    let eval = |z: Complex64| {
        monic
            .iter()
            .rev()
            .fold(Complex64::new(0.0, 0.0), |acc, &a| acc * z + a)
    };
    let radius = 1.0 + monic[..deg].iter().map(|x| x.norm()).fold(0.0, f64::max);
    let seed = Complex64::from_polar(0.4 * radius.min(2.0) + 0.5, 0.9);
    let mut roots: Vec<Complex64> = (0..deg).map(|k| seed.powi(k as i32)).collect();
    for _ in 0..2000 {
        let mut delta = 0.0f64;
        for i in 0..deg {
            let mut den = Complex64::new(1.0, 0.0);
            for j in 0..deg {
                if i != j {
                    den *= roots[i] - roots[j];
                }
            }
            if den.norm() == 0.0 {
                den = Complex64::new(1e-12, 0.0);
            }
            let step = eval(roots[i]) / den;
            roots[i] -= step;
            delta = delta.max(step.norm());
        }
        if delta < 1e-15 * radius {
            break;
        }
    }
    let deriv: Vec<Complex64> = (1..=deg).map(|k| monic[k] * k as f64).collect();
    let eval_d = |z: Complex64| {
        deriv
            .iter()
            .rev()
            .fold(Complex64::new(0.0, 0.0), |acc, &a| acc * z + a)
    };
    for r in roots.iter_mut() {
        for _ in 0..5 {
            let d = eval_d(*r);
            if d.norm() == 0.0 {
                break;
            }
            *r -= eval(*r) / d;
        }
    }
    if roots.iter().any(|r| !r.re.is_finite() || !r.im.is_finite()) {
        return Err(VerifyError::RootFinder("non-finite root".into()));
    }
    let worst = roots.iter().map(|&r| eval(r).norm()).fold(0.0, f64::max);
    if worst > 1e-6 * radius.powi(deg as i32) {
        return Err(VerifyError::RootFinder(format!("residual {worst:.3e}")));
    }
    Ok(roots)
}

/// Checks `∂arg g/∂χ = s·n` at the critical points of `g(·, φ, χ)`.
pub fn fibration_check(
    result: &ConstructionResult,
    samples: usize,
    config: &VerifierConfig,
) -> Result<Option<FibrationReport>, VerifyError> {
    if result.algorithm != Algorithm::Spin {
        return Err(VerifyError::WrongAlgorithm("spinning"));
    }
    let n = result.n.unwrap_or(0);
    if n == 0 {
        return Ok(None);
    }
    let s = result.strands;
    let expected = (s as i64 * n) as f64;
    let g = &result.g;
    let dg_chi = g.angle_derivative(Var::Eichi);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut values = Vec::new();
    for _ in 0..samples {
        let phi: f64 = rng.gen_range(0.0..TAU);
        let chi: f64 = rng.gen_range(0.0..TAU);
        let at = [
            (Var::Eit, Complex64::from_polar(1.0, phi)),
            (Var::Eichi, Complex64::from_polar(1.0, chi)),
        ];
        let gu = g.specialize(&at);
        let coeffs = u_coefficients(&gu.derivative(Var::U), s.saturating_sub(1));
        for u in polynomial_roots(&coeffs)? {
            let mut point = at.to_vec();
            point.push((Var::U, u));
            let gv = g
                .eval_with(&point)
                .map_err(|e| VerifyError::RootFinder(e.to_string()))?;
            let dv = dg_chi
                .eval_with(&point)
                .map_err(|e| VerifyError::RootFinder(e.to_string()))?;
            values.push((dv / gv).im);
        }
    }
    let max_relative_error = values
        .iter()
        .map(|v| (v - expected).abs() / expected.abs())
        .fold(0.0, f64::max);
    Ok(Some(FibrationReport {
        n,
        strands: s,
        expected,
        samples,
        pass: max_relative_error <= config.fibration_tol,
        values,
        max_relative_error,
    }))
}

fn u_coefficients(p: &LaurentPoly, degree: usize) -> Vec<Complex64> {
    let mut c = vec![Complex64::new(0.0, 0.0); degree + 1];
    let iu = p.var_index(Var::U);
    for (e, v) in p.terms() {
        let k = iu.map_or(0, |i| e[i] as usize);
        if k <= degree {
            c[k] += v;
        }
    }
    c
}

// ---- report ----

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckName {
    Containment,
    Slices,
    Grid,
    Reextract,
    Fibration,
}

impl std::str::FromStr for CheckName {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "containment" => Ok(CheckName::Containment),
            "slices" => Ok(CheckName::Slices),
            "grid" => Ok(CheckName::Grid),
            "reextract" => Ok(CheckName::Reextract),
            "fibration" => Ok(CheckName::Fibration),
            other => Err(format!(
                "unknown check '{other}' (containment, slices, grid, reextract, fibration)"
            )),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Status {
    Pass,
    Fail,
    Warn,
    Skipped,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub check: CheckName,
    pub status: Status,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub algorithm: Algorithm,
    pub lambda: f64,
    pub delta: Option<f64>,
    pub containment_radius: Option<f64>,
    /// Tracked statistics at `r = 1`, `1-δ/2`, `1-δ`.
    pub radii: Vec<RadiusSample>,
    pub grid: Option<GridScan>,
    pub reextraction: Option<Reextraction>,
    pub fibration: Option<FibrationReport>,
    pub checks: Vec<CheckResult>,
    pub status: Status,
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.status == Status::Pass
    }
}

/// Run every applicable check not listed in `skip`.
pub fn verify(
    result: &ConstructionResult,
    config: &VerifierConfig,
    skip: &BTreeSet<CheckName>,
) -> VerificationReport {
    let mut checks = Vec::new();
    let mut report = VerificationReport {
        algorithm: result.algorithm,
        lambda: result.lambda,
        delta: None,
        containment_radius: None,
        radii: Vec::new(),
        grid: None,
        reextraction: None,
        fibration: None,
        checks: Vec::new(),
        status: Status::Pass,
    };
    let ringed = matches!(
        result.algorithm,
        Algorithm::Loop | Algorithm::Holomorphic | Algorithm::Satellite
    );
    let skipped = |c: CheckName, why: &str, checks: &mut Vec<CheckResult>| {
        checks.push(CheckResult {
            check: c,
            status: Status::Skipped,
            detail: why.to_string(),
        });
    };

    let mut delta = None;
    if ringed && !(skip.contains(&CheckName::Containment) && skip.contains(&CheckName::Slices)) {
        match find_delta(result, config) {
            Ok((d, _)) => delta = Some(d),
            Err(e) => {
                for c in [CheckName::Containment, CheckName::Slices] {
                    if !skip.contains(&c) {
                        checks.push(CheckResult {
                            check: c,
                            status: Status::Fail,
                            detail: e.to_string(),
                        });
                    }
                }
            }
        }
    }
    report.delta = delta;

    if let Some(d) = delta {
        let r_low = 1.0 - d;
        let rho = (d * (2.0 - d)).sqrt();
        report.containment_radius = Some(rho);
        let checkpoints = [1.0, 1.0 - d / 2.0, r_low];
        let tracks: Vec<TimeTrack> = (0..config.t_samples)
            .into_par_iter()
            .map(|k| {
                track_time(
                    result,
                    TAU * k as f64 / config.t_samples as f64,
                    config.ring_samples,
                    r_low,
                    &checkpoints,
                    config,
                )
            })
            .collect();
        report.radii = checkpoints
            .iter()
            .map(|&r| {
                merge_samples(
                    r,
                    tracks
                        .iter()
                        .filter_map(|tr| tr.samples.iter().find(|s| (s.r - r).abs() < 1e-12)),
                )
            })
            .collect();
        let incomplete = tracks
            .iter()
            .filter(|tr| tr.samples.len() < checkpoints.len())
            .count();
        if !skip.contains(&CheckName::Slices) {
            let bad = report
                .radii
                .iter()
                .find(|s| s.failed_seeds > 0 || s.min_separation <= 0.0);
            let (status, detail) = if incomplete > 0 {
                (
                    Status::Fail,
                    format!(
                        "ring tracking stopped early at {incomplete} of {} times",
                        config.t_samples
                    ),
                )
            } else if let Some(s) = bad {
                (
                    Status::Fail,
                    format!(
                        "r = {:.4}: {} seeds failed, separation {:.3e}",
                        s.r, s.failed_seeds, s.min_separation
                    ),
                )
            } else {
                let worst = report
                    .radii
                    .iter()
                    .map(|s| s.max_residual)
                    .fold(0.0, f64::max);
                let margin = report
                    .radii
                    .iter()
                    .map(|s| s.min_margin)
                    .fold(f64::INFINITY, f64::min);
                (
                    Status::Pass,
                    format!("max |f| = {worst:.3e}, min regularity margin = {margin:.3e}"),
                )
            };
            checks.push(CheckResult {
                check: CheckName::Slices,
                status,
                detail,
            });
        }
        if !skip.contains(&CheckName::Containment) {
            let m = report.radii.last().map_or(f64::INFINITY, |s| s.max_norm);
            let status = if m < rho && incomplete == 0 {
                Status::Pass
            } else {
                Status::Fail
            };
            let detail = format!(
                "M(lambda, 1-delta) = {m:.6} vs sqrt(delta(2-delta)) = {rho:.6} (delta = {d:.4})"
            );
            checks.push(CheckResult {
                check: CheckName::Containment,
                status,
                detail,
            });
        }
        if !skip.contains(&CheckName::Grid) {
            let scan = grid_scan(result, r_low, 1.0, config);
            let status = if scan.unmatched.is_empty() {
                Status::Pass
            } else {
                Status::Warn
            };
            let detail = format!(
                "{} zeros off the tracked strands in the unit box at r = {r_low:.4}",
                scan.unmatched.len()
            );
            checks.push(CheckResult {
                check: CheckName::Grid,
                status,
                detail,
            });
            report.grid = Some(scan);
        }
    } else if !ringed {
        for c in [CheckName::Containment, CheckName::Slices, CheckName::Grid] {
            if !skip.contains(&c) {
                skipped(c, "needs a loop construction", &mut checks);
            }
        }
    } else if !skip.contains(&CheckName::Grid) {
        skipped(CheckName::Grid, "no admissible band", &mut checks);
    }

    if !skip.contains(&CheckName::Reextract) {
        match &result.system {
            None => skipped(CheckName::Reextract, "no strand system", &mut checks),
            Some(system) => match reextract_braid(system) {
                Ok(r) => {
                    let bad = r.intervals.iter().filter(|i| !i.matches).count();
                    let status = if r.agreement {
                        Status::Pass
                    } else {
                        Status::Fail
                    };
                    checks.push(CheckResult {
                        check: CheckName::Reextract,
                        status,
                        detail: format!(
                            "{} of {} intervals match the word",
                            r.intervals.len() - bad,
                            r.intervals.len()
                        ),
                    });
                    report.reextraction = Some(r);
                }
                Err(e) => checks.push(CheckResult {
                    check: CheckName::Reextract,
                    status: Status::Fail,
                    detail: e.to_string(),
                }),
            },
        }
    }

    if !skip.contains(&CheckName::Fibration) {
        if result.algorithm != Algorithm::Spin {
            skipped(
                CheckName::Fibration,
                "needs a spinning construction",
                &mut checks,
            );
        } else {
            match fibration_check(result, config.fibration_samples, config) {
                Ok(None) => skipped(
                    CheckName::Fibration,
                    "n = 0: no fibration claim",
                    &mut checks,
                ),
                Ok(Some(f)) => {
                    checks.push(CheckResult {
                        check: CheckName::Fibration,
                        status: if f.pass { Status::Pass } else { Status::Fail },
                        detail: format!(
                            "max relative error {:.3e} against s*n = {}",
                            f.max_relative_error, f.expected
                        ),
                    });
                    report.fibration = Some(f);
                }
                Err(e) => checks.push(CheckResult {
                    check: CheckName::Fibration,
                    status: Status::Fail,
                    detail: e.to_string(),
                }),
            }
        }
    }

    for &c in skip {
        skipped(c, "skipped on request", &mut checks);
    }
    report.status = if checks.iter().any(|c| c.status == Status::Fail) {
        Status::Fail
    } else {
        Status::Pass
    };
    report.checks = checks;
    report
}

fn merge_samples<'a>(r: f64, it: impl Iterator<Item = &'a RadiusSample>) -> RadiusSample {
    it.fold(
        RadiusSample {
            r,
            max_norm: 0.0,
            max_residual: 0.0,
            min_margin: f64::INFINITY,
            min_separation: f64::INFINITY,
            failed_seeds: 0,
            points: 0,
        },
        |acc, s| RadiusSample {
            r,
            max_norm: acc.max_norm.max(s.max_norm),
            max_residual: acc.max_residual.max(s.max_residual),
            min_margin: acc.min_margin.min(s.min_margin),
            min_separation: acc.min_separation.min(s.min_separation),
            failed_seeds: acc.failed_seeds + s.failed_seeds,
            points: acc.points + s.points,
        },
    )
}
