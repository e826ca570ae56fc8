//! Polynomial constructions from strand parametrizations.
//!
//! Every builder first forms `g` as a product of one factor per strand with
//! the time harmonics kept explicit (`Var::Eit`, and `Var::Eichi` for the
//! second torus angle), then substitutes the harmonics to obtain `f`.
//!
//! Strand `j` of a component with `s` strands depends on `(t + 2πj)/s`. The
//! product over `j` is formed in `q = e^{it/s}` where strand `j` carries the
//! extra factor `ω^{hj}`, `ω = e^{2πi/s}`, on harmonic `h`; after the product
//! only multiples of `s` survive and exponents are divided by `s`.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::braid_words::{
    position_schedule, strand_components, BraidWord, ClassicalBraidWord, GeneratorKind,
    LoopBraidWord,
};
use crate::poly_algebra::{
    clear_harmonic, stereographic3_inverse, stereographic3_pullback, subst_holomorphic,
    subst_unit_circle, DegreeReport, Holomorphic, LaurentPoly, PolyError, Var,
};
use crate::strand_param::{
    classical_strand_system, loop_strand_system, PipelineConfig, StrandError, StrandLabel,
    StrandSystem,
};
use crate::trig_interp::{TorusTrigPoly, TrigPoly};
use crate::verifier::{select_lambda, VerifierConfig, VerifyError};

/// Relative size of non-integral harmonics tolerated after a strand product.
const HARMONIC_TOL: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BuildError {
    #[error(transparent)]
    Pipeline(#[from] StrandError),
    #[error("[expand] {0}")]
    Poly(#[from] PolyError),
    #[error("[lambda] {0}")]
    Lambda(#[from] VerifyError),
    #[error("[torus] strands {a:?} and {b:?} collide near (φ, χ) = ({phi:.4}, {chi:.4})")]
    StrandCollision {
        a: (usize, usize, usize),
        b: (usize, usize, usize),
        phi: f64,
        chi: f64,
    },
    #[error("[satellite] expected {expected} satellite patterns, got {got}")]
    PatternCount { expected: usize, got: usize },
    #[error("[lambda] scale must be positive and finite, got {0}")]
    BadLambda(f64),
    #[error("[satellite] pattern word: {0}")]
    Pattern(#[from] crate::braid_words::BraidError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Classical,
    Loop,
    Holomorphic,
    Spin,
    Torus,
    Satellite,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
#[derive(Default)]
pub enum LambdaChoice {
    #[default]
    Auto,
    Value(f64),
}

#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct BuildConfig {
    pub pipeline: PipelineConfig,
    pub verifier: VerifierConfig,
    /// Scale used for the classical pattern polynomials of satellite builds.
    pub pattern_lambda: Option<f64>,
}

/// Satellite pattern placed on every ring of one component.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SatellitePattern {
    /// Plain ring.
    Trivial,
    Braid {
        word: String,
        strands: usize,
    },
}

impl SatellitePattern {
    pub fn braid(word: &ClassicalBraidWord) -> Self {
        SatellitePattern::Braid {
            word: word.to_text(),
            strands: word.strand_count(),
        }
    }
}

/// The pattern polynomial on ℝ³ of one component together with the data
/// needed to sample its zero set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SatelliteBlock {
    pub pattern: SatellitePattern,
    /// Pattern polynomial in `x1, x2, x3`.
    pub polynomial: LaurentPoly,
    pub degree: i32,
    /// Classical construction the pattern was pulled back from (absent for a plain ring).
    pub classical: Option<Box<ConstructionResult>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    Classical,
    Loop,
    Holomorphic,
    Spinning,
    Satellite,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatternBoundInput {
    pub strands: usize,
    pub length: usize,
    pub component_strands: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundReport {
    pub kind: BoundKind,
    pub strands: usize,
    pub length: usize,
    pub component_strands: Vec<usize>,
    /// Pass-through crossings each component takes part in, with multiplicity.
    pub pass_through_counts: Vec<usize>,
    pub n: Option<i64>,
    pub patterns: Option<Vec<PatternBoundInput>>,
    /// Per-component contribution to the final bound.
    pub contributions: Vec<i64>,
    pub bound: i64,
}

impl BoundReport {
    /// Recompute the bound from the stored inputs.
    pub fn recompute(&self) -> i64 {
        let (s, l) = (self.strands as i64, self.length as i64);
        let sc: Vec<i64> = self.component_strands.iter().map(|&c| c as i64).collect();
        match self.kind {
            BoundKind::Classical => sc.iter().map(|&c| component_bound(s, l, c)).sum(),
            BoundKind::Loop => 2 * sc.iter().map(|&c| component_bound(s, l, c)).sum::<i64>(),
            BoundKind::Holomorphic => {
                2 * sc.iter().map(|&c| component_bound(s, l, c)).sum::<i64>()
                    + 2 * sc.iter().map(|&c| component_term(s, l, c)).sum::<i64>()
            }
            BoundKind::Spinning => {
                2 * sc.iter().map(|&c| component_bound(s, l, c)).sum::<i64>()
                    + 2 * sc.iter().map(|&c| component_term(s, l, c)).sum::<i64>()
                    + self.n.unwrap_or(0).abs()
            }
            BoundKind::Satellite => {
                let patterns = self.patterns.as_deref().unwrap_or(&[]);
                sc.iter()
                    .zip(patterns)
                    .map(|(&c, p)| pattern_bound(p) * component_bound(s, l, c))
                    .sum()
            }
        }
    }
}

/// `⌊((s_C+1)(s_C ℓ-1) + ℓ s_C (s-s_C) - 1)/2⌋`.
pub fn component_term(s: i64, l: i64, sc: i64) -> i64 {
    ((sc + 1) * (sc * l - 1) + l * sc * (s - sc) - 1).div_euclid(2)
}

/// `max{component_term, s_C}`.
pub fn component_bound(s: i64, l: i64, sc: i64) -> i64 {
    component_term(s, l, sc).max(sc)
}

/// Degree bound of a pattern polynomial on ℝ³: `2 Σ_j max{…}`.
pub fn pattern_bound(p: &PatternBoundInput) -> i64 {
    let (s, l) = (p.strands as i64, p.length as i64);
    2 * p
        .component_strands
        .iter()
        .map(|&c| component_bound(s, l, c as i64))
        .sum::<i64>()
}

/// Pass-through incidence per component, counting a crossing of two strands of
/// the same component twice.
pub fn pass_through_incidence<W: BraidWord + ?Sized>(word: &W) -> Vec<usize> {
    let d = strand_components(word);
    let mut counts = vec![0; d.len()];
    let Some(kinds) = word.kinds() else {
        return counts;
    };
    let schedule = position_schedule(word);
    let component_at = |k: usize, pos: usize| {
        let start = schedule[k].iter().position(|&p| p == pos).unwrap() + 1;
        d.strand_at(start).0
    };
    for (k, (&i, kind)) in word.generator_indices().iter().zip(kinds).enumerate() {
        if kind == GeneratorKind::Sigma {
            counts[component_at(k, i)] += 1;
            counts[component_at(k, i + 1)] += 1;
        }
    }
    counts
}

/// Input to [`degree_bound`].
pub enum BoundInput<'a> {
    Classical(&'a ClassicalBraidWord),
    Loop(&'a LoopBraidWord),
    Holomorphic(&'a LoopBraidWord),
    Spinning(&'a ClassicalBraidWord, i64),
    Satellite(&'a LoopBraidWord, &'a [PatternBoundInput]),
}

pub fn degree_bound(input: BoundInput<'_>) -> BoundReport {
    let (kind, strands, length, component_strands, counts, n, patterns) = match input {
        BoundInput::Classical(w) => (
            BoundKind::Classical,
            w.strand_count(),
            w.len(),
            sizes(w),
            vec![0; sizes(w).len()],
            None,
            None,
        ),
        BoundInput::Loop(w) => (
            BoundKind::Loop,
            w.strand_count(),
            w.len(),
            sizes(w),
            pass_through_incidence(w),
            None,
            None,
        ),
        BoundInput::Holomorphic(w) => (
            BoundKind::Holomorphic,
            w.strand_count(),
            w.len(),
            sizes(w),
            pass_through_incidence(w),
            None,
            None,
        ),
        BoundInput::Spinning(w, n) => (
            BoundKind::Spinning,
            w.strand_count(),
            w.len(),
            sizes(w),
            vec![0; sizes(w).len()],
            Some(n),
            None,
        ),
        BoundInput::Satellite(w, p) => (
            BoundKind::Satellite,
            w.strand_count(),
            w.len(),
            sizes(w),
            pass_through_incidence(w),
            None,
            Some(p.to_vec()),
        ),
    };
    let (s, l) = (strands as i64, length as i64);
    let contributions: Vec<i64> = component_strands
        .iter()
        .enumerate()
        .map(|(c, &sc)| {
            let sc = sc as i64;
            match kind {
                BoundKind::Classical => component_bound(s, l, sc),
                BoundKind::Loop => 2 * component_bound(s, l, sc),
                BoundKind::Holomorphic | BoundKind::Spinning => {
                    2 * component_bound(s, l, sc) + 2 * component_term(s, l, sc)
                }
                BoundKind::Satellite => {
                    let p = &patterns.as_ref().unwrap()[c];
                    pattern_bound(p) * component_bound(s, l, sc)
                }
            }
        })
        .collect();
    let mut report = BoundReport {
        kind,
        strands,
        length,
        component_strands,
        pass_through_counts: counts,
        n,
        patterns,
        contributions,
        bound: 0,
    };
    report.bound = report.recompute();
    report
}

fn sizes<W: BraidWord + ?Sized>(w: &W) -> Vec<usize> {
    let d = strand_components(w);
    (0..d.len()).map(|c| d.strands_in(c)).collect()
}

/// Everything a build produces.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstructionResult {
    pub algorithm: Algorithm,
    pub word: String,
    pub strands: usize,
    pub lambda: f64,
    /// Rotation number of a spinning build.
    pub n: Option<i64>,
    /// Product form with explicit harmonics, at scale `lambda`.
    pub g: LaurentPoly,
    pub f: LaurentPoly,
    pub f_holomorphic: Option<Holomorphic>,
    pub system: Option<StrandSystem>,
    pub satellites: Option<Vec<SatelliteBlock>>,
    pub degrees: DegreeReport,
    pub bound: Option<BoundReport>,
    pub notes: Vec<String>,
}

impl ConstructionResult {
    /// Same construction at another scale.
    pub fn with_lambda(&self, lambda: f64) -> Result<ConstructionResult, BuildError> {
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(BuildError::BadLambda(lambda));
        }
        let ratio = self.lambda / lambda;
        let mut out = self.clone();
        match self.algorithm {
            Algorithm::Classical => {
                // g_λ(u) = λ^s g_1(u/λ)
                let k = Complex64::new((lambda / self.lambda).powi(self.strands as i32), 0.0);
                let scale = [(Var::U, Complex64::new(ratio, 0.0))];
                out.g = self.g.scale_vars(&scale).scale(k);
                out.f = self.f.scale_vars(&scale).scale(k);
            }
            Algorithm::Loop | Algorithm::Holomorphic | Algorithm::Satellite => {
                let r = Complex64::new(ratio, 0.0);
                let scale = [(Var::X, r), (Var::Y, r), (Var::Z, r)];
                out.g = self.g.scale_vars(&scale);
                out.f = self.f.scale_vars(&scale);
                if let Some(h) = &self.f_holomorphic {
                    out.f_holomorphic = Some(Holomorphic {
                        numerator: h.numerator.scale_vars(&scale),
                        denominator_power: h.denominator_power,
                    });
                }
            }
            Algorithm::Spin | Algorithm::Torus => {
                out.notes
                    .push("scale ignored: spinning and torus builds have no spatial scale".into());
                return Ok(out);
            }
        }
        out.lambda = lambda;
        out.degrees = out.f.degrees();
        Ok(out)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("construction JSON")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// `g` with `e^{it}` fixed: a polynomial in the remaining variables.
    pub fn time_slice(&self, t: f64) -> LaurentPoly {
        self.g
            .specialize(&[(Var::Eit, Complex64::from_polar(1.0, t))])
    }
}

// ---- strand factor helpers ----

/// `p((t + 2πj)/s)` as a Laurent polynomial in `q = e^{it/s}` (stored as `Var::Eit`).
pub fn strand_series(p: &TrigPoly, strand: usize, strands: usize, var: Var) -> LaurentPoly {
    let h = p.harmonics();
    let d = p.degree() as i32;
    let omega = TAU / strands as f64;
    LaurentPoly::from_terms(
        &[var],
        h.iter().enumerate().map(|(k, c)| {
            let e = k as i32 - d;
            let rot = Complex64::from_polar(1.0, omega * (e as f64) * strand as f64);
            (vec![e as i16], c * rot)
        }),
    )
}

fn real(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// Product over the strands of one component, followed by the exponent division.
fn component_product(
    strands: usize,
    factor: impl Fn(usize) -> Result<LaurentPoly, PolyError>,
    harmonic: Var,
) -> Result<LaurentPoly, PolyError> {
    let mut acc = LaurentPoly::one();
    for j in 0..strands {
        acc = acc.mul(&factor(j)?)?;
    }
    acc.divide_exponent(harmonic, strands as i32, HARMONIC_TOL)
}

/// Loop ring factor `(X - x)² + (Y - y)² - ρ² + i(Z - z)` at unit scale.
fn ring_factor(system: &StrandSystem, c: usize, j: usize) -> Result<LaurentPoly, PolyError> {
    let comp = &system.components[c];
    let s = comp.strands;
    let x = strand_series(&comp.x, j, s, Var::Eit);
    let y = strand_series(&comp.y, j, s, Var::Eit);
    let z = strand_series(comp.z.as_ref().unwrap_or(&TrigPoly::zero()), j, s, Var::Eit);
    let r = strand_series(
        &comp
            .radius
            .as_ref()
            .map_or(TrigPoly::zero(), |p| p.scaled(system.epsilon)),
        j,
        s,
        Var::Eit,
    );
    let dx = LaurentPoly::var(Var::X).sub(&x);
    let dy = LaurentPoly::var(Var::Y).sub(&y);
    let dz = LaurentPoly::var(Var::Z).sub(&z);
    Ok(dx
        .mul(&dx)?
        .add(&dy.mul(&dy)?)
        .sub(&r.mul(&r)?)
        .add(&dz.scale(Complex64::i())))
}

fn product_over_components(
    count: usize,
    per: impl Fn(usize) -> Result<LaurentPoly, PolyError> + Sync,
) -> Result<LaurentPoly, PolyError> {
    let parts: Vec<LaurentPoly> = (0..count)
        .into_par_iter()
        .map(&per)
        .collect::<Result<_, _>>()?;
    let mut g = LaurentPoly::one();
    for p in &parts {
        g = g.mul(p)?;
    }
    Ok(g)
}

fn check_lambda(lambda: f64) -> Result<(), BuildError> {
    if lambda.is_finite() && lambda > 0.0 {
        Ok(())
    } else {
        Err(BuildError::BadLambda(lambda))
    }
}

// ---- Algorithm 0 ----

/// Classical braid: `g = Π (u - λ(F + iG))`, `f` semiholomorphic in `u, v, v̄`.
pub fn algorithm0(
    word: &ClassicalBraidWord,
    lambda: f64,
    config: &PipelineConfig,
) -> Result<ConstructionResult, BuildError> {
    check_lambda(lambda)?;
    let system = classical_strand_system(word, config)?;
    let g = classical_g(&system, 0)?;
    let g = g
        .scale_vars(&[(Var::U, real(1.0 / lambda))])
        .scale(real(lambda.powi(word.strand_count() as i32)));
    let f = subst_unit_circle(&g);
    let mut notes = Vec::new();
    notes.extend(system.diagnostics.warnings.iter().cloned());
    Ok(ConstructionResult {
        algorithm: Algorithm::Classical,
        word: word.to_text(),
        strands: word.strand_count(),
        lambda,
        n: None,
        degrees: f.degrees(),
        bound: Some(degree_bound(BoundInput::Classical(word))),
        g,
        f,
        f_holomorphic: None,
        system: Some(system),
        satellites: None,
        notes,
    })
}

/// `Π (u - e^{inχ}(F + iG))` at unit scale.
fn classical_g(system: &StrandSystem, n: i64) -> Result<LaurentPoly, PolyError> {
    product_over_components(system.components.len(), |c| {
        let comp = &system.components[c];
        component_product(
            comp.strands,
            |j| {
                let w = strand_series(&comp.x, j, comp.strands, Var::Eit)
                    .add(&strand_series(&comp.y, j, comp.strands, Var::Eit).scale(Complex64::i()));
                let w = if n == 0 {
                    w
                } else {
                    w.mul(&LaurentPoly::monomial(real(1.0), &[(Var::Eichi, n as i16)]))?
                };
                Ok(LaurentPoly::var(Var::U).sub(&w))
            },
            Var::Eit,
        )
    })
}

// ---- Algorithm 1 ----

/// Loop braid: `g_λ = Π P_{C,j}(x/λ, y/λ, z/λ, t)`, `f` in `x, y, z, v, v̄`.
pub fn algorithm1(
    word: &LoopBraidWord,
    lambda: LambdaChoice,
    config: &BuildConfig,
) -> Result<ConstructionResult, BuildError> {
    let system = loop_strand_system(word, &config.pipeline)?;
    let g1 = product_over_components(system.components.len(), |c| {
        component_product(
            system.components[c].strands,
            |j| ring_factor(&system, c, j),
            Var::Eit,
        )
    })?;
    let f1 = subst_unit_circle(&g1);
    let mut notes: Vec<String> = system.diagnostics.warnings.clone();
    let unit = ConstructionResult {
        algorithm: Algorithm::Loop,
        word: word.to_text(),
        strands: word.strand_count(),
        lambda: 1.0,
        n: None,
        degrees: f1.degrees(),
        bound: Some(degree_bound(BoundInput::Loop(word))),
        g: g1,
        f: f1,
        f_holomorphic: None,
        system: Some(system),
        satellites: None,
        notes: Vec::new(),
    };
    let mut out = resolve_lambda(unit, lambda, &config.verifier, &mut notes)?;
    out.notes = notes;
    Ok(out)
}

fn resolve_lambda(
    unit: ConstructionResult,
    lambda: LambdaChoice,
    verifier: &VerifierConfig,
    notes: &mut Vec<String>,
) -> Result<ConstructionResult, BuildError> {
    match lambda {
        LambdaChoice::Value(l) => {
            check_lambda(l)?;
            Ok(unit.with_lambda(l)?)
        }
        LambdaChoice::Auto => {
            let sel = select_lambda(&unit, verifier)?;
            notes.push(format!(
                "scale chosen automatically: lambda = {:.6}, delta = {:.4}",
                sel.lambda, sel.delta
            ));
            Ok(unit.with_lambda(sel.lambda)?)
        }
    }
}

/// As [`algorithm1`] but with `e^{-it} ↦ 1/v`; `f_holomorphic` holds the numerator.
pub fn algorithm1_holomorphic(
    word: &LoopBraidWord,
    lambda: LambdaChoice,
    config: &BuildConfig,
) -> Result<ConstructionResult, BuildError> {
    let mut out = algorithm1(word, lambda, config)?;
    let h = subst_holomorphic(&out.g);
    out.algorithm = Algorithm::Holomorphic;
    out.degrees = h.numerator.degrees();
    out.bound = Some(degree_bound(BoundInput::Holomorphic(word)));
    out.f_holomorphic = Some(h);
    Ok(out)
}

// ---- Algorithm 2 and the torus builder ----

/// Spinning braid: `g = Π (u - e^{inχ}(F + iG))`; `f` is the numerator after
/// `e^{iφ} ↦ v`, `e^{-iφ} ↦ 1/v`, `e^{iχ} ↦ w`.
pub fn algorithm2(
    word: &ClassicalBraidWord,
    n: i64,
    config: &PipelineConfig,
) -> Result<ConstructionResult, BuildError> {
    let system = classical_strand_system(word, config)?;
    let g = classical_g(&system, n)?;
    let f = torus_numerator(&g);
    let degrees = f.degrees();
    let mut notes = system.diagnostics.warnings.clone();
    let w_degree = degrees.degree(Var::W);
    if n != 0 && w_degree != n.abs() as i32 {
        notes.push(format!(
            "degree in w is {w_degree} (rotation number {n} on {} strands)",
            word.strand_count()
        ));
    }
    if n == 0 {
        notes.push("n = 0: no fibration over the second angle".into());
    }
    Ok(ConstructionResult {
        algorithm: Algorithm::Spin,
        word: word.to_text(),
        strands: word.strand_count(),
        lambda: 1.0,
        n: Some(n),
        degrees,
        bound: Some(degree_bound(BoundInput::Spinning(word, n))),
        g,
        f,
        f_holomorphic: None,
        system: Some(system),
        satellites: None,
        notes,
    })
}

fn torus_numerator(g: &LaurentPoly) -> LaurentPoly {
    let (f, _) = clear_harmonic(g, Var::Eit, Var::V);
    let (f, _) = clear_harmonic(&f, Var::Eichi, Var::W);
    f.compact_vars()
}

/// One component of a surface braid on the torus.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TorusComponent {
    pub x: TorusTrigPoly,
    pub y: TorusTrigPoly,
    /// Sheets over a `χ = const` circle and over a `φ = const` circle.
    pub strands_phi: usize,
    pub strands_chi: usize,
}

impl TorusComponent {
    pub fn point(&self, j: usize, k: usize, phi: f64, chi: f64) -> Complex64 {
        let a = (phi + TAU * j as f64) / self.strands_phi as f64;
        let b = (chi + TAU * k as f64) / self.strands_chi as f64;
        Complex64::new(self.x.eval(a, b), self.y.eval(a, b))
    }
}

/// The spinning parametrization `e^{inχ}(F + iG)` of one classical component.
pub fn spinning_component(x: &TrigPoly, y: &TrigPoly, strands: usize, n: i64) -> TorusComponent {
    use crate::trig_interp::Wave;
    let m = n.unsigned_abs() as u32;
    let sgn = n.signum() as f64;
    let lift = |p: &TrigPoly, chi: Wave, sign: f64, out: &mut TorusTrigPoly| {
        out.add_term(0, Wave::Cos, m, chi, sign * p.constant);
        for k in 1..=p.degree() {
            out.add_term(k as u32, Wave::Cos, m, chi, sign * p.cos_coeff(k));
            out.add_term(k as u32, Wave::Sin, m, chi, sign * p.sin_coeff(k));
        }
    };
    let mut re = TorusTrigPoly::new();
    let mut im = TorusTrigPoly::new();
    // Re = F cos nχ - G sin nχ, Im = F sin nχ + G cos nχ
    lift(x, Wave::Cos, 1.0, &mut re);
    lift(y, Wave::Sin, -sgn, &mut re);
    lift(x, Wave::Sin, sgn, &mut im);
    lift(y, Wave::Cos, 1.0, &mut im);
    TorusComponent {
        x: re,
        y: im,
        strands_phi: strands,
        strands_chi: 1,
    }
}

/// Surface braid from explicit torus parametrizations.
pub fn torus_builder(
    components: &[TorusComponent],
    grid: usize,
) -> Result<ConstructionResult, BuildError> {
    check_torus_disjoint(components, grid)?;
    let g = product_over_components(components.len(), |c| {
        let comp = &components[c];
        let (s1, s2) = (comp.strands_phi, comp.strands_chi);
        let hx = comp.x.harmonics();
        let hy = comp.y.harmonics();
        let mut acc = LaurentPoly::one();
        for j in 0..s1 {
            for k in 0..s2 {
                let mut terms: std::collections::BTreeMap<(i32, i32), Complex64> =
                    std::collections::BTreeMap::new();
                for (&key, &v) in &hx {
                    *terms.entry(key).or_default() += v;
                }
                for (&key, &v) in &hy {
                    *terms.entry(key).or_default() += v * Complex64::i();
                }
                let w = LaurentPoly::from_terms(
                    &[Var::Eit, Var::Eichi],
                    terms.into_iter().map(|((a, b), v)| {
                        let rot = Complex64::from_polar(
                            1.0,
                            TAU * (a as f64 * j as f64 / s1 as f64
                                + b as f64 * k as f64 / s2 as f64),
                        );
                        (vec![a as i16, b as i16], v * rot)
                    }),
                );
                acc = acc.mul(&LaurentPoly::var(Var::U).sub(&w))?;
            }
        }
        acc.divide_exponent(Var::Eit, s1 as i32, HARMONIC_TOL)?
            .divide_exponent(Var::Eichi, s2 as i32, HARMONIC_TOL)
    })?;
    let f = torus_numerator(&g);
    let strands: usize = components
        .iter()
        .map(|c| c.strands_phi * c.strands_chi)
        .sum();
    Ok(ConstructionResult {
        algorithm: Algorithm::Torus,
        word: String::new(),
        strands,
        lambda: 1.0,
        n: None,
        degrees: f.degrees(),
        bound: None,
        g,
        f,
        f_holomorphic: None,
        system: None,
        satellites: None,
        notes: Vec::new(),
    })
}

fn check_torus_disjoint(components: &[TorusComponent], grid: usize) -> Result<(), BuildError> {
    let sheets: Vec<(usize, usize, usize)> = components
        .iter()
        .enumerate()
        .flat_map(|(c, comp)| {
            (0..comp.strands_phi).flat_map(move |j| (0..comp.strands_chi).map(move |k| (c, j, k)))
        })
        .collect();
    let scale = components
        .iter()
        .flat_map(|c| c.x.terms.values().chain(c.y.terms.values()))
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(1.0);
    for a in 0..grid {
        for b in 0..grid {
            let (phi, chi) = (TAU * a as f64 / grid as f64, TAU * b as f64 / grid as f64);
            let pts: Vec<Complex64> = sheets
                .iter()
                .map(|&(c, j, k)| components[c].point(j, k, phi, chi))
                .collect();
            for p in 0..pts.len() {
                for q in p + 1..pts.len() {
                    if (pts[p] - pts[q]).norm() < 1e-9 * scale {
                        return Err(BuildError::StrandCollision {
                            a: sheets[p],
                            b: sheets[q],
                            phi,
                            chi,
                        });
                    }
                }
            }
        }
    }
    Ok(())
}

// ---- satellites ----

const PATTERN_LAMBDA: f64 = 0.1;

/// Replace each ring of component `C` by the closure of a classical braid.
pub fn satellite_builder(
    word: &LoopBraidWord,
    patterns: &[SatellitePattern],
    lambda: LambdaChoice,
    config: &BuildConfig,
) -> Result<ConstructionResult, BuildError> {
    let system = loop_strand_system(word, &config.pipeline)?;
    if patterns.len() != system.components.len() {
        return Err(BuildError::PatternCount {
            expected: system.components.len(),
            got: patterns.len(),
        });
    }
    let pattern_lambda = config.pattern_lambda.unwrap_or(PATTERN_LAMBDA);
    let mut blocks = Vec::with_capacity(patterns.len());
    let mut bound_inputs = Vec::with_capacity(patterns.len());
    for p in patterns {
        let (block, input) = satellite_block(p, pattern_lambda, &config.pipeline)?;
        blocks.push(block);
        bound_inputs.push(input);
    }
    let g1 = product_over_components(system.components.len(), |c| {
        component_product(
            system.components[c].strands,
            |j| satellite_factor(&system, &blocks[c], c, j),
            Var::Eit,
        )
    })?;
    let f1 = subst_unit_circle(&g1);
    let mut notes = system.diagnostics.warnings.clone();
    let unit = ConstructionResult {
        algorithm: Algorithm::Satellite,
        word: word.to_text(),
        strands: word.strand_count(),
        lambda: 1.0,
        n: None,
        degrees: f1.degrees(),
        bound: Some(degree_bound(BoundInput::Satellite(word, &bound_inputs))),
        g: g1,
        f: f1,
        f_holomorphic: None,
        system: Some(system),
        satellites: Some(blocks),
        notes: Vec::new(),
    };
    let mut out = resolve_lambda(unit, lambda, &config.verifier, &mut notes)?;
    out.notes = notes;
    Ok(out)
}

fn satellite_block(
    pattern: &SatellitePattern,
    pattern_lambda: f64,
    config: &PipelineConfig,
) -> Result<(SatelliteBlock, PatternBoundInput), BuildError> {
    match pattern {
        SatellitePattern::Trivial => {
            let polynomial = stereographic3_pullback(&LaurentPoly::var(Var::U))?;
            let degree = polynomial.total_degree();
            let block = SatelliteBlock {
                pattern: pattern.clone(),
                polynomial,
                degree,
                classical: None,
            };
            Ok((
                block,
                PatternBoundInput {
                    strands: 1,
                    length: 0,
                    component_strands: vec![1],
                },
            ))
        }
        SatellitePattern::Braid { word, strands } => {
            let w = crate::braid_words::parse_classical_word(word, *strands)?;
            let classical = algorithm0(&w, pattern_lambda, config)?;
            let polynomial = stereographic3_pullback(&classical.f)?;
            let degree = polynomial.total_degree();
            let input = PatternBoundInput {
                strands: w.strand_count(),
                length: w.len(),
                component_strands: sizes(&w),
            };
            let block = SatelliteBlock {
                pattern: pattern.clone(),
                polynomial,
                degree,
                classical: Some(Box::new(classical)),
            };
            Ok((block, input))
        }
    }
}

/// Bound inputs of a satellite pattern, without building it.
pub fn pattern_bound_input(pattern: &SatellitePattern) -> Result<PatternBoundInput, BuildError> {
    match pattern {
        SatellitePattern::Trivial => Ok(PatternBoundInput {
            strands: 1,
            length: 0,
            component_strands: vec![1],
        }),
        SatellitePattern::Braid { word, strands } => {
            let w = crate::braid_words::parse_classical_word(word, *strands)?;
            Ok(PatternBoundInput {
                strands: w.strand_count(),
                length: w.len(),
                component_strands: sizes(&w),
            })
        }
    }
}

/// `ρ^d · f_i((X - x)/ρ, (Y - y)/ρ, Z - z)` at unit scale.
fn satellite_factor(
    system: &StrandSystem,
    block: &SatelliteBlock,
    c: usize,
    j: usize,
) -> Result<LaurentPoly, PolyError> {
    let comp = &system.components[c];
    let s = comp.strands;
    let x = strand_series(&comp.x, j, s, Var::Eit);
    let y = strand_series(&comp.y, j, s, Var::Eit);
    let z = strand_series(comp.z.as_ref().unwrap_or(&TrigPoly::zero()), j, s, Var::Eit);
    let r = strand_series(
        &comp
            .radius
            .as_ref()
            .map_or(TrigPoly::zero(), |p| p.scaled(system.epsilon)),
        j,
        s,
        Var::Eit,
    );
    let dx = LaurentPoly::var(Var::X).sub(&x);
    let dy = LaurentPoly::var(Var::Y).sub(&y);
    let dz = LaurentPoly::var(Var::Z).sub(&z);
    let d = block.degree;
    let f = &block.polynomial;
    let idx = |v: Var| f.var_index(v);
    let (i1, i2, i3) = (idx(Var::X1), idx(Var::X2), idx(Var::X3));
    let mut pow_cache: std::collections::HashMap<(u8, i32), LaurentPoly> =
        std::collections::HashMap::new();
    let mut power = |which: u8, e: i32| -> Result<LaurentPoly, PolyError> {
        if let Some(p) = pow_cache.get(&(which, e)) {
            return Ok(p.clone());
        }
        let base = match which {
            0 => &dx,
            1 => &dy,
            2 => &dz,
            _ => &r,
        };
        let p = base.pow(e as u32)?;
        pow_cache.insert((which, e), p.clone());
        Ok(p)
    };
    let mut acc = LaurentPoly::zero();
    for (e, coeff) in f.terms() {
        let get = |i: Option<usize>| i.map_or(0, |i| e[i] as i32);
        let (a, b, cz) = (get(i1), get(i2), get(i3));
        let term = power(0, a)?
            .mul(&power(1, b)?)?
            .mul(&power(2, cz)?)?
            .mul(&power(3, d - a - b)?)?;
        acc = acc.add(&term.scale(coeff));
    }
    Ok(acc)
}

// ---- sampling ----

/// Points on the zero set of the construction at unit scale in `v`, for
/// time `t`: `(label, points)` per strand.
pub fn strand_points(
    result: &ConstructionResult,
    t: f64,
    per_strand: usize,
) -> Vec<(StrandLabel, Vec<[f64; 3]>)> {
    let Some(system) = &result.system else {
        return Vec::new();
    };
    let lambda = result.lambda;
    system
        .labels()
        .into_iter()
        .map(|label| {
            let pts = match (&result.satellites, system.is_loop()) {
                (Some(blocks), _) => {
                    satellite_points(system, &blocks[label.component], label, t, per_strand)
                }
                (None, true) => (0..per_strand)
                    .map(|k| system.ring_point(label, t, TAU * k as f64 / per_strand as f64))
                    .collect(),
                (None, false) => vec![[system.x(label, t), system.y(label, t), 0.0]],
            };
            (
                label,
                pts.into_iter()
                    .map(|p| [lambda * p[0], lambda * p[1], lambda * p[2]])
                    .collect(),
            )
        })
        .collect()
}

/// Zeros of the pattern polynomial on ℝ³, at the pattern's own times.
pub fn pattern_points(block: &SatelliteBlock, count: usize) -> Vec<[f64; 3]> {
    match &block.classical {
        None => (0..count)
            .map(|k| {
                let a = TAU * k as f64 / count as f64;
                [a.cos(), a.sin(), 0.0]
            })
            .collect(),
        Some(classical) => {
            let sys = classical
                .system
                .as_ref()
                .expect("classical pattern keeps its strand system");
            let labels = sys.labels();
            let per = count.div_ceil(labels.len()).max(1);
            let mut out = Vec::new();
            for label in labels {
                for k in 0..per {
                    let t = TAU * k as f64 / per as f64;
                    let u0 = Complex64::new(sys.x(label, t), sys.y(label, t)) * classical.lambda;
                    if let Some(p) = sphere_zero(&classical.f, u0, t) {
                        out.push(p);
                    }
                }
            }
            out
        }
    }
}

/// Zero of `f(u, r e^{it})` with `|u|² + r² = 1` near `u0`, mapped to ℝ³.
fn sphere_zero(f: &LaurentPoly, u0: Complex64, t: f64) -> Option<[f64; 3]> {
    let du = f.derivative(Var::U);
    let mut u = u0;
    for _ in 0..100 {
        let r = (1.0 - u.norm_sqr()).max(0.0).sqrt();
        let v = Complex64::from_polar(r, t);
        let assign = [(Var::U, u), (Var::V, v), (Var::Vbar, v.conj())];
        let val = f.eval_with(&assign).ok()?;
        let d = du.eval_with(&assign).ok()?;
        if d.norm() == 0.0 {
            return None;
        }
        let step = val / d;
        u -= step;
        if step.norm() < 1e-15 {
            break;
        }
    }
    let r = (1.0 - u.norm_sqr()).max(0.0).sqrt();
    Some(stereographic3_inverse(u, Complex64::from_polar(r, t)))
}

fn satellite_points(
    system: &StrandSystem,
    block: &SatelliteBlock,
    label: StrandLabel,
    t: f64,
    count: usize,
) -> Vec<[f64; 3]> {
    let [cx, cy, cz] = system.center(label, t);
    let rho = system.radius(label, t);
    pattern_points(block, count)
        .into_iter()
        .map(|p| [cx + rho * p[0], cy + rho * p[1], cz + p[2]])
        .collect()
}

/// Largest `|g|` over sampled strand points: `t_samples` times and
/// `per_strand` points per strand.
pub fn vanishing_residual(result: &ConstructionResult, t_samples: usize, per_strand: usize) -> f64 {
    (0..t_samples)
        .into_par_iter()
        .map(|k| {
            let t = TAU * k as f64 / t_samples as f64;
            let slice = result.time_slice(t);
            let mut worst = 0.0f64;
            for (_, pts) in strand_points(result, t, per_strand) {
                for p in pts {
                    let value = match result.algorithm {
                        Algorithm::Classical => {
                            slice.eval_with(&[(Var::U, Complex64::new(p[0], p[1]))])
                        }
                        _ => slice.eval_with(&[
                            (Var::X, real(p[0])),
                            (Var::Y, real(p[1])),
                            (Var::Z, real(p[2])),
                        ]),
                    };
                    worst = worst.max(value.map_or(f64::INFINITY, |v| v.norm()));
                }
            }
            worst
        })
        .reduce(|| 0.0, f64::max)
}

/// Largest relative difference between `f` on the unit circle and `g`, over
/// `count` random points. The scale is the sum of absolute term values.
pub fn sampling_identity_error(result: &ConstructionResult, count: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..count {
        let t: f64 = rng.gen_range(0.0..TAU);
        let chi: f64 = rng.gen_range(0.0..TAU);
        let mut spatial: Vec<(Var, Complex64)> = [Var::X, Var::Y, Var::Z]
            .into_iter()
            .map(|v| (v, real(rng.gen_range(-1.5..1.5))))
            .collect();
        spatial.push((
            Var::U,
            Complex64::new(rng.gen_range(-1.5..1.5), rng.gen_range(-1.5..1.5)),
        ));
        let e = Complex64::from_polar(1.0, t);
        let w = Complex64::from_polar(1.0, chi);
        let mut gv = spatial.clone();
        gv.push((Var::Eit, e));
        gv.push((Var::Eichi, w));
        let g = result.g.eval_with(&gv).unwrap();
        let scale = abs_sum(&result.g, &gv).max(1e-300);
        let (f, extra) = match result.algorithm {
            Algorithm::Spin | Algorithm::Torus => {
                let mut fv = spatial.clone();
                fv.push((Var::V, e));
                fv.push((Var::W, w));
                let (lo_v, _) = result.g.exponent_range(Var::Eit);
                let (lo_w, _) = result.g.exponent_range(Var::Eichi);
                // numerator = g · v^{-lo_v} w^{-lo_w}
                (
                    result.f.eval_with(&fv).unwrap(),
                    e.powi(lo_v) * w.powi(lo_w),
                )
            }
            _ => {
                let mut fv = spatial.clone();
                fv.push((Var::V, e));
                fv.push((Var::Vbar, e.conj()));
                (result.f.eval_with(&fv).unwrap(), real(1.0))
            }
        };
        worst = worst.max((f * extra - g).norm() / scale);
        if let Some(h) = &result.f_holomorphic {
            let mut hv = spatial.clone();
            hv.push((Var::V, e));
            let num = h.numerator.eval_with(&hv).unwrap();
            worst = worst.max((num * e.powi(-h.denominator_power) - g).norm() / scale);
        }
    }
    worst
}

fn abs_sum(p: &LaurentPoly, assign: &[(Var, Complex64)]) -> f64 {
    let abs: Vec<(Var, Complex64)> = assign.iter().map(|(v, x)| (*v, real(x.norm()))).collect();
    let mut q = p.clone();
    q = LaurentPoly::from_terms(
        q.vars(),
        q.terms()
            .map(|(e, c)| (e.to_vec(), real(c.norm())))
            .collect::<Vec<_>>(),
    );
    q.eval_with(&abs).unwrap().re
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::braid_words::{parse_classical_word, parse_loop_word};

    const LOOP_EXAMPLE: &str = "r1^-1 r2 s1 r2 r1^-1";

    fn fast() -> PipelineConfig {
        PipelineConfig {
            samples: 2048,
            ..Default::default()
        }
    }

    #[test]
    fn bound_arithmetic() {
        assert_eq!(component_term(3, 5, 1), 8);
        assert_eq!(component_term(3, 5, 2), 18);
        let w = parse_loop_word(LOOP_EXAMPLE, 3).unwrap();
        let b = degree_bound(BoundInput::Loop(&w));
        assert_eq!(b.bound, 52);
        assert_eq!(b.contributions, vec![16, 36]);
        assert_eq!(b.pass_through_counts, vec![0, 2]);
        assert_eq!(b.recompute(), 52);
        let c = parse_classical_word("s1^-1 s2 s1^-1 s2 s1^-1", 3).unwrap();
        assert_eq!(degree_bound(BoundInput::Classical(&c)).bound, 26);
        // one component: the general formula restricts to 2⌊((s+1)(sℓ-1)-1)/2⌋
        let one = parse_loop_word("s1 r2", 3).unwrap();
        let s = 3i64;
        let l = 2i64;
        assert_eq!(
            degree_bound(BoundInput::Loop(&one)).bound,
            2 * (((s + 1) * (s * l - 1) - 1) / 2)
        );
    }

    #[test]
    fn whitehead_classical() {
        let w = parse_classical_word("s1^-1 s2 s1^-1 s2 s1^-1", 3).unwrap();
        let r = algorithm0(&w, 0.5, &fast()).unwrap();
        assert_eq!(r.f.degree_in(Var::U), 3);
        assert!(r.degrees.total as i64 <= r.bound.as_ref().unwrap().bound);
        assert!(vanishing_residual(&r, 64, 1) < 1e-9);
        assert!(sampling_identity_error(&r, 32, 1) < 1e-12);
    }

    #[test]
    fn two_strand_roots_match_parametrization() {
        let w = parse_classical_word("s1", 2).unwrap();
        let r = algorithm0(&w, 1.0, &fast()).unwrap();
        let sys = r.system.as_ref().unwrap();
        for k in 0..32 {
            let t = TAU * k as f64 / 32.0;
            let p = r.time_slice(t);
            // monic quadratic in u: compare roots with the strand positions
            let c1 = p.eval_with(&[(Var::U, real(0.0))]).unwrap();
            let sum: Complex64 = sys
                .labels()
                .iter()
                .map(|&l| Complex64::new(sys.x(l, t), sys.y(l, t)))
                .sum();
            let prod: Complex64 = sys
                .labels()
                .iter()
                .map(|&l| Complex64::new(sys.x(l, t), sys.y(l, t)))
                .product();
            assert!((c1 - prod).norm() < 1e-10);
            let lin = p
                .derivative(Var::U)
                .eval_with(&[(Var::U, real(0.0))])
                .unwrap();
            assert!((lin + sum).norm() < 1e-10);
        }
    }

    #[test]
    fn rescaling_matches_direct_build() {
        let w = parse_classical_word("s1 s2^-1", 3).unwrap();
        let a = algorithm0(&w, 0.3, &fast()).unwrap();
        let b = algorithm0(&w, 1.0, &fast())
            .unwrap()
            .with_lambda(0.3)
            .unwrap();
        assert!(a.g.sub(&b.g).max_abs_coeff() < 1e-12 * a.g.max_abs_coeff());
    }

    #[test]
    fn loop_single_pass_degrees() {
        let w = parse_loop_word("s1", 2).unwrap();
        let r = algorithm1(
            &w,
            LambdaChoice::Value(1.0),
            &BuildConfig {
                pipeline: fast(),
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(r.degrees.spatial, 4);
        assert_eq!(r.f.degree_in(Var::X), 4);
        assert!(vanishing_residual(&r, 64, 16) < 1e-9);
    }

    #[test]
    fn spin_with_zero_rotation_is_classical() {
        let w = parse_classical_word("s1 s2 s1^-1", 3).unwrap();
        let a = algorithm0(&w, 1.0, &fast()).unwrap();
        let b = algorithm2(&w, 0, &fast()).unwrap();
        assert!(a.g.sub(&b.g).max_abs_coeff() < 1e-12);
        assert!(b.f.var_index(Var::W).is_none());
    }

    #[test]
    fn spin_degrees_and_identity() {
        let w = parse_classical_word("s1", 2).unwrap();
        let r = algorithm2(&w, 3, &fast()).unwrap();
        assert_eq!(r.f.degree_in(Var::U), 2);
        assert_eq!(r.f.degree_in(Var::W), 6);
        assert!(sampling_identity_error(&r, 64, 2) < 1e-12);
        assert!(r.degrees.total as i64 <= r.bound.as_ref().unwrap().bound);
    }

    #[test]
    fn torus_constants_and_spin_cross_check() {
        let comps = vec![
            TorusComponent {
                x: TorusTrigPoly::constant(1.0),
                y: TorusTrigPoly::constant(0.0),
                strands_phi: 1,
                strands_chi: 1,
            },
            TorusComponent {
                x: TorusTrigPoly::constant(-1.0),
                y: TorusTrigPoly::constant(0.5),
                strands_phi: 1,
                strands_chi: 1,
            },
        ];
        let r = torus_builder(&comps, 16).unwrap();
        assert_eq!(r.f.vars(), &[Var::U]);
        let dup = vec![comps[0].clone(), comps[0].clone()];
        assert!(matches!(
            torus_builder(&dup, 16),
            Err(BuildError::StrandCollision { .. })
        ));

        let w = parse_classical_word("s1^-1 s2 s1^-1 s2 s1^-1", 3).unwrap();
        let spin = algorithm2(&w, 1, &fast()).unwrap();
        let sys = spin.system.as_ref().unwrap();
        let parts: Vec<TorusComponent> = sys
            .components
            .iter()
            .map(|c| spinning_component(&c.x, &c.y, c.strands, 1))
            .collect();
        let torus = torus_builder(&parts, 32).unwrap();
        assert!(torus.g.sub(&spin.g).max_abs_coeff() < 1e-9 * spin.g.max_abs_coeff());
    }
}
