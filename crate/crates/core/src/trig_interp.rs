//! Real trigonometric polynomials in one and two angles, Lagrange and Hermite
//! trigonometric interpolation.

use std::collections::BTreeMap;
use std::f64::consts::TAU;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Interpolation systems with a larger condition number are rejected.
pub const MAX_CONDITION: f64 = 1e12;
/// Node angles closer than this (mod 2π) count as duplicates.
pub const DUPLICATE_GAP: f64 = 1e-9;
const TRIM_REL: f64 = 1e-14;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrigError {
    #[error("no interpolation nodes")]
    Empty,
    #[error("duplicate node angles {0} and {1}")]
    DuplicateAngle(f64, f64),
    #[error("interpolation system ill-conditioned (condition number {0:.3e})")]
    IllConditioned(f64),
    #[error("non-finite node data")]
    NonFinite,
}

/// `constant + Σ cos[k-1]·cos(kt) + Σ sin[k-1]·sin(kt)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
pub struct TrigPoly {
    #[serde(rename = "const")]
    pub constant: f64,
    pub cos: Vec<f64>,
    pub sin: Vec<f64>,
}

pub fn canonical_angle(t: f64) -> f64 {
    let r = t.rem_euclid(TAU);
    if r >= TAU {
        0.0
    } else {
        r
    }
}

fn angular_gap(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    d.min(TAU - d)
}

impl TrigPoly {
    pub fn new(constant: f64, cos: Vec<f64>, sin: Vec<f64>) -> Self {
        let mut p = TrigPoly { constant, cos, sin };
        p.trim();
        p
    }

    pub fn constant(c: f64) -> Self {
        TrigPoly {
            constant: c,
            cos: vec![],
            sin: vec![],
        }
    }

    pub fn zero() -> Self {
        Self::constant(0.0)
    }

    /// `cos(k t)` or `sin(k t)` with unit coefficient.
    pub fn cos_k(k: usize) -> Self {
        let mut cos = vec![0.0; k];
        cos[k - 1] = 1.0;
        TrigPoly {
            constant: 0.0,
            cos,
            sin: vec![],
        }
    }

    pub fn sin_k(k: usize) -> Self {
        let mut sin = vec![0.0; k];
        sin[k - 1] = 1.0;
        TrigPoly {
            constant: 0.0,
            cos: vec![],
            sin,
        }
    }

    fn scale_hint(&self) -> f64 {
        self.cos
            .iter()
            .chain(self.sin.iter())
            .fold(self.constant.abs(), |m, c| m.max(c.abs()))
    }

    /// Drop trailing coefficients that are zero relative to the largest one.
    pub fn trim(&mut self) {
        let cut = self.scale_hint() * TRIM_REL;
        while self.cos.last().is_some_and(|c| c.abs() <= cut) {
            self.cos.pop();
        }
        while self.sin.last().is_some_and(|c| c.abs() <= cut) {
            self.sin.pop();
        }
    }

    pub fn degree(&self) -> usize {
        self.cos.len().max(self.sin.len())
    }

    pub fn cos_coeff(&self, k: usize) -> f64 {
        if k == 0 {
            self.constant
        } else {
            self.cos.get(k - 1).copied().unwrap_or(0.0)
        }
    }

    pub fn sin_coeff(&self, k: usize) -> f64 {
        if k == 0 {
            0.0
        } else {
            self.sin.get(k - 1).copied().unwrap_or(0.0)
        }
    }

    pub fn is_zero(&self) -> bool {
        self.constant == 0.0 && self.cos.iter().chain(&self.sin).all(|c| *c == 0.0)
    }

    pub fn eval(&self, t: f64) -> f64 {
        let mut acc = self.constant;
        for (k, c) in self.cos.iter().enumerate() {
            acc += c * ((k + 1) as f64 * t).cos();
        }
        for (k, s) in self.sin.iter().enumerate() {
            acc += s * ((k + 1) as f64 * t).sin();
        }
        acc
    }

    pub fn derivative(&self) -> TrigPoly {
        let d = self.degree();
        let mut cos = vec![0.0; d];
        let mut sin = vec![0.0; d];
        for k in 1..=d {
            let kf = k as f64;
            sin[k - 1] = -kf * self.cos_coeff(k);
            cos[k - 1] = kf * self.sin_coeff(k);
        }
        TrigPoly::new(0.0, cos, sin)
    }

    pub fn scaled(&self, a: f64) -> TrigPoly {
        TrigPoly::new(
            self.constant * a,
            self.cos.iter().map(|c| c * a).collect(),
            self.sin.iter().map(|c| c * a).collect(),
        )
    }

    pub fn add(&self, other: &TrigPoly) -> TrigPoly {
        let d = self.degree().max(other.degree());
        let cos = (1..=d)
            .map(|k| self.cos_coeff(k) + other.cos_coeff(k))
            .collect();
        let sin = (1..=d)
            .map(|k| self.sin_coeff(k) + other.sin_coeff(k))
            .collect();
        TrigPoly::new(self.constant + other.constant, cos, sin)
    }

    pub fn add_constant(&self, c: f64) -> TrigPoly {
        let mut p = self.clone();
        p.constant += c;
        p
    }

    /// Complex exponential coefficients: `result[h + d]` multiplies `e^{iht}`.
    pub fn harmonics(&self) -> Vec<Complex64> {
        let d = self.degree();
        let mut out = vec![Complex64::new(0.0, 0.0); 2 * d + 1];
        out[d] = Complex64::new(self.constant, 0.0);
        for k in 1..=d {
            let a = self.cos_coeff(k);
            let b = self.sin_coeff(k);
            out[d + k] = Complex64::new(a / 2.0, -b / 2.0);
            out[d - k] = Complex64::new(a / 2.0, b / 2.0);
        }
        out
    }

    /// Inverse of [`TrigPoly::harmonics`], keeping the real part.
    pub fn from_harmonics(h: &[Complex64]) -> TrigPoly {
        assert!(h.len() % 2 == 1);
        let d = h.len() / 2;
        let cos = (1..=d).map(|k| (h[d + k] + h[d - k]).re).collect();
        let sin = (1..=d)
            .map(|k| (Complex64::i() * (h[d + k] - h[d - k])).re)
            .collect();
        TrigPoly::new(h[d].re, cos, sin)
    }

    pub fn mul(&self, other: &TrigPoly) -> TrigPoly {
        let a = self.harmonics();
        let b = other.harmonics();
        let (da, db) = (self.degree(), other.degree());
        let mut out = vec![Complex64::new(0.0, 0.0); 2 * (da + db) + 1];
        for (i, x) in a.iter().enumerate() {
            for (j, y) in b.iter().enumerate() {
                out[i + j] += x * y;
            }
        }
        TrigPoly::from_harmonics(&out)
    }

    /// Value along strand `j` (0-based) of a component with `strands` strands.
    pub fn eval_strand(&self, t: f64, strand: usize, strands: usize) -> f64 {
        self.eval(strand_angle(t, strand, strands))
    }
}

/// Parameter angle of strand `j` (0-based) of a component with `s` strands at time `t`.
pub fn strand_angle(t: f64, strand: usize, strands: usize) -> f64 {
    (t + TAU * strand as f64) / strands as f64
}

fn check_nodes(angles: &[f64]) -> Result<Vec<f64>, TrigError> {
    if angles.is_empty() {
        return Err(TrigError::Empty);
    }
    if angles.iter().any(|a| !a.is_finite()) {
        return Err(TrigError::NonFinite);
    }
    let canon: Vec<f64> = angles.iter().map(|&a| canonical_angle(a)).collect();
    for i in 0..canon.len() {
        for j in 0..i {
            if angular_gap(canon[i], canon[j]) < DUPLICATE_GAP {
                return Err(TrigError::DuplicateAngle(angles[j], angles[i]));
            }
        }
    }
    Ok(canon)
}

/// Interpolant together with the condition number of the solved system.
#[derive(Clone, Debug, PartialEq)]
pub struct Interpolant {
    pub poly: TrigPoly,
    pub condition: f64,
}

/// Trigonometric Lagrange interpolation through `(angle, value)` nodes.
///
/// With `N = 2m+1` nodes the full basis up to harmonic `m` is used. With
/// `N = 2m` the top harmonic is the single function `cos m(t - t0)` where `t0`
/// is the first node, so the top term is a pure cosine whenever `t0 = 0`.
pub fn interpolate(nodes: &[(f64, f64)]) -> Result<TrigPoly, TrigError> {
    interpolate_with_report(nodes).map(|i| i.poly)
}

pub fn interpolate_with_report(nodes: &[(f64, f64)]) -> Result<Interpolant, TrigError> {
    let angles: Vec<f64> = nodes.iter().map(|n| n.0).collect();
    let canon = check_nodes(&angles)?;
    if nodes.iter().any(|n| !n.1.is_finite()) {
        return Err(TrigError::NonFinite);
    }
    let n = nodes.len();
    let m = n / 2;
    let even = n.is_multiple_of(2);
    let t0 = canon[0];
    let basis = |t: f64, col: usize| -> f64 {
        if col == 0 {
            return 1.0;
        }
        let k = col.div_ceil(2);
        if even && k == m {
            return (m as f64 * (t - t0)).cos();
        }
        if col % 2 == 1 {
            (k as f64 * t).cos()
        } else {
            (k as f64 * t).sin()
        }
    };
    let a = DMatrix::from_fn(n, n, |r, c| basis(canon[r], c));
    let rhs = DVector::from_iterator(n, nodes.iter().map(|n| n.1));
    let condition = condition_number(&a);
    if !(condition <= MAX_CONDITION) {
        return Err(TrigError::IllConditioned(condition));
    }
    let x = a
        .lu()
        .solve(&rhs)
        .ok_or(TrigError::IllConditioned(f64::INFINITY))?;

    let mut cos = vec![0.0; m];
    let mut sin = vec![0.0; m];
    for col in 1..n {
        let k = col.div_ceil(2);
        if even && k == m {
            let mf = m as f64;
            cos[k - 1] += x[col] * (mf * t0).cos();
            sin[k - 1] += x[col] * (mf * t0).sin();
        } else if col % 2 == 1 {
            cos[k - 1] = x[col];
        } else {
            sin[k - 1] = x[col];
        }
    }
    Ok(Interpolant {
        poly: TrigPoly::new(x[0], cos, sin),
        condition,
    })
}

pub(crate) fn condition_number(a: &DMatrix<f64>) -> f64 {
    let sv = a.clone().singular_values();
    let max = sv.iter().cloned().fold(0.0, f64::max);
    let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HermiteNode {
    pub angle: f64,
    pub value: f64,
    pub slope: f64,
}

/// `sin²((t - a)/2) = 1/2 - cos(a)/2 cos t - sin(a)/2 sin t`.
fn half_angle_sine_squared(a: f64) -> TrigPoly {
    TrigPoly {
        constant: 0.5,
        cos: vec![-0.5 * a.cos()],
        sin: vec![-0.5 * a.sin()],
    }
}

/// `sin(t - a) = cos(a) sin t - sin(a) cos t`.
fn shifted_sine(a: f64) -> TrigPoly {
    TrigPoly {
        constant: 0.0,
        cos: vec![-a.sin()],
        sin: vec![a.cos()],
    }
}

/// Hermite trigonometric interpolation through values and first derivatives.
///
/// `H = Σ z_i w0_i + Σ z'_i w1_i` with
/// `w0_i = (1 - V_i sin((t-t_i)/2) cos((t-t_i)/2)) U_i`,
/// `w1_i = 2 sin((t-t_i)/2) cos((t-t_i)/2) U_i`,
/// `U_i = Π_{k≠i} sin²((t-t_k)/2) / sin²((t_i-t_k)/2)` and
/// `V_i = Σ_{k≠i} 2 cot((t_i-t_k)/2)`.
pub fn hermite_interpolate(nodes: &[HermiteNode]) -> Result<TrigPoly, TrigError> {
    let angles: Vec<f64> = nodes.iter().map(|n| n.angle).collect();
    let t = check_nodes(&angles)?;
    if nodes
        .iter()
        .any(|n| !n.value.is_finite() || !n.slope.is_finite())
    {
        return Err(TrigError::NonFinite);
    }
    let mut total = TrigPoly::zero();
    for (i, node) in nodes.iter().enumerate() {
        let mut u = TrigPoly::constant(1.0);
        let mut v = 0.0;
        for (k, &tk) in t.iter().enumerate() {
            if k == i {
                continue;
            }
            let half = ((t[i] - tk) / 2.0).sin();
            u = u
                .mul(&half_angle_sine_squared(tk))
                .scaled(1.0 / (half * half));
            v += 2.0 / ((t[i] - tk) / 2.0).tan();
        }
        // sin(x/2)cos(x/2) = sin(x)/2
        let shifted = shifted_sine(t[i]);
        let w0 = u.add(&shifted.mul(&u).scaled(-v / 2.0));
        let w1 = shifted.mul(&u);
        total = total
            .add(&w0.scaled(node.value))
            .add(&w1.scaled(node.slope));
    }
    total.trim();
    Ok(total)
}

/// Finite Fourier series in two angles `(φ, χ)`.
///
/// Keys are `(k, a, l, b)`: harmonic `k ≥ 0` in `φ` with tag `a` (cos/sin)
/// times harmonic `l ≥ 0` in `χ` with tag `b`.
#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct TorusTrigPoly {
    pub terms: BTreeMap<(u32, Wave, u32, Wave), f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Wave {
    Cos,
    Sin,
}

impl Wave {
    fn eval(self, x: f64) -> f64 {
        match self {
            Wave::Cos => x.cos(),
            Wave::Sin => x.sin(),
        }
    }
}

impl TorusTrigPoly {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn constant(c: f64) -> Self {
        let mut p = Self::new();
        p.add_term(0, Wave::Cos, 0, Wave::Cos, c);
        p
    }

    pub fn add_term(&mut self, k: u32, a: Wave, l: u32, b: Wave, coeff: f64) {
        // sin(0·x) vanishes identically
        if (k == 0 && a == Wave::Sin) || (l == 0 && b == Wave::Sin) {
            return;
        }
        *self.terms.entry((k, a, l, b)).or_insert(0.0) += coeff;
    }

    pub fn with_term(mut self, k: u32, a: Wave, l: u32, b: Wave, coeff: f64) -> Self {
        self.add_term(k, a, l, b, coeff);
        self
    }

    /// Lift a one-angle polynomial in `φ`.
    pub fn from_phi(p: &TrigPoly) -> Self {
        let mut out = Self::constant(p.constant);
        for k in 1..=p.degree() {
            out.add_term(k as u32, Wave::Cos, 0, Wave::Cos, p.cos_coeff(k));
            out.add_term(k as u32, Wave::Sin, 0, Wave::Cos, p.sin_coeff(k));
        }
        out
    }

    pub fn eval(&self, phi: f64, chi: f64) -> f64 {
        self.terms
            .iter()
            .map(|(&(k, a, l, b), c)| c * a.eval(k as f64 * phi) * b.eval(l as f64 * chi))
            .sum()
    }

    /// Complex exponential coefficients keyed by `(h_φ, h_χ)`.
    pub fn harmonics(&self) -> BTreeMap<(i32, i32), Complex64> {
        let mut out: BTreeMap<(i32, i32), Complex64> = BTreeMap::new();
        let half = Complex64::new(0.5, 0.0);
        let split = |k: u32, w: Wave| -> Vec<(i32, Complex64)> {
            let k = k as i32;
            if k == 0 {
                return vec![(0, Complex64::new(1.0, 0.0))];
            }
            match w {
                Wave::Cos => vec![(k, half), (-k, half)],
                Wave::Sin => vec![
                    (k, Complex64::new(0.0, -0.5)),
                    (-k, Complex64::new(0.0, 0.5)),
                ],
            }
        };
        for (&(k, a, l, b), &c) in &self.terms {
            for (hp, cp) in split(k, a) {
                for (hc, cc) in split(l, b) {
                    *out.entry((hp, hc)).or_default() += cp * cc * c;
                }
            }
        }
        out
    }
}

/// Sample grid of `n` equally spaced angles in `[0, 2π)`.
pub fn angle_grid(n: usize) -> impl Iterator<Item = f64> + Clone {
    (0..n).map(move |k| TAU * k as f64 / n as f64)
}
