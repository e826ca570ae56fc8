//! Time-dependent divergence-free fields whose flow lines follow a loop braid.
//!
//! Both field forms are evaluated from exact partial derivatives of `g`,
//! carried as second-order Taylor jets in `(x, y, z, t)` so that divergence,
//! Laplacian and time derivative come out of the same evaluation.

use std::f64::consts::PI;
use std::io::Write;
use std::sync::OnceLock;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::poly_algebra::{LaurentPoly, PolyError, SpatialPoly, Var};

#[derive(Debug, Error)]
pub enum FieldError {
    #[error("field source must depend only on x, y, z and e^(it), found {0}")]
    UnexpectedVariable(Var),
    #[error(transparent)]
    Poly(#[from] PolyError),
    #[error("non-finite field value at {point:?}, t = {t}")]
    NonFinite { point: [f64; 3], t: f64 },
    #[error("field has imaginary part {residue:.3e} relative to its scale")]
    ImaginaryResidue { residue: f64 },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// `(1/2πi)(∇g × ∇ḡ)/(1 + |g|²)` or `∇Re g × ∇Im g × ∇t` in ℝ⁴.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldForm {
    Ranada,
    Cross4,
}

const IMAGINARY_TOL: f64 = 1e-10;

// ---- jets ----

/// Multi-indices in `(x, y, z, t)` of total degree ≤ 2, in a fixed order.
fn indices() -> &'static [[u8; 4]; 15] {
    static TABLE: OnceLock<[[u8; 4]; 15]> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut out = [[0u8; 4]; 15];
        let mut n = 0;
        for d in 0..=2u8 {
            for a in (0..=d).rev() {
                for b in (0..=d - a).rev() {
                    for c in (0..=d - a - b).rev() {
                        out[n] = [a, b, c, d - a - b - c];
                        n += 1;
                    }
                }
            }
        }
        out
    })
}

fn index_of(m: [u8; 4]) -> Option<usize> {
    indices().iter().position(|x| *x == m)
}

/// `(i, j, k)`: entry `i` times entry `j` lands in entry `k`.
fn product_table() -> &'static [(usize, usize, usize)] {
    static TABLE: OnceLock<Vec<(usize, usize, usize)>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let idx = indices();
        let mut t = Vec::new();
        for i in 0..15 {
            for j in 0..15 {
                let m = [
                    idx[i][0] + idx[j][0],
                    idx[i][1] + idx[j][1],
                    idx[i][2] + idx[j][2],
                    idx[i][3] + idx[j][3],
                ];
                if let Some(k) = index_of(m) {
                    t.push((i, j, k));
                }
            }
        }
        t
    })
}

/// Truncated Taylor expansion of order 2 in `(dx, dy, dz, dt)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet([Complex64; 15]);

impl Jet {
    pub fn zero() -> Jet {
        Jet([Complex64::new(0.0, 0.0); 15])
    }

    pub fn constant(c: Complex64) -> Jet {
        let mut j = Jet::zero();
        j.0[0] = c;
        j
    }

    /// Taylor coefficient of `dx^a dy^b dz^c dt^d`.
    pub fn coeff(&self, m: [u8; 4]) -> Complex64 {
        index_of(m).map_or(Complex64::new(0.0, 0.0), |i| self.0[i])
    }

    pub fn value(&self) -> Complex64 {
        self.0[0]
    }

    /// First partial derivative along axis `k` (0..4).
    pub fn d1(&self, k: usize) -> Complex64 {
        let mut m = [0u8; 4];
        m[k] = 1;
        self.coeff(m)
    }

    /// Second partial derivative along axis `k` twice.
    pub fn d2(&self, k: usize) -> Complex64 {
        let mut m = [0u8; 4];
        m[k] = 2;
        self.coeff(m) * 2.0
    }

    pub fn add(&self, o: &Jet) -> Jet {
        let mut r = *self;
        for (a, b) in r.0.iter_mut().zip(o.0.iter()) {
            *a += b;
        }
        r
    }

    pub fn sub(&self, o: &Jet) -> Jet {
        self.add(&o.scale(Complex64::new(-1.0, 0.0)))
    }

    pub fn scale(&self, k: Complex64) -> Jet {
        let mut r = *self;
        for a in r.0.iter_mut() {
            *a *= k;
        }
        r
    }

    pub fn conj(&self) -> Jet {
        let mut r = *self;
        for a in r.0.iter_mut() {
            *a = a.conj();
        }
        r
    }

    pub fn re(&self) -> Jet {
        let mut r = *self;
        for a in r.0.iter_mut() {
            *a = Complex64::new(a.re, 0.0);
        }
        r
    }

    pub fn im(&self) -> Jet {
        let mut r = *self;
        for a in r.0.iter_mut() {
            *a = Complex64::new(a.im, 0.0);
        }
        r
    }

    pub fn mul(&self, o: &Jet) -> Jet {
        let mut r = Jet::zero();
        for &(i, j, k) in product_table() {
            r.0[k] += self.0[i] * o.0[j];
        }
        r
    }

    /// `1/self`; the constant term must be nonzero.
    pub fn recip(&self) -> Jet {
        let c = self.0[0];
        let mut d = *self;
        d.0[0] = Complex64::new(0.0, 0.0);
        let e = d.scale(-1.0 / c);
        // 1/(c(1 - e)) = (1 + e + e²)/c up to order 2
        Jet::constant(Complex64::new(1.0, 0.0))
            .add(&e)
            .add(&e.mul(&e))
            .scale(1.0 / c)
    }
}

fn cross(a: &[Jet; 3], b: &[Jet; 3]) -> [Jet; 3] {
    [
        a[1].mul(&b[2]).sub(&a[2].mul(&b[1])),
        a[2].mul(&b[0]).sub(&a[0].mul(&b[2])),
        a[0].mul(&b[1]).sub(&a[1].mul(&b[0])),
    ]
}

fn det3(m: [[Jet; 3]; 3]) -> Jet {
    m[0][0]
        .mul(&m[1][1].mul(&m[2][2]).sub(&m[1][2].mul(&m[2][1])))
        .sub(&m[0][1].mul(&m[1][0].mul(&m[2][2]).sub(&m[1][2].mul(&m[2][0]))))
        .add(&m[0][2].mul(&m[1][0].mul(&m[2][1]).sub(&m[1][1].mul(&m[2][0]))))
}

/// `w` with `w·d = det[d; a; b; c]` for all `d`, basis order `(x, y, z, t)`.
pub fn cross4(a: &[Jet; 4], b: &[Jet; 4], c: &[Jet; 4]) -> [Jet; 4] {
    let mut w = [Jet::zero(); 4];
    for (i, wi) in w.iter_mut().enumerate() {
        let cols: Vec<usize> = (0..4).filter(|&k| k != i).collect();
        let minor = [
            [a[cols[0]], a[cols[1]], a[cols[2]]],
            [b[cols[0]], b[cols[1]], b[cols[2]]],
            [c[cols[0]], c[cols[1]], c[cols[2]]],
        ];
        let d = det3(minor);
        *wi = if i % 2 == 0 {
            d
        } else {
            d.scale(Complex64::new(-1.0, 0.0))
        };
    }
    w
}

// ---- field source ----

/// `g(x, y, z, t)` with its time derivatives, ready for pointwise jets.
#[derive(Clone, Debug)]
pub struct FieldSource {
    /// `∂_t^k g` for `k = 0..=3`.
    time_derivatives: Vec<LaurentPoly>,
}

/// Taylor coefficients of `g` up to total order 3 in `(x, y, z, t)`.
struct Taylor3 {
    coeffs: Vec<([u8; 4], Complex64)>,
}

impl Taylor3 {
    fn get(&self, m: [u8; 4]) -> Complex64 {
        self.coeffs
            .iter()
            .find(|(k, _)| *k == m)
            .map_or(Complex64::new(0.0, 0.0), |x| x.1)
    }

    /// Order-2 jet of `∂g/∂axis`.
    fn partial_jet(&self, axis: usize) -> Jet {
        let mut j = Jet::zero();
        for (n, m) in indices().iter().enumerate() {
            let mut up = *m;
            up[axis] += 1;
            j.0[n] = self.get(up) * up[axis] as f64;
        }
        j
    }

    fn value_jet(&self) -> Jet {
        let mut j = Jet::zero();
        for (n, m) in indices().iter().enumerate() {
            j.0[n] = self.get(*m);
        }
        j
    }
}

fn binomial(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Taylor coefficients of a spatial polynomial at `p` up to total order `order`.
fn spatial_taylor(poly: &SpatialPoly, p: [f64; 3], order: u8) -> Vec<([u8; 3], Complex64)> {
    let mut out: Vec<([u8; 3], Complex64)> = Vec::new();
    for a in 0..=order {
        for b in 0..=order - a {
            for c in 0..=order - a - b {
                let mut sum = Complex64::new(0.0, 0.0);
                for (e, coeff) in poly.terms() {
                    let (ea, eb, ec) = (e[0] as u32, e[1] as u32, e[2] as u32);
                    if ea < a as u32 || eb < b as u32 || ec < c as u32 {
                        continue;
                    }
                    let k =
                        binomial(ea, a as u32) * binomial(eb, b as u32) * binomial(ec, c as u32);
                    let w = p[0].powi((ea - a as u32) as i32)
                        * p[1].powi((eb - b as u32) as i32)
                        * p[2].powi((ec - c as u32) as i32);
                    sum += coeff * (k * w);
                }
                out.push(([a, b, c], sum));
            }
        }
    }
    out
}

impl FieldSource {
    pub fn new(g: &LaurentPoly) -> Result<FieldSource, FieldError> {
        if let Some(v) = g
            .vars()
            .iter()
            .find(|v| !matches!(v, Var::X | Var::Y | Var::Z | Var::Eit))
        {
            return Err(FieldError::UnexpectedVariable(*v));
        }
        let mut time_derivatives = vec![g.clone()];
        for k in 1..=3 {
            let next = time_derivatives[k - 1].angle_derivative(Var::Eit);
            time_derivatives.push(next);
        }
        Ok(FieldSource { time_derivatives })
    }

    /// `g(·, t)` and its time derivatives as spatial polynomials.
    pub fn slice(&self, t: f64) -> Result<Vec<SpatialPoly>, FieldError> {
        self.time_derivatives
            .iter()
            .map(|p| {
                let it = p.var_index(Var::Eit);
                p.to_spatial(|e| {
                    it.map_or(Complex64::new(1.0, 0.0), |i| {
                        Complex64::from_polar(1.0, e[i] as f64 * t)
                    })
                })
                .map_err(FieldError::from)
            })
            .collect()
    }

    pub fn value(&self, p: [f64; 3], t: f64) -> Result<Complex64, FieldError> {
        Ok(self.slice(t)?[0].eval(p))
    }

    fn taylor(&self, slices: &[SpatialPoly], p: [f64; 3]) -> Taylor3 {
        let mut coeffs = Vec::new();
        let mut fact = 1.0;
        for (k, poly) in slices.iter().enumerate() {
            if k > 0 {
                fact *= k as f64;
            }
            for (m, c) in spatial_taylor(poly, p, 3 - k as u8) {
                coeffs.push(([m[0], m[1], m[2], k as u8], c / fact));
            }
        }
        Taylor3 { coeffs }
    }

    /// Order-2 jet of the chosen field form around `(p, t)`.
    pub fn field_jet(&self, form: FieldForm, p: [f64; 3], t: f64) -> Result<[Jet; 3], FieldError> {
        let slices = self.slice(t)?;
        self.field_jet_from(&slices, form, p, t)
    }

    fn field_jet_from(
        &self,
        slices: &[SpatialPoly],
        form: FieldForm,
        p: [f64; 3],
        t: f64,
    ) -> Result<[Jet; 3], FieldError> {
        let tay = self.taylor(slices, p);
        let grad = [tay.partial_jet(0), tay.partial_jet(1), tay.partial_jet(2)];
        let v = match form {
            FieldForm::Ranada => {
                let g = tay.value_jet();
                let grad_conj = [grad[0].conj(), grad[1].conj(), grad[2].conj()];
                let den = Jet::constant(Complex64::new(1.0, 0.0))
                    .add(&g.mul(&g.conj()))
                    .recip();
                let k = Complex64::new(0.0, -1.0 / (2.0 * PI));
                let c = cross(&grad, &grad_conj);
                let v = [
                    c[0].mul(&den).scale(k),
                    c[1].mul(&den).scale(k),
                    c[2].mul(&den).scale(k),
                ];
                let scale = grad.iter().map(|j| j.value().norm_sqr()).sum::<f64>()
                    * den.value().norm()
                    / (2.0 * PI);
                let residue = v.iter().map(|j| j.value().im.abs()).fold(0.0, f64::max);
                if residue > IMAGINARY_TOL * scale.max(f64::MIN_POSITIVE) {
                    return Err(FieldError::ImaginaryResidue {
                        residue: residue / scale,
                    });
                }
                [v[0].re(), v[1].re(), v[2].re()]
            }
            FieldForm::Cross4 => {
                let dt = tay.partial_jet(3);
                let a = [grad[0].re(), grad[1].re(), grad[2].re(), dt.re()];
                let b = [grad[0].im(), grad[1].im(), grad[2].im(), dt.im()];
                let one = Jet::constant(Complex64::new(1.0, 0.0));
                let e_t = [Jet::zero(), Jet::zero(), Jet::zero(), one];
                let w = cross4(&a, &b, &e_t);
                [w[0], w[1], w[2]]
            }
        };
        if v.iter().any(|j| j.0.iter().any(|c| !c.re.is_finite())) {
            return Err(FieldError::NonFinite { point: p, t });
        }
        Ok(v)
    }

    pub fn sample(&self, form: FieldForm, p: [f64; 3], t: f64) -> Result<FieldSample, FieldError> {
        let v = self.field_jet(form, p, t)?;
        Ok(FieldSample::from_jet(p, t, &v))
    }

    /// Samples at many points sharing one time, reusing the time slice.
    pub fn samples_at(
        &self,
        form: FieldForm,
        points: &[[f64; 3]],
        t: f64,
    ) -> Result<Vec<FieldSample>, FieldError> {
        let slices = self.slice(t)?;
        points
            .iter()
            .map(|&p| {
                self.field_jet_from(&slices, form, p, t)
                    .map(|v| FieldSample::from_jet(p, t, &v))
            })
            .collect()
    }
}

/// `(1/2πi)(∇g × ∇ḡ)/(1 + |g|²)`.
pub fn vfield_ranada(src: &FieldSource, p: [f64; 3], t: f64) -> Result<[f64; 3], FieldError> {
    Ok(src.sample(FieldForm::Ranada, p, t)?.vector)
}

/// Spatial part of `∇Re g × ∇Im g × ∇t` in `(x, y, z, t)`.
pub fn vfield_cross4(src: &FieldSource, p: [f64; 3], t: f64) -> Result<[f64; 3], FieldError> {
    Ok(src.sample(FieldForm::Cross4, p, t)?.vector)
}

pub fn divergence(
    src: &FieldSource,
    form: FieldForm,
    p: [f64; 3],
    t: f64,
) -> Result<f64, FieldError> {
    Ok(src.sample(form, p, t)?.divergence)
}

/// `ΔV + ∂_t V`: left minus right side of `ΔV = -∂_t V`, componentwise.
pub fn wave_residual(
    src: &FieldSource,
    form: FieldForm,
    p: [f64; 3],
    t: f64,
) -> Result<[f64; 3], FieldError> {
    Ok(src.sample(form, p, t)?.wave_residual)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldSample {
    pub point: [f64; 3],
    pub t: f64,
    pub vector: [f64; 3],
    pub divergence: f64,
    pub wave_residual: [f64; 3],
    /// Sum of `|∂_i V_i|`: the size divergence is measured against.
    pub divergence_scale: f64,
}

impl FieldSample {
    fn from_jet(p: [f64; 3], t: f64, v: &[Jet; 3]) -> FieldSample {
        let vector = [v[0].value().re, v[1].value().re, v[2].value().re];
        let parts: Vec<f64> = (0..3).map(|i| v[i].d1(i).re).collect();
        let divergence = parts.iter().sum();
        let divergence_scale = parts.iter().map(|x| x.abs()).sum();
        let wave_residual =
            [0, 1, 2].map(|i| (0..3).map(|k| v[i].d2(k).re).sum::<f64>() + v[i].d1(3).re);
        FieldSample {
            point: p,
            t,
            vector,
            divergence,
            wave_residual,
            divergence_scale,
        }
    }
}

pub const CSV_HEADER: [&str; 11] = [
    "x", "y", "z", "t", "Vx", "Vy", "Vz", "div", "wave_rx", "wave_ry", "wave_rz",
];

pub fn write_csv<W: Write>(samples: &[FieldSample], out: W) -> Result<(), FieldError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for s in samples {
        let row = [
            s.point[0],
            s.point[1],
            s.point[2],
            s.t,
            s.vector[0],
            s.vector[1],
            s.vector[2],
            s.divergence,
            s.wave_residual[0],
            s.wave_residual[1],
            s.wave_residual[2],
        ];
        w.write_record(row.iter().map(|x| format!("{x:e}")))?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn xy() -> LaurentPoly {
        LaurentPoly::var(Var::X).add(&LaurentPoly::var(Var::Y).scale(Complex64::i()))
    }

    #[test]
    fn planar_source_points_along_z() {
        let src = FieldSource::new(&xy()).unwrap();
        let p = [0.3, -0.7, 1.1];
        let w = vfield_cross4(&src, p, 0.4).unwrap();
        assert!((w[0].abs() + w[1].abs()) < 1e-15 && (w[2] - 1.0).abs() < 1e-15);
        let v = vfield_ranada(&src, p, 0.4).unwrap();
        let expect = -1.0 / (PI * (1.0 + p[0] * p[0] + p[1] * p[1]));
        assert!((v[2] - expect).abs() < 1e-15 && v[0].abs() + v[1].abs() < 1e-15);
        assert!(divergence(&src, FieldForm::Ranada, p, 0.0).unwrap().abs() < 1e-15);
    }

    #[test]
    fn jet_reciprocal() {
        let mut j = Jet::constant(c(2.0));
        j.0[1] = c(1.0);
        let r = j.recip().mul(&j);
        assert!((r.value() - c(1.0)).norm() < 1e-15);
        assert!(r.0[1..].iter().all(|x| x.norm() < 1e-15));
    }

    #[test]
    fn constant_field_has_no_wave_residual() {
        // g = x + i y gives V = e_z in the cross form
        let src = FieldSource::new(&xy()).unwrap();
        let r = wave_residual(&src, FieldForm::Cross4, [0.5, 0.1, -2.0], 1.0).unwrap();
        assert!(r.iter().all(|x| x.abs() < 1e-15));
    }

    #[test]
    fn rejects_foreign_variables() {
        assert!(FieldSource::new(&LaurentPoly::var(Var::U)).is_err());
    }

    #[test]
    fn csv_header_and_rows() {
        let src = FieldSource::new(&xy()).unwrap();
        let s = src
            .samples_at(FieldForm::Ranada, &[[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]], 0.0)
            .unwrap();
        let mut buf = Vec::new();
        write_csv(&s, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "x,y,z,t,Vx,Vy,Vz,div,wave_rx,wave_ry,wave_rz");
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[1].split(',').count(), 11);
    }
}
