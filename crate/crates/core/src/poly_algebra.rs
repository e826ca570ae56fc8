//! Sparse multivariate Laurent polynomials with complex coefficients, plus the
//! substitutions that turn trigonometric expressions into polynomials.
//!
//! Variables form a fixed alphabet ([`Var`]). A polynomial stores the sorted set
//! of variables it mentions; binary operations work on the union.
//! `Eit` stands for `e^{it}` (or `e^{iφ}` on the torus) and `Eichi` for `e^{iχ}`.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};
use std::fmt;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A sum is dropped as cancelled when it is smaller than this times the sum of
/// the magnitudes that went into it.
pub const PRUNE_REL: f64 = 1e-14;
const PAR_THRESHOLD: usize = 1 << 16;
const MUL_CHUNK: usize = 64;

/// A running sum that remembers how much magnitude went into it.
#[derive(Clone, Copy, Debug, Default)]
struct Sum {
    value: Complex64,
    mass: f64,
}

impl Sum {
    fn of(c: Complex64) -> Sum {
        Sum {
            value: c,
            mass: c.norm(),
        }
    }

    fn push(&mut self, c: Complex64) {
        self.value += c;
        self.mass += c.norm();
    }

    fn merge(&mut self, other: Sum) {
        self.value += other.value;
        self.mass += other.mass;
    }

    fn keep(&self) -> bool {
        let n = self.value.norm();
        n != 0.0 && n > PRUNE_REL * self.mass
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolyError {
    #[error("exponent overflow in variable {0}")]
    ExponentOverflow(Var),
    #[error("variable {0} has no assigned value")]
    Unassigned(Var),
    #[error("variable {0} not present in target variable list")]
    MissingVariable(Var),
    #[error("harmonic {harmonic} not divisible by {divisor} (coefficient {magnitude:.3e})")]
    FractionalHarmonic {
        harmonic: i32,
        divisor: i32,
        magnitude: f64,
    },
    #[error("negative exponent for variable {0}")]
    NegativeExponent(Var),
    #[error("invalid polynomial JSON: {0}")]
    Json(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Var {
    X,
    Y,
    Z,
    U,
    V,
    Vbar,
    W,
    Wbar,
    Eit,
    Eichi,
    X1,
    X2,
    X3,
    X4,
}

impl Var {
    pub fn name(self) -> &'static str {
        match self {
            Var::X => "x",
            Var::Y => "y",
            Var::Z => "z",
            Var::U => "u",
            Var::V => "v",
            Var::Vbar => "vbar",
            Var::W => "w",
            Var::Wbar => "wbar",
            Var::Eit => "eit",
            Var::Eichi => "eichi",
            Var::X1 => "x1",
            Var::X2 => "x2",
            Var::X3 => "x3",
            Var::X4 => "x4",
        }
    }

    /// Variables that may carry negative exponents.
    pub fn allows_negative(self) -> bool {
        matches!(self, Var::V | Var::W | Var::Eit | Var::Eichi)
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Exponent vector ordered graded-lexicographically (by `Σ|e|`, then lexicographically).
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Mono(pub Vec<i16>);

impl Mono {
    pub fn weight(&self) -> i32 {
        self.0.iter().map(|e| (*e as i32).abs()).sum()
    }
}

impl Ord for Mono {
    fn cmp(&self, other: &Self) -> Ordering {
        self.weight()
            .cmp(&other.weight())
            .then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for Mono {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Clone, Debug, Default)]
pub struct LaurentPoly {
    vars: Vec<Var>,
    terms: BTreeMap<Mono, Complex64>,
}

/// Equal as polynomials: variables that never occur do not matter.
impl PartialEq for LaurentPoly {
    fn eq(&self, other: &Self) -> bool {
        if self.vars == other.vars {
            return self.terms == other.terms;
        }
        let (a, b) = self.aligned(other);
        a.terms == b.terms
    }
}

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

impl LaurentPoly {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(value: Complex64) -> Self {
        let mut p = Self::zero();
        if value != Complex64::new(0.0, 0.0) {
            p.terms.insert(Mono(vec![]), value);
        }
        p
    }

    pub fn one() -> Self {
        Self::constant(c(1.0))
    }

    pub fn var(v: Var) -> Self {
        Self::monomial(c(1.0), &[(v, 1)])
    }

    /// `coeff · Π var^exp`. Repeated variables accumulate.
    pub fn monomial(coeff: Complex64, powers: &[(Var, i16)]) -> Self {
        let mut vars: Vec<Var> = powers.iter().map(|p| p.0).collect();
        vars.sort();
        vars.dedup();
        let mut exps = vec![0i16; vars.len()];
        for (v, e) in powers {
            let i = vars.binary_search(v).unwrap();
            exps[i] += *e;
        }
        let mut p = LaurentPoly {
            vars,
            terms: BTreeMap::new(),
        };
        if coeff != Complex64::new(0.0, 0.0) {
            p.terms.insert(Mono(exps), coeff);
        }
        p
    }

    /// Build from explicit terms over `vars` (need not be sorted).
    pub fn from_terms(
        vars: &[Var],
        terms: impl IntoIterator<Item = (Vec<i16>, Complex64)>,
    ) -> Self {
        let mut order: Vec<usize> = (0..vars.len()).collect();
        order.sort_by_key(|&i| vars[i]);
        let sorted: Vec<Var> = order.iter().map(|&i| vars[i]).collect();
        let mut map: BTreeMap<Mono, Sum> = BTreeMap::new();
        for (e, v) in terms {
            let e: Vec<i16> = order.iter().map(|&i| e[i]).collect();
            map.entry(Mono(e)).or_default().push(v);
        }
        LaurentPoly::from_sums(sorted, map)
    }

    pub fn vars(&self) -> &[Var] {
        &self.vars
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&[i16], Complex64)> {
        self.terms.iter().map(|(m, c)| (m.0.as_slice(), *c))
    }

    pub fn var_index(&self, v: Var) -> Option<usize> {
        self.vars.binary_search(&v).ok()
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.terms.values().fold(0.0, |m, c| m.max(c.norm()))
    }

    /// Drop exact zeros.
    fn prune(&mut self) {
        self.terms.retain(|_, c| *c != Complex64::new(0.0, 0.0));
    }

    fn from_sums(vars: Vec<Var>, sums: BTreeMap<Mono, Sum>) -> LaurentPoly {
        let terms = sums
            .into_iter()
            .filter(|(_, s)| s.keep())
            .map(|(m, s)| (m, s.value))
            .collect();
        LaurentPoly { vars, terms }
    }

    /// Re-express over a larger sorted variable list.
    pub fn with_vars(&self, vars: &[Var]) -> Result<LaurentPoly, PolyError> {
        let mut target: Vec<Var> = vars.to_vec();
        target.sort();
        target.dedup();
        if target == self.vars {
            return Ok(self.clone());
        }
        let mut slots = Vec::with_capacity(self.vars.len());
        for v in &self.vars {
            match target.binary_search(v) {
                Ok(i) => slots.push(i),
                Err(_) => {
                    if self.terms.keys().any(|m| m.0[slots.len()] != 0) {
                        return Err(PolyError::MissingVariable(*v));
                    }
                    slots.push(usize::MAX);
                }
            }
        }
        let mut terms = BTreeMap::new();
        for (m, c) in &self.terms {
            let mut e = vec![0i16; target.len()];
            for (k, &slot) in slots.iter().enumerate() {
                if slot != usize::MAX {
                    e[slot] = m.0[k];
                }
            }
            terms.insert(Mono(e), *c);
        }
        Ok(LaurentPoly {
            vars: target,
            terms,
        })
    }

    /// Drop variables whose exponent is zero in every term.
    pub fn compact_vars(&self) -> LaurentPoly {
        let used: Vec<Var> = self
            .vars
            .iter()
            .enumerate()
            .filter(|(i, _)| self.terms.keys().any(|m| m.0[*i] != 0))
            .map(|(_, v)| *v)
            .collect();
        self.with_vars(&used)
            .expect("only unused variables dropped")
    }

    fn union_vars(&self, other: &LaurentPoly) -> Vec<Var> {
        let mut v = self.vars.clone();
        v.extend_from_slice(&other.vars);
        v.sort();
        v.dedup();
        v
    }

    fn aligned(&self, other: &LaurentPoly) -> (LaurentPoly, LaurentPoly) {
        let vars = self.union_vars(other);
        (
            self.with_vars(&vars).unwrap(),
            other.with_vars(&vars).unwrap(),
        )
    }

    pub fn add(&self, other: &LaurentPoly) -> LaurentPoly {
        let (a, b) = self.aligned(other);
        let mut sums: BTreeMap<Mono, Sum> =
            a.terms.into_iter().map(|(m, c)| (m, Sum::of(c))).collect();
        for (m, c) in b.terms {
            sums.entry(m).or_default().push(c);
        }
        LaurentPoly::from_sums(a.vars, sums)
    }

    pub fn sub(&self, other: &LaurentPoly) -> LaurentPoly {
        self.add(&other.scale(c(-1.0)))
    }

    pub fn scale(&self, factor: Complex64) -> LaurentPoly {
        let mut p = self.clone();
        for v in p.terms.values_mut() {
            *v *= factor;
        }
        p.prune();
        p
    }

    pub fn conj(&self) -> LaurentPoly {
        let mut p = self.clone();
        for v in p.terms.values_mut() {
            *v = v.conj();
        }
        p
    }

    pub fn mul(&self, other: &LaurentPoly) -> Result<LaurentPoly, PolyError> {
        let (a, b) = self.aligned(other);
        let vars = a.vars.clone();
        let at: Vec<(&Mono, &Complex64)> = a.terms.iter().collect();
        let bt: Vec<(&Mono, &Complex64)> = b.terms.iter().collect();
        let width = vars.len();

        let product_chunk =
            |chunk: &[(&Mono, &Complex64)]| -> Result<HashMap<Vec<i16>, Sum>, PolyError> {
                let mut acc: HashMap<Vec<i16>, Sum> =
                    HashMap::with_capacity(chunk.len() * bt.len());
                let mut buf = vec![0i16; width];
                for (ma, ca) in chunk {
                    for (mb, cb) in &bt {
                        for k in 0..width {
                            buf[k] = ma.0[k]
                                .checked_add(mb.0[k])
                                .ok_or(PolyError::ExponentOverflow(vars[k]))?;
                        }
                        acc.entry(buf.clone()).or_default().push(**ca * **cb);
                    }
                }
                Ok(acc)
            };

        // Fixed chunk boundaries and an in-order merge keep the floating point
        // summation order independent of the thread count.
        let chunks: Vec<HashMap<Vec<i16>, Sum>> =
            if at.len() * bt.len() >= PAR_THRESHOLD && at.len() > 1 {
                at.par_chunks(MUL_CHUNK)
                    .map(product_chunk)
                    .collect::<Result<Vec<_>, _>>()?
            } else {
                vec![product_chunk(&at)?]
            };
        let mut terms: BTreeMap<Mono, Sum> = BTreeMap::new();
        for chunk in chunks {
            for (e, v) in chunk {
                terms.entry(Mono(e)).or_default().merge(v);
            }
        }
        Ok(LaurentPoly::from_sums(vars, terms))
    }

    pub fn pow(&self, n: u32) -> Result<LaurentPoly, PolyError> {
        let mut out = LaurentPoly::one();
        for _ in 0..n {
            out = out.mul(self)?;
        }
        Ok(out)
    }

    /// Multiply each term by `Π scale_v^{e_v}`.
    pub fn scale_vars(&self, scales: &[(Var, Complex64)]) -> LaurentPoly {
        let mut p = self.clone();
        for (v, s) in scales {
            if let Some(i) = p.var_index(*v) {
                for (m, coeff) in p.terms.iter_mut() {
                    *coeff *= s.powi(m.0[i] as i32);
                }
            }
        }
        p.prune();
        p
    }

    /// `∂/∂v`.
    pub fn derivative(&self, v: Var) -> LaurentPoly {
        let Some(i) = self.var_index(v) else {
            return LaurentPoly {
                vars: self.vars.clone(),
                terms: BTreeMap::new(),
            };
        };
        let mut terms = BTreeMap::new();
        for (m, coeff) in &self.terms {
            let e = m.0[i];
            if e == 0 {
                continue;
            }
            let mut n = m.0.clone();
            n[i] = e - 1;
            terms.insert(Mono(n), *coeff * e as f64);
        }
        LaurentPoly {
            vars: self.vars.clone(),
            terms,
        }
    }

    /// Derivative with respect to the angle `θ` when `v = e^{iθ}`: multiplies
    /// each term by `i·e_v`.
    pub fn angle_derivative(&self, v: Var) -> LaurentPoly {
        let Some(i) = self.var_index(v) else {
            return LaurentPoly {
                vars: self.vars.clone(),
                terms: BTreeMap::new(),
            };
        };
        let mut terms = BTreeMap::new();
        for (m, coeff) in &self.terms {
            let e = m.0[i];
            if e != 0 {
                terms.insert(m.clone(), *coeff * Complex64::new(0.0, e as f64));
            }
        }
        LaurentPoly {
            vars: self.vars.clone(),
            terms,
        }
    }

    /// Evaluate with values listed in the order of [`LaurentPoly::vars`].
    pub fn eval(&self, point: &[Complex64]) -> Complex64 {
        assert_eq!(point.len(), self.vars.len(), "point dimension mismatch");
        let tables = PowerTables::new(self, point);
        self.terms
            .iter()
            .map(|(m, coeff)| coeff * tables.monomial(&m.0))
            .sum()
    }

    /// Evaluate with values given by name. Extra assignments are ignored.
    pub fn eval_with(&self, assign: &[(Var, Complex64)]) -> Result<Complex64, PolyError> {
        let point = self.point_from(assign)?;
        Ok(self.eval(&point))
    }

    fn point_from(&self, assign: &[(Var, Complex64)]) -> Result<Vec<Complex64>, PolyError> {
        self.vars
            .iter()
            .map(|v| {
                assign
                    .iter()
                    .find(|(w, _)| w == v)
                    .map(|(_, x)| *x)
                    .ok_or(PolyError::Unassigned(*v))
            })
            .collect()
    }

    /// Substitute numeric values for some variables and collect the rest.
    pub fn specialize(&self, assign: &[(Var, Complex64)]) -> LaurentPoly {
        let fixed: Vec<(usize, Complex64)> = assign
            .iter()
            .filter_map(|(v, x)| self.var_index(*v).map(|i| (i, *x)))
            .collect();
        let keep: Vec<usize> = (0..self.vars.len())
            .filter(|i| !fixed.iter().any(|f| f.0 == *i))
            .collect();
        let vars: Vec<Var> = keep.iter().map(|&i| self.vars[i]).collect();
        let mut terms: BTreeMap<Mono, Sum> = BTreeMap::new();
        for (m, coeff) in &self.terms {
            let mut value = *coeff;
            for &(i, x) in &fixed {
                value *= x.powi(m.0[i] as i32);
            }
            let e: Vec<i16> = keep.iter().map(|&i| m.0[i]).collect();
            terms.entry(Mono(e)).or_default().push(value);
        }
        LaurentPoly::from_sums(vars, terms)
    }

    /// Apply an exponent-level rewrite `(vars, exps) -> (new exps)` onto `new_vars`.
    fn remap(
        &self,
        new_vars: &[Var],
        f: impl Fn(&[i16]) -> Result<Vec<i16>, PolyError>,
    ) -> Result<LaurentPoly, PolyError> {
        let mut order: Vec<usize> = (0..new_vars.len()).collect();
        order.sort_by_key(|&i| new_vars[i]);
        let sorted: Vec<Var> = order.iter().map(|&i| new_vars[i]).collect();
        let mut terms: BTreeMap<Mono, Sum> = BTreeMap::new();
        for (m, coeff) in &self.terms {
            let e = f(&m.0)?;
            let e: Vec<i16> = order.iter().map(|&i| e[i]).collect();
            terms.entry(Mono(e)).or_default().push(*coeff);
        }
        Ok(LaurentPoly::from_sums(sorted, terms))
    }

    /// Rename variable `from` to `to` (which must not already be present).
    pub fn rename(&self, from: Var, to: Var) -> LaurentPoly {
        assert!(
            self.var_index(to).is_none(),
            "target variable already present"
        );
        let vars: Vec<Var> = self
            .vars
            .iter()
            .map(|&v| if v == from { to } else { v })
            .collect();
        self.remap(&vars, |e| Ok(e.to_vec())).unwrap()
    }

    /// Replace exponent `h` of `v` by `h / divisor`. Terms whose exponent is
    /// not a multiple must be negligible (relative `tol`) and are dropped.
    pub fn divide_exponent(
        &self,
        v: Var,
        divisor: i32,
        tol: f64,
    ) -> Result<LaurentPoly, PolyError> {
        let Some(i) = self.var_index(v) else {
            return Ok(self.clone());
        };
        let scale = self.max_abs_coeff();
        let mut terms = BTreeMap::new();
        for (m, coeff) in &self.terms {
            let h = m.0[i] as i32;
            if h % divisor != 0 {
                if coeff.norm() > tol * scale {
                    return Err(PolyError::FractionalHarmonic {
                        harmonic: h,
                        divisor,
                        magnitude: coeff.norm(),
                    });
                }
                continue;
            }
            let mut e = m.0.clone();
            e[i] = (h / divisor) as i16;
            terms.insert(Mono(e), *coeff);
        }
        let mut p = LaurentPoly {
            vars: self.vars.clone(),
            terms,
        };
        p.prune();
        Ok(p)
    }

    /// Smallest and largest exponent of `v` over all terms (0 if absent).
    pub fn exponent_range(&self, v: Var) -> (i32, i32) {
        match self.var_index(v) {
            None => (0, 0),
            Some(i) => {
                let mut lo = 0;
                let mut hi = 0;
                for m in self.terms.keys() {
                    lo = lo.min(m.0[i] as i32);
                    hi = hi.max(m.0[i] as i32);
                }
                (lo, hi)
            }
        }
    }

    pub fn degrees(&self) -> DegreeReport {
        let n = self.vars.len();
        let mut max = vec![i32::MIN; n];
        let mut min = vec![i32::MAX; n];
        let mut total = 0;
        let mut spatial = 0;
        let pair = |a: Var, b: Var| -> Option<(usize, usize)> {
            match (self.var_index(a), self.var_index(b)) {
                (None, None) => None,
                (x, y) => Some((x.unwrap_or(usize::MAX), y.unwrap_or(usize::MAX))),
            }
        };
        let vpair = pair(Var::V, Var::Vbar);
        let wpair = pair(Var::W, Var::Wbar);
        let mut vdeg = 0;
        let mut wdeg = 0;
        let spatial_idx: Vec<usize> = [Var::X, Var::Y, Var::Z, Var::X1, Var::X2, Var::X3, Var::X4]
            .iter()
            .filter_map(|v| self.var_index(*v))
            .collect();
        let get = |m: &Mono, i: usize| if i == usize::MAX { 0 } else { m.0[i] as i32 };
        for m in self.terms.keys() {
            for k in 0..n {
                max[k] = max[k].max(m.0[k] as i32);
                min[k] = min[k].min(m.0[k] as i32);
            }
            total = total.max(m.weight());
            spatial = spatial.max(spatial_idx.iter().map(|&i| m.0[i] as i32).sum::<i32>());
            if let Some((a, b)) = vpair {
                vdeg = vdeg.max(get(m, a).abs() + get(m, b).abs());
            }
            if let Some((a, b)) = wpair {
                wdeg = wdeg.max(get(m, a).abs() + get(m, b).abs());
            }
        }
        let per_variable = self
            .vars
            .iter()
            .enumerate()
            .map(|(k, v)| {
                let (lo, hi) = if self.terms.is_empty() {
                    (0, 0)
                } else {
                    (min[k], max[k])
                };
                (v.name().to_string(), VarDegree { min: lo, max: hi })
            })
            .collect();
        DegreeReport {
            per_variable,
            v_pair: vpair.map(|_| vdeg),
            w_pair: wpair.map(|_| wdeg),
            spatial,
            total,
            terms: self.terms.len(),
        }
    }

    pub fn degree_in(&self, v: Var) -> i32 {
        self.exponent_range(v).1
    }

    pub fn total_degree(&self) -> i32 {
        self.terms.keys().map(|m| m.weight()).max().unwrap_or(0)
    }

    // ---- JSON ----

    pub fn to_json_value(&self) -> PolyJson {
        PolyJson {
            vars: self.vars.iter().map(|v| v.name().to_string()).collect(),
            terms: self
                .terms
                .iter()
                .map(|(m, c)| TermJson {
                    exp: m.0.clone(),
                    re: c.re,
                    im: c.im,
                })
                .collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_json_value()).expect("polynomial JSON")
    }

    pub fn from_json_value(doc: &PolyJson) -> Result<Self, PolyError> {
        let vars: Vec<Var> = doc
            .vars
            .iter()
            .map(|name| {
                serde_json::from_value::<Var>(serde_json::Value::String(name.clone()))
                    .map_err(|_| PolyError::Json(format!("unknown variable {name:?}")))
            })
            .collect::<Result<_, _>>()?;
        let mut sorted = vars.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != vars.len() {
            return Err(PolyError::Json("repeated variable".into()));
        }
        let mut terms = Vec::with_capacity(doc.terms.len());
        for t in &doc.terms {
            if t.exp.len() != vars.len() {
                return Err(PolyError::Json("exponent length mismatch".into()));
            }
            for (k, e) in t.exp.iter().enumerate() {
                if *e < 0 && !vars[k].allows_negative() {
                    return Err(PolyError::NegativeExponent(vars[k]));
                }
            }
            terms.push((t.exp.clone(), Complex64::new(t.re, t.im)));
        }
        // keep values bit-exact: no pruning on load
        let mut order: Vec<usize> = (0..vars.len()).collect();
        order.sort_by_key(|&i| vars[i]);
        let mut map = BTreeMap::new();
        for (e, v) in terms {
            let e: Vec<i16> = order.iter().map(|&i| e[i]).collect();
            *map.entry(Mono(e)).or_insert(Complex64::new(0.0, 0.0)) += v;
        }
        Ok(LaurentPoly {
            vars: sorted,
            terms: map,
        })
    }

    pub fn from_json(text: &str) -> Result<Self, PolyError> {
        let doc: PolyJson =
            serde_json::from_str(text).map_err(|e| PolyError::Json(e.to_string()))?;
        Self::from_json_value(&doc)
    }
}

impl Serialize for LaurentPoly {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_json_value().serialize(s)
    }
}

impl<'de> Deserialize<'de> for LaurentPoly {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let doc = PolyJson::deserialize(d)?;
        LaurentPoly::from_json_value(&doc).map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PolyJson {
    pub vars: Vec<String>,
    pub terms: Vec<TermJson>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TermJson {
    pub exp: Vec<i16>,
    pub re: f64,
    pub im: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VarDegree {
    pub min: i32,
    pub max: i32,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DegreeReport {
    pub per_variable: BTreeMap<String, VarDegree>,
    /// Largest `|e_v| + |e_vbar|` over terms.
    pub v_pair: Option<i32>,
    pub w_pair: Option<i32>,
    /// Largest degree in the spatial variables alone.
    pub spatial: i32,
    /// Largest sum of absolute exponents over terms.
    pub total: i32,
    pub terms: usize,
}

impl DegreeReport {
    pub fn degree(&self, v: Var) -> i32 {
        self.per_variable.get(v.name()).map(|d| d.max).unwrap_or(0)
    }
}

/// Cached integer powers of each variable for fast evaluation.
pub(crate) struct PowerTables {
    offset: Vec<i32>,
    tables: Vec<Vec<Complex64>>,
}

impl PowerTables {
    pub(crate) fn new(p: &LaurentPoly, point: &[Complex64]) -> Self {
        let mut offset = Vec::with_capacity(point.len());
        let mut tables = Vec::with_capacity(point.len());
        for (k, x) in point.iter().enumerate() {
            let (lo, hi) = p.terms.keys().fold((0i32, 0i32), |(lo, hi), m| {
                let e = m.0[k] as i32;
                (lo.min(e), hi.max(e))
            });
            let mut t = Vec::with_capacity((hi - lo + 1) as usize);
            for e in lo..=hi {
                t.push(x.powi(e));
            }
            offset.push(lo);
            tables.push(t);
        }
        PowerTables { offset, tables }
    }

    pub(crate) fn monomial(&self, e: &[i16]) -> Complex64 {
        let mut acc = Complex64::new(1.0, 0.0);
        for (k, &ek) in e.iter().enumerate() {
            acc *= self.tables[k][(ek as i32 - self.offset[k]) as usize];
        }
        acc
    }
}

// ---- spatial slices ----

/// Polynomial in `x, y, z` with complex coefficients, for repeated evaluation
/// once every other variable has been fixed.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct SpatialPoly {
    terms: Vec<([u16; 3], Complex64)>,
    max: [u16; 3],
}

impl SpatialPoly {
    pub fn from_terms(terms: impl IntoIterator<Item = ([u16; 3], Complex64)>) -> Self {
        let mut acc: BTreeMap<[u16; 3], Complex64> = BTreeMap::new();
        for (e, v) in terms {
            *acc.entry(e).or_default() += v;
        }
        let terms: Vec<([u16; 3], Complex64)> = acc
            .into_iter()
            .filter(|(_, v)| *v != Complex64::new(0.0, 0.0))
            .collect();
        let mut max = [0u16; 3];
        for (e, _) in &terms {
            for k in 0..3 {
                max[k] = max[k].max(e[k]);
            }
        }
        SpatialPoly { terms, max }
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> &[([u16; 3], Complex64)] {
        &self.terms
    }

    pub fn derivative(&self, axis: usize) -> SpatialPoly {
        SpatialPoly::from_terms(
            self.terms
                .iter()
                .filter(|(e, _)| e[axis] > 0)
                .map(|(e, v)| {
                    let mut d = *e;
                    d[axis] -= 1;
                    (d, v * e[axis] as f64)
                }),
        )
    }

    pub fn add_scaled(&self, other: &SpatialPoly, k: Complex64) -> SpatialPoly {
        SpatialPoly::from_terms(
            self.terms
                .iter()
                .copied()
                .chain(other.terms.iter().map(|(e, v)| (*e, v * k))),
        )
    }

    fn powers(&self, p: [f64; 3]) -> [Vec<f64>; 3] {
        let table = |x: f64, n: u16| {
            let mut t = Vec::with_capacity(n as usize + 1);
            let mut acc = 1.0;
            for _ in 0..=n {
                t.push(acc);
                acc *= x;
            }
            t
        };
        [
            table(p[0], self.max[0]),
            table(p[1], self.max[1]),
            table(p[2], self.max[2]),
        ]
    }

    pub fn eval(&self, p: [f64; 3]) -> Complex64 {
        let [px, py, pz] = self.powers(p);
        self.terms
            .iter()
            .map(|(e, v)| v * (px[e[0] as usize] * py[e[1] as usize] * pz[e[2] as usize]))
            .sum()
    }

    /// Value and gradient in one pass.
    pub fn eval_grad(&self, p: [f64; 3]) -> (Complex64, [Complex64; 3]) {
        let [px, py, pz] = self.powers(p);
        let zero = Complex64::new(0.0, 0.0);
        let mut val = zero;
        let mut grad = [zero; 3];
        for (e, v) in &self.terms {
            let (a, b, c) = (e[0] as usize, e[1] as usize, e[2] as usize);
            val += v * (px[a] * py[b] * pz[c]);
            if a > 0 {
                grad[0] += v * (a as f64 * px[a - 1] * py[b] * pz[c]);
            }
            if b > 0 {
                grad[1] += v * (b as f64 * px[a] * py[b - 1] * pz[c]);
            }
            if c > 0 {
                grad[2] += v * (c as f64 * px[a] * py[b] * pz[c - 1]);
            }
        }
        (val, grad)
    }

    /// Sum of absolute term values at `p`, a scale for relative residuals.
    pub fn abs_sum(&self, p: [f64; 3]) -> f64 {
        let [px, py, pz] = self.powers(p);
        self.terms
            .iter()
            .map(|(e, v)| {
                v.norm() * (px[e[0] as usize] * py[e[1] as usize] * pz[e[2] as usize]).abs()
            })
            .sum()
    }
}

impl LaurentPoly {
    /// Collapse every variable except `x, y, z` into the coefficient:
    /// each term contributes `coeff · weight(exponents)` to its spatial monomial.
    /// `weight` sees the full exponent vector in [`LaurentPoly::vars`] order.
    pub fn to_spatial(
        &self,
        weight: impl Fn(&[i16]) -> Complex64,
    ) -> Result<SpatialPoly, PolyError> {
        let idx = [
            self.var_index(Var::X),
            self.var_index(Var::Y),
            self.var_index(Var::Z),
        ];
        let mut out = Vec::with_capacity(self.terms.len());
        for (m, coeff) in &self.terms {
            let mut e = [0u16; 3];
            for k in 0..3 {
                if let Some(i) = idx[k] {
                    if m.0[i] < 0 {
                        return Err(PolyError::NegativeExponent(self.vars[i]));
                    }
                    e[k] = m.0[i] as u16;
                }
            }
            let w = weight(&m.0);
            if w != Complex64::new(0.0, 0.0) {
                out.push((e, coeff * w));
            }
        }
        Ok(SpatialPoly::from_terms(out))
    }
}

// ---- substitutions ----

/// `e^{iht} ↦ v^h` for `h > 0` and `v̄^{-h}` for `h < 0`.
pub fn subst_unit_circle(g: &LaurentPoly) -> LaurentPoly {
    subst_unit_circle_var(g, Var::Eit, Var::V, Var::Vbar)
}

pub fn subst_unit_circle_var(g: &LaurentPoly, harmonic: Var, hol: Var, anti: Var) -> LaurentPoly {
    let Some(i) = g.var_index(harmonic) else {
        return g.clone();
    };
    let mut vars: Vec<Var> = g.vars.clone();
    vars.push(hol);
    vars.push(anti);
    g.remap(&vars, |e| {
        let mut out = e.to_vec();
        let h = out[i];
        out[i] = 0;
        out.push(h.max(0));
        out.push((-h).max(0));
        Ok(out)
    })
    .unwrap()
    .compact_vars()
}

/// Holomorphic substitution `e^{it} ↦ v`, `e^{-it} ↦ 1/v`, returned as
/// `numerator · v^{-denominator_power}` with no common `v` factor in the numerator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Holomorphic {
    pub numerator: LaurentPoly,
    pub denominator_power: i32,
}

pub fn subst_holomorphic(g: &LaurentPoly) -> Holomorphic {
    let (numerator, power) = clear_harmonic(g, Var::Eit, Var::V);
    Holomorphic {
        numerator,
        denominator_power: power,
    }
}

/// Rename `harmonic` to `target` and shift its exponents so the minimum is 0.
/// Returns the shifted polynomial and the removed power `-min`.
pub fn clear_harmonic(g: &LaurentPoly, harmonic: Var, target: Var) -> (LaurentPoly, i32) {
    let Some(i) = g.var_index(harmonic) else {
        return (g.clone(), 0);
    };
    let lo = g.terms.keys().map(|m| m.0[i] as i32).min().unwrap_or(0);
    let vars: Vec<Var> = g
        .vars
        .iter()
        .map(|&v| if v == harmonic { target } else { v })
        .collect();
    let p = g
        .remap(&vars, |e| {
            let mut out = e.to_vec();
            out[i] = (out[i] as i32 - lo) as i16;
            Ok(out)
        })
        .unwrap();
    (p, -lo)
}

/// Inverse stereographic projection `ℝ⁴ → S⁴ ⊂ ℝ³×ℂ` composed with `f`, with
/// the power of `x1²+x2²+x3²+x4²+1` cleared.
pub fn stereographic_pullback(f: &LaurentPoly) -> Result<LaurentPoly, PolyError> {
    for v in f.vars() {
        if !matches!(v, Var::X | Var::Y | Var::Z | Var::V | Var::Vbar) {
            return Err(PolyError::MissingVariable(*v));
        }
    }
    let one = LaurentPoly::one();
    let two = c(2.0);
    let sq = |v: Var| LaurentPoly::monomial(c(1.0), &[(v, 2)]);
    let norm = sq(Var::X1)
        .add(&sq(Var::X2))
        .add(&sq(Var::X3))
        .add(&sq(Var::X4));
    let denom = norm.add(&one);
    let x3 = LaurentPoly::var(Var::X3);
    let x4 = LaurentPoly::var(Var::X4).scale(Complex64::i());
    let images = [
        (Var::X, LaurentPoly::var(Var::X1).scale(two)),
        (Var::Y, LaurentPoly::var(Var::X2).scale(two)),
        (Var::Z, norm.sub(&one)),
        (Var::V, x3.add(&x4).scale(two)),
        (Var::Vbar, x3.sub(&x4).scale(two)),
    ];
    homogenize_substitute(f, &images, &denom)
}

/// `Σ c·Π image_v^{e_v} · denom^{d - Σe}` where `d` is the largest `Σe`.
/// All exponents in `f` must be nonnegative.
pub fn homogenize_substitute(
    f: &LaurentPoly,
    images: &[(Var, LaurentPoly)],
    denom: &LaurentPoly,
) -> Result<LaurentPoly, PolyError> {
    let d = f.total_degree();
    let mut power_cache: HashMap<(usize, i16), LaurentPoly> = HashMap::new();
    let mut denom_pows = vec![LaurentPoly::one()];
    for _ in 0..d {
        let next = denom_pows.last().unwrap().mul(denom)?;
        denom_pows.push(next);
    }
    let slots: Vec<usize> = f
        .vars()
        .iter()
        .map(|v| {
            images
                .iter()
                .position(|(w, _)| w == v)
                .ok_or(PolyError::MissingVariable(*v))
        })
        .collect::<Result<_, _>>()?;
    let all_vars = {
        let mut v: Vec<Var> = images.iter().flat_map(|(_, p)| p.vars().to_vec()).collect();
        v.extend_from_slice(denom.vars());
        v.sort();
        v.dedup();
        v
    };
    let mut acc: BTreeMap<Mono, Sum> = BTreeMap::new();
    for (e, coeff) in f.terms() {
        let mut term = LaurentPoly::constant(coeff);
        let mut weight = 0i32;
        for (k, &ek) in e.iter().enumerate() {
            if ek < 0 {
                return Err(PolyError::NegativeExponent(f.vars()[k]));
            }
            if ek == 0 {
                continue;
            }
            weight += ek as i32;
            let key = (slots[k], ek);
            if let std::collections::hash_map::Entry::Vacant(e) = power_cache.entry(key) {
                let pw = images[slots[k]].1.pow(ek as u32)?;
                e.insert(pw);
            }
            term = term.mul(&power_cache[&key])?;
        }
        term = term.mul(&denom_pows[(d - weight) as usize])?;
        let term = term.with_vars(&all_vars)?;
        for (m, v) in term.terms {
            acc.entry(m).or_default().push(v);
        }
    }
    Ok(LaurentPoly::from_sums(all_vars, acc))
}

/// Inverse stereographic projection `ℝ³ → S³ ⊂ ℂ²` used for satellite
/// patterns: `u = (2x3 + i(|x|²-1))/D`, `v = 2(x1 + i x2)/D`, `D = |x|²+1`,
/// which sends the unit circle of the `x1x2`-plane to `{u = 0}`.
pub fn stereographic3_pullback(f: &LaurentPoly) -> Result<LaurentPoly, PolyError> {
    for v in f.vars() {
        if !matches!(v, Var::U | Var::V | Var::Vbar) {
            return Err(PolyError::MissingVariable(*v));
        }
    }
    let one = LaurentPoly::one();
    let two = c(2.0);
    let sq = |v: Var| LaurentPoly::monomial(c(1.0), &[(v, 2)]);
    let norm = sq(Var::X1).add(&sq(Var::X2)).add(&sq(Var::X3));
    let denom = norm.add(&one);
    let x1 = LaurentPoly::var(Var::X1);
    let x2 = LaurentPoly::var(Var::X2).scale(Complex64::i());
    let images = [
        (
            Var::U,
            LaurentPoly::var(Var::X3)
                .scale(two)
                .add(&norm.sub(&one).scale(Complex64::i())),
        ),
        (Var::V, x1.add(&x2).scale(two)),
        (Var::Vbar, x1.sub(&x2).scale(two)),
    ];
    homogenize_substitute(f, &images, &denom)
}

/// Image of a point under the ℝ³ → S³ map of [`stereographic3_pullback`].
pub fn stereographic3_point(x: [f64; 3]) -> (Complex64, Complex64) {
    let n = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
    let d = n + 1.0;
    (
        Complex64::new(2.0 * x[2], n - 1.0) / d,
        Complex64::new(2.0 * x[0], 2.0 * x[1]) / d,
    )
}

/// Inverse of [`stereographic3_point`] for `(u, v)` on the unit sphere, `Im u ≠ 1`.
pub fn stereographic3_inverse(u: Complex64, v: Complex64) -> [f64; 3] {
    let k = 1.0 - u.im;
    [v.re / k, v.im / k, u.re / k]
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cx(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn difference_of_squares() {
        let u = LaurentPoly::var(Var::U);
        let one = LaurentPoly::one();
        let p = u.sub(&one).mul(&u.add(&one)).unwrap();
        let expect = LaurentPoly::monomial(c(1.0), &[(Var::U, 2)]).sub(&one);
        assert_eq!(p, expect);
        assert_eq!(p.eval(&[c(1.0)]), c(0.0));
        assert_eq!(p.degrees().degree(Var::U), 2);
        assert_eq!(p.mul(&one).unwrap(), p);
    }

    #[test]
    fn overflow_is_an_error() {
        let big = LaurentPoly::monomial(c(1.0), &[(Var::X, i16::MAX)]);
        let x = LaurentPoly::var(Var::X);
        assert_eq!(big.mul(&x), Err(PolyError::ExponentOverflow(Var::X)));
    }

    #[test]
    fn euler_identity() {
        let cos = LaurentPoly::var(Var::Eit)
            .add(&LaurentPoly::monomial(c(1.0), &[(Var::Eit, -1)]))
            .scale(c(0.5));
        let f = subst_unit_circle(&cos);
        let expect = LaurentPoly::var(Var::V)
            .add(&LaurentPoly::var(Var::Vbar))
            .scale(c(0.5));
        assert_eq!(f, expect);
    }

    #[test]
    fn holomorphic_inverse_harmonic() {
        let g = LaurentPoly::monomial(c(1.0), &[(Var::Eit, -1)]);
        let h = subst_holomorphic(&g);
        assert_eq!(h.denominator_power, 1);
        assert_eq!(
            h.numerator,
            LaurentPoly::one().with_vars(&[Var::V]).unwrap()
        );
    }

    #[test]
    fn stereographic_examples() {
        let z = LaurentPoly::var(Var::Z);
        let n = stereographic_pullback(&z).unwrap();
        let sq = |v: Var| LaurentPoly::monomial(c(1.0), &[(v, 2)]);
        let expect = sq(Var::X1)
            .add(&sq(Var::X2))
            .add(&sq(Var::X3))
            .add(&sq(Var::X4))
            .sub(&LaurentPoly::one());
        assert_eq!(n.sub(&expect).len(), 0);
        let one = stereographic_pullback(&LaurentPoly::one()).unwrap();
        assert_eq!(one, LaurentPoly::one());
    }

    #[test]
    fn json_round_trip_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = random_poly(&mut rng, &[Var::X, Var::V, Var::Eit], 12, 3);
        let back = LaurentPoly::from_json(&p.to_json()).unwrap();
        assert_eq!(back, p);
        assert_eq!(back.to_json(), p.to_json());
    }

    pub(crate) fn random_poly(
        rng: &mut ChaCha8Rng,
        vars: &[Var],
        n: usize,
        max_e: i16,
    ) -> LaurentPoly {
        let terms = (0..n).map(|_| {
            let e = vars
                .iter()
                .map(|v| {
                    if matches!(v, Var::Eit | Var::Eichi) {
                        rng.gen_range(-max_e..=max_e)
                    } else {
                        rng.gen_range(0..=max_e)
                    }
                })
                .collect();
            (e, cx(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        });
        LaurentPoly::from_terms(vars, terms)
    }

    #[test]
    fn ring_axioms_on_random_triples() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let vars = [Var::X, Var::Y, Var::Eit];
        for _ in 0..20 {
            let a = random_poly(&mut rng, &vars, 6, 2);
            let b = random_poly(&mut rng, &vars, 5, 2);
            let d = random_poly(&mut rng, &vars, 4, 2);
            let ab_d = a.mul(&b).unwrap().mul(&d).unwrap();
            let a_bd = a.mul(&b.mul(&d).unwrap()).unwrap();
            let diff = ab_d.sub(&a_bd);
            assert!(diff.max_abs_coeff() < 1e-12);
            assert!(a.mul(&b).unwrap().sub(&b.mul(&a).unwrap()).max_abs_coeff() < 1e-12);
        }
    }

    #[test]
    fn substitution_sampling_identities() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let vars = [Var::X, Var::Y, Var::Z, Var::Eit];
        let g = random_poly(&mut rng, &vars, 30, 3);
        let f = subst_unit_circle(&g);
        let h = subst_holomorphic(&g);
        for _ in 0..64 {
            let (x, y, z): (f64, f64, f64) = (rng.gen(), rng.gen(), rng.gen());
            let t: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
            let e = Complex64::from_polar(1.0, t);
            let gv = g
                .eval_with(&[
                    (Var::X, c(x)),
                    (Var::Y, c(y)),
                    (Var::Z, c(z)),
                    (Var::Eit, e),
                ])
                .unwrap();
            let fv = f
                .eval_with(&[
                    (Var::X, c(x)),
                    (Var::Y, c(y)),
                    (Var::Z, c(z)),
                    (Var::V, e),
                    (Var::Vbar, e.conj()),
                ])
                .unwrap();
            assert!((gv - fv).norm() < 1e-9 * (1.0 + gv.norm()));
            // off the unit circle
            let v = cx(rng.gen_range(0.2..2.0), rng.gen_range(-1.0..1.0));
            let num = h
                .numerator
                .eval_with(&[(Var::X, c(x)), (Var::Y, c(y)), (Var::Z, c(z)), (Var::V, v)])
                .unwrap();
            let direct = g
                .eval_with(&[
                    (Var::X, c(x)),
                    (Var::Y, c(y)),
                    (Var::Z, c(z)),
                    (Var::Eit, v),
                ])
                .unwrap();
            assert!(
                (num - direct * v.powi(h.denominator_power)).norm() < 1e-9 * (1.0 + num.norm())
            );
        }
        // no common factor of v in the numerator
        assert_eq!(h.numerator.exponent_range(Var::V).0, 0);
    }

    #[test]
    fn stereographic_sampling_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let f = random_poly(
            &mut rng,
            &[Var::X, Var::Y, Var::Z, Var::V, Var::Vbar],
            20,
            2,
        );
        let d = f.total_degree();
        let num = stereographic_pullback(&f).unwrap();
        for _ in 0..64 {
            let p: [f64; 4] = [
                rng.gen_range(-2.0..2.0),
                rng.gen_range(-2.0..2.0),
                rng.gen_range(-2.0..2.0),
                rng.gen_range(-2.0..2.0),
            ];
            let n2: f64 = p.iter().map(|a| a * a).sum();
            let den = n2 + 1.0;
            let v = cx(2.0 * p[2], 2.0 * p[3]) / den;
            let image = [
                (Var::X, c(2.0 * p[0] / den)),
                (Var::Y, c(2.0 * p[1] / den)),
                (Var::Z, c((n2 - 1.0) / den)),
                (Var::V, v),
                (Var::Vbar, v.conj()),
            ];
            let lhs = num
                .eval_with(&[
                    (Var::X1, c(p[0])),
                    (Var::X2, c(p[1])),
                    (Var::X3, c(p[2])),
                    (Var::X4, c(p[3])),
                ])
                .unwrap();
            let rhs = f.eval_with(&image).unwrap() * den.powi(d);
            assert!((lhs - rhs).norm() <= 1e-8 * rhs.norm().max(1.0));
        }
    }

    #[test]
    fn stereographic3_round_trip() {
        let p = [0.3, -0.7, 0.2];
        let (u, v) = stereographic3_point(p);
        assert!((u.norm_sqr() + v.norm_sqr() - 1.0).abs() < 1e-14);
        let back = stereographic3_inverse(u, v);
        for k in 0..3 {
            assert!((back[k] - p[k]).abs() < 1e-14);
        }
        let f = LaurentPoly::var(Var::U);
        let n = stereographic3_pullback(&f).unwrap();
        let val = n
            .eval_with(&[(Var::X1, c(p[0])), (Var::X2, c(p[1])), (Var::X3, c(p[2]))])
            .unwrap();
        let d = 1.0 + p.iter().map(|a| a * a).sum::<f64>();
        assert!((val - u * d).norm() < 1e-14);
    }

    #[test]
    fn derivatives() {
        let p = LaurentPoly::monomial(cx(2.0, 1.0), &[(Var::X, 3), (Var::Eit, -2)]);
        let dx = p.derivative(Var::X);
        assert_eq!(
            dx,
            LaurentPoly::monomial(cx(6.0, 3.0), &[(Var::X, 2), (Var::Eit, -2)])
        );
        let dt = p.angle_derivative(Var::Eit);
        assert_eq!(
            dt,
            LaurentPoly::monomial(cx(2.0, 1.0) * cx(0.0, -2.0), &[(Var::X, 3), (Var::Eit, -2)])
        );
    }
}
