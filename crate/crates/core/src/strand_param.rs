//! From a braid word to trigonometric strand parametrizations.
//!
//! Strand `j` (0-based) of component `C` with `s_C` strands sits at
//! `(F_C(τ), G_C(τ), H_C(τ))` with radius `ε·R_C(τ)`, where
//! `τ = (t + 2πj)/s_C`. The word is read left to right as `t` runs over
//! `[0, 2π]`; token `k` occupies the interval `[2πk/ℓ, 2π(k+1)/ℓ)` and the
//! diagram positions are sampled at `t = 2πk/ℓ`.

use std::f64::consts::TAU;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::braid_words::{
    position_schedule, strand_components, BraidWord, ClassicalBraidWord, ComponentDecomposition,
    GeneratorKind, LoopBraidWord,
};
use crate::trig_interp::{
    hermite_interpolate, interpolate_with_report, strand_angle, HermiteNode, TrigError, TrigPoly,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    ExtractX,
    BuildF,
    DetectCrossings,
    AssignY,
    BuildG,
    BuildH,
    BuildR,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Stage::ExtractX => "extract-x",
            Stage::BuildF => "build-F",
            Stage::DetectCrossings => "detect-crossings",
            Stage::AssignY => "assign-y",
            Stage::BuildG => "build-G",
            Stage::BuildH => "build-H",
            Stage::BuildR => "build-R",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StrandError {
    #[error("[{0}] the word is empty; at least one generator is required")]
    EmptyWord(Stage),
    #[error("[{stage}] component {component}: {source}")]
    Interpolation {
        stage: Stage,
        component: usize,
        source: TrigError,
    },
    #[error("[detect-crossings] tangential crossing of strands {a} and {b} near t = {time:.6}; perturb data values and retry")]
    Tangential {
        a: StrandLabel,
        b: StrandLabel,
        time: f64,
    },
    #[error("[detect-crossings] interval {interval}: interpolated strands permute as {found:?}, expected {expected:?}")]
    PermutationMismatch {
        interval: usize,
        found: Vec<usize>,
        expected: Vec<usize>,
    },
    #[error(
        "[build-R] strands {a} and {b} have coincident centres at shared height, t = {time:.6}"
    )]
    ZeroDistance {
        a: StrandLabel,
        b: StrandLabel,
        time: f64,
    },
}

impl StrandError {
    pub fn stage(&self) -> Stage {
        match self {
            StrandError::EmptyWord(s) => *s,
            StrandError::Interpolation { stage, .. } => *stage,
            StrandError::Tangential { .. } | StrandError::PermutationMismatch { .. } => {
                Stage::DetectCrossings
            }
            StrandError::ZeroDistance { .. } => Stage::BuildR,
        }
    }
}

/// `(component, strand)`, both 0-based.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct StrandLabel {
    pub component: usize,
    pub strand: usize,
}

impl fmt::Display for StrandLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(C{},{})", self.component + 1, self.strand + 1)
    }
}

/// Orientation of the x-lanes of the piecewise-linear diagram.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LaneDirection {
    /// Position `p` has `x = (s+1)/2 - p`; position 1 is rightmost.
    #[default]
    Descending,
    /// Position `p` has `x = p - (s+1)/2`.
    Ascending,
}

impl LaneDirection {
    pub fn lane(self, position: usize, strands: usize) -> f64 {
        let mid = (strands as f64 + 1.0) / 2.0;
        match self {
            LaneDirection::Descending => mid - position as f64,
            LaneDirection::Ascending => position as f64 - mid,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub lane_direction: LaneDirection,
    /// Samples per `[0, 2π]` when scanning for crossings and shared heights.
    pub samples: usize,
    pub bisection_tol: f64,
    /// `|difference|` below this at a non-crossing extremum counts as tangency.
    pub tangency_tol: f64,
    /// Ratio `max|coefficient| / max|data|` that triggers a jittered retry of `G`.
    pub coefficient_limit: f64,
    pub jitter_attempts: usize,
    pub seed: u64,
    /// Grid for the radius positivity check.
    pub positivity_grid: usize,
    /// Fraction of the separation threshold used for `ε`.
    pub epsilon_safety: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            lane_direction: LaneDirection::Descending,
            samples: 8192,
            bisection_tol: 1e-10,
            tangency_tol: 1e-9,
            coefficient_limit: 1e5,
            jitter_attempts: 3,
            seed: 0,
            positivity_grid: 4096,
            epsilon_safety: 0.9,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrandKind {
    Classical,
    Loop,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "class", rename_all = "snake_case")]
pub enum EventClass {
    /// The crossing realizing the interval's token.
    Target {
        kind: GeneratorKind,
        sign: i8,
    },
    Spurious,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrossingEvent {
    pub time: f64,
    /// `a` is the strand at the lower diagram position at the start of the interval.
    pub a: StrandLabel,
    pub b: StrandLabel,
    pub interval: usize,
    pub class: EventClass,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComponentParams {
    pub strands: usize,
    pub x: TrigPoly,
    pub y: TrigPoly,
    /// Height and radius; absent for classical systems.
    pub z: Option<TrigPoly>,
    pub radius: Option<TrigPoly>,
}

#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct Diagnostics {
    pub condition_x: Vec<f64>,
    pub condition_y: Vec<f64>,
    pub condition_radius: Vec<f64>,
    /// Number of jittered retries used for the `y` data (0 = unjittered).
    pub jitter_attempts_used: usize,
    pub radius_shift: f64,
    /// Minimum of centre distance over radius sum at shared heights, before scaling.
    pub separation_threshold: Option<f64>,
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StrandSystem {
    pub kind: StrandKind,
    pub word: String,
    pub strand_count: usize,
    pub length: usize,
    pub decomposition: ComponentDecomposition,
    pub components: Vec<ComponentParams>,
    /// Common scale applied to every radius polynomial (1 for classical systems).
    pub epsilon: f64,
    pub events: Vec<CrossingEvent>,
    pub config: PipelineConfig,
    pub diagnostics: Diagnostics,
}

impl StrandSystem {
    pub fn labels(&self) -> Vec<StrandLabel> {
        labels_of(&self.decomposition)
    }

    pub fn angle(&self, label: StrandLabel, t: f64) -> f64 {
        strand_angle(t, label.strand, self.components[label.component].strands)
    }

    pub fn x(&self, label: StrandLabel, t: f64) -> f64 {
        self.components[label.component]
            .x
            .eval(self.angle(label, t))
    }

    pub fn y(&self, label: StrandLabel, t: f64) -> f64 {
        self.components[label.component]
            .y
            .eval(self.angle(label, t))
    }

    pub fn z(&self, label: StrandLabel, t: f64) -> f64 {
        self.components[label.component]
            .z
            .as_ref()
            .map_or(0.0, |p| p.eval(self.angle(label, t)))
    }

    /// `dz/dt` along the strand.
    pub fn z_rate(&self, label: StrandLabel, t: f64) -> f64 {
        let c = &self.components[label.component];
        c.z.as_ref().map_or(0.0, |p| {
            p.derivative().eval(self.angle(label, t)) / c.strands as f64
        })
    }

    /// Ring radius including the `ε` scale.
    pub fn radius(&self, label: StrandLabel, t: f64) -> f64 {
        self.epsilon * self.unscaled_radius(label, t)
    }

    pub fn unscaled_radius(&self, label: StrandLabel, t: f64) -> f64 {
        self.components[label.component]
            .radius
            .as_ref()
            .map_or(0.0, |p| p.eval(self.angle(label, t)))
    }

    pub fn center(&self, label: StrandLabel, t: f64) -> [f64; 3] {
        [self.x(label, t), self.y(label, t), self.z(label, t)]
    }

    /// Point at ring angle `θ` on the ring of `label` at time `t`.
    pub fn ring_point(&self, label: StrandLabel, t: f64, theta: f64) -> [f64; 3] {
        let [x, y, z] = self.center(label, t);
        let r = self.radius(label, t);
        [x + r * theta.cos(), y + r * theta.sin(), z]
    }

    pub fn is_loop(&self) -> bool {
        self.kind == StrandKind::Loop
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("strand system JSON")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

fn labels_of(d: &ComponentDecomposition) -> Vec<StrandLabel> {
    d.labels()
        .into_iter()
        .map(|(component, strand)| StrandLabel { component, strand })
        .collect()
}

// ---- step 1: x data and F ----

/// Per component, the `(angle, lane)` nodes of all its strands at the sample times.
pub fn extract_x_data<W: BraidWord + ?Sized>(
    word: &W,
    decomposition: &ComponentDecomposition,
    direction: LaneDirection,
) -> Result<Vec<Vec<(f64, f64)>>, StrandError> {
    let len = word.len();
    if len == 0 {
        return Err(StrandError::EmptyWord(Stage::ExtractX));
    }
    let s = word.strand_count();
    let schedule = position_schedule(word);
    let mut out = Vec::with_capacity(decomposition.len());
    for (c, cycle) in decomposition.components().iter().enumerate() {
        let sc = cycle.len();
        let mut nodes = Vec::with_capacity(sc * len);
        for (j, &start) in cycle.iter().enumerate() {
            for (k, row) in schedule.iter().take(len).enumerate() {
                let t = TAU * k as f64 / len as f64;
                nodes.push((strand_angle(t, j, sc), direction.lane(row[start - 1], s)));
            }
        }
        debug_assert_eq!(nodes.len(), decomposition.strands_in(c) * len);
        out.push(nodes);
    }
    Ok(out)
}

pub fn build_f(nodes: &[Vec<(f64, f64)>]) -> Result<(Vec<TrigPoly>, Vec<f64>), StrandError> {
    let mut polys = Vec::with_capacity(nodes.len());
    let mut conds = Vec::with_capacity(nodes.len());
    for (component, n) in nodes.iter().enumerate() {
        let i = interpolate_with_report(n).map_err(|source| StrandError::Interpolation {
            stage: Stage::BuildF,
            component,
            source,
        })?;
        polys.push(i.poly);
        conds.push(i.condition);
    }
    Ok((polys, conds))
}

// ---- step 2: crossings ----

/// Root finder for `f` on `[0, 2π)`: sign changes on a uniform grid refined
/// by bisection, plus a check of every near-zero extremum between samples.
/// Returns roots, or `Err(t)` for a tangential zero at `t`.
pub fn periodic_roots(
    f: &(dyn Fn(f64) -> f64 + Sync),
    samples: usize,
    tol: f64,
    tangency_tol: f64,
) -> Result<Vec<f64>, f64> {
    let h = TAU / samples as f64;
    let vals: Vec<f64> = (0..=samples)
        .into_par_iter()
        .map(|k| f(k as f64 * h))
        .collect();
    let scale = vals.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    let mut roots = Vec::new();
    let push = |r: f64, roots: &mut Vec<f64>| {
        let r = if r >= TAU { r - TAU } else { r };
        if !roots.iter().any(|q: &f64| (q - r).abs() < 10.0 * tol) {
            roots.push(r);
        }
    };
    for k in 0..samples {
        let (a, b) = (vals[k], vals[k + 1]);
        let (ta, tb) = (k as f64 * h, (k + 1) as f64 * h);
        if a == 0.0 {
            push(ta, &mut roots);
            continue;
        }
        if a * b < 0.0 {
            push(bisect(f, ta, tb, a, tol), &mut roots);
        }
    }
    // near-zero extrema that do not change sign on the grid
    for k in 1..samples {
        let (p, q, r) = (vals[k - 1], vals[k], vals[k + 1]);
        if q == 0.0 || p * q <= 0.0 || q * r <= 0.0 {
            continue;
        }
        if q.abs() <= p.abs() && q.abs() <= r.abs() && q.abs() < 1e-3 * scale {
            let sign = q.signum();
            let g = |t: f64| sign * f(t);
            let (tm, vm) = golden_min(&g, (k - 1) as f64 * h, (k + 1) as f64 * h, tol);
            if vm < -tangency_tol * scale {
                // two simple roots hidden between samples
                push(bisect(f, (k - 1) as f64 * h, tm, p, tol), &mut roots);
                push(bisect(f, tm, (k + 1) as f64 * h, f(tm), tol), &mut roots);
            } else if vm.abs() <= tangency_tol * scale {
                return Err(tm);
            }
        }
    }
    roots.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(roots)
}

fn bisect(f: &(dyn Fn(f64) -> f64 + Sync), mut lo: f64, mut hi: f64, flo: f64, tol: f64) -> f64 {
    let mut flo = flo;
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if (fm < 0.0) == (flo < 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn golden_min(f: &dyn Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    let t = 0.5 * (a + b);
    (t, f(t))
}

fn x_of(components: &[TrigPoly], strands: &[usize], l: StrandLabel, t: f64) -> f64 {
    components[l.component].eval(strand_angle(t, l.strand, strands[l.component]))
}

/// All crossings of the interpolated x-graphs, classified against `word`.
pub fn detect_crossings<W: BraidWord + ?Sized>(
    word: &W,
    decomposition: &ComponentDecomposition,
    x: &[TrigPoly],
    config: &PipelineConfig,
) -> Result<Vec<CrossingEvent>, StrandError> {
    let len = word.len();
    if len == 0 {
        return Err(StrandError::EmptyWord(Stage::DetectCrossings));
    }
    let strands: Vec<usize> = (0..decomposition.len())
        .map(|c| decomposition.strands_in(c))
        .collect();
    let labels = labels_of(decomposition);
    let mut raw: Vec<(f64, StrandLabel, StrandLabel)> = Vec::new();
    for (i, &a) in labels.iter().enumerate() {
        for &b in &labels[i + 1..] {
            let diff = |t: f64| x_of(x, &strands, a, t) - x_of(x, &strands, b, t);
            let roots = periodic_roots(
                &diff,
                config.samples,
                config.bisection_tol,
                config.tangency_tol,
            )
            .map_err(|time| StrandError::Tangential { a, b, time })?;
            raw.extend(roots.into_iter().map(|t| (t, a, b)));
        }
    }
    raw.sort_by(|p, q| p.0.partial_cmp(&q.0).unwrap());

    let schedule = position_schedule(word);
    let label_at = |k: usize, pos: usize| -> StrandLabel {
        let start = schedule[0]
            .iter()
            .enumerate()
            .find(|(p, _)| schedule[k][*p] == pos)
            .map(|(p, _)| p + 1)
            .unwrap();
        let (component, strand) = decomposition.strand_at(start);
        StrandLabel { component, strand }
    };
    let indices = word.generator_indices();
    let signs = word.crossing_signs();
    let kinds = word.kinds();
    let mut seen_target = vec![false; len];
    let mut events = Vec::with_capacity(raw.len());
    for (time, p, q) in raw {
        let interval = ((time * len as f64 / TAU).floor() as usize).min(len - 1);
        let i = indices[interval];
        let lo = label_at(interval, i);
        let hi = label_at(interval, i + 1);
        let is_pair = (p == lo && q == hi) || (p == hi && q == lo);
        let (a, b) = if is_pair {
            (lo, hi)
        } else {
            // order by diagram position at the start of the interval
            let pos = |l: StrandLabel| {
                schedule[interval][decomposition.start_position(l.component, l.strand) - 1]
            };
            if pos(p) < pos(q) {
                (p, q)
            } else {
                (q, p)
            }
        };
        let class = if is_pair && !seen_target[interval] {
            seen_target[interval] = true;
            EventClass::Target {
                kind: kinds.as_ref().map_or(GeneratorKind::Rho, |k| k[interval]),
                sign: signs[interval],
            }
        } else {
            EventClass::Spurious
        };
        events.push(CrossingEvent {
            time,
            a,
            b,
            interval,
            class,
        });
    }
    check_interval_permutations(word, decomposition, &events)?;
    Ok(events)
}

/// Replays the events of each interval on the x-order at its start and
/// compares with the order at its end.
fn check_interval_permutations<W: BraidWord + ?Sized>(
    word: &W,
    decomposition: &ComponentDecomposition,
    events: &[CrossingEvent],
) -> Result<(), StrandError> {
    let schedule = position_schedule(word);
    let s = word.strand_count();
    for k in 0..word.len() {
        // order[pos-1] = start position of the strand at diagram position pos
        let mut order = vec![0usize; s];
        for (start0, &pos) in schedule[k].iter().enumerate() {
            order[pos - 1] = start0 + 1;
        }
        for e in events.iter().filter(|e| e.interval == k) {
            let pa = decomposition.start_position(e.a.component, e.a.strand);
            let pb = decomposition.start_position(e.b.component, e.b.strand);
            let ia = order.iter().position(|&p| p == pa).unwrap();
            let ib = order.iter().position(|&p| p == pb).unwrap();
            order.swap(ia, ib);
        }
        let mut expected = vec![0usize; s];
        for (start0, &pos) in schedule[k + 1].iter().enumerate() {
            expected[pos - 1] = start0 + 1;
        }
        if order != expected {
            return Err(StrandError::PermutationMismatch {
                interval: k,
                found: order,
                expected,
            });
        }
    }
    Ok(())
}

// ---- y data and G ----

/// Per component `(angle, value)` nodes for `G`.
///
/// Every strand gets the value `2·position - (s+1)` in each interval (position
/// at the interval start), centred like the x-lanes. The target pair of a
/// classical/exchange token is swapped if needed so that the over strand is
/// higher; a pass-through token instead gives its first crossing the shared
/// midpoint `2i - s`. `jitter` perturbs the base values by up to `±jitter`
/// without changing their order.
pub fn assign_y_values<W: BraidWord + ?Sized>(
    word: &W,
    decomposition: &ComponentDecomposition,
    events: &[CrossingEvent],
    jitter: Option<(&mut ChaCha8Rng, f64)>,
) -> Vec<Vec<(f64, f64)>> {
    let len = word.len();
    let s = word.strand_count();
    let schedule = position_schedule(word);
    let indices = word.generator_indices();
    // base[k][pos-1]
    let mut base: Vec<Vec<f64>> = (0..len)
        .map(|_| (1..=s).map(|p| (2 * p) as f64 - (s + 1) as f64).collect())
        .collect();
    if let Some((rng, amp)) = jitter {
        for row in base.iter_mut() {
            for v in row.iter_mut() {
                *v += rng.gen_range(-amp..=amp);
            }
        }
    }
    let strands: Vec<usize> = (0..decomposition.len())
        .map(|c| decomposition.strands_in(c))
        .collect();
    let pos = |k: usize, l: StrandLabel| {
        schedule[k][decomposition.start_position(l.component, l.strand) - 1]
    };
    let mut out = vec![Vec::new(); decomposition.len()];
    for e in events {
        let k = e.interval;
        let i = indices[k];
        let mut ya = base[k][pos(k, e.a) - 1];
        let mut yb = base[k][pos(k, e.b) - 1];
        let target_pair = pos(k, e.a) == i && pos(k, e.b) == i + 1;
        if target_pair {
            let target = events
                .iter()
                .find(|f| f.interval == k && matches!(f.class, EventClass::Target { .. }))
                .expect("every interval has a target crossing");
            let EventClass::Target { kind, sign } = target.class else {
                unreachable!()
            };
            match kind {
                GeneratorKind::Sigma if std::ptr::eq(e, target) => {
                    let mid = 0.5 * (ya + yb);
                    ya = mid;
                    yb = mid;
                }
                GeneratorKind::Sigma => {}
                GeneratorKind::Rho => {
                    // sign +1: the strand at position i passes over
                    let (lo, hi) = if ya < yb { (ya, yb) } else { (yb, ya) };
                    if sign > 0 {
                        ya = hi;
                        yb = lo;
                    } else {
                        ya = lo;
                        yb = hi;
                    }
                }
            }
        }
        out[e.a.component].push((strand_angle(e.time, e.a.strand, strands[e.a.component]), ya));
        out[e.b.component].push((strand_angle(e.time, e.b.strand, strands[e.b.component]), yb));
    }
    out
}

/// `G` per component. Components without crossings get `G = 0`.
pub fn build_g(nodes: &[Vec<(f64, f64)>]) -> Result<(Vec<TrigPoly>, Vec<f64>), StrandError> {
    let mut polys = Vec::with_capacity(nodes.len());
    let mut conds = Vec::with_capacity(nodes.len());
    for (component, n) in nodes.iter().enumerate() {
        if n.is_empty() {
            polys.push(TrigPoly::zero());
            conds.push(1.0);
            continue;
        }
        let i = interpolate_with_report(n).map_err(|source| StrandError::Interpolation {
            stage: Stage::BuildG,
            component,
            source,
        })?;
        polys.push(i.poly);
        conds.push(i.condition);
    }
    Ok((polys, conds))
}

fn coefficient_ratio(polys: &[TrigPoly], nodes: &[Vec<(f64, f64)>]) -> f64 {
    let data = nodes
        .iter()
        .flatten()
        .fold(0.0f64, |m, n| m.max(n.1.abs()))
        .max(1.0);
    let coeff = polys
        .iter()
        .flat_map(|p| {
            std::iter::once(p.constant)
                .chain(p.cos.iter().copied())
                .chain(p.sin.iter().copied())
        })
        .fold(0.0f64, |m, c| m.max(c.abs()));
    coeff / data
}

// ---- pass-through data: H and R ----

/// The target pass-through events with `(inner, outer)` strands.
/// For `σ_i` the strand at position `i` goes through the other ring from
/// above; `σ_i^{-1}` is the time reverse, so the strand at `i+1` goes through
/// from below.
pub fn pass_through_events(
    events: &[CrossingEvent],
) -> Vec<(CrossingEvent, StrandLabel, StrandLabel, i8)> {
    events
        .iter()
        .filter_map(|e| match e.class {
            EventClass::Target {
                kind: GeneratorKind::Sigma,
                sign,
            } => {
                let (inner, outer) = if sign > 0 { (e.a, e.b) } else { (e.b, e.a) };
                Some((*e, inner, outer, sign))
            }
            _ => None,
        })
        .collect()
}

/// Hermite data: height 0 on both strands, slope `-1` on the strand moving
/// down through the crossing and `+1` on the other.
pub fn build_h(
    events: &[CrossingEvent],
    decomposition: &ComponentDecomposition,
) -> Result<Vec<TrigPoly>, StrandError> {
    let strands: Vec<usize> = (0..decomposition.len())
        .map(|c| decomposition.strands_in(c))
        .collect();
    let mut nodes: Vec<Vec<HermiteNode>> = vec![Vec::new(); decomposition.len()];
    for (e, inner, outer, sign) in pass_through_events(events) {
        // inner comes from above for sign +1, from below for sign -1
        let inner_slope = -(sign as f64);
        for (l, slope) in [(inner, inner_slope), (outer, -inner_slope)] {
            nodes[l.component].push(HermiteNode {
                angle: strand_angle(e.time, l.strand, strands[l.component]),
                value: 0.0,
                slope,
            });
        }
    }
    nodes
        .iter()
        .enumerate()
        .map(|(component, n)| {
            if n.is_empty() {
                Ok(TrigPoly::zero())
            } else {
                hermite_interpolate(n).map_err(|source| StrandError::Interpolation {
                    stage: Stage::BuildH,
                    component,
                    source,
                })
            }
        })
        .collect()
}

/// Radius polynomials before `ε` scaling: value 1 on the inner and 2 on the
/// outer strand of each pass-through, then a common shift if any radius is
/// not positive on the grid. Returns polynomials, conditions and the shift.
pub fn build_radius(
    events: &[CrossingEvent],
    decomposition: &ComponentDecomposition,
    grid: usize,
) -> Result<(Vec<TrigPoly>, Vec<f64>, f64), StrandError> {
    let strands: Vec<usize> = (0..decomposition.len())
        .map(|c| decomposition.strands_in(c))
        .collect();
    let mut nodes: Vec<Vec<(f64, f64)>> = vec![Vec::new(); decomposition.len()];
    for (e, inner, outer, _) in pass_through_events(events) {
        nodes[inner.component].push((
            strand_angle(e.time, inner.strand, strands[inner.component]),
            1.0,
        ));
        nodes[outer.component].push((
            strand_angle(e.time, outer.strand, strands[outer.component]),
            2.0,
        ));
    }
    let mut polys = Vec::new();
    let mut conds = Vec::new();
    for (component, n) in nodes.iter().enumerate() {
        if n.is_empty() {
            polys.push(TrigPoly::constant(1.0));
            conds.push(1.0);
        } else {
            let i = interpolate_with_report(n).map_err(|source| StrandError::Interpolation {
                stage: Stage::BuildR,
                component,
                source,
            })?;
            polys.push(i.poly);
            conds.push(i.condition);
        }
    }
    let min = polys
        .iter()
        .flat_map(|p| (0..grid).map(move |k| p.eval(TAU * k as f64 / grid as f64)))
        .fold(f64::INFINITY, f64::min);
    let shift = if min <= 0.0 { 1.0 - min } else { 0.0 };
    if shift > 0.0 {
        polys = polys.iter().map(|p| p.add_constant(shift)).collect();
    }
    Ok((polys, conds, shift))
}

/// One candidate contact between two rings at a shared height.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RingContact {
    pub a: StrandLabel,
    pub b: StrandLabel,
    pub time: f64,
    pub distance: f64,
    pub radius_a: f64,
    pub radius_b: f64,
}

impl RingContact {
    pub fn ratio(&self) -> f64 {
        self.distance / (self.radius_a + self.radius_b)
    }
}

/// Largest common radius scale keeping coplanar rings apart: the minimum of
/// centre distance over radius sum. `+∞` if there is nothing to separate.
pub fn separation_threshold(contacts: &[RingContact]) -> f64 {
    contacts
        .iter()
        .map(|c| c.ratio())
        .fold(f64::INFINITY, f64::min)
}

/// `ε` from a separation threshold.
pub fn epsilon_from_threshold(threshold: f64, safety: f64) -> f64 {
    (safety * threshold).min(1.0)
}

/// All times at which two rings sit at the same height, excluding each
/// pair's own pass-through crossings (where the rings are meant to be nested).
/// Uses the unscaled radii of `system`.
pub fn shared_height_contacts(system: &StrandSystem) -> Result<Vec<RingContact>, StrandError> {
    let labels = system.labels();
    let samples = system.config.samples;
    let passes = pass_through_events(&system.events);
    let mut contacts = Vec::new();
    for (i, &a) in labels.iter().enumerate() {
        for &b in &labels[i + 1..] {
            let dz = |t: f64| system.z(a, t) - system.z(b, t);
            let scale = (0..64)
                .map(|k| dz(TAU * k as f64 / 64.0).abs())
                .fold(0.0, f64::max);
            let times: Vec<f64> = if scale < 1e-12 {
                // identical heights throughout: every time is a contact
                (0..samples)
                    .map(|k| TAU * k as f64 / samples as f64)
                    .collect()
            } else {
                match periodic_roots(
                    &dz,
                    samples,
                    system.config.bisection_tol,
                    system.config.tangency_tol,
                ) {
                    Ok(r) => r,
                    // touching heights still count as shared
                    Err(t) => vec![t],
                }
            };
            for time in times {
                let own_pass = passes.iter().any(|(e, inner, outer, _)| {
                    let same = (*inner == a && *outer == b) || (*inner == b && *outer == a);
                    same && (e.time - time).abs() < 1e-6
                });
                if own_pass {
                    continue;
                }
                let (ca, cb) = (system.center(a, time), system.center(b, time));
                let distance = ((ca[0] - cb[0]).powi(2) + (ca[1] - cb[1]).powi(2)).sqrt();
                if distance < 1e-12 {
                    return Err(StrandError::ZeroDistance { a, b, time });
                }
                contacts.push(RingContact {
                    a,
                    b,
                    time,
                    distance,
                    radius_a: system.unscaled_radius(a, time),
                    radius_b: system.unscaled_radius(b, time),
                });
            }
        }
    }
    Ok(contacts)
}

// ---- pipelines ----

struct Core {
    decomposition: ComponentDecomposition,
    x: Vec<TrigPoly>,
    y: Vec<TrigPoly>,
    events: Vec<CrossingEvent>,
    diagnostics: Diagnostics,
}

fn core_pipeline<W: BraidWord + ?Sized>(
    word: &W,
    config: &PipelineConfig,
) -> Result<Core, StrandError> {
    let decomposition = strand_components(word);
    let x_nodes = extract_x_data(word, &decomposition, config.lane_direction)?;
    let (x, condition_x) = build_f(&x_nodes)?;
    let events = detect_crossings(word, &decomposition, &x, config)?;

    let mut diagnostics = Diagnostics {
        condition_x,
        ..Default::default()
    };
    let nodes = assign_y_values(word, &decomposition, &events, None);
    let (mut y, mut cond) = build_g(&nodes)?;
    let mut ratio = coefficient_ratio(&y, &nodes);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut attempt = 0;
    while ratio > config.coefficient_limit && attempt < config.jitter_attempts {
        attempt += 1;
        // 10% of the spacing between neighbouring base values
        let nodes = assign_y_values(word, &decomposition, &events, Some((&mut rng, 0.2)));
        let (cand, cand_cond) = build_g(&nodes)?;
        let cand_ratio = coefficient_ratio(&cand, &nodes);
        if cand_ratio < ratio {
            y = cand;
            cond = cand_cond;
            ratio = cand_ratio;
            diagnostics.jitter_attempts_used = attempt;
        }
    }
    if ratio > config.coefficient_limit {
        diagnostics.warnings.push(format!(
            "y interpolation coefficients exceed {:.1e} times the data after {} jittered attempts (ratio {:.3e})",
            config.coefficient_limit, config.jitter_attempts, ratio
        ));
    }
    diagnostics.condition_y = cond;
    Ok(Core {
        decomposition,
        x,
        y,
        events,
        diagnostics,
    })
}

/// Steps 1-2 for a classical braid: `F` and `G` only.
pub fn classical_strand_system(
    word: &ClassicalBraidWord,
    config: &PipelineConfig,
) -> Result<StrandSystem, StrandError> {
    let core = core_pipeline(word, config)?;
    let components = core
        .x
        .into_iter()
        .zip(core.y)
        .enumerate()
        .map(|(c, (x, y))| ComponentParams {
            strands: core.decomposition.strands_in(c),
            x,
            y,
            z: None,
            radius: None,
        })
        .collect();
    Ok(StrandSystem {
        kind: StrandKind::Classical,
        word: word.to_text(),
        strand_count: word.strand_count(),
        length: word.len(),
        decomposition: core.decomposition,
        components,
        epsilon: 1.0,
        events: core.events,
        config: config.clone(),
        diagnostics: core.diagnostics,
    })
}

/// Steps 1-4 for a loop braid: `F`, `G`, `H`, `R` and the scale `ε`.
pub fn loop_strand_system(
    word: &LoopBraidWord,
    config: &PipelineConfig,
) -> Result<StrandSystem, StrandError> {
    let core = core_pipeline(word, config)?;
    let z = build_h(&core.events, &core.decomposition)?;
    let (radius, condition_radius, shift) =
        build_radius(&core.events, &core.decomposition, config.positivity_grid)?;
    let mut diagnostics = core.diagnostics;
    diagnostics.condition_radius = condition_radius;
    diagnostics.radius_shift = shift;
    let components = core
        .x
        .into_iter()
        .zip(core.y)
        .zip(z.into_iter().zip(radius))
        .enumerate()
        .map(|(c, ((x, y), (z, r)))| ComponentParams {
            strands: core.decomposition.strands_in(c),
            x,
            y,
            z: Some(z),
            radius: Some(r),
        })
        .collect();
    let mut system = StrandSystem {
        kind: StrandKind::Loop,
        word: word.to_text(),
        strand_count: word.strand_count(),
        length: word.len(),
        decomposition: core.decomposition,
        components,
        epsilon: 1.0,
        events: core.events,
        config: config.clone(),
        diagnostics,
    };
    let contacts = shared_height_contacts(&system)?;
    let threshold = separation_threshold(&contacts);
    system.diagnostics.separation_threshold = threshold.is_finite().then_some(threshold);
    system.epsilon = epsilon_from_threshold(threshold, config.epsilon_safety);
    Ok(system)
}

/// Loop system assembled from given polynomials (no pipeline), e.g. for
/// hand-made parametrizations. Events are left empty.
pub fn loop_system_from_parts(
    word: &LoopBraidWord,
    components: Vec<ComponentParams>,
    epsilon: f64,
    config: &PipelineConfig,
) -> StrandSystem {
    StrandSystem {
        kind: StrandKind::Loop,
        word: word.to_text(),
        strand_count: word.strand_count(),
        length: word.len(),
        decomposition: strand_components(word),
        components,
        epsilon,
        events: Vec::new(),
        config: config.clone(),
        diagnostics: Diagnostics::default(),
    }
}
