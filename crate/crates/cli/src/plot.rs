use std::f64::consts::TAU;
use std::fs::File;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context, Result};
use braidforge::constructors::{strand_points, ConstructionResult};
use braidforge::poly_algebra::Var;
use braidforge::vector_field::{write_csv, FieldForm, FieldSample, FieldSource};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::RunConfig;

const STRAND_TIMES: usize = 128;
/// Fraction of the strand bounding box added on each side when drawing field sample points.
const BOX_MARGIN: f64 = 0.25;

#[derive(Debug, Serialize)]
pub struct FieldSummary {
    pub samples: usize,
    pub form: FieldForm,
    /// Largest `|div V| / Σ|∂_i V_i|` over the samples.
    pub max_relative_divergence: f64,
    pub divergence_tol: f64,
    pub divergence_ok: bool,
    pub max_wave_residual: f64,
}

/// `|g|` at a point of space-time, whatever the bundle's variables are.
/// Spinning bundles are read on the slice `e^{iχ} = 1`.
fn abs_g(result: &ConstructionResult, p: [f64; 3], t: f64) -> Result<f64> {
    let r = |x: f64| Complex64::new(x, 0.0);
    let assign = [
        (Var::X, r(p[0])),
        (Var::Y, r(p[1])),
        (Var::Z, r(p[2])),
        (Var::U, Complex64::new(p[0], p[1])),
        (Var::Eit, Complex64::from_polar(1.0, t)),
        (Var::Eichi, r(1.0)),
    ];
    Ok(result
        .g
        .eval_with(&assign)
        .map_err(|e| anyhow!("[plotdata] {e}"))?
        .norm())
}

/// Random points in a padded box around the strands at time `t`.
fn box_points(
    result: &ConstructionResult,
    t: f64,
    count: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<[f64; 3]> {
    let pts: Vec<[f64; 3]> = strand_points(result, t, 16)
        .into_iter()
        .flat_map(|(_, p)| p)
        .collect();
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for p in &pts {
        for k in 0..3 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    let pad = (0..3).map(|k| hi[k] - lo[k]).fold(result.lambda, f64::max) * BOX_MARGIN;
    (0..count)
        .map(|_| std::array::from_fn(|k| rng.gen_range(lo[k] - pad..hi[k] + pad)))
        .collect()
}

pub fn field_samples(
    result: &ConstructionResult,
    cfg: &RunConfig,
    time: Option<f64>,
) -> Result<Vec<FieldSample>> {
    let src = FieldSource::new(&result.g).map_err(|e| anyhow!("[vectorfield] {e}"))?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed());
    let mut samples = Vec::with_capacity(cfg.field.samples);
    for _ in 0..cfg.field.samples {
        let t = time.unwrap_or_else(|| rng.gen_range(0.0..TAU));
        let p = box_points(result, t, 1, &mut rng)[0];
        samples.push(
            src.sample(cfg.field.form, p, t)
                .map_err(|e| anyhow!("[vectorfield] {e}"))?,
        );
    }
    Ok(samples)
}

pub fn summarize(samples: &[FieldSample], cfg: &RunConfig) -> FieldSummary {
    let max_relative_divergence = samples
        .iter()
        .map(|s| {
            if s.divergence_scale > 0.0 {
                s.divergence.abs() / s.divergence_scale
            } else {
                s.divergence.abs()
            }
        })
        .fold(0.0, f64::max);
    let max_wave_residual = samples
        .iter()
        .map(|s| s.wave_residual.iter().map(|x| x * x).sum::<f64>().sqrt())
        .fold(0.0, f64::max);
    FieldSummary {
        samples: samples.len(),
        form: cfg.field.form,
        max_relative_divergence,
        divergence_tol: cfg.field.divergence_tol,
        divergence_ok: max_relative_divergence < cfg.field.divergence_tol,
        max_wave_residual,
    }
}

pub fn vectorfield(
    result: &ConstructionResult,
    cfg: &RunConfig,
    time: Option<f64>,
    out: Option<&Path>,
) -> Result<FieldSummary> {
    let samples = field_samples(result, cfg, time)?;
    match out {
        Some(path) => {
            let file =
                File::create(path).with_context(|| format!("[io] creating {}", path.display()))?;
            write_csv(&samples, file).map_err(|e| anyhow!("[io] {e}"))?;
        }
        None => write_csv(&samples, std::io::stdout().lock()).map_err(|e| anyhow!("[io] {e}"))?,
    }
    Ok(summarize(&samples, cfg))
}

/// Writes `strands.csv`, `slice_NNN.csv` per time slice and, for bundles in
/// `x, y, z, t`, `vectorfield.csv`. Returns the written paths.
pub fn plotdata(
    result: &ConstructionResult,
    cfg: &RunConfig,
    slices: usize,
    per_strand: usize,
    dir: &Path,
) -> Result<Vec<PathBuf>> {
    if slices == 0 || per_strand == 0 {
        return Err(anyhow!(
            "[plotdata] --slices and --per-strand must be positive"
        ));
    }
    let system = result
        .system
        .as_ref()
        .ok_or_else(|| anyhow!("[plotdata] bundle carries no strand system"))?;
    std::fs::create_dir_all(dir).with_context(|| format!("[io] creating {}", dir.display()))?;
    let mut written = Vec::new();
    let l = result.lambda;

    let path = dir.join("strands.csv");
    let mut w = csv::Writer::from_path(&path)
        .with_context(|| format!("[io] creating {}", path.display()))?;
    w.write_record(["component", "strand", "t", "x", "y", "z", "radius"])?;
    for label in system.labels() {
        for k in 0..STRAND_TIMES {
            let t = TAU * k as f64 / STRAND_TIMES as f64;
            let [x, y, z] = system.center(label, t);
            let radius = if system.is_loop() {
                system.radius(label, t)
            } else {
                0.0
            };
            w.write_record(&[
                (label.component + 1).to_string(),
                (label.strand + 1).to_string(),
                t.to_string(),
                (l * x).to_string(),
                (l * y).to_string(),
                (l * z).to_string(),
                (l * radius).to_string(),
            ])?;
        }
    }
    w.flush()?;
    written.push(path);

    for k in 0..slices {
        let t = TAU * k as f64 / slices as f64;
        let path = dir.join(format!("slice_{k:03}.csv"));
        let mut w = csv::Writer::from_path(&path)
            .with_context(|| format!("[io] creating {}", path.display()))?;
        w.write_record(["component", "strand", "t", "x", "y", "z", "abs_g"])?;
        for (label, points) in strand_points(result, t, per_strand) {
            for p in points {
                w.write_record(&[
                    (label.component + 1).to_string(),
                    (label.strand + 1).to_string(),
                    t.to_string(),
                    p[0].to_string(),
                    p[1].to_string(),
                    p[2].to_string(),
                    abs_g(result, p, t)?.to_string(),
                ])?;
            }
        }
        w.flush()?;
        written.push(path);
    }

    if FieldSource::new(&result.g).is_ok() {
        let path = dir.join("vectorfield.csv");
        vectorfield(result, cfg, None, Some(&path))?;
        written.push(path);
    }
    Ok(written)
}
