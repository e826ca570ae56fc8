use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use braidforge::constructors::{BuildConfig, LambdaChoice};
use braidforge::strand_param::PipelineConfig;
use braidforge::vector_field::FieldForm;
use braidforge::verifier::VerifierConfig;
use serde::{Deserialize, Serialize};

/// Everything a run can be configured with. Command-line flags win over the file.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    /// `"auto"` or a positive number.
    pub lambda: Option<LambdaSetting>,
    pub pattern_lambda: Option<f64>,
    pub pipeline: PipelineConfig,
    pub verifier: VerifierConfig,
    pub field: FieldConfig,
    pub output: OutputConfig,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LambdaSetting {
    Value(f64),
    Mode(LambdaMode),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LambdaMode {
    Auto,
}

impl LambdaSetting {
    pub fn parse(text: &str) -> Result<LambdaSetting> {
        if text.eq_ignore_ascii_case("auto") {
            return Ok(LambdaSetting::Mode(LambdaMode::Auto));
        }
        let v: f64 = text
            .parse()
            .with_context(|| format!("--lambda expects 'auto' or a number, got '{text}'"))?;
        Ok(LambdaSetting::Value(v))
    }

    pub fn choice(self) -> LambdaChoice {
        match self {
            LambdaSetting::Value(v) => LambdaChoice::Value(v),
            LambdaSetting::Mode(LambdaMode::Auto) => LambdaChoice::Auto,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FieldConfig {
    pub samples: usize,
    pub form: FieldForm,
    /// Largest `|div V| / Σ|∂_i V_i|` reported as clean.
    pub divergence_tol: f64,
}

impl Default for FieldConfig {
    fn default() -> Self {
        FieldConfig {
            samples: 1000,
            form: FieldForm::Ranada,
            divergence_tol: 1e-6,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: Option<PathBuf>,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<RunConfig> {
        let Some(path) = path else {
            return Ok(RunConfig::default());
        };
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("pipeline.bisection_tol", self.pipeline.bisection_tol),
            ("pipeline.tangency_tol", self.pipeline.tangency_tol),
            (
                "pipeline.coefficient_limit",
                self.pipeline.coefficient_limit,
            ),
            ("pipeline.epsilon_safety", self.pipeline.epsilon_safety),
            ("verifier.newton_tol", self.verifier.newton_tol),
            ("verifier.vanish_tol", self.verifier.vanish_tol),
            ("verifier.regularity_floor", self.verifier.regularity_floor),
            ("verifier.delta_floor", self.verifier.delta_floor),
            (
                "verifier.continuation_step",
                self.verifier.continuation_step,
            ),
            ("verifier.fibration_tol", self.verifier.fibration_tol),
            ("verifier.lambda_max", self.verifier.lambda_max),
            ("field.divergence_tol", self.field.divergence_tol),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                bail!("{name} must be positive, got {v}");
            }
        }
        let grids = [
            ("pipeline.samples", self.pipeline.samples),
            ("pipeline.positivity_grid", self.pipeline.positivity_grid),
            ("verifier.grid", self.verifier.grid),
            ("verifier.t_samples", self.verifier.t_samples),
            ("verifier.ring_samples", self.verifier.ring_samples),
        ];
        for (name, v) in grids {
            if v < 16 {
                bail!("{name} must be at least 16, got {v}");
            }
        }
        if let Some(LambdaSetting::Value(v)) = self.lambda {
            if !(v.is_finite() && v > 0.0) {
                bail!("lambda must be positive, got {v}");
            }
        }
        Ok(())
    }

    /// Apply the run-wide seed to every randomized stage.
    pub fn set_seed(&mut self, seed: u64) {
        self.seed = Some(seed);
        self.pipeline.seed = seed;
        self.verifier.seed = seed;
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn build_config(&self) -> BuildConfig {
        BuildConfig {
            pipeline: self.pipeline.clone(),
            verifier: self.verifier.clone(),
            pattern_lambda: self.pattern_lambda,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_file_keeps_defaults() {
        let c: RunConfig = toml::from_str("lambda = 0.05\n[verifier]\ngrid = 20\n").unwrap();
        assert_eq!(c.lambda, Some(LambdaSetting::Value(0.05)));
        assert_eq!(c.verifier.grid, 20);
        assert_eq!(c.verifier.t_samples, VerifierConfig::default().t_samples);
        c.validate().unwrap();
        let auto: RunConfig = toml::from_str("lambda = \"auto\"").unwrap();
        assert_eq!(auto.lambda.unwrap().choice(), LambdaChoice::Auto);
    }

    #[test]
    fn invariants_are_enforced() {
        let mut c = RunConfig::default();
        c.verifier.grid = 8;
        assert!(c.validate().is_err());
        let mut c = RunConfig::default();
        c.verifier.vanish_tol = 0.0;
        assert!(c.validate().is_err());
        assert!(toml::from_str::<RunConfig>("bogus = 1").is_err());
    }
}
