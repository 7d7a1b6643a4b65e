//! Run configuration: a TOML file with sections, overridden by flags.

use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Lasso,
    Enet,
    Adaptive,
    BayesLaplace,
    Ssvs,
    Horseshoe,
}

impl ModelKind {
    pub fn is_bayesian(self) -> bool {
        matches!(self, ModelKind::BayesLaplace | ModelKind::Ssvs | ModelKind::Horseshoe)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Preselect {
    None,
    Variance,
    Univariate,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InputConfig {
    pub data: Option<PathBuf>,
    pub meta: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PreprocessConfig {
    /// Features with a larger missing fraction are dropped.
    pub max_missing: f64,
    pub impute_k: usize,
    pub preselect: Preselect,
    /// Cumulative variance fraction kept by variance preselection.
    pub variance_fraction: f64,
    /// Wald p-value threshold of univariate screening.
    pub screen_alpha: f64,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            max_missing: 0.2,
            impute_k: 5,
            preselect: Preselect::None,
            variance_fraction: 0.8,
            screen_alpha: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub kind: ModelKind,
    /// Elastic-net mixing, used by `enet` only.
    pub alpha: f64,
    /// Fixed penalty instead of cross-validation; for `bayes-laplace` the fixed prior rate.
    pub lambda: Option<f64>,
    pub n_lambda: usize,
    pub lambda_ratio: f64,
    pub iterations: usize,
    pub burn_in: Option<usize>,
    pub baseline_intervals: usize,
    pub credible_level: f64,
    pub horseshoe_cutoff: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            kind: ModelKind::Lasso,
            alpha: 0.95,
            lambda: None,
            n_lambda: 100,
            lambda_ratio: 0.01,
            iterations: 20_000,
            burn_in: None,
            baseline_intervals: 20,
            credible_level: 0.95,
            horseshoe_cutoff: 0.5,
        }
    }
}

impl ModelConfig {
    /// Mixing parameter actually used by the penalized fits.
    pub fn effective_alpha(&self) -> f64 {
        match self.kind {
            ModelKind::Enet => self.alpha,
            _ => 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ValidationConfig {
    pub folds: usize,
    pub bootstrap: usize,
    pub horizons: Vec<f64>,
    /// Truncation time for Uno's C and the prediction-error curves.
    pub tau: Option<f64>,
    pub calibration_groups: usize,
    pub calibration_bootstrap: usize,
    pub grid_points: usize,
}

impl Default for ValidationConfig {
    fn default() -> Self {
        Self {
            folds: 10,
            bootstrap: 100,
            horizons: vec![1.0, 3.0, 5.0],
            tau: None,
            calibration_groups: 4,
            calibration_bootstrap: 200,
            grid_points: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    /// Not echoed into reports so that runs into different directories compare equal.
    #[serde(skip_serializing)]
    pub out: PathBuf,
    pub input: InputConfig,
    pub preprocess: PreprocessConfig,
    pub model: ModelConfig,
    pub validation: ValidationConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            out: PathBuf::from("survkit-out"),
            input: InputConfig::default(),
            preprocess: PreprocessConfig::default(),
            model: ModelConfig::default(),
            validation: ValidationConfig::default(),
        }
    }
}

/// Flags mirroring every configuration key; each one overrides the file.
#[derive(Debug, Clone, Default, Args)]
pub struct ConfigArgs {
    /// TOML configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Dataset CSV with `time`, `status` and covariate columns.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Feature metadata CSV (`name,block,mandatory`).
    #[arg(long)]
    pub meta: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub model: Option<ModelKind>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub n_lambda: Option<usize>,
    #[arg(long)]
    pub lambda_ratio: Option<f64>,
    #[arg(long)]
    pub folds: Option<usize>,
    #[arg(long)]
    pub bootstrap: Option<usize>,
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub burnin: Option<usize>,
    #[arg(long)]
    pub baseline_intervals: Option<usize>,
    #[arg(long)]
    pub credible_level: Option<f64>,
    #[arg(long)]
    pub horseshoe_cutoff: Option<f64>,
    /// Comma-separated evaluation horizons.
    #[arg(long, value_delimiter = ',')]
    pub horizons: Option<Vec<f64>>,
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub calibration_groups: Option<usize>,
    #[arg(long)]
    pub calibration_bootstrap: Option<usize>,
    #[arg(long)]
    pub grid_points: Option<usize>,
    #[arg(long)]
    pub max_missing: Option<f64>,
    #[arg(long)]
    pub impute_k: Option<usize>,
    #[arg(long, value_enum)]
    pub preselect: Option<Preselect>,
    #[arg(long)]
    pub variance_fraction: Option<f64>,
    #[arg(long)]
    pub screen_alpha: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, env = "SURVKIT_OUT")]
    pub out: Option<PathBuf>,
}

pub fn parse_config_str(text: &str) -> Result<RunConfig, CliError> {
    toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
}

pub fn read_config_file(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_config_str(&text)
}

/// Builds and validates the configuration from an optional file plus flags.
pub fn parse_config(args: &ConfigArgs) -> Result<RunConfig, CliError> {
    let mut cfg = match &args.config {
        Some(p) => read_config_file(p)?,
        None => RunConfig::default(),
    };
    apply_overrides(&mut cfg, args);
    cfg.validate()?;
    Ok(cfg)
}

fn set<T: Clone>(slot: &mut T, value: &Option<T>) {
    if let Some(v) = value {
        *slot = v.clone();
    }
}

pub fn apply_overrides(cfg: &mut RunConfig, a: &ConfigArgs) {
    if a.input.is_some() {
        cfg.input.data = a.input.clone();
    }
    if a.meta.is_some() {
        cfg.input.meta = a.meta.clone();
    }
    set(&mut cfg.model.kind, &a.model);
    set(&mut cfg.model.alpha, &a.alpha);
    if a.lambda.is_some() {
        cfg.model.lambda = a.lambda;
    }
    set(&mut cfg.model.n_lambda, &a.n_lambda);
    set(&mut cfg.model.lambda_ratio, &a.lambda_ratio);
    set(&mut cfg.model.iterations, &a.iterations);
    if a.burnin.is_some() {
        cfg.model.burn_in = a.burnin;
    }
    set(&mut cfg.model.baseline_intervals, &a.baseline_intervals);
    set(&mut cfg.model.credible_level, &a.credible_level);
    set(&mut cfg.model.horseshoe_cutoff, &a.horseshoe_cutoff);
    set(&mut cfg.validation.folds, &a.folds);
    set(&mut cfg.validation.bootstrap, &a.bootstrap);
    set(&mut cfg.validation.horizons, &a.horizons);
    if a.tau.is_some() {
        cfg.validation.tau = a.tau;
    }
    set(&mut cfg.validation.calibration_groups, &a.calibration_groups);
    set(&mut cfg.validation.calibration_bootstrap, &a.calibration_bootstrap);
    set(&mut cfg.validation.grid_points, &a.grid_points);
    set(&mut cfg.preprocess.max_missing, &a.max_missing);
    set(&mut cfg.preprocess.impute_k, &a.impute_k);
    set(&mut cfg.preprocess.preselect, &a.preselect);
    set(&mut cfg.preprocess.variance_fraction, &a.variance_fraction);
    set(&mut cfg.preprocess.screen_alpha, &a.screen_alpha);
    set(&mut cfg.seed, &a.seed);
    set(&mut cfg.out, &a.out);
}

fn check(ok: bool, msg: impl FnOnce() -> String) -> Result<(), CliError> {
    if ok {
        Ok(())
    } else {
        Err(CliError::Config(msg()))
    }
}

fn unit_open(v: f64) -> bool {
    v > 0.0 && v < 1.0
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        check(self.input.data.is_some(), || "no input dataset given (input.data or --input)".into())?;
        let p = &self.preprocess;
        check((0.0..=1.0).contains(&p.max_missing), || {
            format!("max_missing must lie in [0, 1], got {}", p.max_missing)
        })?;
        check(p.impute_k >= 1, || "impute_k must be at least 1".into())?;
        check(p.variance_fraction > 0.0 && p.variance_fraction <= 1.0, || {
            format!("variance_fraction must lie in (0, 1], got {}", p.variance_fraction)
        })?;
        check(p.screen_alpha > 0.0 && p.screen_alpha <= 1.0, || {
            format!("screen_alpha must lie in (0, 1], got {}", p.screen_alpha)
        })?;

        let m = &self.model;
        check((0.0..=1.0).contains(&m.alpha), || format!("alpha must lie in [0, 1], got {}", m.alpha))?;
        if let Some(l) = m.lambda {
            check(l.is_finite() && l >= 0.0, || format!("lambda must be finite and non-negative, got {l}"))?;
            check(matches!(m.kind, ModelKind::Lasso | ModelKind::Enet | ModelKind::BayesLaplace), || {
                format!("a fixed lambda is not supported for model {:?}", m.kind)
            })?;
            if m.kind == ModelKind::BayesLaplace {
                check(l > 0.0, || "the Laplace prior rate must be positive".into())?;
            }
        }
        check(m.n_lambda >= 2, || format!("n_lambda must be at least 2, got {}", m.n_lambda))?;
        check(m.lambda_ratio > 0.0 && m.lambda_ratio < 1.0, || {
            format!("lambda_ratio must lie in (0, 1), got {}", m.lambda_ratio)
        })?;
        check(m.iterations >= 2, || "iterations must be at least 2".into())?;
        let burn = m.burn_in.unwrap_or(m.iterations / 2);
        check(burn < m.iterations, || {
            format!("burn-in {burn} must be smaller than iterations {}", m.iterations)
        })?;
        check(m.baseline_intervals >= 1, || "baseline_intervals must be at least 1".into())?;
        check(unit_open(m.credible_level), || {
            format!("credible_level must lie in (0, 1), got {}", m.credible_level)
        })?;
        check(unit_open(m.horseshoe_cutoff), || {
            format!("horseshoe_cutoff must lie in (0, 1), got {}", m.horseshoe_cutoff)
        })?;

        let v = &self.validation;
        check(v.folds >= 2, || format!("folds must be at least 2, got {}", v.folds))?;
        check(v.bootstrap >= 1, || "bootstrap must be at least 1".into())?;
        check(!v.horizons.is_empty(), || "at least one horizon is required".into())?;
        check(v.horizons.iter().all(|h| h.is_finite() && *h > 0.0), || {
            "horizons must be positive".into()
        })?;
        if let Some(t) = v.tau {
            check(t.is_finite() && t > 0.0, || format!("tau must be positive, got {t}"))?;
        }
        check(v.calibration_groups >= 2, || "calibration_groups must be at least 2".into())?;
        check(v.calibration_bootstrap >= 1, || "calibration_bootstrap must be at least 1".into())?;
        check(v.grid_points >= 2, || "grid_points must be at least 2".into())?;
        Ok(())
    }
}
