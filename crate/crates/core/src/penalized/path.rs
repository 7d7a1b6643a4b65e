use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{EnetOptions, PenaltySpec, Problem, MAX_ADAPTIVE_WEIGHT};
use crate::cox::{linear_predictor, CoxFit, RiskSetIndex};
use crate::dataset::{ResamplingPlan, SurvivalDataset};
use crate::error::{Result, SurvError};
use crate::stats;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathOptions {
    pub n_lambda: usize,
    /// Smallest lambda as a fraction of `lambda_max`.
    pub ratio: f64,
    /// Mixing value used in place of `alpha` when computing `lambda_max` for
    /// small `alpha` (a pure ridge penalty has no finite `lambda_max`).
    pub alpha_floor: f64,
    pub enet: EnetOptions,
}

impl Default for PathOptions {
    fn default() -> Self {
        Self {
            n_lambda: 100,
            ratio: 0.01,
            alpha_floor: 1e-3,
            enet: EnetOptions::default(),
        }
    }
}

/// Smallest penalty at which every penalized coefficient is zero, together
/// with the corresponding solution (mandatory coefficients fitted, all
/// others zero).
pub fn lambda_max(
    ds: &SurvivalDataset,
    alpha: f64,
    weights: Option<&[f64]>,
    opts: &PathOptions,
) -> Result<(f64, Vec<f64>)> {
    let spec = PenaltySpec {
        lambda: 0.0,
        alpha,
        weights: weights.map(<[f64]>::to_vec),
    };
    let mut problem = Problem::new(ds, &spec)?;
    let w = problem.weights.clone();
    let mandatory_only: Vec<bool> = w.iter().map(|&v| v == 0.0).collect();
    problem.restrict(&mandatory_only);
    let (null_beta, _) = problem.solve(&vec![0.0; ds.p()], &opts.enet)?;
    let g = problem.scaled_gradient(&null_beta);
    let a = alpha.max(opts.alpha_floor);
    let lmax = (0..ds.p())
        .filter(|&j| w[j] > 0.0)
        .map(|j| g[j].abs() / (a * w[j]))
        .fold(0.0, f64::max);
    if lmax == 0.0 {
        return Err(SurvError::Degenerate(
            "no penalized feature has a non-zero score at the null model".into(),
        ));
    }
    // nudged up so every penalized coefficient is exactly zero there
    Ok((lmax * (1.0 + 1e-6), null_beta))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaPath {
    pub alpha: f64,
    pub lambda_max: f64,
    /// Strictly decreasing; may be shorter than requested when a fit failed.
    pub lambdas: Vec<f64>,
    pub fits: Vec<CoxFit>,
    pub nonzero: Vec<usize>,
    pub warnings: Vec<String>,
    pub cv: Option<CvCurve>,
}

impl LambdaPath {
    /// CSV with columns `lambda,feature,coefficient`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["lambda", "feature", "coefficient"])?;
        for (lambda, fit) in self.lambdas.iter().zip(&self.fits) {
            for (f, b) in fit.features.iter().zip(&fit.coefficients) {
                w.write_record(&[lambda.to_string(), f.name.clone(), b.to_string()])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

fn log_grid(lmax: f64, n: usize, ratio: f64) -> Vec<f64> {
    if n == 1 {
        return vec![lmax];
    }
    (0..n)
        .map(|k| lmax * ratio.powf(k as f64 / (n - 1) as f64))
        .collect()
}

fn path_on_grid(
    ds: &SurvivalDataset,
    alpha: f64,
    weights: Option<&[f64]>,
    grid: &[f64],
    start: Vec<f64>,
    opts: &EnetOptions,
) -> Result<(Vec<CoxFit>, Vec<String>)> {
    let mut fits = Vec::with_capacity(grid.len());
    let mut warnings = Vec::new();
    let mut warm = start;
    for &lambda in grid {
        let spec = PenaltySpec {
            lambda,
            alpha,
            weights: weights.map(<[f64]>::to_vec),
        };
        let problem = Problem::new(ds, &spec)?;
        match problem.solve(&warm, opts) {
            Ok((beta, trace)) => {
                warm = beta.clone();
                fits.push(problem.into_fit(ds, beta, &trace));
            }
            Err(e) if !fits.is_empty() => {
                warnings.push(format!("path stopped at lambda = {lambda:.6e}: {e}"));
                break;
            }
            Err(e) => return Err(e),
        }
    }
    Ok((fits, warnings))
}

/// Warm-started elastic-net fits over a log-spaced grid from `lambda_max`
/// down to `ratio * lambda_max`.
pub fn lambda_path(
    ds: &SurvivalDataset,
    alpha: f64,
    weights: Option<&[f64]>,
    opts: &PathOptions,
) -> Result<LambdaPath> {
    if opts.n_lambda == 0 || !(opts.ratio > 0.0 && opts.ratio <= 1.0) {
        return Err(SurvError::InvalidParameter(format!(
            "path needs n_lambda >= 1 and ratio in (0, 1], got {} and {}",
            opts.n_lambda, opts.ratio
        )));
    }
    let (lmax, null_beta) = lambda_max(ds, alpha, weights, opts)?;
    let grid = log_grid(lmax, opts.n_lambda, opts.ratio);
    let (fits, warnings) = path_on_grid(ds, alpha, weights, &grid, null_beta, &opts.enet)?;
    let lambdas = grid[..fits.len()].to_vec();
    let nonzero = fits.iter().map(CoxFit::n_nonzero_penalized).collect();
    Ok(LambdaPath {
        alpha,
        lambda_max: lmax,
        lambdas,
        fits,
        nonzero,
        warnings,
        cv: None,
    })
}

/// Cross-validated partial likelihood along a lambda grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvCurve {
    pub lambdas: Vec<f64>,
    /// Mean over folds of `l_full(beta_k) - l_train_k(beta_k)`.
    pub mean_cvpl: Vec<f64>,
    pub se: Vec<f64>,
    pub index_min: usize,
    pub index_1se: usize,
    pub lambda_min: f64,
    pub lambda_1se: f64,
    pub folds_used: usize,
    pub warnings: Vec<String>,
}

impl CvCurve {
    /// CSV with columns `lambda,mean_cvpl,se`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["lambda", "mean_cvpl", "se"])?;
        for k in 0..self.lambdas.len() {
            w.write_record(&[
                self.lambdas[k].to_string(),
                self.mean_cvpl[k].to_string(),
                self.se[k].to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn cv_on_grid(
    ds: &SurvivalDataset,
    alpha: f64,
    weights: Option<&[f64]>,
    grid: &[f64],
    plan: &ResamplingPlan,
    opts: &PathOptions,
) -> Result<CvCurve> {
    if plan.n != ds.n() {
        return Err(SurvError::DimensionMismatch {
            expected: ds.n(),
            got: plan.n,
        });
    }
    let full_index = RiskSetIndex::new(ds.outcomes());
    let per_fold: Vec<std::result::Result<Vec<f64>, String>> = plan
        .replicates
        .par_iter()
        .enumerate()
        .map(|(k, rep)| {
            let train = ds.select_rows(&rep.in_sample);
            if train.n_events() == 0 {
                return Err(format!("fold {k} skipped: training portion has no events"));
            }
            let start = lambda_max(&train, alpha, weights, opts)
                .map(|(_, b)| b)
                .map_err(|e| format!("fold {k} skipped: {e}"))?;
            let (fits, _) = path_on_grid(&train, alpha, weights, grid, start, &opts.enet)
                .map_err(|e| format!("fold {k} skipped: {e}"))?;
            let train_index = RiskSetIndex::new(train.outcomes());
            Ok(fits
                .iter()
                .map(|fit| {
                    let full = full_index.loglik(&linear_predictor(ds.covariates(), &fit.coefficients));
                    let part = train_index.loglik(&linear_predictor(train.covariates(), &fit.coefficients));
                    full - part
                })
                .collect())
        })
        .collect();

    let mut warnings = plan.warnings.clone();
    let mut curves = Vec::new();
    for r in per_fold {
        match r {
            Ok(c) => curves.push(c),
            Err(w) => warnings.push(w),
        }
    }
    if curves.is_empty() {
        return Err(SurvError::Resampling("every cross-validation fold was skipped".into()));
    }
    let len = curves.iter().map(Vec::len).min().unwrap_or(0);
    if len == 0 {
        return Err(SurvError::Resampling("no lambda value was fitted in every fold".into()));
    }
    let k = curves.len();
    let mut mean_cvpl = Vec::with_capacity(len);
    let mut se = Vec::with_capacity(len);
    for l in 0..len {
        let vals: Vec<f64> = curves.iter().map(|c| c[l]).collect();
        mean_cvpl.push(stats::mean(&vals));
        se.push(if k > 1 { stats::sd(&vals) / (k as f64).sqrt() } else { 0.0 });
    }
    let mut index_min = 0;
    for l in 1..len {
        if mean_cvpl[l] > mean_cvpl[index_min] {
            index_min = l;
        }
    }
    let threshold = mean_cvpl[index_min] - se[index_min];
    let index_1se = (0..=index_min).find(|&l| mean_cvpl[l] >= threshold).unwrap_or(index_min);
    Ok(CvCurve {
        lambdas: grid[..len].to_vec(),
        mean_cvpl,
        se,
        index_min,
        index_1se,
        lambda_min: grid[index_min],
        lambda_1se: grid[index_1se],
        folds_used: k,
        warnings,
    })
}

/// Choose lambda by cross-validated partial likelihood on the grid of the
/// full-data path.
pub fn cv_select_lambda(
    ds: &SurvivalDataset,
    alpha: f64,
    weights: Option<&[f64]>,
    plan: &ResamplingPlan,
    opts: &PathOptions,
) -> Result<CvCurve> {
    let path = lambda_path(ds, alpha, weights, opts)?;
    cv_on_grid(ds, alpha, weights, &path.lambdas, plan, opts)
}

/// Full-data path plus cross-validation; returns the fit at the lambda
/// maximizing the mean cross-validated partial likelihood.
pub fn fit_cv_enet(
    ds: &SurvivalDataset,
    alpha: f64,
    weights: Option<&[f64]>,
    plan: &ResamplingPlan,
    opts: &PathOptions,
) -> Result<(CoxFit, LambdaPath)> {
    let mut path = lambda_path(ds, alpha, weights, opts)?;
    let cv = cv_on_grid(ds, alpha, weights, &path.lambdas, plan, opts)?;
    let fit = path.fits[cv.index_min].clone();
    path.cv = Some(cv);
    Ok((fit, path))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveFit {
    pub fit: CoxFit,
    /// Cross-validated ridge coefficients used to build the weights.
    pub initial: Vec<f64>,
    pub weights: Vec<f64>,
    pub path: LambdaPath,
}

/// Two-stage adaptive Lasso: a cross-validated ridge fit gives initial
/// estimates, then a Lasso with weights `min(1/|beta_j|, 1e6)` is
/// cross-validated on the same plan.
pub fn fit_adaptive_lasso(ds: &SurvivalDataset, plan: &ResamplingPlan, opts: &PathOptions) -> Result<AdaptiveFit> {
    let (ridge, _) = fit_cv_enet(ds, 0.0, None, plan, opts)?;
    let initial = ridge.coefficients.clone();
    if ds
        .features()
        .iter()
        .zip(&initial)
        .all(|(f, &b)| f.mandatory || b == 0.0)
    {
        return Err(SurvError::Degenerate("initial ridge estimates are all zero".into()));
    }
    let weights: Vec<f64> = ds
        .features()
        .iter()
        .zip(&initial)
        .map(|(f, &b)| {
            if f.mandatory {
                0.0
            } else if b == 0.0 {
                MAX_ADAPTIVE_WEIGHT
            } else {
                (1.0 / b.abs()).min(MAX_ADAPTIVE_WEIGHT)
            }
        })
        .collect();
    let (fit, path) = fit_cv_enet(ds, 1.0, Some(&weights), plan, opts)?;
    Ok(AdaptiveFit {
        fit,
        initial,
        weights,
        path,
    })
}
