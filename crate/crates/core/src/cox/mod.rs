//! Cox proportional hazards model: Breslow partial likelihood, Newton
//! fitting, Breslow baseline hazard and survival prediction.

mod risk;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::dataset::{FeatureMeta, SurvivalDataset};
use crate::error::{Result, SurvError};

pub use risk::{EtaDerivatives, RiskSetIndex};

/// Linear predictor `X beta`.
pub fn linear_predictor(x: &DMatrix<f64>, beta: &[f64]) -> Vec<f64> {
    let b = DVector::from_column_slice(beta);
    (x * b).iter().copied().collect()
}

fn check_coef_len(ds: &SurvivalDataset, beta: &[f64]) -> Result<()> {
    if beta.len() != ds.p() {
        return Err(SurvError::DimensionMismatch {
            expected: ds.p(),
            got: beta.len(),
        });
    }
    if ds.has_missing() {
        return Err(SurvError::InvalidData("covariates contain missing values".into()));
    }
    Ok(())
}

/// Partial log-likelihood with Breslow ties; `beta` covers all columns of `ds`
/// in column order (mandatory and penalized alike).
pub fn partial_loglik(ds: &SurvivalDataset, beta: &[f64]) -> Result<f64> {
    check_coef_len(ds, beta)?;
    let eta = linear_predictor(ds.covariates(), beta);
    if eta.iter().any(|v| !v.is_finite()) {
        return Err(SurvError::NonFinite("linear predictor".into()));
    }
    Ok(RiskSetIndex::new(ds.outcomes()).loglik(&eta))
}

/// Gradient of [`partial_loglik`] with respect to `beta`.
pub fn partial_loglik_grad(ds: &SurvivalDataset, beta: &[f64]) -> Result<Vec<f64>> {
    check_coef_len(ds, beta)?;
    let eta = linear_predictor(ds.covariates(), beta);
    if eta.iter().any(|v| !v.is_finite()) {
        return Err(SurvError::NonFinite("linear predictor".into()));
    }
    let d = RiskSetIndex::new(ds.outcomes()).eta_derivatives(&eta);
    let g = DVector::from_vec(d.gradient);
    Ok((ds.covariates().transpose() * g).iter().copied().collect())
}

/// Cumulative baseline hazard as a right-continuous step function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineHazard {
    pub times: Vec<f64>,
    pub cumulative: Vec<f64>,
}

impl BaselineHazard {
    pub fn from_increments(increments: &[(f64, f64)]) -> Self {
        let mut acc = 0.0;
        let mut times = Vec::with_capacity(increments.len());
        let mut cumulative = Vec::with_capacity(increments.len());
        for &(t, h) in increments {
            acc += h;
            times.push(t);
            cumulative.push(acc);
        }
        Self { times, cumulative }
    }

    pub fn at(&self, t: f64) -> f64 {
        let k = self.times.partition_point(|&s| s <= t);
        if k == 0 {
            0.0
        } else {
            self.cumulative[k - 1]
        }
    }
}

/// Breslow estimator of the cumulative baseline hazard at linear predictor `eta`.
pub fn breslow_baseline(ds: &SurvivalDataset, eta: &[f64]) -> BaselineHazard {
    BaselineHazard::from_increments(&RiskSetIndex::new(ds.outcomes()).breslow_increments(eta))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenaltyInfo {
    pub lambda: f64,
    pub alpha: f64,
}

/// A fitted Cox model. Coefficients are aligned with `features`; mandatory
/// and penalized parts are recovered through [`CoxFit::beta0`] and
/// [`CoxFit::beta`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoxFit {
    pub features: Vec<FeatureMeta>,
    pub coefficients: Vec<f64>,
    pub std_errors: Option<Vec<f64>>,
    pub baseline: BaselineHazard,
    pub loglik: f64,
    pub converged: bool,
    pub iterations: usize,
    pub penalty: Option<PenaltyInfo>,
}

impl CoxFit {
    /// Coefficients of mandatory (unpenalized) features.
    pub fn beta0(&self) -> Vec<f64> {
        self.partition(true)
    }

    /// Coefficients of penalized features.
    pub fn beta(&self) -> Vec<f64> {
        self.partition(false)
    }

    fn partition(&self, mandatory: bool) -> Vec<f64> {
        self.features
            .iter()
            .zip(&self.coefficients)
            .filter(|(f, _)| f.mandatory == mandatory)
            .map(|(_, &b)| b)
            .collect()
    }

    pub fn feature_names(&self) -> Vec<String> {
        self.features.iter().map(|f| f.name.clone()).collect()
    }

    /// Indices of non-zero penalized coefficients.
    pub fn selected(&self) -> Vec<usize> {
        (0..self.features.len())
            .filter(|&j| !self.features[j].mandatory && self.coefficients[j] != 0.0)
            .collect()
    }

    pub fn n_nonzero_penalized(&self) -> usize {
        self.selected().len()
    }

    /// Coefficients per unit of the original (unstandardized) covariate.
    pub fn original_scale_coefficients(&self) -> Vec<f64> {
        self.features
            .iter()
            .zip(&self.coefficients)
            .map(|(f, &b)| match f.scale {
                Some(_) if f.constant => 0.0,
                Some(s) => b / s.sd,
                None => b,
            })
            .collect()
    }

    /// Two-sided Wald p-values, when standard errors are available.
    pub fn wald_p_values(&self) -> Option<Vec<f64>> {
        let se = self.std_errors.as_ref()?;
        Some(
            self.coefficients
                .iter()
                .zip(se)
                .map(|(&b, &s)| wald_p(b, s))
                .collect(),
        )
    }

    /// Linear predictor for a covariate row laid out like `features`.
    pub fn prognostic_score(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.coefficients.len() {
            return Err(SurvError::DimensionMismatch {
                expected: self.coefficients.len(),
                got: x.len(),
            });
        }
        Ok(x.iter().zip(&self.coefficients).map(|(a, b)| a * b).sum())
    }

    /// `exp(-H0(t) exp(eta(x)))`.
    pub fn predict_survival(&self, x: &[f64], t: f64) -> Result<f64> {
        let eta = self.prognostic_score(x)?;
        Ok(survival_from(self.baseline.at(t), eta))
    }

    /// Columns of `ds` matching this fit's features, checked for scale
    /// compatibility.
    pub fn design_for(&self, ds: &SurvivalDataset) -> Result<DMatrix<f64>> {
        design_matrix(&self.features, ds)
    }

    pub fn linear_predictors(&self, ds: &SurvivalDataset) -> Result<Vec<f64>> {
        let x = self.design_for(ds)?;
        Ok(linear_predictor(&x, &self.coefficients))
    }

    /// Predicted survival of every row of `ds` at time `t`.
    pub fn survival_at(&self, ds: &SurvivalDataset, t: f64) -> Result<Vec<f64>> {
        let h = self.baseline.at(t);
        Ok(self
            .linear_predictors(ds)?
            .into_iter()
            .map(|eta| survival_from(h, eta))
            .collect())
    }
}

/// Columns of `ds` matching `features` by name, in that order. Fails when a
/// feature was standardized for fitting but `ds` carries a different scale.
pub fn design_matrix(features: &[FeatureMeta], ds: &SurvivalDataset) -> Result<DMatrix<f64>> {
    let mut cols = Vec::with_capacity(features.len());
    for f in features {
        let j = ds
            .feature_index(&f.name)
            .ok_or_else(|| SurvError::InvalidData(format!("feature `{}` not in dataset", f.name)))?;
        let g = &ds.features()[j];
        match (f.scale, g.scale) {
            (Some(_), None) => {
                return Err(SurvError::UnscaledInput(format!(
                    "feature `{}` was standardized for fitting; apply the training scale first",
                    f.name
                )))
            }
            (Some(a), Some(b)) if (a.mean - b.mean).abs() > 1e-9 * a.mean.abs().max(1.0)
                || (a.sd - b.sd).abs() > 1e-9 * a.sd.abs().max(1.0) =>
            {
                return Err(SurvError::UnscaledInput(format!(
                    "feature `{}` carries a different scale than the training data",
                    f.name
                )))
            }
            _ => {}
        }
        cols.push(j);
    }
    if ds.has_missing() {
        return Err(SurvError::InvalidData("covariates contain missing values".into()));
    }
    Ok(ds.covariates().select_columns(cols.iter()))
}

pub(crate) fn survival_from(cumhaz: f64, eta: f64) -> f64 {
    (-cumhaz * eta.exp()).exp().clamp(0.0, 1.0)
}

pub(crate) fn wald_p(beta: f64, se: f64) -> f64 {
    if !(se > 0.0) || !se.is_finite() {
        return f64::NAN;
    }
    let z = (beta / se).abs();
    erfc(z / std::f64::consts::SQRT_2).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NewtonOptions {
    /// Convergence threshold on the change in log-likelihood.
    pub tol: f64,
    pub max_iter: usize,
    pub max_halvings: usize,
    /// Coefficients beyond this magnitude signal a monotone likelihood.
    pub divergence_bound: f64,
    /// Largest Newton step still accepted as convergence.
    pub max_step_at_convergence: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            max_iter: 50,
            max_halvings: 30,
            divergence_bound: 50.0,
            max_step_at_convergence: 0.1,
        }
    }
}

fn check_collinearity(x: &DMatrix<f64>, names: &[String]) -> Result<()> {
    let (n, p) = (x.nrows(), x.ncols());
    if p == 0 {
        return Ok(());
    }
    let mut c = x.clone();
    for j in 0..p {
        let mean = c.column(j).sum() / n as f64;
        let mut col = c.column_mut(j);
        col.add_scalar_mut(-mean);
        let norm = col.norm();
        if norm <= 1e-12 * (1.0 + mean.abs()) * (n as f64).sqrt() {
            return Err(SurvError::Collinear(format!("feature `{}` has zero variance", names[j])));
        }
        col /= norm;
    }
    let gram = c.transpose() * &c;
    let eig = gram.symmetric_eigenvalues();
    let min = eig.iter().copied().fold(f64::INFINITY, f64::min);
    if min < 1e-10 {
        return Err(SurvError::Collinear(format!(
            "correlation matrix is singular (smallest eigenvalue {min:.2e})"
        )));
    }
    Ok(())
}

/// Unpenalized Cox fit on the given feature subset by Newton–Raphson with
/// step halving; standard errors from the observed information.
pub fn fit_cox_newton(ds: &SurvivalDataset, features: &[usize]) -> Result<CoxFit> {
    fit_cox_newton_with(ds, features, &NewtonOptions::default())
}

pub fn fit_cox_newton_with(
    ds: &SurvivalDataset,
    features: &[usize],
    opts: &NewtonOptions,
) -> Result<CoxFit> {
    let sub = ds.select_features(features);
    if sub.has_missing() {
        return Err(SurvError::InvalidData("covariates contain missing values".into()));
    }
    let p = sub.p();
    let index = RiskSetIndex::new(sub.outcomes());
    let n_events = index.n_events();
    if n_events == 0 {
        return Err(SurvError::Degenerate("no events".into()));
    }
    if p >= n_events {
        return Err(SurvError::InvalidParameter(format!(
            "{p} covariates require more than {p} events, found {n_events}"
        )));
    }
    let x = sub.covariates();
    check_collinearity(x, &sub.feature_names())?;

    let mut beta = DVector::zeros(p);
    let mut eta = vec![0.0; sub.n()];
    let mut ll = index.loglik(&eta);
    let mut converged = p == 0;
    let mut iterations = 0;
    while !converged && iterations < opts.max_iter {
        iterations += 1;
        let (score, info) = index.score_and_information(x, &eta);
        // collinearity was ruled out above, so a singular information
        // matrix here means the likelihood is flattening towards infinity
        let Some(step) = info.clone().cholesky().map(|c| c.solve(&score)) else {
            let (j, b) = beta
                .iter()
                .enumerate()
                .max_by(|a: &(usize, &f64), b: &(usize, &f64)| a.1.abs().total_cmp(&b.1.abs()))
                .map(|(j, b)| (j, b.abs()))
                .unwrap_or((0, 0.0));
            return Err(SurvError::MonotoneLikelihood {
                feature: sub.features()[j].name.clone(),
                magnitude: b,
            });
        };
        let step_size = step.amax();
        let mut scale = 1.0;
        let mut accepted = None;
        for _ in 0..=opts.max_halvings {
            let cand = &beta + &step * scale;
            let cand_eta = linear_predictor(x, cand.as_slice());
            let cand_ll = index.loglik(&cand_eta);
            if cand_ll.is_finite() && cand_ll >= ll - 1e-12 * ll.abs().max(1.0) {
                accepted = Some((cand, cand_eta, cand_ll));
                break;
            }
            scale *= 0.5;
        }
        let Some((cand, cand_eta, cand_ll)) = accepted else {
            // no ascent possible at machine precision
            converged = true;
            break;
        };
        if let Some((j, b)) = cand
            .iter()
            .enumerate()
            .find(|(_, b)| b.abs() > opts.divergence_bound || !b.is_finite())
        {
            return Err(SurvError::MonotoneLikelihood {
                feature: sub.features()[j].name.clone(),
                magnitude: b.abs(),
            });
        }
        let delta = (cand_ll - ll).abs();
        beta = cand;
        eta = cand_eta;
        ll = cand_ll;
        // a likelihood that keeps rising towards an asymptote has small
        // increments but Newton steps that do not shrink
        if delta < opts.tol && step_size * scale < opts.max_step_at_convergence {
            converged = true;
        }
    }

    let (_, info) = index.score_and_information(x, &eta);
    let std_errors = if p == 0 {
        Some(Vec::new())
    } else {
        info.try_inverse()
            .map(|inv| (0..p).map(|j| inv[(j, j)].max(0.0).sqrt()).collect())
    };
    Ok(CoxFit {
        features: sub.features().to_vec(),
        coefficients: beta.iter().copied().collect(),
        std_errors,
        baseline: BaselineHazard::from_increments(&index.breslow_increments(&eta)),
        loglik: ll,
        converged,
        iterations,
        penalty: None,
    })
}
