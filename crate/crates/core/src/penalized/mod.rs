//! Elastic-net penalized Cox regression by cyclic coordinate descent.
//!
//! The objective maximized is
//!
//! ```text
//! (2/n) l(beta) - lambda * sum_j w_j [ alpha |beta_j| + (1 - alpha)/2 beta_j^2 ]
//! ```
//!
//! where `l` is the Breslow partial log-likelihood. Mandatory features carry
//! `w_j = 0` and are never thresholded. Each outer iteration replaces `l` by
//! its quadratic expansion in the linear predictor with a diagonal Hessian,
//! solves that penalized weighted least-squares problem by coordinate
//! descent, and backtracks if the true objective did not improve.

mod path;
mod stability;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::cox::{linear_predictor, BaselineHazard, CoxFit, PenaltyInfo, RiskSetIndex};
use crate::dataset::SurvivalDataset;
use crate::error::{Result, SurvError};

pub use path::{
    cv_select_lambda, fit_adaptive_lasso, fit_cv_enet, lambda_max, lambda_path, AdaptiveFit, CvCurve,
    LambdaPath, PathOptions,
};
pub use stability::{intersection, selection_overlap, stability_selection, StabilityOptions, StabilityReport};

/// Upper bound on adaptive weights.
pub const MAX_ADAPTIVE_WEIGHT: f64 = 1e6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PenaltySpec {
    pub lambda: f64,
    pub alpha: f64,
    /// Per-feature penalty factors; `None` means 1 for penalized and 0 for
    /// mandatory features. Mandatory features are always forced to 0.
    pub weights: Option<Vec<f64>>,
}

impl PenaltySpec {
    pub fn lasso(lambda: f64) -> Self {
        Self {
            lambda,
            alpha: 1.0,
            weights: None,
        }
    }

    pub fn enet(lambda: f64, alpha: f64) -> Self {
        Self {
            lambda,
            alpha,
            weights: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(SurvError::InvalidParameter(format!(
                "elastic-net mixing alpha must lie in [0, 1], got {}",
                self.alpha
            )));
        }
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(SurvError::InvalidParameter(format!(
                "lambda must be finite and non-negative, got {}",
                self.lambda
            )));
        }
        if let Some(w) = &self.weights {
            if w.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
                return Err(SurvError::InvalidParameter("penalty weights must be finite and >= 0".into()));
            }
        }
        Ok(())
    }

    /// Effective weights for `ds`, with mandatory features at 0.
    pub fn resolved_weights(&self, ds: &SurvivalDataset) -> Result<Vec<f64>> {
        let base = match &self.weights {
            Some(w) if w.len() != ds.p() => {
                return Err(SurvError::DimensionMismatch {
                    expected: ds.p(),
                    got: w.len(),
                })
            }
            Some(w) => w.clone(),
            None => vec![1.0; ds.p()],
        };
        Ok(base
            .into_iter()
            .zip(ds.features())
            .map(|(w, f)| if f.mandatory { 0.0 } else { w })
            .collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnetOptions {
    /// Convergence threshold on the largest coefficient change between outer iterations.
    pub tol: f64,
    pub inner_tol: f64,
    pub max_outer: usize,
    pub max_inner_sweeps: usize,
    /// Coefficients beyond this magnitude are reported as divergence.
    pub divergence_bound: f64,
}

impl Default for EnetOptions {
    fn default() -> Self {
        Self {
            tol: 1e-7,
            inner_tol: 1e-10,
            max_outer: 500,
            max_inner_sweeps: 10_000,
            divergence_bound: 1e3,
        }
    }
}

/// Per-iteration record of a coordinate-descent fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnetTrace {
    /// Penalized objective after each outer iteration, starting with the initial point.
    pub objective: Vec<f64>,
    pub outer_iterations: usize,
    pub converged: bool,
}

fn soft_threshold(z: f64, t: f64) -> f64 {
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        0.0
    }
}

pub(crate) struct Problem<'a> {
    x: &'a DMatrix<f64>,
    index: RiskSetIndex,
    weights: Vec<f64>,
    lambda: f64,
    alpha: f64,
    /// Coordinates allowed to move.
    free: Vec<bool>,
}

impl<'a> Problem<'a> {
    pub(crate) fn new(ds: &'a SurvivalDataset, spec: &PenaltySpec) -> Result<Self> {
        spec.validate()?;
        if ds.has_missing() {
            return Err(SurvError::InvalidData("covariates contain missing values".into()));
        }
        let weights = spec.resolved_weights(ds)?;
        let x = ds.covariates();
        let free = (0..ds.p())
            .map(|j| !ds.features()[j].constant && x.column(j).iter().any(|&v| v != x[(0, j)]))
            .collect();
        Ok(Self {
            x,
            index: RiskSetIndex::new(ds.outcomes()),
            weights,
            lambda: spec.lambda,
            alpha: spec.alpha,
            free,
        })
    }

    pub(crate) fn restrict(&mut self, mask: &[bool]) {
        for (f, &m) in self.free.iter_mut().zip(mask) {
            *f = *f && m;
        }
    }

    fn n(&self) -> f64 {
        self.x.nrows() as f64
    }

    fn penalty(&self, beta: &[f64]) -> f64 {
        beta.iter()
            .zip(&self.weights)
            .map(|(b, w)| w * (self.alpha * b.abs() + 0.5 * (1.0 - self.alpha) * b * b))
            .sum::<f64>()
            * self.lambda
    }

    pub(crate) fn objective(&self, beta: &[f64]) -> f64 {
        let eta = linear_predictor(self.x, beta);
        2.0 / self.n() * self.index.loglik(&eta) - self.penalty(beta)
    }

    /// `(2/n) dl/dbeta_j` for every column.
    pub(crate) fn scaled_gradient(&self, beta: &[f64]) -> Vec<f64> {
        let eta = linear_predictor(self.x, beta);
        let d = self.index.eta_derivatives(&eta);
        let scale = 2.0 / self.n();
        (0..self.x.ncols())
            .map(|j| scale * self.x.column(j).iter().zip(&d.gradient).map(|(a, g)| a * g).sum::<f64>())
            .collect()
    }

    /// Penalized weighted least squares around `beta` by cyclic coordinate
    /// descent with an active-set inner loop.
    fn solve_quadratic(&self, beta: &[f64], opts: &EnetOptions) -> Vec<f64> {
        let n = self.x.nrows();
        let p = self.x.ncols();
        let eta = linear_predictor(self.x, beta);
        let d = self.index.eta_derivatives(&eta);
        let scale = 2.0 / self.n();
        let h: Vec<f64> = d.neg_hessian_diag.iter().map(|&v| if v > 1e-14 { v } else { 0.0 }).collect();
        // residual z - eta of the working response
        let mut r: Vec<f64> = (0..n)
            .map(|i| if h[i] > 0.0 { d.gradient[i] / h[i] } else { 0.0 })
            .collect();
        let curvature: Vec<f64> = (0..p)
            .map(|j| scale * self.x.column(j).iter().zip(&h).map(|(a, w)| w * a * a).sum::<f64>())
            .collect();
        let mut b = beta.to_vec();

        let update = |j: usize, b: &mut [f64], r: &mut [f64]| -> f64 {
            let v = curvature[j];
            if !self.free[j] || v <= 0.0 {
                return 0.0;
            }
            let col = self.x.column(j);
            let mut a = 0.0;
            for i in 0..n {
                a += h[i] * col[i] * r[i];
            }
            a = scale * a + v * b[j];
            let w = self.weights[j];
            let new = soft_threshold(a, self.lambda * self.alpha * w)
                / (v + self.lambda * (1.0 - self.alpha) * w);
            let delta = new - b[j];
            if delta != 0.0 {
                for i in 0..n {
                    r[i] -= col[i] * delta;
                }
                b[j] = new;
            }
            delta.abs() * v.sqrt()
        };

        let mut sweeps = 0;
        loop {
            let mut change = 0.0f64;
            for j in 0..p {
                change = change.max(update(j, &mut b, &mut r));
            }
            sweeps += 1;
            if change < opts.inner_tol || sweeps >= opts.max_inner_sweeps {
                break;
            }
            let active: Vec<usize> = (0..p).filter(|&j| b[j] != 0.0).collect();
            loop {
                let mut change = 0.0f64;
                for &j in &active {
                    change = change.max(update(j, &mut b, &mut r));
                }
                sweeps += 1;
                if change < opts.inner_tol || sweeps >= opts.max_inner_sweeps {
                    break;
                }
            }
        }
        b
    }

    pub(crate) fn solve(&self, start: &[f64], opts: &EnetOptions) -> Result<(Vec<f64>, EnetTrace)> {
        let mut beta = start.to_vec();
        for (b, &f) in beta.iter_mut().zip(&self.free) {
            if !f {
                *b = 0.0;
            }
        }
        let mut obj = self.objective(&beta);
        if !obj.is_finite() {
            return Err(SurvError::NonFinite("penalized objective at the starting point".into()));
        }
        let mut trace = EnetTrace {
            objective: vec![obj],
            outer_iterations: 0,
            converged: false,
        };
        for _ in 0..opts.max_outer {
            trace.outer_iterations += 1;
            let proposal = self.solve_quadratic(&beta, opts);
            let mut t = 1.0;
            let mut next = proposal.clone();
            let mut next_obj = self.objective(&next);
            let mut halvings = 0;
            while !(next_obj >= obj - 1e-13 * obj.abs().max(1.0)) && halvings < 40 {
                t *= 0.5;
                halvings += 1;
                next = beta.iter().zip(&proposal).map(|(a, b)| a + t * (b - a)).collect();
                next_obj = self.objective(&next);
            }
            if !(next_obj >= obj - 1e-13 * obj.abs().max(1.0)) {
                // no ascent from the current point at working precision
                trace.converged = true;
                break;
            }
            if let Some((j, b)) = next
                .iter()
                .enumerate()
                .find(|(_, b)| !b.is_finite() || b.abs() > opts.divergence_bound)
            {
                return Err(SurvError::Diverged(format!(
                    "coefficient {j} reached {b:.3e} at lambda = {}",
                    self.lambda
                )));
            }
            let change = beta
                .iter()
                .zip(&next)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            let same_support = halvings == 0 && beta.iter().zip(&next).all(|(a, b)| (*a == 0.0) == (*b == 0.0));
            beta = next;
            obj = next_obj;
            trace.objective.push(obj);
            if change < opts.tol && same_support {
                trace.converged = true;
                break;
            }
        }
        Ok((beta, trace))
    }

    pub(crate) fn into_fit(&self, ds: &SurvivalDataset, beta: Vec<f64>, trace: &EnetTrace) -> CoxFit {
        let eta = linear_predictor(self.x, &beta);
        CoxFit {
            features: ds.features().to_vec(),
            baseline: BaselineHazard::from_increments(&self.index.breslow_increments(&eta)),
            loglik: self.index.loglik(&eta),
            coefficients: beta,
            std_errors: None,
            converged: trace.converged,
            iterations: trace.outer_iterations,
            penalty: Some(PenaltyInfo {
                lambda: self.lambda,
                alpha: self.alpha,
            }),
        }
    }
}

/// Elastic-net Cox fit at a single penalty, optionally warm-started.
pub fn fit_enet(ds: &SurvivalDataset, spec: &PenaltySpec, warm: Option<&[f64]>) -> Result<CoxFit> {
    fit_enet_traced(ds, spec, warm, &EnetOptions::default()).map(|(fit, _)| fit)
}

pub fn fit_enet_traced(
    ds: &SurvivalDataset,
    spec: &PenaltySpec,
    warm: Option<&[f64]>,
    opts: &EnetOptions,
) -> Result<(CoxFit, EnetTrace)> {
    let problem = Problem::new(ds, spec)?;
    if problem.index.n_events() == 0 {
        return Err(SurvError::Degenerate("no events".into()));
    }
    let start = match warm {
        Some(w) if w.len() != ds.p() => {
            return Err(SurvError::DimensionMismatch {
                expected: ds.p(),
                got: w.len(),
            })
        }
        Some(w) => w.to_vec(),
        None => vec![0.0; ds.p()],
    };
    let (beta, trace) = problem.solve(&start, opts)?;
    Ok((problem.into_fit(ds, beta, &trace), trace))
}

/// Largest violation of the elastic-net optimality conditions:
/// for zero penalized coordinates `|g_j| <= lambda alpha w_j`, otherwise
/// `g_j = lambda w_j (alpha sign(beta_j) + (1 - alpha) beta_j)`, with `g` the
/// gradient of `(2/n) l`.
pub fn kkt_violation(ds: &SurvivalDataset, spec: &PenaltySpec, beta: &[f64]) -> Result<f64> {
    let problem = Problem::new(ds, spec)?;
    let g = problem.scaled_gradient(beta);
    let mut worst = 0.0f64;
    for j in 0..ds.p() {
        if !problem.free[j] {
            continue;
        }
        let w = problem.weights[j];
        let l1 = spec.lambda * spec.alpha * w;
        let v = if beta[j] == 0.0 {
            (g[j].abs() - l1).max(0.0)
        } else {
            (g[j] - l1 * beta[j].signum() - spec.lambda * (1.0 - spec.alpha) * w * beta[j]).abs()
        };
        worst = worst.max(v);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cox::fit_cox_newton;
    use crate::dataset::standardize;
    use crate::synth::CoxGenerator;

    #[test]
    fn soft_threshold_cases() {
        assert_eq!(soft_threshold(3.0, 1.0), 2.0);
        assert_eq!(soft_threshold(-3.0, 1.0), -2.0);
        assert_eq!(soft_threshold(0.5, 1.0), 0.0);
    }

    #[test]
    fn invalid_alpha_rejected() {
        let ds = CoxGenerator::three_signal(30, 4).generate(1);
        assert!(fit_enet(&ds, &PenaltySpec::enet(0.1, 1.5), None).is_err());
        assert!(fit_enet(&ds, &PenaltySpec::enet(-0.1, 0.5), None).is_err());
    }

    #[test]
    fn unpenalized_matches_newton() {
        let ds = standardize(&CoxGenerator::three_signal(100, 5).generate(7));
        let newton = fit_cox_newton(&ds, &[0, 1, 2, 3, 4]).unwrap();
        let enet = fit_enet(&ds, &PenaltySpec::lasso(0.0), None).unwrap();
        for (a, b) in newton.coefficients.iter().zip(&enet.coefficients) {
            assert!((a - b).abs() < 1e-5, "{a} vs {b}");
        }
    }

    #[test]
    fn objective_never_decreases() {
        let ds = standardize(&CoxGenerator::three_signal(80, 10).generate(3));
        let (_, trace) =
            fit_enet_traced(&ds, &PenaltySpec::enet(0.05, 0.5), None, &EnetOptions::default()).unwrap();
        assert!(trace.converged);
        for w in trace.objective.windows(2) {
            assert!(w[1] >= w[0] - 1e-10);
        }
    }

    #[test]
    fn kkt_holds_at_solution() {
        let ds = standardize(&CoxGenerator::three_signal(80, 10).generate(5));
        for spec in [PenaltySpec::lasso(0.05), PenaltySpec::enet(0.08, 0.3)] {
            let fit = fit_enet(&ds, &spec, None).unwrap();
            assert!(kkt_violation(&ds, &spec, &fit.coefficients).unwrap() < 1e-6);
        }
    }
}
