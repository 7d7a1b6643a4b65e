//! Discrimination, calibration and prediction-error measures for censored
//! survival predictions.

mod auc;
mod brier;
mod calibration;
mod concordance;
mod pec;

use crate::bayes::PosteriorPredictor;
use crate::cox::CoxFit;
use crate::dataset::{SurvivalDataset, SurvivalOutcome};
use crate::error::{Result, SurvError};
use crate::nonparametric::{km_estimate, logrank_test, KmCurve, LogRankResult};
use crate::stats;

pub use auc::{time_dependent_auc, AucResult};
pub use brier::{
    brier_curve, brier_score, dot632plus, integrated_brier, no_information_error, BrierCurve, BrierVariant,
    Dot632Plus,
};
pub use calibration::{calibration_fit, calibration_regression, CalibrationGroup, CalibrationOptions, CalibrationResult};
pub use concordance::{antolini_c, harrell_c, uno_c, ConcordanceResult, ConcordanceVariant, PredictedCurves};
pub use pec::{prediction_error_curve, Fitter, PredictionErrorCurves};

/// A fitted model that can score and predict for new patients.
pub trait SurvivalModel: Send + Sync {
    /// Prognostic scores; larger means higher risk.
    fn risk_scores(&self, ds: &SurvivalDataset) -> Result<Vec<f64>>;

    /// Predicted `S(t | x_i)` for every row of `ds`.
    fn survival_at(&self, ds: &SurvivalDataset, t: f64) -> Result<Vec<f64>>;
}

impl SurvivalModel for CoxFit {
    fn risk_scores(&self, ds: &SurvivalDataset) -> Result<Vec<f64>> {
        self.linear_predictors(ds)
    }

    fn survival_at(&self, ds: &SurvivalDataset, t: f64) -> Result<Vec<f64>> {
        CoxFit::survival_at(self, ds, t)
    }
}

impl SurvivalModel for PosteriorPredictor {
    fn risk_scores(&self, ds: &SurvivalDataset) -> Result<Vec<f64>> {
        self.linear_predictors(ds)
    }

    fn survival_at(&self, ds: &SurvivalDataset, t: f64) -> Result<Vec<f64>> {
        PosteriorPredictor::survival_at(self, ds, t)
    }
}

/// Covariate-free reference model predicting the Kaplan-Meier curve of its
/// training data for everyone.
#[derive(Debug, Clone, PartialEq)]
pub struct KaplanMeierModel {
    pub curve: KmCurve,
}

impl KaplanMeierModel {
    pub fn fit(outcomes: &[SurvivalOutcome]) -> Result<Self> {
        Ok(Self {
            curve: km_estimate(outcomes)?,
        })
    }
}

impl SurvivalModel for KaplanMeierModel {
    fn risk_scores(&self, ds: &SurvivalDataset) -> Result<Vec<f64>> {
        Ok(vec![0.0; ds.n()])
    }

    fn survival_at(&self, ds: &SurvivalDataset, t: f64) -> Result<Vec<f64>> {
        Ok(vec![self.curve.survival_at(t); ds.n()])
    }
}

/// Split patients at quantiles of their scores and compare the resulting
/// groups with the log-rank test. Group `k` holds scores above exactly `k`
/// cut points.
pub fn risk_group_logrank(scores: &[f64], outcomes: &[SurvivalOutcome], quantiles: &[f64]) -> Result<LogRankResult> {
    if scores.len() != outcomes.len() {
        return Err(SurvError::DimensionMismatch {
            expected: outcomes.len(),
            got: scores.len(),
        });
    }
    if quantiles.is_empty() || quantiles.iter().any(|q| !(*q > 0.0 && *q < 1.0)) {
        return Err(SurvError::InvalidParameter("risk-group quantiles must lie in (0, 1)".into()));
    }
    if scores.windows(2).all(|w| w[0] == w[1]) {
        return Err(SurvError::Degenerate("all prognostic scores are equal".into()));
    }
    let mut sorted = scores.to_vec();
    sorted.sort_by(f64::total_cmp);
    let cuts: Vec<f64> = quantiles.iter().map(|&q| stats::quantile_sorted(&sorted, q)).collect();
    let groups: Vec<usize> = scores.iter().map(|s| cuts.iter().filter(|&&c| *s > c).count()).collect();
    logrank_test(outcomes, &groups)
}
