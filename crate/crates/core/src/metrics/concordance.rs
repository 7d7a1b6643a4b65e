use serde::{Deserialize, Serialize};

use super::SurvivalModel;
use crate::dataset::{SurvivalDataset, SurvivalOutcome};
use crate::error::{Result, SurvError};
use crate::nonparametric::CensoringModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConcordanceVariant {
    Harrell,
    Uno,
    Antolini,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcordanceResult {
    pub c_index: f64,
    pub comparable_pairs: usize,
    pub variant: ConcordanceVariant,
    /// Truncation time (Uno only).
    pub tau: Option<f64>,
}

fn check_len(a: usize, outcomes: &[SurvivalOutcome]) -> Result<()> {
    if a != outcomes.len() {
        return Err(SurvError::DimensionMismatch {
            expected: outcomes.len(),
            got: a,
        });
    }
    Ok(())
}

fn pair_credit(higher_risk: f64, lower_risk: f64) -> f64 {
    if higher_risk > lower_risk {
        1.0
    } else if higher_risk == lower_risk {
        0.5
    } else {
        0.0
    }
}

/// Harrell's C: among pairs with `T_i < T_j` and an event at `T_i`, the
/// fraction where patient `i` has the higher score (ties count 1/2).
pub fn harrell_c(scores: &[f64], outcomes: &[SurvivalOutcome]) -> Result<ConcordanceResult> {
    check_len(scores.len(), outcomes)?;
    let mut num = 0.0;
    let mut pairs = 0usize;
    for (i, oi) in outcomes.iter().enumerate() {
        if !oi.event {
            continue;
        }
        for (j, oj) in outcomes.iter().enumerate() {
            if oi.time < oj.time {
                pairs += 1;
                num += pair_credit(scores[i], scores[j]);
            }
        }
    }
    if pairs == 0 {
        return Err(SurvError::Degenerate("no comparable pairs".into()));
    }
    Ok(ConcordanceResult {
        c_index: num / pairs as f64,
        comparable_pairs: pairs,
        variant: ConcordanceVariant::Harrell,
        tau: None,
    })
}

/// Uno's IPCW C: Harrell's pairs restricted to `T_i < tau`, each weighted by
/// `G(T_i-)^-2`.
pub fn uno_c(
    scores: &[f64],
    outcomes: &[SurvivalOutcome],
    censoring: &CensoringModel,
    tau: f64,
) -> Result<ConcordanceResult> {
    check_len(scores.len(), outcomes)?;
    let mut num = 0.0;
    let mut den = 0.0;
    let mut pairs = 0usize;
    for (i, oi) in outcomes.iter().enumerate() {
        if !oi.event || oi.time >= tau {
            continue;
        }
        let g = censoring.before(oi.time);
        if !(g > 0.0) {
            return Err(SurvError::Degenerate(format!(
                "censoring survival reaches zero before t = {} (tau = {tau})",
                oi.time
            )));
        }
        let w = 1.0 / (g * g);
        for (j, oj) in outcomes.iter().enumerate() {
            if oi.time < oj.time {
                pairs += 1;
                den += w;
                num += w * pair_credit(scores[i], scores[j]);
            }
        }
    }
    if pairs == 0 {
        return Err(SurvError::Degenerate("no comparable pairs before tau".into()));
    }
    Ok(ConcordanceResult {
        c_index: num / den,
        comparable_pairs: pairs,
        variant: ConcordanceVariant::Uno,
        tau: Some(tau),
    })
}

/// Predicted survival of every patient at a common set of times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictedCurves {
    /// Strictly increasing.
    pub times: Vec<f64>,
    /// `values[k][i]` is `S(times[k] | x_i)`.
    pub values: Vec<Vec<f64>>,
}

impl PredictedCurves {
    pub fn new(times: Vec<f64>, values: Vec<Vec<f64>>) -> Result<Self> {
        if times.len() != values.len() || times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(SurvError::InvalidParameter(
                "curve times must be strictly increasing with one row of values per time".into(),
            ));
        }
        Ok(Self { times, values })
    }

    /// Evaluate `model` at the distinct event times of `ds`.
    pub fn at_event_times(model: &dyn SurvivalModel, ds: &SurvivalDataset) -> Result<Self> {
        let mut times: Vec<f64> = ds.outcomes().iter().filter(|o| o.event).map(|o| o.time).collect();
        times.sort_by(f64::total_cmp);
        times.dedup();
        let values = times
            .iter()
            .map(|&t| model.survival_at(ds, t))
            .collect::<Result<Vec<_>>>()?;
        Self::new(times, values)
    }

    fn row(&self, t: f64) -> Option<&[f64]> {
        self.times
            .binary_search_by(|v| v.total_cmp(&t))
            .ok()
            .map(|k| self.values[k].as_slice())
    }
}

/// Antolini's time-dependent C: pair `(i, j)` with `T_i < T_j` and an event
/// at `T_i` is concordant when `S(T_i | x_i) < S(T_i | x_j)`.
pub fn antolini_c(curves: &PredictedCurves, outcomes: &[SurvivalOutcome]) -> Result<ConcordanceResult> {
    let mut num = 0.0;
    let mut pairs = 0usize;
    for (i, oi) in outcomes.iter().enumerate() {
        if !oi.event {
            continue;
        }
        let row = curves.row(oi.time).ok_or_else(|| {
            SurvError::InvalidParameter(format!("predicted curves are not evaluated at event time {}", oi.time))
        })?;
        check_len(row.len(), outcomes)?;
        for (j, oj) in outcomes.iter().enumerate() {
            if oi.time < oj.time {
                pairs += 1;
                // lower survival means higher risk
                num += pair_credit(-row[i], -row[j]);
            }
        }
    }
    if pairs == 0 {
        return Err(SurvError::Degenerate("no comparable pairs".into()));
    }
    Ok(ConcordanceResult {
        c_index: num / pairs as f64,
        comparable_pairs: pairs,
        variant: ConcordanceVariant::Antolini,
        tau: None,
    })
}
