use serde::{Deserialize, Serialize};

use crate::dataset::SurvivalOutcome;
use crate::error::{Result, SurvError};
use crate::nonparametric::CensoringModel;
use crate::stats;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BrierVariant {
    Apparent,
    Oob,
    Dot632Plus,
    NullModel,
    NoInformation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BrierCurve {
    pub variant: BrierVariant,
    pub times: Vec<f64>,
    pub scores: Vec<f64>,
}

impl BrierCurve {
    pub fn ibs(&self, tau: f64) -> Result<f64> {
        integrated_brier(&self.times, &self.scores, tau)
    }
}

/// Per-patient IPCW weights at horizon `t`: `1 / G(T_i-)` for events by `t`,
/// `1 / G(t)` for patients observed beyond `t`, 0 for patients censored by `t`.
fn ipcw_weights(outcomes: &[SurvivalOutcome], t: f64, censoring: &CensoringModel) -> Result<Vec<(f64, bool)>> {
    let g_t = censoring.at(t);
    outcomes
        .iter()
        .map(|o| {
            if o.time <= t && o.event {
                let g = censoring.before(o.time);
                if !(g > 0.0) {
                    return Err(SurvError::Degenerate(format!("censoring survival is zero before {}", o.time)));
                }
                Ok((1.0 / g, false))
            } else if o.time > t {
                if !(g_t > 0.0) {
                    return Err(SurvError::Degenerate(format!("censoring survival is zero at {t}")));
                }
                Ok((1.0 / g_t, true))
            } else {
                Ok((0.0, false))
            }
        })
        .collect()
}

/// IPCW Brier score at `t` for predicted survival probabilities `pred`.
pub fn brier_score(pred: &[f64], outcomes: &[SurvivalOutcome], t: f64, censoring: &CensoringModel) -> Result<f64> {
    if pred.len() != outcomes.len() {
        return Err(SurvError::DimensionMismatch {
            expected: outcomes.len(),
            got: pred.len(),
        });
    }
    if outcomes.is_empty() {
        return Err(SurvError::InvalidData("Brier score of an empty sample".into()));
    }
    let w = ipcw_weights(outcomes, t, censoring)?;
    let terms: Vec<f64> = pred
        .iter()
        .zip(&w)
        .map(|(&s, &(wi, alive))| if alive { wi * (1.0 - s).powi(2) } else { wi * s * s })
        .collect();
    Ok(stats::pairwise_sum(&terms) / outcomes.len() as f64)
}

/// Brier scores over a time grid; `pred_at(t)` returns the predictions at `t`.
pub fn brier_curve(
    variant: BrierVariant,
    times: &[f64],
    outcomes: &[SurvivalOutcome],
    censoring: &CensoringModel,
    mut pred_at: impl FnMut(f64) -> Result<Vec<f64>>,
) -> Result<BrierCurve> {
    let scores = times
        .iter()
        .map(|&t| brier_score(&pred_at(t)?, outcomes, t, censoring))
        .collect::<Result<Vec<_>>>()?;
    Ok(BrierCurve {
        variant,
        times: times.to_vec(),
        scores,
    })
}

/// No-information error at `t`: every prediction scored against every
/// outcome, i.e. the Brier score after breaking the link between
/// covariates and outcomes.
pub fn no_information_error(pred: &[f64], outcomes: &[SurvivalOutcome], t: f64, censoring: &CensoringModel) -> Result<f64> {
    if pred.is_empty() || outcomes.is_empty() {
        return Err(SurvError::InvalidData("no-information error of an empty sample".into()));
    }
    let w = ipcw_weights(outcomes, t, censoring)?;
    let n = outcomes.len() as f64;
    let dead: f64 = w.iter().filter(|x| !x.1).map(|x| x.0).sum::<f64>() / n;
    let alive: f64 = w.iter().filter(|x| x.1).map(|x| x.0).sum::<f64>() / n;
    let m = pred.len() as f64;
    let sq: f64 = pred.iter().map(|s| s * s).sum::<f64>() / m;
    let sq_c: f64 = pred.iter().map(|s| (1.0 - s).powi(2)).sum::<f64>() / m;
    Ok(dead * sq + alive * sq_c)
}

/// Trapezoidal integral of a Brier curve from the first grid time to `tau`,
/// divided by the length of that range (which is `tau` for a grid starting
/// at 0). The curve is linearly interpolated at `tau`.
pub fn integrated_brier(times: &[f64], scores: &[f64], tau: f64) -> Result<f64> {
    if times.len() != scores.len() || times.len() < 2 {
        return Err(SurvError::InvalidParameter("integrated Brier score needs at least two grid points".into()));
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(SurvError::InvalidParameter("Brier grid must be strictly increasing".into()));
    }
    let start = times[0];
    let end = *times.last().expect("non-empty");
    if !(tau > start) || tau > end {
        return Err(SurvError::InvalidParameter(format!(
            "tau = {tau} lies outside the grid ({start}, {end}]"
        )));
    }
    let mut area = 0.0;
    for k in 1..times.len() {
        let (t0, t1) = (times[k - 1], times[k]);
        if t0 >= tau {
            break;
        }
        let (s0, mut s1, mut hi) = (scores[k - 1], scores[k], t1);
        if t1 > tau {
            s1 = s0 + (s1 - s0) * (tau - t0) / (t1 - t0);
            hi = tau;
        }
        area += (hi - t0) * (s0 + s1) / 2.0;
    }
    Ok(area / (tau - start))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Dot632Plus {
    pub estimate: f64,
    /// Weight on the out-of-bag error, in [0.632, 1].
    pub weight: f64,
    /// Relative overfitting rate, in [0, 1].
    pub relative_overfit: f64,
}

/// The .632+ blend of apparent and out-of-bag error given the
/// no-information error `gamma`.
pub fn dot632plus(apparent: f64, oob: f64, gamma: f64) -> Dot632Plus {
    let oob_capped = oob.min(gamma);
    let r = if oob_capped > apparent && gamma > apparent {
        ((oob_capped - apparent) / (gamma - apparent)).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let weight = 0.632 / (1.0 - 0.368 * r);
    Dot632Plus {
        estimate: (1.0 - weight) * apparent + weight * oob_capped,
        weight,
        relative_overfit: r,
    }
}
