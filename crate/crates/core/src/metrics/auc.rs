use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::dataset::SurvivalOutcome;
use crate::error::{Result, SurvError};
use crate::nonparametric::CensoringModel;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AucResult {
    pub horizon: f64,
    pub auc: f64,
    /// `(fpr, tpr)` from `(0, 0)` to `(1, 1)`, one point per distinct score.
    pub roc: Vec<(f64, f64)>,
    pub cases: usize,
    pub controls: usize,
}

impl AucResult {
    /// CSV with columns `fpr,tpr`.
    pub fn write_roc_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["fpr", "tpr"])?;
        for (f, t) in &self.roc {
            w.write_record(&[f.to_string(), t.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Cumulative/dynamic AUC at `horizon`: cases are events at or before the
/// horizon weighted by `1 / G(T_i-)`, controls are patients still under
/// observation after it (their common weight `1 / G(t)` cancels).
pub fn time_dependent_auc(
    scores: &[f64],
    outcomes: &[SurvivalOutcome],
    horizon: f64,
    censoring: &CensoringModel,
) -> Result<AucResult> {
    if scores.len() != outcomes.len() {
        return Err(SurvError::DimensionMismatch {
            expected: outcomes.len(),
            got: scores.len(),
        });
    }
    if !(censoring.at(horizon) > 0.0) {
        return Err(SurvError::Degenerate(format!(
            "censoring survival is zero at the horizon {horizon}"
        )));
    }
    let mut cases: Vec<(f64, f64)> = Vec::new();
    let mut controls: Vec<f64> = Vec::new();
    for (o, &s) in outcomes.iter().zip(scores) {
        if o.time <= horizon && o.event {
            cases.push((s, 1.0 / censoring.before(o.time)));
        } else if o.time > horizon {
            controls.push(s);
        }
    }
    if cases.is_empty() || controls.is_empty() {
        return Err(SurvError::Degenerate(format!(
            "time-dependent AUC at {horizon} needs cases and controls ({} and {})",
            cases.len(),
            controls.len()
        )));
    }
    let case_total: f64 = cases.iter().map(|c| c.1).sum();
    let mut sorted_controls = controls.clone();
    sorted_controls.sort_by(f64::total_cmp);
    let mut num = 0.0;
    for &(s, w) in &cases {
        let below = sorted_controls.partition_point(|&c| c < s);
        let tied = sorted_controls.partition_point(|&c| c <= s) - below;
        num += w * (below as f64 + 0.5 * tied as f64);
    }
    let auc = num / (case_total * controls.len() as f64);

    let mut thresholds: Vec<f64> = cases.iter().map(|c| c.0).chain(controls.iter().copied()).collect();
    thresholds.sort_by(|a, b| b.total_cmp(a));
    thresholds.dedup();
    let mut roc = vec![(0.0, 0.0)];
    for &c in &thresholds {
        let tpr = cases.iter().filter(|x| x.0 >= c).map(|x| x.1).sum::<f64>() / case_total;
        let fpr = controls.iter().filter(|&&x| x >= c).count() as f64 / controls.len() as f64;
        roc.push((fpr, tpr));
    }
    Ok(AucResult {
        horizon,
        auc,
        roc,
        cases: cases.len(),
        controls: controls.len(),
    })
}
