use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::SurvivalOutcome;
use crate::error::{Result, SurvError};
use crate::nonparametric::km_estimate;
use crate::rng::{derive_seed, seeded};
use crate::stats;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationOptions {
    pub groups: usize,
    /// Bootstrap resamples for the per-group Kaplan-Meier intervals; 0 disables them.
    pub bootstrap: usize,
    pub level: f64,
    pub seed: u64,
}

impl Default for CalibrationOptions {
    fn default() -> Self {
        Self {
            groups: 4,
            bootstrap: 200,
            level: 0.95,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationGroup {
    pub group: usize,
    pub size: usize,
    /// Mean predicted survival at the horizon.
    pub predicted: f64,
    /// Kaplan-Meier survival of the group at the horizon.
    pub observed: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    pub horizon: f64,
    pub groups: Vec<CalibrationGroup>,
    pub intercept: f64,
    pub slope: f64,
    /// Residuals of the regression on the `ln(-ln S)` scale, per group.
    pub residuals: Vec<f64>,
}

impl CalibrationResult {
    /// CSV with columns `group,pred,observed,ci_lo,ci_hi`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["group", "pred", "observed", "ci_lo", "ci_hi"])?;
        for g in &self.groups {
            w.write_record(&[
                g.group.to_string(),
                g.predicted.to_string(),
                g.observed.to_string(),
                g.ci_lo.to_string(),
                g.ci_hi.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn cloglog(s: f64) -> f64 {
    (-s.ln()).ln()
}

/// Least-squares fit of `ln(-ln observed) = a + b ln(-ln predicted)`.
/// Returns `(a, b, residuals)`.
pub fn calibration_regression(predicted: &[f64], observed: &[f64]) -> Result<(f64, f64, Vec<f64>)> {
    if predicted.len() != observed.len() {
        return Err(SurvError::DimensionMismatch {
            expected: predicted.len(),
            got: observed.len(),
        });
    }
    if predicted.len() < 2 {
        return Err(SurvError::InvalidParameter("calibration needs at least two groups".into()));
    }
    for (g, (&p, &o)) in predicted.iter().zip(observed).enumerate() {
        for v in [p, o] {
            if !(v > 0.0 && v < 1.0) {
                return Err(SurvError::CalibrationGroup { group: g, value: v });
            }
        }
    }
    let x: Vec<f64> = predicted.iter().map(|&p| cloglog(p)).collect();
    let y: Vec<f64> = observed.iter().map(|&o| cloglog(o)).collect();
    let mx = stats::mean(&x);
    let my = stats::mean(&y);
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(SurvError::Degenerate("all groups have the same mean prediction".into()));
    }
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residuals = x.iter().zip(&y).map(|(a, b)| b - intercept - slope * a).collect();
    Ok((intercept, slope, residuals))
}

/// Calibration at `horizon`: patients are split into equal-size groups by
/// rank of their predicted survival, and the group means are regressed
/// against the group Kaplan-Meier estimates on the `ln(-ln)` scale.
pub fn calibration_fit(
    pred: &[f64],
    outcomes: &[SurvivalOutcome],
    horizon: f64,
    opts: &CalibrationOptions,
) -> Result<CalibrationResult> {
    let n = outcomes.len();
    if pred.len() != n {
        return Err(SurvError::DimensionMismatch {
            expected: n,
            got: pred.len(),
        });
    }
    if opts.groups < 2 || opts.groups > n {
        return Err(SurvError::InvalidParameter(format!(
            "calibration needs 2 <= groups <= n = {n}, got {}",
            opts.groups
        )));
    }
    if !(opts.level > 0.0 && opts.level < 1.0) {
        return Err(SurvError::InvalidParameter("confidence level must lie in (0, 1)".into()));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| pred[a].total_cmp(&pred[b]));
    let mut members = vec![Vec::new(); opts.groups];
    for (rank, &i) in order.iter().enumerate() {
        members[rank * opts.groups / n].push(i);
    }
    let tail = (1.0 - opts.level) / 2.0;
    let mut groups = Vec::with_capacity(opts.groups);
    for (g, idx) in members.iter().enumerate() {
        let out: Vec<SurvivalOutcome> = idx.iter().map(|&i| outcomes[i]).collect();
        let observed = km_estimate(&out)?.survival_at(horizon);
        if !(observed > 0.0 && observed < 1.0) {
            return Err(SurvError::CalibrationGroup { group: g, value: observed });
        }
        let predicted = idx.iter().map(|&i| pred[i]).sum::<f64>() / idx.len() as f64;
        let (ci_lo, ci_hi) = if opts.bootstrap > 0 {
            let mut rng = seeded(derive_seed(opts.seed, g as u64));
            let mut draws: Vec<f64> = (0..opts.bootstrap)
                .map(|_| {
                    let sample: Vec<SurvivalOutcome> =
                        (0..out.len()).map(|_| out[rng.random_range(0..out.len())]).collect();
                    km_estimate(&sample).map(|c| c.survival_at(horizon))
                })
                .collect::<Result<Vec<_>>>()?;
            draws.sort_by(f64::total_cmp);
            (stats::quantile_sorted(&draws, tail), stats::quantile_sorted(&draws, 1.0 - tail))
        } else {
            (f64::NAN, f64::NAN)
        };
        groups.push(CalibrationGroup {
            group: g,
            size: idx.len(),
            predicted,
            observed,
            ci_lo,
            ci_hi,
        });
    }
    let p: Vec<f64> = groups.iter().map(|g| g.predicted).collect();
    let o: Vec<f64> = groups.iter().map(|g| g.observed).collect();
    let (intercept, slope, residuals) = calibration_regression(&p, &o)?;
    Ok(CalibrationResult {
        horizon,
        groups,
        intercept,
        slope,
        residuals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::SurvivalOutcome as O;

    #[test]
    fn identical_values_give_identity() {
        let p = [0.2, 0.5, 0.7, 0.9];
        let (a, b, r) = calibration_regression(&p, &p).unwrap();
        assert!(a.abs() < 1e-15 && (b - 1.0).abs() < 1e-15);
        assert!(r.iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn recovers_constructed_affine_relation() {
        let x = [-2.0, -1.0, 0.0, 0.7];
        let pred: Vec<f64> = x.iter().map(|v: &f64| (-v.exp()).exp()).collect();
        let obs: Vec<f64> = x.iter().map(|v| (-(0.3 + 1.2 * v).exp()).exp()).collect();
        let (a, b, _) = calibration_regression(&pred, &obs).unwrap();
        assert!((a - 0.3).abs() < 1e-12 && (b - 1.2).abs() < 1e-12);
    }

    #[test]
    fn event_free_group_is_an_error() {
        let outcomes = vec![
            O::censored(10.0),
            O::censored(11.0),
            O::censored(12.0),
            O::censored(13.0),
            O::event(2.0),
            O::event(3.0),
            O::censored(12.0),
            O::censored(13.0),
        ];
        // high predicted survival for the event-free patients
        let pred: Vec<f64> = (0..8).map(|i| if i < 4 { 0.9 } else { 0.3 }).collect();
        let opts = CalibrationOptions {
            groups: 2,
            bootstrap: 0,
            ..CalibrationOptions::default()
        };
        match calibration_fit(&pred, &outcomes, 9.0, &opts) {
            Err(SurvError::CalibrationGroup { group, value }) => {
                assert_eq!(group, 1);
                assert_eq!(value, 1.0);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn bootstrap_intervals_bracket_estimates() {
        let g = crate::synth::CoxGenerator::new(200, 1, vec![1.0]);
        let ds = g.generate(5);
        let pred: Vec<f64> = (0..ds.n()).map(|i| g.true_survival(&ds.row(i), 5.0)).collect();
        let r = calibration_fit(&pred, ds.outcomes(), 5.0, &CalibrationOptions::default()).unwrap();
        assert_eq!(r.groups.len(), 4);
        assert!(r.groups.iter().all(|g| g.size == 50));
        for g in &r.groups {
            assert!(g.ci_lo <= g.observed + 1e-12 && g.observed <= g.ci_hi + 1e-12);
        }
        let again = calibration_fit(&pred, ds.outcomes(), 5.0, &CalibrationOptions::default()).unwrap();
        assert_eq!(r, again);
    }
}
