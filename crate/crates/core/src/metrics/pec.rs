use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::brier::{brier_score, dot632plus, integrated_brier, no_information_error, BrierCurve, BrierVariant};
use super::{KaplanMeierModel, SurvivalModel};
use crate::dataset::{ResamplingPlan, SurvivalDataset};
use crate::error::{Result, SurvError};
use crate::nonparametric::censoring_km;
use crate::stats;

/// A self-contained training procedure, re-run on every resample.
pub trait Fitter: Sync {
    fn fit(&self, train: &SurvivalDataset) -> Result<Box<dyn SurvivalModel>>;
}

impl<F> Fitter for F
where
    F: Fn(&SurvivalDataset) -> Result<Box<dyn SurvivalModel>> + Sync,
{
    fn fit(&self, train: &SurvivalDataset) -> Result<Box<dyn SurvivalModel>> {
        self(train)
    }
}

/// Bootstrap prediction-error curves on a common time grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionErrorCurves {
    pub times: Vec<f64>,
    /// Kaplan-Meier prediction for everyone.
    pub null: Vec<f64>,
    /// Model trained and evaluated on the full data.
    pub apparent: Vec<f64>,
    pub no_information: Vec<f64>,
    pub oob_mean: Vec<f64>,
    pub oob_q025: Vec<f64>,
    pub oob_q975: Vec<f64>,
    pub dot632plus: Vec<f64>,
    /// Out-of-bag curve of every successful replicate.
    pub oob: Vec<Vec<f64>>,
    pub replicates_used: usize,
    pub replicates_total: usize,
    pub warnings: Vec<String>,
}

impl PredictionErrorCurves {
    pub fn curve(&self, variant: BrierVariant) -> BrierCurve {
        let scores = match variant {
            BrierVariant::Apparent => &self.apparent,
            BrierVariant::Oob => &self.oob_mean,
            BrierVariant::Dot632Plus => &self.dot632plus,
            BrierVariant::NullModel => &self.null,
            BrierVariant::NoInformation => &self.no_information,
        };
        BrierCurve {
            variant,
            times: self.times.clone(),
            scores: scores.clone(),
        }
    }

    /// Integrated Brier scores `(null, apparent, dot632plus)` up to `tau`.
    pub fn integrated(&self, tau: f64) -> Result<(f64, f64, f64)> {
        Ok((
            integrated_brier(&self.times, &self.null, tau)?,
            integrated_brier(&self.times, &self.apparent, tau)?,
            integrated_brier(&self.times, &self.dot632plus, tau)?,
        ))
    }

    /// CSV with columns `time,null,apparent,dot632plus,oob_q025,oob_q975`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["time", "null", "apparent", "dot632plus", "oob_q025", "oob_q975"])?;
        for k in 0..self.times.len() {
            w.write_record(&[
                self.times[k].to_string(),
                self.null[k].to_string(),
                self.apparent[k].to_string(),
                self.dot632plus[k].to_string(),
                self.oob_q025[k].to_string(),
                self.oob_q975[k].to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Null, apparent, out-of-bag and .632+ Brier curves over `grid`.
///
/// The censoring distribution is estimated once on the full data and used
/// for every curve. Replicates whose fit fails are skipped with a warning;
/// at least half must succeed.
pub fn prediction_error_curve(
    ds: &SurvivalDataset,
    fitter: &dyn Fitter,
    plan: &ResamplingPlan,
    grid: &[f64],
) -> Result<PredictionErrorCurves> {
    if plan.n != ds.n() {
        return Err(SurvError::DimensionMismatch {
            expected: ds.n(),
            got: plan.n,
        });
    }
    if grid.is_empty() || grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(SurvError::InvalidParameter("time grid must be non-empty and strictly increasing".into()));
    }
    let outcomes = ds.outcomes();
    let censoring = censoring_km(outcomes)?;
    let null_model = KaplanMeierModel::fit(outcomes)?;
    let full = fitter.fit(ds)?;

    let mut null = Vec::with_capacity(grid.len());
    let mut apparent = Vec::with_capacity(grid.len());
    let mut no_information = Vec::with_capacity(grid.len());
    for &t in grid {
        null.push(brier_score(&null_model.survival_at(ds, t)?, outcomes, t, &censoring)?);
        let pred = full.survival_at(ds, t)?;
        apparent.push(brier_score(&pred, outcomes, t, &censoring)?);
        no_information.push(no_information_error(&pred, outcomes, t, &censoring)?);
    }

    let results: Vec<std::result::Result<Vec<f64>, String>> = plan
        .replicates
        .par_iter()
        .enumerate()
        .map(|(b, rep)| {
            if rep.out_of_sample.is_empty() {
                return Err(format!("replicate {b} skipped: empty out-of-bag set"));
            }
            let train = ds.select_rows(&rep.in_sample);
            let test = ds.select_rows(&rep.out_of_sample);
            let model = fitter.fit(&train).map_err(|e| format!("replicate {b} skipped: {e}"))?;
            grid.iter()
                .map(|&t| {
                    let pred = model.survival_at(&test, t)?;
                    brier_score(&pred, test.outcomes(), t, &censoring)
                })
                .collect::<Result<Vec<f64>>>()
                .map_err(|e| format!("replicate {b} skipped: {e}"))
        })
        .collect();

    let mut oob = Vec::new();
    let mut warnings = plan.warnings.clone();
    for r in results {
        match r {
            Ok(c) => oob.push(c),
            Err(w) => warnings.push(w),
        }
    }
    let total = plan.replicates.len();
    if oob.is_empty() || 2 * oob.len() < total {
        return Err(SurvError::Resampling(format!(
            "only {} of {total} bootstrap replicates succeeded",
            oob.len()
        )));
    }

    let mut oob_mean = Vec::with_capacity(grid.len());
    let mut oob_q025 = Vec::with_capacity(grid.len());
    let mut oob_q975 = Vec::with_capacity(grid.len());
    let mut dot = Vec::with_capacity(grid.len());
    for k in 0..grid.len() {
        let mut col: Vec<f64> = oob.iter().map(|c| c[k]).collect();
        let m = stats::pairwise_sum(&col) / col.len() as f64;
        col.sort_by(f64::total_cmp);
        oob_mean.push(m);
        oob_q025.push(stats::quantile_sorted(&col, 0.025));
        oob_q975.push(stats::quantile_sorted(&col, 0.975));
        dot.push(dot632plus(apparent[k], m, no_information[k]).estimate);
    }

    Ok(PredictionErrorCurves {
        times: grid.to_vec(),
        null,
        apparent,
        no_information,
        oob_mean,
        oob_q025,
        oob_q975,
        dot632plus: dot,
        replicates_used: oob.len(),
        replicates_total: total,
        oob,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cox::fit_cox_newton;
    use crate::dataset::{bootstrap_plan, standardize};
    use crate::synth::CoxGenerator;

    fn cox_fitter(train: &SurvivalDataset) -> Result<Box<dyn SurvivalModel>> {
        let cols: Vec<usize> = (0..train.p()).collect();
        Ok(Box::new(fit_cox_newton(train, &cols)?))
    }

    #[test]
    fn curves_are_bounded_and_deterministic() {
        let ds = standardize(&CoxGenerator::new(120, 3, vec![1.0, -0.5, 0.0]).generate(3));
        let plan = bootstrap_plan(ds.n(), 20, 7).unwrap();
        let grid = [2.0, 4.0, 6.0, 8.0];
        let a = prediction_error_curve(&ds, &cox_fitter, &plan, &grid).unwrap();
        let b = prediction_error_curve(&ds, &cox_fitter, &plan, &grid).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.replicates_used, 20);
        for k in 0..grid.len() {
            let lo = a.apparent[k].min(a.oob_mean[k].min(a.no_information[k]));
            let hi = a.apparent[k].max(a.oob_mean[k].max(a.no_information[k]));
            assert!(a.dot632plus[k] >= lo - 1e-12 && a.dot632plus[k] <= hi + 1e-12);
            assert!(a.oob_q025[k] <= a.oob_q975[k]);
            assert!(a.apparent[k] <= a.null[k]);
        }
        let mut buf = Vec::new();
        a.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("time,null,apparent,dot632plus,oob_q025,oob_q975\n"));
        assert_eq!(text.lines().count(), 5);
    }

    #[test]
    fn failing_fitter_is_reported() {
        let ds = standardize(&CoxGenerator::new(40, 2, vec![1.0, 0.0]).generate(1));
        let plan = bootstrap_plan(ds.n(), 4, 1).unwrap();
        let fail = |_: &SurvivalDataset| -> Result<Box<dyn SurvivalModel>> { Err(SurvError::Diverged("x".into())) };
        assert!(prediction_error_curve(&ds, &fail, &plan, &[1.0]).is_err());
    }
}
