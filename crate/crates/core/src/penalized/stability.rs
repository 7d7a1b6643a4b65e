use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::path::{lambda_path, PathOptions};
use crate::cox::CoxFit;
use crate::dataset::{subsample_plan, SurvivalDataset};
use crate::error::{Result, SurvError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityOptions {
    /// Number of half-size subsamples.
    pub replicates: usize,
    /// Features selected per subsample.
    pub q: usize,
    /// Selection-frequency threshold for the stable set, in (0.5, 1].
    pub threshold: f64,
    pub seed: u64,
    pub path: PathOptions,
}

impl Default for StabilityOptions {
    fn default() -> Self {
        Self {
            replicates: 100,
            q: 10,
            threshold: 0.8,
            seed: 1,
            path: PathOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub features: Vec<String>,
    /// Fraction of resamples selecting each feature, aligned with `features`.
    pub frequencies: Vec<f64>,
    pub threshold: f64,
    /// Features with frequency at least `threshold`.
    pub stable: Vec<String>,
    pub replicates: usize,
    /// Per-resample selected feature indices (into `features`).
    pub selections: Vec<Vec<usize>>,
    pub warnings: Vec<String>,
}

impl StabilityReport {
    fn from_selections(features: Vec<String>, selections: Vec<Vec<usize>>, threshold: f64, warnings: Vec<String>) -> Self {
        let b = selections.len();
        let mut counts = vec![0usize; features.len()];
        for sel in &selections {
            for &j in sel {
                counts[j] += 1;
            }
        }
        let frequencies: Vec<f64> = counts.iter().map(|&c| c as f64 / b.max(1) as f64).collect();
        let stable = features
            .iter()
            .zip(&frequencies)
            .filter(|(_, &f)| b > 0 && f >= threshold)
            .map(|(name, _)| name.clone())
            .collect();
        Self {
            features,
            frequencies,
            threshold,
            stable,
            replicates: b,
            selections,
            warnings,
        }
    }

    pub fn frequency(&self, name: &str) -> Option<f64> {
        self.features.iter().position(|f| f == name).map(|j| self.frequencies[j])
    }
}

/// Penalized features selected on one path: the first lambda with at least
/// `q` non-zero penalized coefficients, trimmed to the `q` largest in
/// magnitude. If the path never reaches `q`, its last fit is used.
fn select_q(path_fits: &[CoxFit], q: usize) -> Vec<usize> {
    let pick = path_fits
        .iter()
        .find(|f| f.n_nonzero_penalized() >= q)
        .or(path_fits.last());
    let Some(fit) = pick else { return Vec::new() };
    let mut nz: Vec<(usize, f64)> = fit
        .features
        .iter()
        .zip(&fit.coefficients)
        .enumerate()
        .filter(|(_, (f, &b))| !f.mandatory && b != 0.0)
        .map(|(j, (_, &b))| (j, b.abs()))
        .collect();
    nz.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    nz.truncate(q);
    let mut sel: Vec<usize> = nz.into_iter().map(|(j, _)| j).collect();
    sel.sort_unstable();
    sel
}

/// Subsampling-based stability selection over the penalized features.
pub fn stability_selection(ds: &SurvivalDataset, alpha: f64, opts: &StabilityOptions) -> Result<StabilityReport> {
    let p_pen = ds.penalized_indices().len();
    if opts.q == 0 || opts.q >= p_pen {
        return Err(SurvError::InvalidParameter(format!(
            "per-resample selection size q = {} must lie in 1..{p_pen}",
            opts.q
        )));
    }
    if !(opts.threshold > 0.5 && opts.threshold <= 1.0) {
        return Err(SurvError::InvalidParameter(format!(
            "stability threshold must lie in (0.5, 1], got {}",
            opts.threshold
        )));
    }
    let plan = subsample_plan(ds.n(), ds.n() / 2, opts.replicates, opts.seed)?;
    let results: Vec<std::result::Result<Vec<usize>, String>> = plan
        .replicates
        .par_iter()
        .enumerate()
        .map(|(b, rep)| {
            let sub = ds.select_rows(&rep.in_sample);
            if sub.n_events() == 0 {
                return Err(format!("subsample {b} skipped: no events"));
            }
            lambda_path(&sub, alpha, None, &opts.path)
                .map(|path| select_q(&path.fits, opts.q))
                .map_err(|e| format!("subsample {b} skipped: {e}"))
        })
        .collect();
    let mut selections = Vec::new();
    let mut warnings = Vec::new();
    for r in results {
        match r {
            Ok(s) => selections.push(s),
            Err(w) => warnings.push(w),
        }
    }
    if selections.is_empty() {
        return Err(SurvError::Resampling("every stability subsample was skipped".into()));
    }
    Ok(StabilityReport::from_selections(
        ds.feature_names(),
        selections,
        opts.threshold,
        warnings,
    ))
}

/// Overlap of the penalized features selected by several fits of the same
/// feature set. The stable set is the intersection of all selections.
pub fn selection_overlap(fits: &[CoxFit]) -> Result<StabilityReport> {
    if fits.len() < 2 {
        return Err(SurvError::InvalidParameter("overlap needs at least two fits".into()));
    }
    let names: Vec<String> = fits[0].features.iter().map(|f| f.name.clone()).collect();
    for f in &fits[1..] {
        if f.features.len() != names.len() || f.features.iter().zip(&names).any(|(a, b)| &a.name != b) {
            return Err(SurvError::InvalidData("fits use different feature sets".into()));
        }
    }
    let selections: Vec<Vec<usize>> = fits
        .iter()
        .map(|f| {
            f.features
                .iter()
                .zip(&f.coefficients)
                .enumerate()
                .filter(|(_, (m, &b))| !m.mandatory && b != 0.0)
                .map(|(j, _)| j)
                .collect()
        })
        .collect();
    Ok(StabilityReport::from_selections(names, selections, 1.0, Vec::new()))
}

/// Intersection of the selected sets, as feature indices.
pub fn intersection(report: &StabilityReport) -> BTreeSet<usize> {
    let mut it = report.selections.iter();
    let Some(first) = it.next() else { return BTreeSet::new() };
    let mut acc: BTreeSet<usize> = first.iter().copied().collect();
    for s in it {
        let other: BTreeSet<usize> = s.iter().copied().collect();
        acc = acc.intersection(&other).copied().collect();
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cox::PenaltyInfo;
    use crate::dataset::{standardize, FeatureMeta};
    use crate::synth::CoxGenerator;

    fn fit_with(coefs: Vec<f64>) -> CoxFit {
        let features = (0..coefs.len()).map(|j| FeatureMeta::new(format!("x{}", j + 1))).collect();
        CoxFit {
            features,
            coefficients: coefs,
            std_errors: None,
            baseline: crate::cox::BaselineHazard::from_increments(&[]),
            loglik: 0.0,
            converged: true,
            iterations: 0,
            penalty: Some(PenaltyInfo { lambda: 0.1, alpha: 1.0 }),
        }
    }

    #[test]
    fn identical_fits_overlap_fully() {
        let f = fit_with(vec![0.5, 0.0, -0.2]);
        let r = selection_overlap(&[f.clone(), f.clone(), f]).unwrap();
        assert_eq!(r.frequencies, vec![1.0, 0.0, 1.0]);
        assert_eq!(r.stable, vec!["x1".to_string(), "x3".to_string()]);
    }

    #[test]
    fn disjoint_fits_have_empty_intersection() {
        let r = selection_overlap(&[fit_with(vec![1.0, 0.0]), fit_with(vec![0.0, 1.0])]).unwrap();
        assert_eq!(r.frequencies, vec![0.5, 0.5]);
        assert!(r.stable.is_empty());
        assert!(intersection(&r).is_empty());
        assert!(selection_overlap(&[fit_with(vec![1.0])]).is_err());
    }

    #[test]
    fn stability_rejects_large_q() {
        let ds = standardize(&CoxGenerator::three_signal(40, 5).generate(1));
        let opts = StabilityOptions {
            q: 5,
            ..StabilityOptions::default()
        };
        assert!(stability_selection(&ds, 1.0, &opts).is_err());
    }

    #[test]
    fn stability_selection_deterministic_and_bounded() {
        let ds = standardize(&CoxGenerator::three_signal(100, 12).generate(3));
        let opts = StabilityOptions {
            replicates: 12,
            q: 4,
            threshold: 1.0,
            seed: 5,
            path: PathOptions {
                n_lambda: 30,
                ..PathOptions::default()
            },
        };
        let a = stability_selection(&ds, 1.0, &opts).unwrap();
        let b = stability_selection(&ds, 1.0, &opts).unwrap();
        assert_eq!(a, b);
        assert!(a.frequencies.iter().all(|&f| (0.0..=1.0).contains(&f)));
        assert!(a.selections.iter().all(|s| s.len() <= 4));
        let inter = intersection(&a);
        for name in &a.stable {
            let j = a.features.iter().position(|f| f == name).unwrap();
            assert!(inter.contains(&j));
        }
    }
}
