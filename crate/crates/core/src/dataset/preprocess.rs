use nalgebra::DMatrix;

use super::{FeatureMeta, Scale, SurvivalDataset};
use crate::error::{Result, SurvError};

fn missing_fraction(ds: &SurvivalDataset, j: usize) -> f64 {
    if ds.n() == 0 {
        return 0.0;
    }
    let miss = ds.covariates().column(j).iter().filter(|v| v.is_nan()).count();
    miss as f64 / ds.n() as f64
}

/// Drop non-mandatory features whose missing fraction exceeds `max_frac`.
pub fn filter_missingness(ds: &SurvivalDataset, max_frac: f64) -> Result<SurvivalDataset> {
    if !(0.0..=1.0).contains(&max_frac) {
        return Err(SurvError::InvalidParameter(format!(
            "missingness threshold must lie in [0, 1], got {max_frac}"
        )));
    }
    let mut keep = Vec::with_capacity(ds.p());
    for (j, f) in ds.features().iter().enumerate() {
        let frac = missing_fraction(ds, j);
        if frac <= max_frac {
            keep.push(j);
        } else if f.mandatory {
            return Err(SurvError::MandatoryMissing {
                name: f.name.clone(),
                fraction: frac,
                threshold: max_frac,
            });
        }
    }
    Ok(ds.select_features(&keep))
}

fn observed_sd(col: &[f64]) -> f64 {
    let obs: Vec<f64> = col.iter().copied().filter(|v| !v.is_nan()).collect();
    if obs.len() < 2 {
        return 1.0;
    }
    let m = obs.iter().sum::<f64>() / obs.len() as f64;
    let var = obs.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (obs.len() - 1) as f64;
    if var > 0.0 {
        var.sqrt()
    } else {
        1.0
    }
}

/// k-nearest-neighbour imputation.
///
/// Distances use the coordinates observed in both rows, each divided by the
/// feature's observed standard deviation, and are rescaled by `p / m` for
/// `m` shared coordinates so rows with different overlap stay comparable.
/// Donors for a cell are the `k` closest rows that observe that feature
/// (ties broken by row order); the cell receives their mean.
pub fn impute_knn(ds: &SurvivalDataset, k: usize) -> Result<SurvivalDataset> {
    let (n, p) = (ds.n(), ds.p());
    if k == 0 || k >= n {
        return Err(SurvError::InvalidParameter(format!(
            "k must satisfy 1 <= k < n = {n}, got {k}"
        )));
    }
    if !ds.has_missing() {
        return Ok(ds.clone());
    }
    let x = ds.covariates();
    let sds: Vec<f64> = (0..p)
        .map(|j| observed_sd(x.column(j).as_slice()))
        .collect();
    for (j, f) in ds.features().iter().enumerate() {
        let observed = x.column(j).iter().filter(|v| !v.is_nan()).count();
        if observed == 0 {
            return Err(SurvError::AllMissing(f.name.clone()));
        }
        if observed < n && observed < k {
            return Err(SurvError::InvalidParameter(format!(
                "feature `{}` has {observed} observed rows, fewer than k = {k}",
                f.name
            )));
        }
    }

    let distance = |a: usize, b: usize| -> f64 {
        let mut sum = 0.0;
        let mut shared = 0usize;
        for j in 0..p {
            let (u, v) = (x[(a, j)], x[(b, j)]);
            if !u.is_nan() && !v.is_nan() {
                sum += ((u - v) / sds[j]).powi(2);
                shared += 1;
            }
        }
        if shared == 0 {
            f64::INFINITY
        } else {
            (sum * p as f64 / shared as f64).sqrt()
        }
    };

    let mut out: DMatrix<f64> = x.clone();
    for i in 0..n {
        let missing: Vec<usize> = (0..p).filter(|&j| x[(i, j)].is_nan()).collect();
        if missing.is_empty() {
            continue;
        }
        let mut by_dist: Vec<(f64, usize)> = (0..n)
            .filter(|&r| r != i)
            .map(|r| (distance(i, r), r))
            .collect();
        by_dist.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        for j in missing {
            let donors: Vec<f64> = by_dist
                .iter()
                .map(|&(_, r)| x[(r, j)])
                .filter(|v| !v.is_nan())
                .take(k)
                .collect();
            out[(i, j)] = donors.iter().sum::<f64>() / donors.len() as f64;
        }
    }
    SurvivalDataset::new(ds.outcomes().to_vec(), out, ds.features().to_vec())
}

/// Centre and scale every column to mean 0 and sample sd 1.
///
/// Constant columns are set to 0 and flagged. Scales compose, so the
/// recorded [`Scale`] always maps back to the columns as first loaded.
pub fn standardize(ds: &SurvivalDataset) -> SurvivalDataset {
    let mut x = ds.covariates().clone();
    let mut features: Vec<FeatureMeta> = ds.features().to_vec();
    let n = ds.n();
    for (j, f) in features.iter_mut().enumerate() {
        let mut col = x.column_mut(j);
        let obs: Vec<f64> = col.iter().copied().filter(|v| !v.is_nan()).collect();
        let mean = if obs.is_empty() {
            0.0
        } else {
            obs.iter().sum::<f64>() / obs.len() as f64
        };
        let var = if obs.len() < 2 {
            0.0
        } else {
            obs.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (obs.len() - 1) as f64
        };
        let sd = var.sqrt();
        let constant = n < 2 || sd <= 1e-12 * mean.abs().max(1.0);
        for v in col.iter_mut() {
            if !v.is_nan() {
                *v = if constant { 0.0 } else { (*v - mean) / sd };
            }
        }
        let step = Scale {
            mean,
            sd: if constant { 1.0 } else { sd },
        };
        f.scale = Some(match f.scale {
            Some(prev) => Scale {
                mean: prev.mean + prev.sd * step.mean,
                sd: prev.sd * step.sd,
            },
            None => step,
        });
        f.constant = f.constant || constant;
    }
    SurvivalDataset {
        outcomes: ds.outcomes().to_vec(),
        covariates: x,
        features,
    }
}
