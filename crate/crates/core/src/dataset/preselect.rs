use serde::{Deserialize, Serialize};

use super::SurvivalDataset;
use crate::cox::fit_cox_newton;
use crate::error::{Result, SurvError};

fn sample_variance(col: impl Iterator<Item = f64> + Clone) -> f64 {
    let n = col.clone().count();
    if n < 2 {
        return 0.0;
    }
    let mean = col.clone().sum::<f64>() / n as f64;
    col.map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64
}

/// Keep the highest-variance non-mandatory features that together carry at
/// least `cum_frac` of their total variance. Variances are taken on the
/// scale of the input, so call this before [`super::standardize`].
///
/// Features are ranked by decreasing variance with ties in column order.
/// `cum_frac = 1` keeps every feature, including zero-variance ones.
pub fn variance_preselect(ds: &SurvivalDataset, cum_frac: f64) -> Result<SurvivalDataset> {
    if !(cum_frac > 0.0 && cum_frac <= 1.0) {
        return Err(SurvError::InvalidParameter(format!(
            "cumulative variance fraction must lie in (0, 1], got {cum_frac}"
        )));
    }
    if ds.has_missing() {
        return Err(SurvError::InvalidData("variance preselection requires complete data".into()));
    }
    if cum_frac >= 1.0 {
        return Ok(ds.clone());
    }
    let x = ds.covariates();
    let mut ranked: Vec<(usize, f64)> = ds
        .penalized_indices()
        .into_iter()
        .map(|j| (j, sample_variance(x.column(j).iter().copied())))
        .collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let total: f64 = ranked.iter().map(|r| r.1).sum();
    let target = cum_frac * total * (1.0 - 1e-12);
    let mut keep = ds.mandatory_indices();
    let mut acc = 0.0;
    for &(j, v) in &ranked {
        if acc >= target {
            break;
        }
        acc += v;
        keep.push(j);
    }
    keep.sort_unstable();
    Ok(ds.select_features(&keep))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScreenEntry {
    pub name: String,
    pub beta: f64,
    pub std_error: f64,
    pub p_value: f64,
    pub kept: bool,
    /// The univariate fit failed or did not converge; such features are kept.
    pub flagged: bool,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScreenReport {
    pub alpha: f64,
    pub entries: Vec<ScreenEntry>,
}

/// Univariate Cox screening: keep non-mandatory features whose Wald p-value
/// is at most `alpha`. Mandatory features are always kept and not tested.
pub fn univariate_cox_screen(ds: &SurvivalDataset, alpha: f64) -> Result<(SurvivalDataset, ScreenReport)> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(SurvError::InvalidParameter(format!(
            "significance level must lie in (0, 1], got {alpha}"
        )));
    }
    let mut keep = ds.mandatory_indices();
    let mut entries = Vec::new();
    for j in ds.penalized_indices() {
        let name = ds.features()[j].name.clone();
        let entry = match fit_cox_newton(ds, &[j]) {
            Ok(fit) if fit.converged => {
                let beta = fit.coefficients[0];
                let se = fit.std_errors.as_ref().map_or(f64::NAN, |s| s[0]);
                let p = fit.wald_p_values().map_or(f64::NAN, |p| p[0]);
                if p.is_nan() {
                    ScreenEntry {
                        name,
                        beta,
                        std_error: se,
                        p_value: p,
                        kept: true,
                        flagged: true,
                        note: Some("undefined standard error".into()),
                    }
                } else {
                    ScreenEntry {
                        name,
                        beta,
                        std_error: se,
                        p_value: p,
                        kept: alpha >= 1.0 || p <= alpha,
                        flagged: false,
                        note: None,
                    }
                }
            }
            Ok(fit) => ScreenEntry {
                name,
                beta: fit.coefficients[0],
                std_error: f64::NAN,
                p_value: f64::NAN,
                kept: true,
                flagged: true,
                note: Some(format!("not converged after {} iterations", fit.iterations)),
            },
            Err(e) => ScreenEntry {
                name,
                beta: f64::NAN,
                std_error: f64::NAN,
                p_value: f64::NAN,
                kept: true,
                flagged: true,
                note: Some(e.to_string()),
            },
        };
        if entry.kept {
            keep.push(j);
        }
        entries.push(entry);
    }
    keep.sort_unstable();
    Ok((ds.select_features(&keep), ScreenReport { alpha, entries }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{FeatureMeta, SurvivalOutcome};

    fn ds_with_variances() -> SurvivalDataset {
        // columns scaled so sample variances are 4, 3, 2, 1 (base column has variance 1)
        let base = [-1.0, 0.0, 1.0];
        let scales = [1.0f64, 2.0, 3f64.sqrt(), 2f64.sqrt()];
        let rows: Vec<Vec<f64>> = base.iter().map(|&b| scales.iter().map(|s| b * s).collect()).collect();
        let o = (0..3).map(|i| SurvivalOutcome::event(i as f64 + 1.0)).collect();
        SurvivalDataset::from_rows(o, &rows).unwrap()
    }

    #[test]
    fn keeps_smallest_set_reaching_fraction() {
        let ds = ds_with_variances();
        let out = variance_preselect(&ds, 0.5).unwrap();
        // variances by column: x1=1, x2=4, x3=3, x4=2 -> keep x2, x3
        assert_eq!(out.feature_names(), vec!["x2", "x3"]);
        assert_eq!(variance_preselect(&ds, 1.0).unwrap().p(), 4);
        assert!(variance_preselect(&ds, 0.0).is_err());
    }

    #[test]
    fn mandatory_only_is_identity() {
        let ds = ds_with_variances();
        let meta: Vec<FeatureMeta> = ds
            .features()
            .iter()
            .map(|f| FeatureMeta::mandatory(f.name.clone()))
            .collect();
        let ds = ds.with_features(meta).unwrap();
        assert_eq!(variance_preselect(&ds, 0.3).unwrap().p(), 4);
        let (screened, report) = univariate_cox_screen(&ds, 0.01).unwrap();
        assert_eq!(screened.p(), 4);
        assert!(report.entries.is_empty());
    }

    #[test]
    fn ties_broken_by_column_order() {
        let rows = vec![vec![1.0, 1.0, 0.0], vec![-1.0, -1.0, 0.0]];
        let o = vec![SurvivalOutcome::event(1.0), SurvivalOutcome::event(2.0)];
        let ds = SurvivalDataset::from_rows(o, &rows).unwrap();
        assert_eq!(variance_preselect(&ds, 0.5).unwrap().feature_names(), vec!["x1"]);
    }
}
