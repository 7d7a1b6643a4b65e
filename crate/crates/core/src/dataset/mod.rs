//! Survival datasets: outcomes, covariates and per-feature metadata.
//!
//! Missing covariate cells are stored as `NaN`. Every preprocessing step
//! returns a new dataset; a [`SurvivalDataset`] is never mutated in place
//! by the library.

mod load;
mod preprocess;
mod preselect;
mod resample;

use std::collections::HashSet;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SurvError};

pub use load::{load_dataset, read_dataset, read_metadata, write_dataset};
pub use preprocess::{filter_missingness, impute_knn, standardize};
pub use preselect::{univariate_cox_screen, variance_preselect, ScreenEntry, ScreenReport};
pub use resample::{bootstrap_plan, make_cv_folds, subsample_plan, Replicate, ResamplingKind, ResamplingPlan};

/// Default block label for features without metadata.
pub const DEFAULT_BLOCK: &str = "omics";

/// Observed time and event indicator of one patient.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurvivalOutcome {
    pub time: f64,
    /// `true` when the event was observed, `false` when right-censored.
    pub event: bool,
}

impl SurvivalOutcome {
    pub fn new(time: f64, event: bool) -> Result<Self> {
        if !time.is_finite() || time < 0.0 {
            return Err(SurvError::InvalidData(format!(
                "survival time must be finite and non-negative, got {time}"
            )));
        }
        Ok(Self { time, event })
    }

    pub fn event(time: f64) -> Self {
        Self { time, event: true }
    }

    pub fn censored(time: f64) -> Self {
        Self { time, event: false }
    }
}

/// Location and scale applied by [`standardize`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scale {
    pub mean: f64,
    pub sd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMeta {
    pub name: String,
    pub block: String,
    /// Mandatory features enter every model unpenalized and survive all preselection.
    pub mandatory: bool,
    pub scale: Option<Scale>,
    /// Set by [`standardize`] for zero-variance columns.
    #[serde(default)]
    pub constant: bool,
}

impl FeatureMeta {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            block: DEFAULT_BLOCK.to_string(),
            mandatory: false,
            scale: None,
            constant: false,
        }
    }

    pub fn mandatory(name: impl Into<String>) -> Self {
        Self {
            mandatory: true,
            block: "clinical".to_string(),
            ..Self::new(name)
        }
    }
}

#[derive(Debug, Clone)]
pub struct SurvivalDataset {
    outcomes: Vec<SurvivalOutcome>,
    covariates: DMatrix<f64>,
    features: Vec<FeatureMeta>,
}

impl SurvivalDataset {
    pub fn new(
        outcomes: Vec<SurvivalOutcome>,
        covariates: DMatrix<f64>,
        features: Vec<FeatureMeta>,
    ) -> Result<Self> {
        if covariates.nrows() != outcomes.len() {
            return Err(SurvError::DimensionMismatch {
                expected: outcomes.len(),
                got: covariates.nrows(),
            });
        }
        if covariates.ncols() != features.len() {
            return Err(SurvError::DimensionMismatch {
                expected: features.len(),
                got: covariates.ncols(),
            });
        }
        for o in &outcomes {
            SurvivalOutcome::new(o.time, o.event)?;
        }
        let mut seen = HashSet::new();
        for f in &features {
            if !seen.insert(f.name.as_str()) {
                return Err(SurvError::DuplicateFeature(f.name.clone()));
            }
        }
        if covariates.iter().any(|v| v.is_infinite()) {
            return Err(SurvError::InvalidData("infinite covariate value".into()));
        }
        Ok(Self {
            outcomes,
            covariates,
            features,
        })
    }

    /// Build a dataset from row-major covariates with default metadata
    /// (`x1`, `x2`, ...).
    pub fn from_rows(outcomes: Vec<SurvivalOutcome>, rows: &[Vec<f64>]) -> Result<Self> {
        let n = outcomes.len();
        let p = rows.first().map_or(0, Vec::len);
        if rows.len() != n {
            return Err(SurvError::DimensionMismatch {
                expected: n,
                got: rows.len(),
            });
        }
        if let Some(bad) = rows.iter().find(|r| r.len() != p) {
            return Err(SurvError::DimensionMismatch {
                expected: p,
                got: bad.len(),
            });
        }
        let x = DMatrix::from_fn(n, p, |i, j| rows[i][j]);
        let features = (0..p).map(|j| FeatureMeta::new(format!("x{}", j + 1))).collect();
        Self::new(outcomes, x, features)
    }

    pub fn n(&self) -> usize {
        self.outcomes.len()
    }

    pub fn p(&self) -> usize {
        self.features.len()
    }

    pub fn outcomes(&self) -> &[SurvivalOutcome] {
        &self.outcomes
    }

    pub fn covariates(&self) -> &DMatrix<f64> {
        &self.covariates
    }

    pub fn features(&self) -> &[FeatureMeta] {
        &self.features
    }

    pub fn feature_names(&self) -> Vec<String> {
        self.features.iter().map(|f| f.name.clone()).collect()
    }

    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.features.iter().position(|f| f.name == name)
    }

    pub fn times(&self) -> Vec<f64> {
        self.outcomes.iter().map(|o| o.time).collect()
    }

    pub fn n_events(&self) -> usize {
        self.outcomes.iter().filter(|o| o.event).count()
    }

    pub fn mandatory_indices(&self) -> Vec<usize> {
        (0..self.p()).filter(|&j| self.features[j].mandatory).collect()
    }

    pub fn penalized_indices(&self) -> Vec<usize> {
        (0..self.p()).filter(|&j| !self.features[j].mandatory).collect()
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.covariates.row(i).iter().copied().collect()
    }

    pub fn n_missing(&self) -> usize {
        self.covariates.iter().filter(|v| v.is_nan()).count()
    }

    pub fn has_missing(&self) -> bool {
        self.covariates.iter().any(|v| v.is_nan())
    }

    /// True when every feature carries standardization metadata.
    pub fn is_standardized(&self) -> bool {
        self.features.iter().all(|f| f.scale.is_some())
    }

    /// Rows in the given order; indices may repeat (bootstrap samples).
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        let outcomes = rows.iter().map(|&i| self.outcomes[i]).collect();
        let covariates = self.covariates.select_rows(rows.iter());
        Self {
            outcomes,
            covariates,
            features: self.features.clone(),
        }
    }

    pub fn select_features(&self, cols: &[usize]) -> Self {
        let covariates = self.covariates.select_columns(cols.iter());
        let features = cols.iter().map(|&j| self.features[j].clone()).collect();
        Self {
            outcomes: self.outcomes.clone(),
            covariates,
            features,
        }
    }

    pub fn with_features(&self, features: Vec<FeatureMeta>) -> Result<Self> {
        Self::new(self.outcomes.clone(), self.covariates.clone(), features)
    }

    /// Apply recorded scales (e.g. from a training set) to this dataset's
    /// raw covariates, matching features by name.
    pub fn apply_scales(&self, reference: &[FeatureMeta]) -> Result<Self> {
        if self.is_standardized() {
            return Err(SurvError::InvalidData("dataset is already standardized".into()));
        }
        let mut x = self.covariates.clone();
        let mut features = self.features.clone();
        for (j, f) in features.iter_mut().enumerate() {
            let r = reference
                .iter()
                .find(|r| r.name == f.name)
                .ok_or_else(|| SurvError::InvalidData(format!("no reference scale for `{}`", f.name)))?;
            let Some(scale) = r.scale else {
                return Err(SurvError::InvalidData(format!("reference feature `{}` has no scale", f.name)));
            };
            for v in x.column_mut(j).iter_mut() {
                *v = if r.constant { 0.0 } else { (*v - scale.mean) / scale.sd };
            }
            f.scale = Some(scale);
            f.constant = r.constant;
        }
        Self::new(self.outcomes.clone(), x, features)
    }
}
