//! Survival analysis for right-censored data with high-dimensional covariates.
//!
//! Modules follow the usual workflow: [`dataset`] loading, preprocessing
//! and preselection; [`nonparametric`] Kaplan–Meier and log-rank; [`cox`]
//! partial likelihood and Newton fits; [`penalized`] elastic-net Cox with
//! unpenalized mandatory covariates; [`bayes`] MCMC under sparsity priors;
//! and [`metrics`] for discrimination, calibration and prediction error.

pub mod bayes;
pub mod cox;
pub mod dataset;
pub mod error;
pub mod metrics;
pub mod nonparametric;
pub mod penalized;
pub mod rng;
pub mod stats;
pub mod synth;

pub use dataset::{FeatureMeta, SurvivalDataset, SurvivalOutcome};
pub use error::{Result, SurvError};
