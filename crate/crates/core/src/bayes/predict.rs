use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::PosteriorSamples;
use crate::cox::{design_matrix, linear_predictor};
use crate::dataset::{FeatureMeta, SurvivalDataset};
use crate::error::{Result, SurvError};

/// Posterior predictive survival from a thinned subset of retained draws.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorPredictor {
    pub features: Vec<FeatureMeta>,
    pub cuts: Vec<f64>,
    pub mean_beta: Vec<f64>,
    pub beta: Vec<Vec<f64>>,
    pub hazards: Vec<Vec<f64>>,
}

impl PosteriorPredictor {
    /// Uses at most `max_draws` evenly spaced draws for survival prediction;
    /// the posterior mean coefficients use every draw.
    pub fn from_samples(samples: &PosteriorSamples, max_draws: usize) -> Result<Self> {
        let n = samples.n_draws();
        if n == 0 || max_draws == 0 {
            return Err(SurvError::InvalidData("posterior has no retained draws".into()));
        }
        let p = samples.features.len();
        let mut mean_beta = vec![0.0; p];
        for b in &samples.beta {
            for (m, v) in mean_beta.iter_mut().zip(b) {
                *m += v / n as f64;
            }
        }
        let step = n.div_ceil(max_draws);
        let picks: Vec<usize> = (0..n).step_by(step).collect();
        Ok(Self {
            features: samples.features.clone(),
            cuts: samples.baseline_prior.cuts.clone(),
            mean_beta,
            beta: picks.iter().map(|&d| samples.beta[d].clone()).collect(),
            hazards: picks.iter().map(|&d| samples.hazards[d].clone()).collect(),
        })
    }

    pub fn design_for(&self, ds: &SurvivalDataset) -> Result<DMatrix<f64>> {
        design_matrix(&self.features, ds)
    }

    /// Linear predictors at the posterior mean coefficients.
    pub fn linear_predictors(&self, ds: &SurvivalDataset) -> Result<Vec<f64>> {
        Ok(linear_predictor(&self.design_for(ds)?, &self.mean_beta))
    }

    /// Cumulative baseline hazard of one draw; constant hazard of the last
    /// interval beyond the last cut.
    fn cumulative(&self, hazards: &[f64], t: f64) -> f64 {
        let mut acc = 0.0;
        let mut start = 0.0;
        for (k, (&c, &h)) in self.cuts.iter().zip(hazards).enumerate() {
            let end = if k + 1 == self.cuts.len() { f64::INFINITY } else { c };
            if t <= start {
                break;
            }
            acc += h * (t.min(end) - start);
            start = c;
        }
        acc
    }

    /// Posterior mean of `S(t | x)` for every row of `ds`.
    pub fn survival_at(&self, ds: &SurvivalDataset, t: f64) -> Result<Vec<f64>> {
        let x = self.design_for(ds)?;
        let mut out = vec![0.0; ds.n()];
        let k = self.beta.len() as f64;
        for (b, hz) in self.beta.iter().zip(&self.hazards) {
            let h0 = self.cumulative(hz, t);
            for (o, eta) in out.iter_mut().zip(linear_predictor(&x, b)) {
                *o += (-h0 * eta.exp()).exp();
            }
        }
        Ok(out.into_iter().map(|v| v / k).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bayes::{run_mcmc, BaselineHazardPrior, McmcOptions, PriorSpec};
    use crate::dataset::standardize;
    use crate::synth::CoxGenerator;

    #[test]
    fn survival_is_decreasing_in_time_and_risk() {
        let ds = standardize(&CoxGenerator::new(120, 2, vec![1.0, 0.0]).generate(4));
        let bp = BaselineHazardPrior::from_data(&ds, 8, 2.0).unwrap();
        let opts = McmcOptions {
            iterations: 1000,
            ..McmcOptions::default()
        };
        let s = run_mcmc(&ds, &PriorSpec::laplace(), &bp, &opts).unwrap();
        let pred = PosteriorPredictor::from_samples(&s, 100).unwrap();
        assert_eq!(pred.beta.len(), 100);
        let s1 = pred.survival_at(&ds, 2.0).unwrap();
        let s2 = pred.survival_at(&ds, 8.0).unwrap();
        assert!(s1.iter().zip(&s2).all(|(a, b)| a >= b));
        let eta = pred.linear_predictors(&ds).unwrap();
        let hi = (0..ds.n()).max_by(|&a, &b| eta[a].total_cmp(&eta[b])).unwrap();
        let lo = (0..ds.n()).min_by(|&a, &b| eta[a].total_cmp(&eta[b])).unwrap();
        assert!(s2[hi] < s2[lo]);
        assert!(pred.survival_at(&ds, 0.0).unwrap().iter().all(|&v| v == 1.0));
    }
}
