//! Simulated survival data from a Cox model with exponential baseline hazard.

use nalgebra::DMatrix;
use rand_distr::{Distribution, Exp, StandardNormal};

use crate::dataset::{FeatureMeta, SurvivalDataset, SurvivalOutcome};
use crate::rng::seeded;

#[derive(Debug, Clone, PartialEq)]
pub struct CoxGenerator {
    pub n: usize,
    pub p: usize,
    /// True coefficients of the leading columns; the remaining columns are noise.
    pub beta: Vec<f64>,
    /// Constant baseline hazard.
    pub baseline_rate: f64,
    /// Rate of independent exponential censoring; 0 disables censoring.
    pub censoring_rate: f64,
    /// Administrative censoring time.
    pub max_time: Option<f64>,
    /// Correlation between neighbouring columns (AR(1)).
    pub correlation: f64,
    /// Number of leading columns marked mandatory.
    pub n_mandatory: usize,
}

impl CoxGenerator {
    pub fn new(n: usize, p: usize, beta: Vec<f64>) -> Self {
        Self {
            n,
            p,
            beta,
            baseline_rate: 0.1,
            censoring_rate: 0.05,
            max_time: None,
            correlation: 0.0,
            n_mandatory: 0,
        }
    }

    /// `n` patients, `p` features, the first three with effects `(1, -1, 0.8)`.
    pub fn three_signal(n: usize, p: usize) -> Self {
        Self::new(n, p, vec![1.0, -1.0, 0.8])
    }

    pub fn linear_predictor(&self, x: &[f64]) -> f64 {
        self.beta.iter().zip(x).map(|(b, v)| b * v).sum()
    }

    /// Survival probability under the generating model.
    pub fn true_survival(&self, x: &[f64], t: f64) -> f64 {
        (-self.baseline_rate * t * self.linear_predictor(x).exp()).exp()
    }

    pub fn generate(&self, seed: u64) -> SurvivalDataset {
        let mut rng = seeded(seed);
        let rho = self.correlation;
        let innov = (1.0 - rho * rho).sqrt();
        let mut x = DMatrix::zeros(self.n, self.p);
        let mut outcomes = Vec::with_capacity(self.n);
        let unit = Exp::new(1.0).expect("valid rate");
        for i in 0..self.n {
            let mut prev = 0.0;
            for j in 0..self.p {
                let z: f64 = StandardNormal.sample(&mut rng);
                let v = if j == 0 { z } else { rho * prev + innov * z };
                x[(i, j)] = v;
                prev = v;
            }
            let row: Vec<f64> = x.row(i).iter().copied().collect();
            let rate = self.baseline_rate * self.linear_predictor(&row).exp();
            let t_event: f64 = unit.sample(&mut rng) / rate;
            let mut t_cens = if self.censoring_rate > 0.0 {
                unit.sample(&mut rng) / self.censoring_rate
            } else {
                f64::INFINITY
            };
            if let Some(m) = self.max_time {
                t_cens = t_cens.min(m);
            }
            outcomes.push(if t_event <= t_cens {
                SurvivalOutcome::event(t_event)
            } else {
                SurvivalOutcome::censored(t_cens)
            });
        }
        let features = (0..self.p)
            .map(|j| {
                let name = format!("x{}", j + 1);
                if j < self.n_mandatory {
                    FeatureMeta::mandatory(name)
                } else {
                    FeatureMeta::new(name)
                }
            })
            .collect();
        SurvivalDataset::new(outcomes, x, features).expect("generator produces valid data")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_shaped() {
        let g = CoxGenerator::three_signal(50, 10);
        let a = g.generate(3);
        let b = g.generate(3);
        assert_eq!(a.covariates(), b.covariates());
        assert_eq!(a.outcomes(), b.outcomes());
        assert_eq!((a.n(), a.p()), (50, 10));
        assert!(a.n_events() > 0 && a.n_events() < 50);
    }
}
