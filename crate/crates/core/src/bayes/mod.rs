//! Bayesian Cox models with a piecewise-constant baseline hazard and
//! Laplace, spike-and-slab or horseshoe priors on the penalized
//! coefficients, sampled by Metropolis-within-Gibbs.

mod predict;
mod sampler;
mod summary;

use serde::{Deserialize, Serialize};

use crate::dataset::{FeatureMeta, SurvivalDataset, SurvivalOutcome};
use crate::error::{Result, SurvError};
use crate::stats;

pub use predict::PosteriorPredictor;
pub use sampler::run_mcmc;
pub use summary::{
    horseshoe_select, median_probability_model, posterior_summary, select_by_ci, CoefficientSummary,
    PosteriorSummary, Selection,
};

/// Shrinkage prior on the penalized coefficients. Mandatory coefficients
/// always get a diffuse Gaussian prior instead.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PriorSpec {
    /// Double-exponential prior with rate `lambda`. When `rate` is `None`,
    /// `lambda²` gets a Gamma(`hyper_shape`, `hyper_rate`) hyperprior.
    Laplace {
        rate: Option<f64>,
        hyper_shape: f64,
        hyper_rate: f64,
    },
    /// Point mass at zero mixed with a Gaussian slab whose variance has an
    /// inverse-gamma(`slab_shape`, `slab_rate`) prior.
    SpikeSlab {
        inclusion: f64,
        slab_shape: f64,
        slab_rate: f64,
    },
    /// Half-Cauchy local scales and a half-Cauchy(0, `global_scale`) global scale.
    Horseshoe { global_scale: f64 },
}

impl PriorSpec {
    pub fn laplace() -> Self {
        PriorSpec::Laplace {
            rate: None,
            hyper_shape: 1.0,
            hyper_rate: 1.0,
        }
    }

    pub fn laplace_fixed(lambda: f64) -> Self {
        PriorSpec::Laplace {
            rate: Some(lambda),
            hyper_shape: 1.0,
            hyper_rate: 1.0,
        }
    }

    pub fn spike_slab() -> Self {
        PriorSpec::SpikeSlab {
            inclusion: 0.2,
            slab_shape: 2.0,
            slab_rate: 2.0,
        }
    }

    pub fn horseshoe() -> Self {
        PriorSpec::Horseshoe { global_scale: 1.0 }
    }

    pub fn name(&self) -> &'static str {
        match self {
            PriorSpec::Laplace { .. } => "laplace",
            PriorSpec::SpikeSlab { .. } => "spike_slab",
            PriorSpec::Horseshoe { .. } => "horseshoe",
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64, what: &str| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(SurvError::InvalidParameter(format!("{what} must be positive, got {v}")))
            }
        };
        match *self {
            PriorSpec::Laplace {
                rate,
                hyper_shape,
                hyper_rate,
            } => {
                if let Some(r) = rate {
                    positive(r, "Laplace rate")?;
                }
                positive(hyper_shape, "Laplace hyperprior shape")?;
                positive(hyper_rate, "Laplace hyperprior rate")
            }
            PriorSpec::SpikeSlab {
                inclusion,
                slab_shape,
                slab_rate,
            } => {
                if !(inclusion > 0.0 && inclusion < 1.0) {
                    return Err(SurvError::InvalidParameter(format!(
                        "inclusion probability must lie in (0, 1), got {inclusion}"
                    )));
                }
                positive(slab_shape, "slab variance shape")?;
                positive(slab_rate, "slab variance rate")
            }
            PriorSpec::Horseshoe { global_scale } => positive(global_scale, "horseshoe global scale"),
        }
    }
}

/// Independent gamma priors on the cumulative-hazard increments of a
/// piecewise-constant baseline hazard.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineHazardPrior {
    /// Right end points of the intervals, strictly increasing; the first
    /// interval starts at 0.
    pub cuts: Vec<f64>,
    pub shapes: Vec<f64>,
    pub rates: Vec<f64>,
}

impl BaselineHazardPrior {
    pub fn new(cuts: Vec<f64>, shapes: Vec<f64>, rates: Vec<f64>) -> Result<Self> {
        let prior = Self { cuts, shapes, rates };
        prior.validate()?;
        Ok(prior)
    }

    /// `n_intervals` intervals cut at quantiles of the event times and
    /// closed by the largest observed time. The increment over an interval
    /// of length `len` has prior Gamma(`c0 * h * len`, `c0`), centred on a
    /// constant hazard `h` (events per unit follow-up).
    pub fn from_data(ds: &SurvivalDataset, n_intervals: usize, c0: f64) -> Result<Self> {
        if n_intervals == 0 {
            return Err(SurvError::InvalidParameter("at least one baseline interval is required".into()));
        }
        if !(c0 > 0.0) {
            return Err(SurvError::InvalidParameter(format!("gamma process precision must be positive, got {c0}")));
        }
        let mut event_times: Vec<f64> = ds.outcomes().iter().filter(|o| o.event).map(|o| o.time).collect();
        if event_times.is_empty() {
            return Err(SurvError::InvalidData("no events; the baseline hazard is not identified".into()));
        }
        event_times.sort_by(f64::total_cmp);
        let t_max = ds.outcomes().iter().map(|o| o.time).fold(0.0, f64::max);
        if !(t_max > 0.0) {
            return Err(SurvError::InvalidData("all observed times are zero".into()));
        }
        let mut cuts: Vec<f64> = (1..n_intervals)
            .map(|k| stats::quantile_sorted(&event_times, k as f64 / n_intervals as f64))
            .filter(|&c| c > 0.0 && c < t_max)
            .collect();
        cuts.push(t_max);
        cuts.dedup();
        let total: f64 = ds.outcomes().iter().map(|o| o.time).sum();
        let h = event_times.len() as f64 / total;
        let mut start = 0.0;
        let mut shapes = Vec::with_capacity(cuts.len());
        for &c in &cuts {
            shapes.push(c0 * h * (c - start));
            start = c;
        }
        let rates = vec![c0; cuts.len()];
        Self::new(cuts, shapes, rates)
    }

    pub fn n_intervals(&self) -> usize {
        self.cuts.len()
    }

    pub fn lengths(&self) -> Vec<f64> {
        let mut start = 0.0;
        self.cuts
            .iter()
            .map(|&c| {
                let len = c - start;
                start = c;
                len
            })
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let j = self.cuts.len();
        if j == 0 || self.shapes.len() != j || self.rates.len() != j {
            return Err(SurvError::InvalidParameter(
                "baseline prior needs matching, non-empty cuts, shapes and rates".into(),
            ));
        }
        if !(self.cuts[0] > 0.0) || self.cuts.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(SurvError::InvalidParameter(
                "baseline cut points must be positive and strictly increasing".into(),
            ));
        }
        if self.shapes.iter().chain(&self.rates).any(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(SurvError::InvalidParameter("gamma shapes and rates must be positive".into()));
        }
        Ok(())
    }

    fn log_density(&self, hazards: &[f64]) -> f64 {
        self.lengths()
            .iter()
            .zip(hazards)
            .zip(self.shapes.iter().zip(&self.rates))
            .map(|((len, h), (a, b))| gamma_log_pdf(h * len, *a, *b))
            .sum()
    }
}

fn gamma_log_pdf(x: f64, shape: f64, rate: f64) -> f64 {
    if x <= 0.0 {
        return f64::NEG_INFINITY;
    }
    shape * rate.ln() - statrs::function::gamma::ln_gamma(shape) + (shape - 1.0) * x.ln() - rate * x
}

/// Per-patient position in the piecewise-constant time partition.
#[derive(Debug, Clone)]
pub(crate) struct Partition {
    pub lengths: Vec<f64>,
    /// Interval containing each patient's observed time; times beyond the
    /// last cut fall into the last interval.
    pub interval: Vec<usize>,
    /// Time spent in that interval.
    pub partial: Vec<f64>,
}

impl Partition {
    pub fn new(cuts: &[f64], outcomes: &[SurvivalOutcome]) -> Self {
        let lengths: Vec<f64> = {
            let mut s = 0.0;
            cuts.iter()
                .map(|&c| {
                    let l = c - s;
                    s = c;
                    l
                })
                .collect()
        };
        let mut starts = Vec::with_capacity(cuts.len());
        starts.push(0.0);
        starts.extend_from_slice(&cuts[..cuts.len() - 1]);
        let last = cuts.len() - 1;
        let mut interval = Vec::with_capacity(outcomes.len());
        let mut partial = Vec::with_capacity(outcomes.len());
        for o in outcomes {
            let k = cuts.partition_point(|&c| c < o.time).min(last);
            interval.push(k);
            partial.push(o.time - starts[k]);
        }
        Self {
            lengths,
            interval,
            partial,
        }
    }

    /// Cumulative baseline hazard at each patient's observed time.
    pub fn cumulative_at_patients(&self, hazards: &[f64]) -> Vec<f64> {
        let at_start = self.cumulative_at_starts(hazards);
        self.interval
            .iter()
            .zip(&self.partial)
            .map(|(&k, &u)| at_start[k] + hazards[k] * u)
            .collect()
    }

    fn cumulative_at_starts(&self, hazards: &[f64]) -> Vec<f64> {
        let mut acc = 0.0;
        self.lengths
            .iter()
            .zip(hazards)
            .map(|(l, h)| {
                let c = acc;
                acc += l * h;
                c
            })
            .collect()
    }

    /// Events and risk-weighted exposure per interval.
    pub fn interval_totals(&self, outcomes: &[SurvivalOutcome], exp_eta: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let j = self.lengths.len();
        let mut events = vec![0.0; j];
        let mut ending = vec![0.0; j];
        let mut exposure = vec![0.0; j];
        for (i, o) in outcomes.iter().enumerate() {
            let k = self.interval[i];
            if o.event {
                events[k] += 1.0;
            }
            ending[k] += exp_eta[i];
            exposure[k] += exp_eta[i] * self.partial[i];
        }
        let mut beyond = 0.0;
        for k in (0..j).rev() {
            exposure[k] += beyond * self.lengths[k];
            beyond += ending[k];
        }
        (events, exposure)
    }
}

/// Full log-likelihood of the piecewise-exponential Cox model:
/// `sum_i [event_i (log h(t_i) + eta_i) - exp(eta_i) H(t_i)]`.
pub fn full_loglik(outcomes: &[SurvivalOutcome], eta: &[f64], cuts: &[f64], hazards: &[f64]) -> f64 {
    let part = Partition::new(cuts, outcomes);
    let cum = part.cumulative_at_patients(hazards);
    outcomes
        .iter()
        .enumerate()
        .map(|(i, o)| {
            let ev = if o.event {
                hazards[part.interval[i]].ln() + eta[i]
            } else {
                0.0
            };
            ev - eta[i].exp() * cum[i]
        })
        .sum()
}

/// Gamma full conditionals `(shape, rate)` of the cumulative-hazard
/// increments given the coefficients.
pub fn baseline_conditionals(
    ds: &SurvivalDataset,
    beta: &[f64],
    prior: &BaselineHazardPrior,
) -> Result<Vec<(f64, f64)>> {
    prior.validate()?;
    if beta.len() != ds.p() {
        return Err(SurvError::DimensionMismatch {
            expected: ds.p(),
            got: beta.len(),
        });
    }
    let eta = crate::cox::linear_predictor(ds.covariates(), beta);
    let e: Vec<f64> = eta.iter().map(|v| v.exp()).collect();
    let part = Partition::new(&prior.cuts, ds.outcomes());
    let (events, exposure) = part.interval_totals(ds.outcomes(), &e);
    Ok((0..prior.n_intervals())
        .map(|k| {
            (
                prior.shapes[k] + events[k],
                prior.rates[k] + exposure[k] / part.lengths[k],
            )
        })
        .collect())
}

/// Log joint density under a fixed-rate Laplace prior:
/// full log-likelihood minus `lambda * ||beta||_1` over the penalized
/// coefficients, plus the Gaussian log prior of mandatory coefficients and
/// the baseline log prior (both free of the penalized coefficients), plus
/// the Laplace normalizing constants.
pub fn laplace_log_posterior(
    ds: &SurvivalDataset,
    beta: &[f64],
    hazards: &[f64],
    prior: &PriorSpec,
    baseline: &BaselineHazardPrior,
    mandatory_sd: f64,
) -> Result<f64> {
    let PriorSpec::Laplace { rate: Some(lambda), .. } = *prior else {
        return Err(SurvError::InvalidParameter(
            "the log joint density is defined for a fixed-rate Laplace prior".into(),
        ));
    };
    baseline.validate()?;
    if beta.len() != ds.p() || hazards.len() != baseline.n_intervals() {
        return Err(SurvError::DimensionMismatch {
            expected: ds.p(),
            got: beta.len(),
        });
    }
    let eta = crate::cox::linear_predictor(ds.covariates(), beta);
    let mut lp = full_loglik(ds.outcomes(), &eta, &baseline.cuts, hazards);
    for (f, &b) in ds.features().iter().zip(beta) {
        if f.mandatory {
            lp += normal_log_pdf(b, mandatory_sd);
        } else {
            lp += (lambda / 2.0).ln() - lambda * b.abs();
        }
    }
    Ok(lp + baseline.log_density(hazards))
}

pub(crate) fn normal_log_pdf(x: f64, sd: f64) -> f64 {
    -0.5 * (x / sd).powi(2) - sd.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McmcOptions {
    pub iterations: usize,
    /// Defaults to half of `iterations`.
    pub burn_in: Option<usize>,
    pub thinning: usize,
    pub seed: u64,
    /// Prior standard deviation of mandatory coefficients.
    pub mandatory_sd: f64,
    /// Acceptance rate the random-walk proposals are tuned towards during burn-in.
    pub target_acceptance: f64,
    /// Iterations between proposal-scale adjustments during burn-in.
    pub adapt_every: usize,
}

impl Default for McmcOptions {
    fn default() -> Self {
        Self {
            iterations: 20_000,
            burn_in: None,
            thinning: 1,
            seed: 1,
            mandatory_sd: 10.0,
            target_acceptance: 0.3,
            adapt_every: 50,
        }
    }
}

impl McmcOptions {
    pub fn burn_in(&self) -> usize {
        self.burn_in.unwrap_or(self.iterations / 2)
    }
}

/// Retained draws of one chain. Row `d` of every per-draw field belongs to
/// the same retained iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSamples {
    pub prior: PriorSpec,
    pub baseline_prior: BaselineHazardPrior,
    pub features: Vec<FeatureMeta>,
    pub iterations: usize,
    pub burn_in: usize,
    pub thinning: usize,
    pub seed: u64,
    /// Coefficients for all features in column order.
    pub beta: Vec<Vec<f64>>,
    /// Inclusion indicators (spike-and-slab only).
    pub inclusion: Option<Vec<Vec<bool>>>,
    /// Local scales: `tau_j` for Laplace, `lambda_j` for horseshoe; 0 for
    /// mandatory features.
    pub local_scales: Option<Vec<Vec<f64>>>,
    /// Laplace rate, horseshoe global scale or slab variance.
    pub global: Vec<f64>,
    /// Piecewise-constant baseline hazard rates.
    pub hazards: Vec<Vec<f64>>,
    /// Post-burn-in acceptance rate of each coefficient's random-walk move.
    pub acceptance: Vec<f64>,
    pub proposal_sd: Vec<f64>,
}

impl PosteriorSamples {
    pub fn n_draws(&self) -> usize {
        self.beta.len()
    }

    pub fn feature_names(&self) -> Vec<String> {
        self.features.iter().map(|f| f.name.clone()).collect()
    }

    /// One row per retained draw: coefficients, inclusion indicators, local
    /// scales, the global parameter and the baseline hazards.
    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let names = self.feature_names();
        let mut header = vec!["draw".to_string()];
        header.extend(names.iter().cloned());
        if self.inclusion.is_some() {
            header.extend(names.iter().map(|n| format!("gamma_{n}")));
        }
        if self.local_scales.is_some() {
            header.extend(names.iter().map(|n| format!("scale_{n}")));
        }
        header.push("global".into());
        header.extend((1..=self.baseline_prior.n_intervals()).map(|k| format!("hazard_{k}")));
        w.write_record(&header)?;
        for d in 0..self.n_draws() {
            let mut row = vec![d.to_string()];
            row.extend(self.beta[d].iter().map(f64::to_string));
            if let Some(g) = &self.inclusion {
                row.extend(g[d].iter().map(|&b| u8::from(b).to_string()));
            }
            if let Some(s) = &self.local_scales {
                row.extend(s[d].iter().map(f64::to_string));
            }
            row.push(self.global[d].to_string());
            row.extend(self.hazards[d].iter().map(f64::to_string));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}
