use rand::Rng;
use rand_distr::{Distribution, Gamma, InverseGaussian, StandardNormal};

use super::{normal_log_pdf, BaselineHazardPrior, McmcOptions, Partition, PosteriorSamples, PriorSpec};
use crate::dataset::SurvivalDataset;
use crate::error::{Result, SurvError};
use crate::rng::{seeded, SurvRng};

/// Prior-specific latent state.
enum Latent {
    Laplace {
        /// Prior variances `tau_j²` of the penalized coefficients.
        tau2: Vec<f64>,
        lambda2: f64,
        fixed: bool,
        hyper_shape: f64,
        hyper_rate: f64,
    },
    SpikeSlab {
        included: Vec<bool>,
        slab_var: f64,
        inclusion: f64,
        slab_shape: f64,
        slab_rate: f64,
    },
    Horseshoe {
        local2: Vec<f64>,
        local_aux: Vec<f64>,
        global2: f64,
        global_aux: f64,
        global_scale: f64,
    },
}

struct Chain<'a> {
    ds: &'a SurvivalDataset,
    cols: Vec<Vec<f64>>,
    /// Sum of covariate values over patients with an event, per column.
    event_sums: Vec<f64>,
    mandatory: Vec<bool>,
    mandatory_var: f64,
    partition: Partition,
    baseline: &'a BaselineHazardPrior,
    beta: Vec<f64>,
    exp_eta: Vec<f64>,
    /// `exp(eta_i) * H(t_i)`.
    risk_cum: Vec<f64>,
    cum: Vec<f64>,
    hazards: Vec<f64>,
    latent: Latent,
    proposal_sd: Vec<f64>,
    rng: SurvRng,
}

/// Inverse-gamma draw with shape `a` and scale `b`.
fn inv_gamma(rng: &mut SurvRng, a: f64, b: f64) -> f64 {
    1.0 / Gamma::new(a, 1.0 / b).expect("positive gamma parameters").sample(rng)
}

fn gamma(rng: &mut SurvRng, shape: f64, rate: f64) -> f64 {
    Gamma::new(shape, 1.0 / rate).expect("positive gamma parameters").sample(rng)
}

impl<'a> Chain<'a> {
    fn new(ds: &'a SurvivalDataset, prior: &PriorSpec, baseline: &'a BaselineHazardPrior, opts: &McmcOptions) -> Self {
        let p = ds.p();
        let cols: Vec<Vec<f64>> = (0..p).map(|j| ds.covariates().column(j).iter().copied().collect()).collect();
        let event_sums = cols
            .iter()
            .map(|c| {
                c.iter()
                    .zip(ds.outcomes())
                    .filter(|(_, o)| o.event)
                    .map(|(v, _)| v)
                    .sum()
            })
            .collect();
        let mandatory: Vec<bool> = ds.features().iter().map(|f| f.mandatory).collect();
        let partition = Partition::new(&baseline.cuts, ds.outcomes());
        let hazards: Vec<f64> = (0..baseline.n_intervals())
            .map(|k| baseline.shapes[k] / baseline.rates[k] / partition.lengths[k])
            .collect();
        let latent = match *prior {
            PriorSpec::Laplace {
                rate,
                hyper_shape,
                hyper_rate,
            } => Latent::Laplace {
                tau2: vec![1.0; p],
                lambda2: rate.map_or(1.0, |r| r * r),
                fixed: rate.is_some(),
                hyper_shape,
                hyper_rate,
            },
            PriorSpec::SpikeSlab {
                inclusion,
                slab_shape,
                slab_rate,
            } => Latent::SpikeSlab {
                included: mandatory.clone(),
                slab_var: if slab_shape > 1.0 {
                    slab_rate / (slab_shape - 1.0)
                } else {
                    1.0
                },
                inclusion,
                slab_shape,
                slab_rate,
            },
            PriorSpec::Horseshoe { global_scale } => Latent::Horseshoe {
                local2: vec![1.0; p],
                local_aux: vec![1.0; p],
                global2: 1.0,
                global_aux: 1.0,
                global_scale,
            },
        };
        let mut chain = Self {
            ds,
            cols,
            event_sums,
            mandatory,
            mandatory_var: opts.mandatory_sd * opts.mandatory_sd,
            partition,
            baseline,
            beta: vec![0.0; p],
            exp_eta: vec![1.0; ds.n()],
            risk_cum: Vec::new(),
            cum: Vec::new(),
            hazards,
            latent,
            proposal_sd: Vec::new(),
            rng: seeded(opts.seed),
        };
        chain.refresh_cumulative();
        chain.proposal_sd = (0..p)
            .map(|j| {
                let info: f64 = chain.risk_cum.iter().zip(&chain.cols[j]).map(|(w, x)| w * x * x).sum();
                2.4 / (info + 1.0).sqrt()
            })
            .collect();
        chain
    }

    fn refresh_cumulative(&mut self) {
        self.cum = self.partition.cumulative_at_patients(&self.hazards);
        self.risk_cum = self.exp_eta.iter().zip(&self.cum).map(|(e, h)| e * h).collect();
    }

    fn loglik(&self) -> f64 {
        self.ds
            .outcomes()
            .iter()
            .enumerate()
            .map(|(i, o)| {
                let ev = if o.event {
                    self.hazards[self.partition.interval[i]].ln() + self.exp_eta[i].ln()
                } else {
                    0.0
                };
                ev - self.risk_cum[i]
            })
            .sum()
    }

    /// Log-likelihood change when coefficient `j` moves by `delta`.
    fn loglik_shift(&self, j: usize, delta: f64) -> f64 {
        let x = &self.cols[j];
        let loss: f64 = self
            .risk_cum
            .iter()
            .zip(x)
            .map(|(w, v)| w * (delta * v).exp_m1())
            .sum();
        delta * self.event_sums[j] - loss
    }

    fn apply_shift(&mut self, j: usize, delta: f64) {
        self.beta[j] += delta;
        for ((e, w), v) in self.exp_eta.iter_mut().zip(self.risk_cum.iter_mut()).zip(&self.cols[j]) {
            let f = (delta * v).exp();
            *e *= f;
            *w *= f;
        }
    }

    /// Gaussian prior variance of coefficient `j` given the latent state.
    fn prior_var(&self, j: usize) -> f64 {
        if self.mandatory[j] {
            return self.mandatory_var;
        }
        match &self.latent {
            Latent::Laplace { tau2, .. } => tau2[j],
            Latent::SpikeSlab { slab_var, .. } => *slab_var,
            Latent::Horseshoe { local2, global2, .. } => local2[j] * global2,
        }
    }

    /// Random-walk Metropolis move on coefficient `j`; returns whether accepted.
    fn rw_update(&mut self, j: usize) -> bool {
        let z: f64 = StandardNormal.sample(&mut self.rng);
        let delta = self.proposal_sd[j] * z;
        let var = self.prior_var(j);
        let b = self.beta[j];
        let log_ratio = self.loglik_shift(j, delta) - ((b + delta).powi(2) - b * b) / (2.0 * var);
        let u: f64 = self.rng.random();
        if log_ratio.is_finite() && u.ln() < log_ratio {
            self.apply_shift(j, delta);
            true
        } else {
            false
        }
    }

    /// Reversible-jump move between `beta_j = 0` and `beta_j != 0`, proposing
    /// from a Gaussian approximation of the slab conditional built at
    /// `beta_j = 0` (identical in both directions).
    fn flip_update(&mut self, j: usize) {
        let Latent::SpikeSlab {
            included,
            slab_var,
            inclusion,
            ..
        } = &self.latent
        else {
            return;
        };
        let (on, slab_var, inclusion) = (included[j], *slab_var, *inclusion);
        let b = self.beta[j];
        let x = &self.cols[j];
        let mut grad = self.event_sums[j];
        let mut info = 0.0;
        let mut at_zero = Vec::with_capacity(x.len());
        for (w, v) in self.risk_cum.iter().zip(x) {
            let w0 = w * (-b * v).exp();
            grad -= w0 * v;
            info += w0 * v * v;
            at_zero.push(w0);
        }
        let precision = info + 1.0 / slab_var;
        let mean = grad / precision;
        let sd = precision.recip().sqrt();
        let candidate = if on {
            b
        } else {
            let z: f64 = StandardNormal.sample(&mut self.rng);
            mean + sd * z
        };
        let ll_gain = candidate * self.event_sums[j]
            - at_zero
                .iter()
                .zip(x)
                .map(|(w0, v)| w0 * (candidate * v).exp_m1())
                .sum::<f64>();
        let log_on = ll_gain + normal_log_pdf(candidate, slab_var.sqrt()) + inclusion.ln()
            - (1.0 - inclusion).ln()
            - normal_log_pdf(candidate - mean, sd);
        let log_ratio = if on { -log_on } else { log_on };
        let u: f64 = self.rng.random();
        if log_ratio.is_finite() && u.ln() < log_ratio {
            let delta = if on { -b } else { candidate };
            self.apply_shift(j, delta);
            if on {
                self.beta[j] = 0.0;
            }
            if let Latent::SpikeSlab { included, .. } = &mut self.latent {
                included[j] = !on;
            }
        }
    }

    fn update_latent(&mut self) {
        let penalized: Vec<usize> = (0..self.beta.len()).filter(|&j| !self.mandatory[j]).collect();
        let beta = &self.beta;
        let rng = &mut self.rng;
        match &mut self.latent {
            Latent::Laplace {
                tau2,
                lambda2,
                fixed,
                hyper_shape,
                hyper_rate,
            } => {
                let lambda = lambda2.sqrt();
                for &j in &penalized {
                    let b = beta[j].abs().max(1e-12);
                    let ig = InverseGaussian::new(lambda / b, *lambda2).expect("positive parameters");
                    let inv: f64 = ig.sample(rng);
                    tau2[j] = 1.0 / inv.max(1e-300);
                }
                if !*fixed {
                    let sum: f64 = penalized.iter().map(|&j| tau2[j]).sum();
                    *lambda2 = gamma(rng, *hyper_shape + penalized.len() as f64, *hyper_rate + sum / 2.0);
                }
            }
            Latent::SpikeSlab {
                included,
                slab_var,
                slab_shape,
                slab_rate,
                ..
            } => {
                let mut k = 0.0;
                let mut ss = 0.0;
                for &j in &penalized {
                    if included[j] {
                        k += 1.0;
                        ss += beta[j] * beta[j];
                    }
                }
                *slab_var = inv_gamma(rng, *slab_shape + k / 2.0, *slab_rate + ss / 2.0);
            }
            Latent::Horseshoe {
                local2,
                local_aux,
                global2,
                global_aux,
                global_scale,
            } => {
                for &j in &penalized {
                    local2[j] = inv_gamma(rng, 1.0, 1.0 / local_aux[j] + beta[j] * beta[j] / (2.0 * *global2));
                    local_aux[j] = inv_gamma(rng, 1.0, 1.0 + 1.0 / local2[j]);
                }
                let ss: f64 = penalized.iter().map(|&j| beta[j] * beta[j] / local2[j]).sum();
                *global2 = inv_gamma(rng, (penalized.len() as f64 + 1.0) / 2.0, 1.0 / *global_aux + ss / 2.0);
                *global_aux = inv_gamma(rng, 1.0, 1.0 / (*global_scale * *global_scale) + 1.0 / *global2);
            }
        }
    }

    fn update_baseline(&mut self) {
        let (events, exposure) = self.partition.interval_totals(self.ds.outcomes(), &self.exp_eta);
        for k in 0..self.hazards.len() {
            let len = self.partition.lengths[k];
            let inc = gamma(
                &mut self.rng,
                self.baseline.shapes[k] + events[k],
                self.baseline.rates[k] + exposure[k] / len,
            );
            // guard against underflow to an exact zero for tiny shapes
            self.hazards[k] = (inc / len).max(f64::MIN_POSITIVE);
        }
        self.refresh_cumulative();
    }

    fn local_scales(&self) -> Option<Vec<f64>> {
        match &self.latent {
            Latent::Laplace { tau2, .. } => Some(
                tau2.iter()
                    .zip(&self.mandatory)
                    .map(|(t, &m)| if m { 0.0 } else { t.sqrt() })
                    .collect(),
            ),
            Latent::Horseshoe { local2, .. } => Some(
                local2
                    .iter()
                    .zip(&self.mandatory)
                    .map(|(l, &m)| if m { 0.0 } else { l.sqrt() })
                    .collect(),
            ),
            Latent::SpikeSlab { .. } => None,
        }
    }

    fn global(&self) -> f64 {
        match &self.latent {
            Latent::Laplace { lambda2, .. } => lambda2.sqrt(),
            Latent::SpikeSlab { slab_var, .. } => *slab_var,
            Latent::Horseshoe { global2, .. } => global2.sqrt(),
        }
    }

    fn is_spike_slab(&self) -> bool {
        matches!(self.latent, Latent::SpikeSlab { .. })
    }

    fn included(&self, j: usize) -> bool {
        match &self.latent {
            Latent::SpikeSlab { included, .. } => included[j],
            _ => true,
        }
    }
}

/// Metropolis-within-Gibbs sampler for the Bayesian Cox model.
///
/// Each iteration updates every coefficient by an adaptive random-walk
/// move (plus, for spike-and-slab, an add/delete move), then the prior's
/// latent scales, then the baseline hazard from its gamma conditionals.
/// Proposal scales adapt during burn-in only.
pub fn run_mcmc(
    ds: &SurvivalDataset,
    prior: &PriorSpec,
    baseline: &BaselineHazardPrior,
    opts: &McmcOptions,
) -> Result<PosteriorSamples> {
    prior.validate()?;
    baseline.validate()?;
    let burn_in = opts.burn_in();
    if burn_in >= opts.iterations {
        return Err(SurvError::InvalidParameter(format!(
            "burn-in ({burn_in}) must be smaller than the number of iterations ({})",
            opts.iterations
        )));
    }
    if opts.thinning == 0 || opts.adapt_every == 0 {
        return Err(SurvError::InvalidParameter("thinning and adaptation interval must be positive".into()));
    }
    if !(opts.mandatory_sd > 0.0) {
        return Err(SurvError::InvalidParameter("mandatory prior sd must be positive".into()));
    }
    if ds.has_missing() {
        return Err(SurvError::InvalidData("covariates contain missing values".into()));
    }
    if ds.n_events() == 0 {
        return Err(SurvError::InvalidData("no events; the model is not identified".into()));
    }
    let mut chain = Chain::new(ds, prior, baseline, opts);
    if !chain.loglik().is_finite() {
        return Err(SurvError::NonFinite("posterior density at the initial state".into()));
    }

    let p = ds.p();
    let spike_slab = chain.is_spike_slab();
    let n_keep = (opts.iterations - burn_in) / opts.thinning;
    let mut beta_draws = Vec::with_capacity(n_keep);
    let mut incl_draws = spike_slab.then(|| Vec::with_capacity(n_keep));
    let mut scale_draws = chain.local_scales().map(|_| Vec::with_capacity(n_keep));
    let mut global_draws = Vec::with_capacity(n_keep);
    let mut hazard_draws = Vec::with_capacity(n_keep);
    let mut batch_tries = vec![0usize; p];
    let mut batch_accepts = vec![0usize; p];
    let mut kept_tries = vec![0usize; p];
    let mut kept_accepts = vec![0usize; p];
    let mut batch = 0usize;

    for it in 0..opts.iterations {
        for j in 0..p {
            if spike_slab && !chain.mandatory[j] {
                chain.flip_update(j);
            }
            if !chain.included(j) {
                continue;
            }
            let accepted = chain.rw_update(j);
            if it < burn_in {
                batch_tries[j] += 1;
                batch_accepts[j] += usize::from(accepted);
            } else {
                kept_tries[j] += 1;
                kept_accepts[j] += usize::from(accepted);
            }
        }
        chain.update_latent();
        chain.update_baseline();

        if it < burn_in && (it + 1) % opts.adapt_every == 0 {
            batch += 1;
            let step = (1.0 / (batch as f64).sqrt()).min(0.25);
            for j in 0..p {
                if batch_tries[j] > 0 {
                    let rate = batch_accepts[j] as f64 / batch_tries[j] as f64;
                    let dir = if rate > opts.target_acceptance { step } else { -step };
                    chain.proposal_sd[j] *= dir.exp();
                }
                batch_tries[j] = 0;
                batch_accepts[j] = 0;
            }
        }

        if it >= burn_in && (it - burn_in + 1) % opts.thinning == 0 {
            beta_draws.push(chain.beta.clone());
            if let Some(d) = incl_draws.as_mut() {
                d.push((0..p).map(|j| chain.included(j)).collect());
            }
            if let (Some(d), Some(s)) = (scale_draws.as_mut(), chain.local_scales()) {
                d.push(s);
            }
            global_draws.push(chain.global());
            hazard_draws.push(chain.hazards.clone());
        }
        if chain.beta.iter().any(|b| !b.is_finite()) {
            return Err(SurvError::NonFinite(format!("coefficient draw at iteration {it}")));
        }
    }

    Ok(PosteriorSamples {
        prior: prior.clone(),
        baseline_prior: baseline.clone(),
        features: ds.features().to_vec(),
        iterations: opts.iterations,
        burn_in,
        thinning: opts.thinning,
        seed: opts.seed,
        beta: beta_draws,
        inclusion: incl_draws,
        local_scales: scale_draws,
        global: global_draws,
        hazards: hazard_draws,
        acceptance: kept_tries
            .iter()
            .zip(&kept_accepts)
            .map(|(&t, &a)| if t == 0 { 0.0 } else { a as f64 / t as f64 })
            .collect(),
        proposal_sd: chain.proposal_sd,
    })
}
