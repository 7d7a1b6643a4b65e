use nalgebra::{DMatrix, DVector};

use crate::dataset::SurvivalOutcome;

/// Patients grouped by distinct observed time, with event multiplicities.
///
/// Tied event times share one risk set (Breslow). A patient censored at an
/// event time is still at risk at that time.
#[derive(Debug, Clone)]
pub struct RiskSetIndex {
    /// Patient indices sorted by decreasing observed time.
    order: Vec<usize>,
    /// One entry per distinct observed time, in decreasing time order.
    groups: Vec<TimeGroup>,
    events: Vec<bool>,
    /// Position in `groups` of each patient's observed time.
    group_of: Vec<usize>,
}

#[derive(Debug, Clone, Copy)]
struct TimeGroup {
    time: f64,
    start: usize,
    end: usize,
    events: usize,
}

/// Log-likelihood and its first and diagonal second derivatives with
/// respect to the linear predictor.
#[derive(Debug, Clone)]
pub struct EtaDerivatives {
    pub loglik: f64,
    /// `d loglik / d eta_i`
    pub gradient: Vec<f64>,
    /// `-d² loglik / d eta_i²`
    pub neg_hessian_diag: Vec<f64>,
}

impl RiskSetIndex {
    pub fn new(outcomes: &[SurvivalOutcome]) -> Self {
        let n = outcomes.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| outcomes[b].time.total_cmp(&outcomes[a].time).then(a.cmp(&b)));
        let mut groups: Vec<TimeGroup> = Vec::new();
        let mut group_of = vec![0; n];
        for (pos, &i) in order.iter().enumerate() {
            let t = outcomes[i].time;
            match groups.last_mut() {
                Some(g) if g.time == t => g.end = pos + 1,
                _ => groups.push(TimeGroup {
                    time: t,
                    start: pos,
                    end: pos + 1,
                    events: 0,
                }),
            }
            let gi = groups.len() - 1;
            group_of[i] = gi;
            if outcomes[i].event {
                groups[gi].events += 1;
            }
        }
        Self {
            order,
            groups,
            events: outcomes.iter().map(|o| o.event).collect(),
            group_of,
        }
    }

    pub fn n(&self) -> usize {
        self.order.len()
    }

    pub fn n_events(&self) -> usize {
        self.groups.iter().map(|g| g.events).sum()
    }

    /// Distinct event times, increasing.
    pub fn event_times(&self) -> Vec<f64> {
        self.groups.iter().rev().filter(|g| g.events > 0).map(|g| g.time).collect()
    }

    /// Event multiplicities `d_k`, aligned with [`Self::event_times`].
    pub fn multiplicities(&self) -> Vec<usize> {
        self.groups.iter().rev().filter(|g| g.events > 0).map(|g| g.events).collect()
    }

    /// Members of the risk set at the `k`-th event time (increasing order).
    pub fn risk_set(&self, k: usize) -> Vec<usize> {
        let g = self
            .groups
            .iter()
            .rev()
            .filter(|g| g.events > 0)
            .nth(k)
            .expect("event index out of range");
        let mut members = self.order[..g.end].to_vec();
        members.sort_unstable();
        members
    }

    fn max_eta(eta: &[f64]) -> f64 {
        eta.iter().copied().fold(f64::NEG_INFINITY, f64::max).max(0.0)
    }

    /// Breslow partial log-likelihood at linear predictor `eta`.
    pub fn loglik(&self, eta: &[f64]) -> f64 {
        let m = Self::max_eta(eta);
        let mut s0 = 0.0;
        let mut ll = 0.0;
        for g in &self.groups {
            let members = &self.order[g.start..g.end];
            for &i in members {
                s0 += (eta[i] - m).exp();
            }
            if g.events > 0 {
                let log_s0 = s0.ln() + m;
                for &i in members {
                    if self.events[i] {
                        ll += eta[i] - log_s0;
                    }
                }
            }
        }
        ll
    }

    /// Cumulative sums `sum_{k: T_k <= T_i} d_k / S0_k` and `d_k / S0_k²`
    /// per patient, on the max-shifted scale.
    fn cumulative_weights(&self, eta: &[f64], m: f64) -> (Vec<f64>, Vec<f64>, f64) {
        let mut s0 = 0.0;
        let mut ll = 0.0;
        let mut per_group = vec![(0.0, 0.0); self.groups.len()];
        for (gi, g) in self.groups.iter().enumerate() {
            let members = &self.order[g.start..g.end];
            for &i in members {
                s0 += (eta[i] - m).exp();
            }
            if g.events > 0 {
                let d = g.events as f64;
                per_group[gi] = (d / s0, d / (s0 * s0));
                let log_s0 = s0.ln() + m;
                for &i in members {
                    if self.events[i] {
                        ll += eta[i] - log_s0;
                    }
                }
            }
        }
        // accumulate from the earliest time upwards
        let mut acc = (0.0, 0.0);
        let mut cum = vec![(0.0, 0.0); self.groups.len()];
        for gi in (0..self.groups.len()).rev() {
            acc.0 += per_group[gi].0;
            acc.1 += per_group[gi].1;
            cum[gi] = acc;
        }
        let a = self.group_of.iter().map(|&g| cum[g].0).collect();
        let b = self.group_of.iter().map(|&g| cum[g].1).collect();
        (a, b, ll)
    }

    pub fn eta_derivatives(&self, eta: &[f64]) -> EtaDerivatives {
        let m = Self::max_eta(eta);
        let (a, b, loglik) = self.cumulative_weights(eta, m);
        let n = self.n();
        let mut gradient = vec![0.0; n];
        let mut neg_hessian_diag = vec![0.0; n];
        for i in 0..n {
            let e = (eta[i] - m).exp();
            let d = if self.events[i] { 1.0 } else { 0.0 };
            gradient[i] = d - e * a[i];
            neg_hessian_diag[i] = (e * a[i] - e * e * b[i]).max(0.0);
        }
        EtaDerivatives {
            loglik,
            gradient,
            neg_hessian_diag,
        }
    }

    /// Score vector and observed information with respect to the
    /// coefficients of the given design matrix.
    pub fn score_and_information(&self, x: &DMatrix<f64>, eta: &[f64]) -> (DVector<f64>, DMatrix<f64>) {
        let p = x.ncols();
        let m = Self::max_eta(eta);
        let mut s0 = 0.0;
        let mut s1 = DVector::zeros(p);
        let mut s2 = DMatrix::zeros(p, p);
        let mut score = DVector::zeros(p);
        let mut info = DMatrix::zeros(p, p);
        for g in &self.groups {
            let members = &self.order[g.start..g.end];
            for &i in members {
                let e = (eta[i] - m).exp();
                s0 += e;
                let xi = x.row(i).transpose();
                s1.axpy(e, &xi, 1.0);
                s2.ger(e, &xi, &xi, 1.0);
            }
            if g.events > 0 {
                let d = g.events as f64;
                let mean = &s1 / s0;
                for &i in members {
                    if self.events[i] {
                        score += x.row(i).transpose() - &mean;
                    }
                }
                info += (&s2 / s0 - &mean * mean.transpose()) * d;
            }
        }
        (score, info)
    }

    /// Breslow cumulative baseline hazard jumps at each distinct event time
    /// (increasing), as `(time, increment)`.
    pub fn breslow_increments(&self, eta: &[f64]) -> Vec<(f64, f64)> {
        let m = Self::max_eta(eta);
        let mut s0 = 0.0;
        let mut out = Vec::new();
        for g in &self.groups {
            for &i in &self.order[g.start..g.end] {
                s0 += (eta[i] - m).exp();
            }
            if g.events > 0 {
                out.push((g.time, g.events as f64 / s0 * (-m).exp()));
            }
        }
        out.reverse();
        out
    }
}
