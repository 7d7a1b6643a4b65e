//! Kaplan–Meier estimation, the censoring distribution and the log-rank test.
//!
//! At a time with both events and censorings the censored patients are
//! still counted at risk for the events.

use std::collections::BTreeMap;
use std::io::Write;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dataset::SurvivalOutcome;
use crate::error::{Result, SurvError};
use crate::stats::chi2_sf;

/// Product-limit survival curve over the distinct event times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KmCurve {
    pub times: Vec<f64>,
    pub survival: Vec<f64>,
    pub at_risk: Vec<usize>,
    pub events: Vec<usize>,
    pub n: usize,
}

pub fn km_estimate(outcomes: &[SurvivalOutcome]) -> Result<KmCurve> {
    if outcomes.is_empty() {
        return Err(SurvError::InvalidData("Kaplan-Meier estimate needs at least one outcome".into()));
    }
    let mut sorted = outcomes.to_vec();
    sorted.sort_by(|a, b| a.time.total_cmp(&b.time));
    let n = sorted.len();
    let mut curve = KmCurve {
        times: Vec::new(),
        survival: Vec::new(),
        at_risk: Vec::new(),
        events: Vec::new(),
        n,
    };
    let mut s = 1.0;
    let mut i = 0;
    while i < n {
        let t = sorted[i].time;
        let at_risk = n - i;
        let mut d = 0;
        while i < n && sorted[i].time == t {
            d += usize::from(sorted[i].event);
            i += 1;
        }
        if d > 0 {
            s *= 1.0 - d as f64 / at_risk as f64;
            curve.times.push(t);
            curve.survival.push(s);
            curve.at_risk.push(at_risk);
            curve.events.push(d);
        }
    }
    Ok(curve)
}

impl KmCurve {
    /// Right-continuous evaluation `S(t)`.
    pub fn survival_at(&self, t: f64) -> f64 {
        let k = self.times.partition_point(|&s| s <= t);
        if k == 0 {
            1.0
        } else {
            self.survival[k - 1]
        }
    }

    /// Left limit `S(t-)`.
    pub fn survival_before(&self, t: f64) -> f64 {
        let k = self.times.partition_point(|&s| s < t);
        if k == 0 {
            1.0
        } else {
            self.survival[k - 1]
        }
    }

    /// Smallest event time with `S(t) <= 0.5`.
    pub fn median_survival(&self) -> Option<f64> {
        self.survival.iter().position(|&s| s <= 0.5).map(|k| self.times[k])
    }

    /// CSV with columns `time,survival,at_risk,events`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["time", "survival", "at_risk", "events"])?;
        for k in 0..self.times.len() {
            w.write_record(&[
                self.times[k].to_string(),
                self.survival[k].to_string(),
                self.at_risk[k].to_string(),
                self.events[k].to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn survival_at(curve: &KmCurve, t: f64) -> f64 {
    curve.survival_at(t)
}

pub fn median_survival(curve: &KmCurve) -> Option<f64> {
    curve.median_survival()
}

/// Kaplan–Meier estimate of the censoring distribution `G(t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CensoringModel {
    pub curve: KmCurve,
}

impl CensoringModel {
    pub fn at(&self, t: f64) -> f64 {
        self.curve.survival_at(t)
    }

    /// `G(t-)`, the form used in inverse-probability weights.
    pub fn before(&self, t: f64) -> f64 {
        self.curve.survival_before(t)
    }
}

pub fn censoring_km(outcomes: &[SurvivalOutcome]) -> Result<CensoringModel> {
    let flipped: Vec<SurvivalOutcome> = outcomes
        .iter()
        .map(|o| SurvivalOutcome {
            time: o.time,
            event: !o.event,
        })
        .collect();
    Ok(CensoringModel {
        curve: km_estimate(&flipped)?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRankResult {
    pub statistic: f64,
    pub df: usize,
    pub p_value: f64,
    /// Distinct group labels in increasing order.
    pub groups: Vec<usize>,
    pub observed: Vec<f64>,
    pub expected: Vec<f64>,
}

/// Log-rank test of equal survival across the labelled groups.
pub fn logrank_test(outcomes: &[SurvivalOutcome], groups: &[usize]) -> Result<LogRankResult> {
    if outcomes.len() != groups.len() {
        return Err(SurvError::DimensionMismatch {
            expected: outcomes.len(),
            got: groups.len(),
        });
    }
    let labels: Vec<usize> = groups
        .iter()
        .copied()
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .collect();
    let g = labels.len();
    if g < 2 {
        return Err(SurvError::InvalidData("log-rank test needs at least two groups".into()));
    }
    let slot: BTreeMap<usize, usize> = labels.iter().enumerate().map(|(k, &l)| (l, k)).collect();
    let gi: Vec<usize> = groups.iter().map(|l| slot[l]).collect();

    let mut order: Vec<usize> = (0..outcomes.len()).collect();
    order.sort_by(|&a, &b| outcomes[a].time.total_cmp(&outcomes[b].time));
    let mut at_risk = vec![0.0; g];
    for &k in &gi {
        at_risk[k] += 1.0;
    }
    let mut observed = vec![0.0; g];
    let mut expected = vec![0.0; g];
    let mut var = DMatrix::<f64>::zeros(g, g);
    let mut total_events = 0usize;
    let mut i = 0;
    while i < order.len() {
        let t = outcomes[order[i]].time;
        let mut d = vec![0.0; g];
        let mut leaving = vec![0.0; g];
        while i < order.len() && outcomes[order[i]].time == t {
            let idx = order[i];
            leaving[gi[idx]] += 1.0;
            if outcomes[idx].event {
                d[gi[idx]] += 1.0;
            }
            i += 1;
        }
        let dt: f64 = d.iter().sum();
        let nt: f64 = at_risk.iter().sum();
        if dt > 0.0 {
            total_events += dt as usize;
            for a in 0..g {
                observed[a] += d[a];
                expected[a] += dt * at_risk[a] / nt;
            }
            if nt > 1.0 {
                let c = dt * (nt - dt) / (nt - 1.0);
                for a in 0..g {
                    for b in 0..g {
                        let delta = if a == b { 1.0 } else { 0.0 };
                        var[(a, b)] += c * at_risk[a] / nt * (delta - at_risk[b] / nt);
                    }
                }
            }
        }
        for a in 0..g {
            at_risk[a] -= leaving[a];
        }
    }
    if total_events == 0 {
        return Err(SurvError::Degenerate("log-rank test needs at least one event".into()));
    }
    let m = g - 1;
    let diff = DVector::from_fn(m, |a, _| observed[a] - expected[a]);
    let v = var.view((0, 0), (m, m)).into_owned();
    let statistic = match v.clone().cholesky() {
        Some(c) => diff.dot(&c.solve(&diff)),
        None => {
            let pinv = v
                .pseudo_inverse(1e-12)
                .map_err(|e| SurvError::Degenerate(format!("log-rank variance: {e}")))?;
            diff.dot(&(pinv * &diff))
        }
    }
    .max(0.0);
    Ok(LogRankResult {
        statistic,
        df: m,
        p_value: chi2_sf(statistic, m as f64),
        groups: labels,
        observed,
        expected,
    })
}
