use serde::{Deserialize, Serialize};

use super::{PosteriorSamples, PriorSpec};
use crate::error::{Result, SurvError};
use crate::stats;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientSummary {
    pub name: String,
    pub mandatory: bool,
    pub mean: f64,
    pub sd: f64,
    /// Equal-tailed credible interval.
    pub lower: f64,
    pub upper: f64,
    /// Posterior inclusion probability (spike-and-slab).
    pub inclusion: Option<f64>,
    /// Posterior mean of `1 / (1 + lambda_j²)` (horseshoe).
    pub kappa: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSummary {
    pub prior: String,
    pub level: f64,
    pub draws: usize,
    pub coefficients: Vec<CoefficientSummary>,
}

impl PosteriorSummary {
    pub fn get(&self, name: &str) -> Option<&CoefficientSummary> {
        self.coefficients.iter().find(|c| c.name == name)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| SurvError::InvalidData(e.to_string()))
    }
}

/// Shrinkage weight of a horseshoe local scale.
pub fn kappa(local_scale: f64) -> f64 {
    1.0 / (1.0 + local_scale * local_scale)
}

pub fn posterior_summary(samples: &PosteriorSamples, level: f64) -> Result<PosteriorSummary> {
    if !(level > 0.0 && level < 1.0) {
        return Err(SurvError::InvalidParameter(format!(
            "credibility level must lie in (0, 1), got {level}"
        )));
    }
    if samples.beta.is_empty() {
        return Err(SurvError::InvalidData("posterior has no retained draws".into()));
    }
    let horseshoe = matches!(samples.prior, PriorSpec::Horseshoe { .. });
    let tail = (1.0 - level) / 2.0;
    let coefficients = samples
        .features
        .iter()
        .enumerate()
        .map(|(j, f)| {
            let mut draws: Vec<f64> = samples.beta.iter().map(|b| b[j]).collect();
            let mean = stats::mean(&draws);
            let sd = if draws.len() > 1 { stats::sd(&draws) } else { 0.0 };
            draws.sort_by(f64::total_cmp);
            let inclusion = samples.inclusion.as_ref().map(|g| {
                g.iter().filter(|row| row[j]).count() as f64 / g.len() as f64
            });
            let kappa = match (&samples.local_scales, horseshoe && !f.mandatory) {
                (Some(s), true) => Some(stats::mean(&s.iter().map(|row| kappa(row[j])).collect::<Vec<_>>())),
                _ => None,
            };
            CoefficientSummary {
                name: f.name.clone(),
                mandatory: f.mandatory,
                mean,
                sd,
                lower: stats::quantile_sorted(&draws, tail),
                upper: stats::quantile_sorted(&draws, 1.0 - tail),
                inclusion,
                kappa,
            }
        })
        .collect();
    Ok(PosteriorSummary {
        prior: samples.prior.name().to_string(),
        level,
        draws: samples.n_draws(),
        coefficients,
    })
}

/// Selected penalized features; mandatory features are listed separately
/// and are never subject to selection.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Selection {
    pub selected: Vec<String>,
    pub mandatory: Vec<String>,
}

fn selection(summary: &PosteriorSummary, keep: impl Fn(&CoefficientSummary) -> bool) -> Selection {
    Selection {
        selected: summary
            .coefficients
            .iter()
            .filter(|c| !c.mandatory && keep(c))
            .map(|c| c.name.clone())
            .collect(),
        mandatory: summary
            .coefficients
            .iter()
            .filter(|c| c.mandatory)
            .map(|c| c.name.clone())
            .collect(),
    }
}

/// Features whose credible interval excludes zero.
pub fn select_by_ci(summary: &PosteriorSummary) -> Selection {
    selection(summary, |c| c.lower > 0.0 || c.upper < 0.0)
}

/// Features with posterior inclusion probability strictly above 1/2.
pub fn median_probability_model(summary: &PosteriorSummary) -> Result<Selection> {
    if summary.coefficients.iter().any(|c| !c.mandatory && c.inclusion.is_none()) {
        return Err(SurvError::InvalidParameter(
            "the median probability model needs spike-and-slab samples".into(),
        ));
    }
    Ok(selection(summary, |c| c.inclusion.is_some_and(|p| p > 0.5)))
}

/// Features whose mean weight `kappa_j = 1 / (1 + lambda_j²)` is at least
/// `cutoff`.
///
/// Note that in the usual horseshoe reading `kappa_j` near 1 means strong
/// shrinkage; this rule keeps the features with large `kappa_j`.
pub fn horseshoe_select(summary: &PosteriorSummary, cutoff: f64) -> Result<Selection> {
    if !(cutoff > 0.0 && cutoff < 1.0) {
        return Err(SurvError::InvalidParameter(format!("cutoff must lie in (0, 1), got {cutoff}")));
    }
    if summary.coefficients.iter().any(|c| !c.mandatory && c.kappa.is_none()) {
        return Err(SurvError::InvalidParameter("horseshoe selection needs horseshoe samples".into()));
    }
    Ok(selection(summary, |c| c.kappa.is_some_and(|k| k >= cutoff)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bayes::BaselineHazardPrior;
    use crate::dataset::FeatureMeta;
    use proptest::prelude::*;

    fn samples(prior: PriorSpec, beta: Vec<Vec<f64>>, scales: Option<Vec<Vec<f64>>>) -> PosteriorSamples {
        let p = beta[0].len();
        PosteriorSamples {
            prior,
            baseline_prior: BaselineHazardPrior::new(vec![1.0], vec![1.0], vec![1.0]).unwrap(),
            features: (0..p).map(|j| FeatureMeta::new(format!("f{j}"))).collect(),
            iterations: beta.len() * 2,
            burn_in: beta.len(),
            thinning: 1,
            seed: 0,
            global: vec![1.0; beta.len()],
            hazards: vec![vec![1.0]; beta.len()],
            acceptance: vec![0.3; p],
            proposal_sd: vec![0.1; p],
            inclusion: None,
            local_scales: scales,
            beta,
        }
    }

    fn coef(name: &str, lower: f64, upper: f64) -> CoefficientSummary {
        CoefficientSummary {
            name: name.into(),
            mandatory: false,
            mean: (lower + upper) / 2.0,
            sd: 0.1,
            lower,
            upper,
            inclusion: None,
            kappa: None,
        }
    }

    fn table(coefs: Vec<CoefficientSummary>) -> PosteriorSummary {
        PosteriorSummary {
            prior: "laplace".into(),
            level: 0.95,
            draws: 100,
            coefficients: coefs,
        }
    }

    #[test]
    fn constant_chain_summary() {
        let s = samples(PriorSpec::laplace(), vec![vec![0.7]; 50], None);
        let sum = posterior_summary(&s, 0.95).unwrap();
        let c = &sum.coefficients[0];
        assert_eq!((c.mean, c.lower, c.upper), (0.7, 0.7, 0.7));
        assert!(posterior_summary(&s, 1.0).is_err());
    }

    #[test]
    fn quantiles_match_order_statistics() {
        let draws: Vec<Vec<f64>> = (0..1000).map(|i| vec![((i * 7919) % 1000) as f64]).collect();
        let s = samples(PriorSpec::laplace(), draws, None);
        let sum = posterior_summary(&s, 0.9).unwrap();
        // values are a permutation of 0..1000; linear interpolation at
        // q (n - 1) gives 0.05 * 999 and 0.95 * 999
        assert!((sum.coefficients[0].lower - 49.95).abs() < 1e-9);
        assert!((sum.coefficients[0].upper - 949.05).abs() < 1e-9);
    }

    #[test]
    fn ci_rule() {
        let t = table(vec![coef("a", -0.2, 0.3), coef("b", 0.1, 0.9), coef("c", -0.9, -0.05)]);
        assert_eq!(select_by_ci(&t).selected, vec!["b".to_string(), "c".to_string()]);
    }

    #[test]
    fn median_probability_rule() {
        let mut a = coef("a", 0.0, 1.0);
        a.inclusion = Some(0.9);
        let mut b = coef("b", 0.0, 1.0);
        b.inclusion = Some(0.4);
        let mut c = coef("c", 0.0, 1.0);
        c.inclusion = Some(0.5);
        let sel = median_probability_model(&table(vec![a, b, c])).unwrap();
        assert_eq!(sel.selected, vec!["a".to_string()]);
        assert!(median_probability_model(&table(vec![coef("x", 0.0, 1.0)])).is_err());
    }

    #[test]
    fn horseshoe_rule_follows_kappa() {
        let s = samples(
            PriorSpec::horseshoe(),
            vec![vec![0.1, 0.1]; 10],
            Some(vec![vec![1.0, 3.0]; 10]),
        );
        let sum = posterior_summary(&s, 0.95).unwrap();
        assert_eq!(sum.coefficients[0].kappa, Some(0.5));
        assert!((sum.coefficients[1].kappa.unwrap() - 0.1).abs() < 1e-15);
        let sel = horseshoe_select(&sum, 0.5).unwrap();
        assert_eq!(sel.selected, vec!["f0".to_string()]);
        assert!(horseshoe_select(&sum, 1.0).is_err());
    }

    proptest! {
        #[test]
        fn kappa_decreases_with_scale(a in 0.0f64..100.0, b in 0.0f64..100.0) {
            prop_assume!(a < b);
            prop_assert!(kappa(a) >= kappa(b));
            prop_assert!(kappa(a) <= 1.0 && kappa(b) > 0.0);
        }

        #[test]
        fn interval_brackets_draws(draws in proptest::collection::vec(-10.0f64..10.0, 2..200), level in 0.01f64..0.99) {
            let s = samples(PriorSpec::laplace(), draws.iter().map(|&v| vec![v]).collect(), None);
            let c = posterior_summary(&s, level).unwrap().coefficients[0].clone();
            let lo = draws.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = draws.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(c.lower <= c.upper);
            prop_assert!(lo <= c.mean + 1e-12 && c.mean <= hi + 1e-12);
            prop_assert!(lo <= c.lower && c.upper <= hi);
        }
    }
}
