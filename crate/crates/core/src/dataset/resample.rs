use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SurvError};
use crate::rng::seeded;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ResamplingKind {
    CvFolds,
    Bootstrap,
    Subsample,
}

/// One replicate: rows used for fitting and rows held out.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Replicate {
    /// May contain repeats for bootstrap replicates.
    pub in_sample: Vec<usize>,
    pub out_of_sample: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResamplingPlan {
    pub kind: ResamplingKind,
    pub n: usize,
    pub seed: u64,
    pub replicates: Vec<Replicate>,
    pub warnings: Vec<String>,
}

/// Stratified k-fold assignment: events and censored rows are shuffled
/// separately and dealt round-robin, censored rows continuing where the
/// events stopped.
pub fn make_cv_folds(events: &[bool], k: usize, seed: u64) -> Result<ResamplingPlan> {
    let n = events.len();
    if k < 2 || k > n {
        return Err(SurvError::InvalidParameter(format!(
            "number of folds must satisfy 2 <= k <= n = {n}, got {k}"
        )));
    }
    let mut rng = seeded(seed);
    let mut ev: Vec<usize> = (0..n).filter(|&i| events[i]).collect();
    let mut ce: Vec<usize> = (0..n).filter(|&i| !events[i]).collect();
    ev.shuffle(&mut rng);
    ce.shuffle(&mut rng);
    let mut folds = vec![Vec::new(); k];
    for (pos, &i) in ev.iter().chain(ce.iter()).enumerate() {
        folds[pos % k].push(i);
    }
    let mut warnings = Vec::new();
    if ev.len() < k {
        warnings.push(format!("{} events for {k} folds; some folds contain no events", ev.len()));
    }
    let replicates = folds
        .into_iter()
        .map(|mut out| {
            out.sort_unstable();
            let mut mask = vec![true; n];
            for &i in &out {
                mask[i] = false;
            }
            Replicate {
                in_sample: (0..n).filter(|&i| mask[i]).collect(),
                out_of_sample: out,
            }
        })
        .collect();
    Ok(ResamplingPlan {
        kind: ResamplingKind::CvFolds,
        n,
        seed,
        replicates,
        warnings,
    })
}

/// `b` bootstrap samples of size `n` drawn with replacement; the
/// out-of-bag set is the complement of each sample's support.
pub fn bootstrap_plan(n: usize, b: usize, seed: u64) -> Result<ResamplingPlan> {
    if b == 0 || n == 0 {
        return Err(SurvError::InvalidParameter("bootstrap needs n >= 1 and B >= 1".into()));
    }
    let mut rng = seeded(seed);
    let replicates = (0..b)
        .map(|_| {
            let in_sample: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            let mut seen = vec![false; n];
            for &i in &in_sample {
                seen[i] = true;
            }
            Replicate {
                in_sample,
                out_of_sample: (0..n).filter(|&i| !seen[i]).collect(),
            }
        })
        .collect();
    Ok(ResamplingPlan {
        kind: ResamplingKind::Bootstrap,
        n,
        seed,
        replicates,
        warnings: Vec::new(),
    })
}

/// `b` subsamples of size `size` drawn without replacement.
pub fn subsample_plan(n: usize, size: usize, b: usize, seed: u64) -> Result<ResamplingPlan> {
    if size == 0 || size > n || b == 0 {
        return Err(SurvError::InvalidParameter(format!(
            "subsample size must lie in 1..={n} and B >= 1"
        )));
    }
    let mut rng = seeded(seed);
    let idx: Vec<usize> = (0..n).collect();
    let replicates = (0..b)
        .map(|_| {
            let mut pick: Vec<usize> = idx.choose_multiple(&mut rng, size).copied().collect();
            pick.sort_unstable();
            let mut mask = vec![false; n];
            for &i in &pick {
                mask[i] = true;
            }
            Replicate {
                in_sample: pick,
                out_of_sample: (0..n).filter(|&i| !mask[i]).collect(),
            }
        })
        .collect();
    Ok(ResamplingPlan {
        kind: ResamplingKind::Subsample,
        n,
        seed,
        replicates,
        warnings: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn folds_partition_indices() {
        let plan = make_cv_folds(&[true; 10], 5, 3).unwrap();
        let mut all: Vec<usize> = plan.replicates.iter().flat_map(|r| r.out_of_sample.clone()).collect();
        all.sort_unstable();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
        assert!(plan.replicates.iter().all(|r| r.out_of_sample.len() == 2 && r.in_sample.len() == 8));
    }

    #[test]
    fn folds_are_stratified() {
        let events: Vec<bool> = (0..10).map(|i| i < 6).collect();
        let plan = make_cv_folds(&events, 2, 11).unwrap();
        for r in &plan.replicates {
            assert_eq!(r.out_of_sample.iter().filter(|&&i| events[i]).count(), 3);
        }
    }

    #[test]
    fn folds_are_deterministic_and_warn() {
        let events = [true, false, false, false, false, false];
        let a = make_cv_folds(&events, 3, 42).unwrap();
        assert_eq!(a, make_cv_folds(&events, 3, 42).unwrap());
        assert_eq!(a.warnings.len(), 1);
        assert!(make_cv_folds(&events, 1, 0).is_err());
        assert!(make_cv_folds(&events, 7, 0).is_err());
    }

    #[test]
    fn single_row_bootstrap() {
        let plan = bootstrap_plan(1, 4, 9).unwrap();
        assert!(plan.replicates.iter().all(|r| r.in_sample == vec![0] && r.out_of_sample.is_empty()));
    }

    #[test]
    fn out_of_bag_fraction_near_e_inverse() {
        let plan = bootstrap_plan(1000, 200, 2024).unwrap();
        let frac: f64 = plan
            .replicates
            .iter()
            .map(|r| r.out_of_sample.len() as f64 / 1000.0)
            .sum::<f64>()
            / 200.0;
        let limit = (1.0 - 1.0 / 1000f64).powi(1000);
        assert!((frac - limit).abs() < 0.02, "{frac}");
        assert_eq!(plan, bootstrap_plan(1000, 200, 2024).unwrap());
    }

    #[test]
    fn subsamples_have_no_repeats() {
        let plan = subsample_plan(10, 5, 3, 1).unwrap();
        for r in &plan.replicates {
            assert_eq!(r.in_sample.len(), 5);
            assert_eq!(r.out_of_sample.len(), 5);
            assert!(r.in_sample.windows(2).all(|w| w[0] < w[1]));
        }
    }
}
