use nalgebra::DMatrix;
use proptest::prelude::*;
use survkit::cox::fit_cox_newton;
use survkit::dataset::{load_dataset, make_cv_folds, read_dataset, standardize, write_dataset, FeatureMeta};
use survkit::metrics::{harrell_c, SurvivalModel};
use survkit::penalized::{fit_cv_enet, fit_enet, PathOptions, PenaltySpec};
use survkit::synth::CoxGenerator;
use survkit::SurvivalDataset;

fn with_duplicate(ds: &SurvivalDataset, col: usize) -> SurvivalDataset {
    let x = ds.covariates();
    let dup = DMatrix::from_fn(ds.n(), ds.p() + 1, |i, j| if j < ds.p() { x[(i, j)] } else { x[(i, col)] });
    let mut features = ds.features().to_vec();
    features.push(FeatureMeta::new("copy"));
    SurvivalDataset::new(ds.outcomes().to_vec(), dup, features).unwrap()
}

#[test]
fn csv_round_trip_preserves_data() {
    let ds = CoxGenerator::three_signal(40, 4).generate(3);
    let mut buf = Vec::new();
    write_dataset(&ds, &mut buf).unwrap();
    let back = read_dataset(buf.as_slice(), None).unwrap();
    assert_eq!(back.outcomes(), ds.outcomes());
    assert_eq!(back.covariates(), ds.covariates());

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("data.csv");
    std::fs::write(&path, &buf).unwrap();
    let loaded = load_dataset(&path, None).unwrap();
    assert_eq!(loaded.feature_names(), ds.feature_names());
}

#[test]
fn cross_validated_lasso_workflow() {
    let ds = standardize(&CoxGenerator::three_signal(200, 20).generate(8));
    let events: Vec<bool> = ds.outcomes().iter().map(|o| o.event).collect();
    let plan = make_cv_folds(&events, 5, 1).unwrap();
    let (fit, path) = fit_cv_enet(&ds, 1.0, None, &plan, &PathOptions::default()).unwrap();
    assert!(path.cv.is_some());
    for j in 0..3 {
        assert!(fit.selected().contains(&j), "signal {j} dropped");
    }
    let scores = fit.risk_scores(&ds).unwrap();
    assert!(harrell_c(&scores, ds.outcomes()).unwrap().c_index > 0.7);
    let surv = fit.survival_at(&ds, 5.0).unwrap();
    assert!(surv.iter().all(|s| (0.0..=1.0).contains(s)));
}

#[test]
fn elastic_net_splits_a_duplicated_column_evenly() {
    let ds = standardize(&CoxGenerator::new(120, 3, vec![0.8, 0.0, -0.4]).generate(5));
    let dup = with_duplicate(&ds, 0);
    let fit = fit_enet(&dup, &PenaltySpec::enet(0.05, 0.5), None).unwrap();
    let b = &fit.coefficients;
    assert!(b[0] != 0.0);
    assert!((b[0] - b[3]).abs() < 1e-6, "{b:?}");
}

#[test]
fn unpenalized_fit_matches_newton_on_standardized_data() {
    let ds = standardize(&CoxGenerator::new(80, 3, vec![0.5, -0.5, 0.0]).generate(2));
    let newton = fit_cox_newton(&ds, &[0, 1, 2]).unwrap();
    let enet = fit_enet(&ds, &PenaltySpec::lasso(0.0), None).unwrap();
    for (a, b) in newton.coefficients.iter().zip(&enet.coefficients) {
        assert!((a - b).abs() < 1e-6);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn enet_is_equivariant_under_column_permutation(
        seed in 0u64..500,
        perm in Just(vec![0usize, 1, 2, 3, 4]).prop_shuffle(),
        lambda in 0.01f64..0.3,
        alpha in 0.2f64..=1.0,
    ) {
        let ds = standardize(&CoxGenerator::new(60, 5, vec![0.7, -0.5, 0.3]).generate(seed));
        let spec = PenaltySpec::enet(lambda, alpha);
        let base = fit_enet(&ds, &spec, None).unwrap();
        let permuted = fit_enet(&ds.select_features(&perm), &spec, None).unwrap();
        for (k, &j) in perm.iter().enumerate() {
            prop_assert!((permuted.coefficients[k] - base.coefficients[j]).abs() < 1e-6);
        }
    }

    #[test]
    fn duplicated_columns_get_equal_coefficients(seed in 0u64..500, lambda in 0.01f64..0.2, alpha in 0.1f64..0.9) {
        let ds = standardize(&CoxGenerator::new(60, 3, vec![0.8, -0.4]).generate(seed));
        let fit = fit_enet(&with_duplicate(&ds, 1), &PenaltySpec::enet(lambda, alpha), None).unwrap();
        prop_assert!((fit.coefficients[1] - fit.coefficients[3]).abs() < 1e-6);
    }
}
