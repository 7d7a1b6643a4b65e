//! Preprocess, fit, validate and plot, recording every artifact.

use std::collections::BTreeSet;

use survkit::bayes::{
    horseshoe_select, median_probability_model, posterior_summary, run_mcmc, select_by_ci, BaselineHazardPrior,
    McmcOptions, PosteriorPredictor, PosteriorSummary, PriorSpec,
};
use survkit::cox::CoxFit;
use survkit::dataset::{
    bootstrap_plan, filter_missingness, impute_knn, load_dataset, make_cv_folds, standardize, univariate_cox_screen,
    variance_preselect, write_dataset,
};
use survkit::metrics::{
    antolini_c, calibration_fit, harrell_c, prediction_error_curve, risk_group_logrank, time_dependent_auc, uno_c,
    CalibrationOptions, PredictedCurves, SurvivalModel,
};
use survkit::nonparametric::{censoring_km, km_estimate};
use survkit::penalized::{fit_adaptive_lasso, fit_cv_enet, fit_enet, lambda_path, LambdaPath, PathOptions, PenaltySpec};
use survkit::rng::derive_seed;
use survkit::{stats, SurvivalDataset};

use crate::config::{ModelKind, Preselect, RunConfig};
use crate::error::CliError;
use crate::output::OutputDir;
use crate::plot::{render, PlotKind};
use crate::report::*;

/// Seed streams derived from the master seed.
const STREAM_CV: u64 = 1;
const STREAM_MCMC: u64 = 2;
const STREAM_CALIBRATION: u64 = 3;
const STREAM_BOOTSTRAP: u64 = 4;

/// Draws kept for posterior predictive survival.
const PREDICTIVE_DRAWS: usize = 200;
/// Baseline gamma-prior concentration for the Bayesian models.
const BASELINE_CONCENTRATION: f64 = 2.0;

pub const REPORT_FILE: &str = "report.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Stage {
    Preprocess,
    Fit,
    Validate,
    Plots,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Preprocess => "preprocess",
            Stage::Fit => "fit",
            Stage::Validate => "validate",
            Stage::Plots => "plots",
        }
    }
}

/// A model ready for scoring, with the pieces needed to refit it.
pub enum FittedModel {
    Cox(CoxFit),
    Bayes(PosteriorPredictor),
}

impl FittedModel {
    fn as_model(&self) -> &dyn SurvivalModel {
        match self {
            FittedModel::Cox(f) => f,
            FittedModel::Bayes(p) => p,
        }
    }
}

struct Fitted {
    model: FittedModel,
    report: ModelReport,
    path: Option<LambdaPath>,
    chain_csv: Option<Vec<u8>>,
    model_json: String,
}

/// Runs every stage up to and including `last`, writing artifacts and the
/// report into the configured output directory. On failure the report is
/// still written, with the failing stage and the files emitted so far.
pub fn run_pipeline(cfg: &RunConfig, last: Stage) -> Result<RunReport, CliError> {
    let mut out = OutputDir::create(&cfg.out)?;
    let mut report = RunReport::new(cfg);
    let mut stage = Stage::Preprocess;
    let result = execute(cfg, last, &mut report, &mut out, &mut stage);
    if let Err(e) = &result {
        report.status = RunStatus::Failed;
        report.failed_stage = Some(stage.name().to_string());
        report.error = Some(e.to_string());
    }
    report.manifest = out.manifest.clone();
    let json = serde_json::to_string_pretty(&report)?;
    out.write_untracked(REPORT_FILE, json.as_bytes())?;
    result.map(|_| report)
}

fn execute(
    cfg: &RunConfig,
    last: Stage,
    report: &mut RunReport,
    out: &mut OutputDir,
    stage: &mut Stage,
) -> Result<(), CliError> {
    *stage = Stage::Preprocess;
    let ds = preprocess(cfg, report, out)?;
    report.completed_stages.push(stage.name().into());
    if last == Stage::Preprocess {
        return Ok(());
    }

    *stage = Stage::Fit;
    let fitted = fit_model(cfg, &ds, report)?;
    out.write("model.json", fitted.model_json.as_bytes())?;
    if let Some(path) = &fitted.path {
        out.write_with("path.csv", |b| path.write_csv(b))?;
        if let Some(cv) = &path.cv {
            out.write_with("cv.csv", |b| cv.write_csv(b))?;
        }
        report.plots.path = Some(path_plot(path, fitted.report.lambda));
    }
    if let Some(chain) = &fitted.chain_csv {
        out.write("chain.csv", chain)?;
    }
    report.model = Some(fitted.report.clone());
    report.completed_stages.push(stage.name().into());
    if last == Stage::Fit {
        return Ok(());
    }

    *stage = Stage::Validate;
    validate(cfg, &ds, &fitted.model, report, out)?;
    report.completed_stages.push(stage.name().into());
    if last == Stage::Validate {
        return Ok(());
    }

    *stage = Stage::Plots;
    emit_plots(&report.plots, &PlotKind::ALL, out, true)?;
    report.completed_stages.push(stage.name().into());
    Ok(())
}

fn names(ds: &SurvivalDataset) -> Vec<String> {
    ds.feature_names()
}

fn dropped(before: &SurvivalDataset, after: &SurvivalDataset) -> Vec<String> {
    let kept: BTreeSet<String> = names(after).into_iter().collect();
    names(before).into_iter().filter(|n| !kept.contains(n)).collect()
}

fn preprocess(cfg: &RunConfig, report: &mut RunReport, out: &mut OutputDir) -> Result<SurvivalDataset, CliError> {
    let data = cfg.input.data.as_ref().ok_or_else(|| CliError::Config("no input dataset".into()))?;
    let raw = load_dataset(data, cfg.input.meta.as_deref())?;
    let p = &cfg.preprocess;
    let mut summary = DataSummary {
        n: raw.n(),
        events: raw.n_events(),
        features_input: raw.p(),
        missing_cells: raw.n_missing(),
        ..DataSummary::default()
    };

    let filtered = filter_missingness(&raw, p.max_missing)?;
    summary.dropped_for_missingness = dropped(&raw, &filtered);
    let imputed = if filtered.has_missing() {
        impute_knn(&filtered, p.impute_k)?
    } else {
        filtered
    };
    let ds = match p.preselect {
        Preselect::Variance => {
            let kept = variance_preselect(&imputed, p.variance_fraction)?;
            summary.dropped_by_preselection = dropped(&imputed, &kept);
            standardize(&kept)
        }
        Preselect::Univariate => {
            let scaled = standardize(&imputed);
            let (kept, screen) = univariate_cox_screen(&scaled, p.screen_alpha)?;
            summary.dropped_by_preselection = dropped(&scaled, &kept);
            for e in screen.entries.iter().filter(|e| e.flagged) {
                report.warnings.push(format!(
                    "screening kept `{}` after a failed univariate fit{}",
                    e.name,
                    e.note.as_deref().map(|n| format!(": {n}")).unwrap_or_default()
                ));
            }
            kept
        }
        Preselect::None => standardize(&imputed),
    };
    if ds.p() == 0 {
        return Err(survkit::SurvError::InvalidData("no features left after preprocessing".into()).into());
    }
    summary.features_used = ds.p();

    let km = km_estimate(ds.outcomes())?;
    summary.median_survival = km.median_survival();
    summary.survival_at_horizons = cfg.validation.horizons.iter().map(|&h| (h, km.survival_at(h))).collect();
    out.write_with("km.csv", |b| km.write_csv(b))?;
    out.write_with("preprocessed.csv", |b| write_dataset(&ds, b))?;
    out.write("features.json", serde_json::to_string_pretty(ds.features())?.as_bytes())?;
    report.plots.km = Some(KmPlotData {
        times: km.times.clone(),
        survival: km.survival.clone(),
        last_time: ds.outcomes().iter().map(|o| o.time).fold(0.0, f64::max),
    });
    report.data = Some(summary);
    Ok(ds)
}

fn path_options(cfg: &RunConfig) -> PathOptions {
    PathOptions {
        n_lambda: cfg.model.n_lambda,
        ratio: cfg.model.lambda_ratio,
        ..PathOptions::default()
    }
}

fn cox_report(cfg: &RunConfig, fit: &CoxFit, lambda_1se: Option<f64>) -> ModelReport {
    let original = fit.original_scale_coefficients();
    ModelReport {
        kind: model_name(cfg.model.kind).into(),
        alpha: fit.penalty.map(|p| p.alpha),
        lambda: fit.penalty.map(|p| p.lambda),
        lambda_1se,
        selected: fit.selected().iter().map(|&j| fit.features[j].name.clone()).collect(),
        coefficients: fit
            .features
            .iter()
            .zip(&fit.coefficients)
            .zip(original)
            .map(|((f, &b), o)| CoefficientRow {
                name: f.name.clone(),
                mandatory: f.mandatory,
                coefficient: b,
                original_scale: Some(o),
                lower: None,
                upper: None,
                inclusion: None,
                kappa: None,
            })
            .collect(),
        acceptance: None,
    }
}

fn model_name(kind: ModelKind) -> &'static str {
    match kind {
        ModelKind::Lasso => "lasso",
        ModelKind::Enet => "enet",
        ModelKind::Adaptive => "adaptive",
        ModelKind::BayesLaplace => "bayes-laplace",
        ModelKind::Ssvs => "ssvs",
        ModelKind::Horseshoe => "horseshoe",
    }
}

/// The penalized fit alone, as re-run on every bootstrap sample.
fn penalized_fit(cfg: &RunConfig, ds: &SurvivalDataset) -> Result<(CoxFit, Option<LambdaPath>), CliError> {
    let opts = path_options(cfg);
    let alpha = cfg.model.effective_alpha();
    if let Some(lambda) = cfg.model.lambda {
        let fit = fit_enet(ds, &PenaltySpec::enet(lambda, alpha), None)?;
        return Ok((fit, None));
    }
    let events: Vec<bool> = ds.outcomes().iter().map(|o| o.event).collect();
    let plan = make_cv_folds(&events, cfg.validation.folds, derive_seed(cfg.seed, STREAM_CV))?;
    if cfg.model.kind == ModelKind::Adaptive {
        let a = fit_adaptive_lasso(ds, &plan, &opts)?;
        Ok((a.fit, Some(a.path)))
    } else {
        let (fit, path) = fit_cv_enet(ds, alpha, None, &plan, &opts)?;
        Ok((fit, Some(path)))
    }
}

fn prior_for(cfg: &RunConfig) -> PriorSpec {
    match cfg.model.kind {
        ModelKind::BayesLaplace => match cfg.model.lambda {
            Some(l) => PriorSpec::laplace_fixed(l),
            None => PriorSpec::laplace(),
        },
        ModelKind::Ssvs => PriorSpec::spike_slab(),
        _ => PriorSpec::horseshoe(),
    }
}

fn bayes_fit(cfg: &RunConfig, ds: &SurvivalDataset) -> Result<(PosteriorPredictor, survkit::bayes::PosteriorSamples), CliError> {
    let baseline = BaselineHazardPrior::from_data(ds, cfg.model.baseline_intervals, BASELINE_CONCENTRATION)?;
    let opts = McmcOptions {
        iterations: cfg.model.iterations,
        burn_in: cfg.model.burn_in,
        seed: derive_seed(cfg.seed, STREAM_MCMC),
        ..McmcOptions::default()
    };
    let samples = run_mcmc(ds, &prior_for(cfg), &baseline, &opts)?;
    Ok((PosteriorPredictor::from_samples(&samples, PREDICTIVE_DRAWS)?, samples))
}

fn bayes_report(cfg: &RunConfig, summary: &PosteriorSummary, acceptance: Vec<f64>) -> Result<ModelReport, CliError> {
    let selection = match cfg.model.kind {
        ModelKind::Ssvs => median_probability_model(summary)?,
        ModelKind::Horseshoe => horseshoe_select(summary, cfg.model.horseshoe_cutoff)?,
        _ => select_by_ci(summary),
    };
    Ok(ModelReport {
        kind: model_name(cfg.model.kind).into(),
        alpha: None,
        lambda: cfg.model.lambda,
        lambda_1se: None,
        selected: selection.selected,
        coefficients: summary
            .coefficients
            .iter()
            .map(|c| CoefficientRow {
                name: c.name.clone(),
                mandatory: c.mandatory,
                coefficient: c.mean,
                original_scale: None,
                lower: Some(c.lower),
                upper: Some(c.upper),
                inclusion: c.inclusion,
                kappa: c.kappa,
            })
            .collect(),
        acceptance: Some(acceptance),
    })
}

fn fit_model(cfg: &RunConfig, ds: &SurvivalDataset, report: &mut RunReport) -> Result<Fitted, CliError> {
    if cfg.model.kind.is_bayesian() {
        let (predictor, samples) = bayes_fit(cfg, ds)?;
        let summary = posterior_summary(&samples, cfg.model.credible_level)?;
        let mut chain = Vec::new();
        samples.write_csv(&mut chain)?;
        let model_report = bayes_report(cfg, &summary, samples.acceptance.clone())?;
        return Ok(Fitted {
            model: FittedModel::Bayes(predictor),
            report: model_report,
            path: None,
            chain_csv: Some(chain),
            model_json: summary.to_json()?,
        });
    }
    let (fit, path) = penalized_fit(cfg, ds)?;
    // a fixed-lambda fit still gets a path for the coefficient plot
    let path = match path {
        Some(p) => p,
        None => lambda_path(ds, cfg.model.effective_alpha(), None, &path_options(cfg))?,
    };
    report.warnings.extend(path.warnings.iter().cloned());
    if let Some(cv) = &path.cv {
        report.warnings.extend(cv.warnings.iter().cloned());
    }
    let lambda_1se = path.cv.as_ref().map(|cv| cv.lambda_1se);
    Ok(Fitted {
        report: cox_report(cfg, &fit, lambda_1se),
        model_json: serde_json::to_string_pretty(&fit)?,
        model: FittedModel::Cox(fit),
        path: Some(path),
        chain_csv: None,
    })
}

fn path_plot(path: &LambdaPath, selected: Option<f64>) -> PathPlotData {
    PathPlotData {
        lambdas: path.lambdas.clone(),
        features: path.fits.first().map(|f| f.feature_names()).unwrap_or_default(),
        coefficients: path.fits.iter().map(|f| f.coefficients.clone()).collect(),
        selected_lambda: selected,
    }
}

fn horizon_file(prefix: &str, h: f64) -> String {
    format!("{prefix}_t{h}.csv")
}

fn skip(metrics: &mut MetricsReport, metric: String, err: impl std::fmt::Display) {
    metrics.skipped.push(SkippedMetric {
        metric,
        reason: err.to_string(),
    });
}

fn validate(
    cfg: &RunConfig,
    ds: &SurvivalDataset,
    model: &FittedModel,
    report: &mut RunReport,
    out: &mut OutputDir,
) -> Result<(), CliError> {
    let v = &cfg.validation;
    let outcomes = ds.outcomes();
    let m = model.as_model();
    let scores = m.risk_scores(ds)?;
    let censoring = censoring_km(outcomes)?;
    let tau = v
        .tau
        .unwrap_or_else(|| stats::quantile(&outcomes.iter().map(|o| o.time).collect::<Vec<_>>(), 0.8));
    let mut metrics = MetricsReport {
        tau,
        ..MetricsReport::default()
    };

    match harrell_c(&scores, outcomes) {
        Ok(r) => metrics.harrell_c = Some(r.c_index),
        Err(e) => skip(&mut metrics, "harrell_c".into(), e),
    }
    match uno_c(&scores, outcomes, &censoring, tau) {
        Ok(r) => metrics.uno_c = Some(r.c_index),
        Err(e) => skip(&mut metrics, "uno_c".into(), e),
    }
    match PredictedCurves::at_event_times(m, ds).and_then(|c| antolini_c(&c, outcomes)) {
        Ok(r) => metrics.antolini_c = Some(r.c_index),
        Err(e) => skip(&mut metrics, "antolini_c".into(), e),
    }
    match risk_group_logrank(&scores, outcomes, &[0.5]) {
        Ok(r) => {
            metrics.median_split_logrank = Some(LogRankSummary {
                statistic: r.statistic,
                df: r.df,
                p_value: r.p_value,
            })
        }
        Err(e) => skip(&mut metrics, "median_split_logrank".into(), e),
    }

    let cal_opts = CalibrationOptions {
        groups: v.calibration_groups,
        bootstrap: v.calibration_bootstrap,
        level: 0.95,
        seed: derive_seed(cfg.seed, STREAM_CALIBRATION),
    };
    for &h in &v.horizons {
        let mut hm = HorizonMetrics {
            horizon: h,
            auc: None,
            brier: None,
            calibration_intercept: None,
            calibration_slope: None,
        };
        match time_dependent_auc(&scores, outcomes, h, &censoring) {
            Ok(r) => {
                hm.auc = Some(r.auc);
                out.write_with(&horizon_file("roc", h), |b| r.write_roc_csv(b))?;
                report.plots.roc.push(RocPlotData {
                    horizon: h,
                    auc: r.auc,
                    points: r.roc.clone(),
                });
            }
            Err(e) => skip(&mut metrics, format!("auc_t{h}"), e),
        }
        let pred = m.survival_at(ds, h)?;
        match survkit::metrics::brier_score(&pred, outcomes, h, &censoring) {
            Ok(b) => hm.brier = Some(b),
            Err(e) => skip(&mut metrics, format!("brier_t{h}"), e),
        }
        match calibration_fit(&pred, outcomes, h, &cal_opts) {
            Ok(r) => {
                hm.calibration_intercept = Some(r.intercept);
                hm.calibration_slope = Some(r.slope);
                out.write_with(&horizon_file("calibration", h), |b| r.write_csv(b))?;
                report.plots.calibration.push(CalibrationPlotData {
                    horizon: h,
                    groups: r.groups.clone(),
                });
            }
            Err(e) => skip(&mut metrics, format!("calibration_t{h}"), e),
        }
        metrics.horizons.push(hm);
    }

    let grid: Vec<f64> = (0..=v.grid_points).map(|k| tau * k as f64 / v.grid_points as f64).collect();
    let plan = bootstrap_plan(ds.n(), v.bootstrap, derive_seed(cfg.seed, STREAM_BOOTSTRAP))?;
    let fitter = |train: &SurvivalDataset| -> survkit::Result<Box<dyn SurvivalModel>> {
        if cfg.model.kind.is_bayesian() {
            let (p, _) = bayes_fit(cfg, train).map_err(into_surv)?;
            Ok(Box::new(p))
        } else {
            let (fit, _) = penalized_fit(cfg, train).map_err(into_surv)?;
            Ok(Box::new(fit))
        }
    };
    let pec = prediction_error_curve(ds, &fitter, &plan, &grid)?;
    report.warnings.extend(pec.warnings.iter().cloned());
    let (ibs_null, ibs_app, ibs_dot) = pec.integrated(tau)?;
    metrics.ibs_null = Some(ibs_null);
    metrics.ibs_apparent = Some(ibs_app);
    metrics.ibs_dot632plus = Some(ibs_dot);
    metrics.bootstrap_used = pec.replicates_used;
    metrics.bootstrap_total = pec.replicates_total;
    out.write_with("pec.csv", |b| pec.write_csv(b))?;
    report.plots.pec = Some(PecPlotData {
        times: pec.times.clone(),
        null: pec.null.clone(),
        apparent: pec.apparent.clone(),
        dot632plus: pec.dot632plus.clone(),
        oob_q025: pec.oob_q025.clone(),
        oob_q975: pec.oob_q975.clone(),
    });
    report.metrics = Some(metrics);
    Ok(())
}

fn into_surv(e: CliError) -> survkit::SurvError {
    match e {
        CliError::Survival(s) => s,
        other => survkit::SurvError::InvalidParameter(other.to_string()),
    }
}

/// Writes one SVG per requested kind. With `skip_missing`, kinds without
/// data are passed over instead of failing.
pub fn emit_plots(data: &PlotData, kinds: &[PlotKind], out: &mut OutputDir, skip_missing: bool) -> Result<(), CliError> {
    for &kind in kinds {
        if skip_missing && !kind.available(data) {
            continue;
        }
        let svg = render(kind, data)?;
        out.write(&format!("{}.svg", kind.name()), svg.as_bytes())?;
    }
    Ok(())
}

/// Re-renders plots of an existing run and refreshes its manifest.
pub fn rerender_plots(dir: &std::path::Path, kinds: &[PlotKind]) -> Result<RunReport, CliError> {
    let path = dir.join(REPORT_FILE);
    let text = std::fs::read_to_string(&path).map_err(|e| CliError::Report(format!("{}: {e}", path.display())))?;
    let mut report: RunReport = serde_json::from_str(&text).map_err(|e| CliError::Report(e.to_string()))?;
    let mut out = OutputDir::with_manifest(dir, report.manifest.clone());
    let kinds: Vec<PlotKind> = if kinds.is_empty() {
        PlotKind::ALL.iter().copied().filter(|k| k.available(&report.plots)).collect()
    } else {
        kinds.to_vec()
    };
    emit_plots(&report.plots, &kinds, &mut out, false)?;
    report.manifest = out.manifest.clone();
    out.write_untracked(REPORT_FILE, serde_json::to_string_pretty(&report)?.as_bytes())?;
    Ok(report)
}
