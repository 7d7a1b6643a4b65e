//! The run report: configuration echo, results, plot data and file manifest.

use serde::{Deserialize, Serialize};
use survkit::metrics::CalibrationGroup;

use crate::config::RunConfig;
use crate::output::ManifestEntry;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolInfo {
    pub name: String,
    pub version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Ok,
    Failed,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DataSummary {
    pub n: usize,
    pub events: usize,
    pub features_input: usize,
    pub features_used: usize,
    pub missing_cells: usize,
    pub dropped_for_missingness: Vec<String>,
    pub dropped_by_preselection: Vec<String>,
    pub median_survival: Option<f64>,
    /// Kaplan-Meier survival at each horizon.
    pub survival_at_horizons: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientRow {
    pub name: String,
    pub mandatory: bool,
    /// Standardized scale (posterior mean for Bayesian models).
    pub coefficient: f64,
    pub original_scale: Option<f64>,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    pub inclusion: Option<f64>,
    pub kappa: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelReport {
    pub kind: String,
    pub alpha: Option<f64>,
    pub lambda: Option<f64>,
    pub lambda_1se: Option<f64>,
    pub selected: Vec<String>,
    pub coefficients: Vec<CoefficientRow>,
    /// Posterior acceptance rates per coefficient.
    pub acceptance: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedMetric {
    pub metric: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HorizonMetrics {
    pub horizon: f64,
    pub auc: Option<f64>,
    pub brier: Option<f64>,
    pub calibration_intercept: Option<f64>,
    pub calibration_slope: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRankSummary {
    pub statistic: f64,
    pub df: usize,
    pub p_value: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub tau: f64,
    pub harrell_c: Option<f64>,
    pub uno_c: Option<f64>,
    pub antolini_c: Option<f64>,
    pub median_split_logrank: Option<LogRankSummary>,
    pub horizons: Vec<HorizonMetrics>,
    pub ibs_null: Option<f64>,
    pub ibs_apparent: Option<f64>,
    pub ibs_dot632plus: Option<f64>,
    pub bootstrap_used: usize,
    pub bootstrap_total: usize,
    pub skipped: Vec<SkippedMetric>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KmPlotData {
    pub times: Vec<f64>,
    pub survival: Vec<f64>,
    pub last_time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathPlotData {
    pub lambdas: Vec<f64>,
    pub features: Vec<String>,
    /// `coefficients[k][j]`: feature `j` at `lambdas[k]`.
    pub coefficients: Vec<Vec<f64>>,
    pub selected_lambda: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PecPlotData {
    pub times: Vec<f64>,
    pub null: Vec<f64>,
    pub apparent: Vec<f64>,
    pub dot632plus: Vec<f64>,
    pub oob_q025: Vec<f64>,
    pub oob_q975: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocPlotData {
    pub horizon: f64,
    pub auc: f64,
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationPlotData {
    pub horizon: f64,
    pub groups: Vec<CalibrationGroup>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PlotData {
    pub km: Option<KmPlotData>,
    pub path: Option<PathPlotData>,
    pub pec: Option<PecPlotData>,
    pub roc: Vec<RocPlotData>,
    pub calibration: Vec<CalibrationPlotData>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub tool: ToolInfo,
    pub status: RunStatus,
    pub completed_stages: Vec<String>,
    pub failed_stage: Option<String>,
    pub error: Option<String>,
    pub config: RunConfig,
    pub data: Option<DataSummary>,
    pub model: Option<ModelReport>,
    pub metrics: Option<MetricsReport>,
    pub plots: PlotData,
    pub warnings: Vec<String>,
    /// Every file written next to the report, with its SHA-256.
    pub manifest: Vec<ManifestEntry>,
}

impl RunReport {
    pub fn new(config: &RunConfig) -> Self {
        Self {
            tool: ToolInfo {
                name: "survkit".into(),
                version: env!("CARGO_PKG_VERSION").into(),
            },
            status: RunStatus::Ok,
            completed_stages: Vec::new(),
            failed_stage: None,
            error: None,
            config: config.clone(),
            data: None,
            model: None,
            metrics: None,
            plots: PlotData::default(),
            warnings: Vec::new(),
            manifest: Vec::new(),
        }
    }
}
