//! Self-contained SVG charts built from the report's plot data.

use std::fmt::Write as _;

use clap::ValueEnum;
use serde::{Deserialize, Serialize};

use crate::error::CliError;
use crate::report::PlotData;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum PlotKind {
    Km,
    Path,
    Pec,
    Roc,
    Calibration,
}

impl PlotKind {
    pub const ALL: [PlotKind; 5] = [PlotKind::Km, PlotKind::Path, PlotKind::Pec, PlotKind::Roc, PlotKind::Calibration];

    pub fn name(self) -> &'static str {
        match self {
            PlotKind::Km => "km",
            PlotKind::Path => "path",
            PlotKind::Pec => "pec",
            PlotKind::Roc => "roc",
            PlotKind::Calibration => "calibration",
        }
    }

    pub fn available(self, data: &PlotData) -> bool {
        match self {
            PlotKind::Km => data.km.is_some(),
            PlotKind::Path => data.path.is_some(),
            PlotKind::Pec => data.pec.is_some(),
            PlotKind::Roc => !data.roc.is_empty(),
            PlotKind::Calibration => !data.calibration.is_empty(),
        }
    }
}

const PALETTE: [&str; 10] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b", "#e377c2", "#bcbd22", "#7f7f7f",
];

const WIDTH: f64 = 680.0;
const HEIGHT: f64 = 440.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 190.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 55.0;

#[derive(Debug, Clone, Copy, PartialEq)]
enum Style {
    Line,
    Step,
    Points,
}

struct Series {
    label: Option<String>,
    color: &'static str,
    style: Style,
    dashed: bool,
    points: Vec<(f64, f64)>,
}

struct Segment {
    from: (f64, f64),
    to: (f64, f64),
    color: &'static str,
    dashed: bool,
}

struct Chart {
    title: String,
    x_label: String,
    y_label: String,
    x_range: (f64, f64),
    y_range: (f64, f64),
    series: Vec<Series>,
    segments: Vec<Segment>,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn tick_label(v: f64) -> String {
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".into() } else { s.into() }
}

fn padded_range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        return (lo - 0.5, hi + 0.5);
    }
    let pad = 0.05 * (hi - lo);
    (lo - pad, hi + pad)
}

impl Chart {
    fn new(title: &str, x_label: &str, y_label: &str, x_range: (f64, f64), y_range: (f64, f64)) -> Self {
        Self {
            title: title.into(),
            x_label: x_label.into(),
            y_label: y_label.into(),
            x_range,
            y_range,
            series: Vec::new(),
            segments: Vec::new(),
        }
    }

    fn sx(&self, x: f64) -> f64 {
        let (a, b) = self.x_range;
        LEFT + (x - a) / (b - a) * (WIDTH - LEFT - RIGHT)
    }

    fn sy(&self, y: f64) -> f64 {
        let (a, b) = self.y_range;
        HEIGHT - BOTTOM - (y - a) / (b - a) * (HEIGHT - TOP - BOTTOM)
    }

    fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
            (LEFT + WIDTH - RIGHT) / 2.0,
            escape(&self.title)
        );
        self.axes(&mut s);
        for seg in &self.segments {
            let _ = writeln!(
                s,
                r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{}" stroke-width="1"{}/>"#,
                self.sx(seg.from.0),
                self.sy(seg.from.1),
                self.sx(seg.to.0),
                self.sy(seg.to.1),
                seg.color,
                if seg.dashed { r#" stroke-dasharray="4 3""# } else { "" }
            );
        }
        for (k, series) in self.series.iter().enumerate() {
            self.draw_series(&mut s, k, series);
        }
        self.legend(&mut s);
        s.push_str("</svg>\n");
        s
    }

    fn axes(&self, s: &mut String) {
        let (x0, x1) = (self.sx(self.x_range.0), self.sx(self.x_range.1));
        let (y0, y1) = (self.sy(self.y_range.0), self.sy(self.y_range.1));
        let _ = writeln!(
            s,
            r#"<rect x="{x0:.2}" y="{y1:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="black"/>"#,
            x1 - x0,
            y0 - y1
        );
        for i in 0..=5 {
            let f = i as f64 / 5.0;
            let xv = self.x_range.0 + f * (self.x_range.1 - self.x_range.0);
            let yv = self.y_range.0 + f * (self.y_range.1 - self.y_range.0);
            let (px, py) = (self.sx(xv), self.sy(yv));
            let _ = writeln!(
                s,
                r#"<line x1="{px:.2}" y1="{y0:.2}" x2="{px:.2}" y2="{:.2}" stroke="black"/><text x="{px:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
                y0 + 5.0,
                y0 + 18.0,
                tick_label(xv)
            );
            let _ = writeln!(
                s,
                r#"<line x1="{:.2}" y1="{py:.2}" x2="{x0:.2}" y2="{py:.2}" stroke="black"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
                x0 - 5.0,
                x0 - 8.0,
                py + 4.0,
                tick_label(yv)
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            (x0 + x1) / 2.0,
            HEIGHT - 12.0,
            escape(&self.x_label)
        );
        let _ = writeln!(
            s,
            r#"<text x="18" y="{:.2}" text-anchor="middle" transform="rotate(-90 18 {:.2})">{}</text>"#,
            (y0 + y1) / 2.0,
            (y0 + y1) / 2.0,
            escape(&self.y_label)
        );
    }

    fn draw_series(&self, s: &mut String, k: usize, series: &Series) {
        if series.points.is_empty() {
            return;
        }
        let dash = if series.dashed { r#" stroke-dasharray="6 4""# } else { "" };
        match series.style {
            Style::Points => {
                for &(x, y) in &series.points {
                    let _ = writeln!(
                        s,
                        r#"<circle class="series-{k}" cx="{:.2}" cy="{:.2}" r="4" fill="{}"/>"#,
                        self.sx(x),
                        self.sy(y),
                        series.color
                    );
                }
            }
            Style::Line | Style::Step => {
                let (x, y) = series.points[0];
                let mut d = format!("M {:.2} {:.2}", self.sx(x), self.sy(y));
                let mut prev_y = y;
                for &(x, y) in &series.points[1..] {
                    if series.style == Style::Step {
                        let _ = write!(d, " H {:.2}", self.sx(x));
                        if y != prev_y {
                            let _ = write!(d, " V {:.2}", self.sy(y));
                        }
                    } else {
                        let _ = write!(d, " L {:.2} {:.2}", self.sx(x), self.sy(y));
                    }
                    prev_y = y;
                }
                let _ = writeln!(
                    s,
                    r#"<path class="series-{k}" d="{d}" fill="none" stroke="{}" stroke-width="1.8"{dash}/>"#,
                    series.color
                );
            }
        }
    }

    fn legend(&self, s: &mut String) {
        let x = WIDTH - RIGHT + 15.0;
        let mut y = TOP + 10.0;
        for series in &self.series {
            let Some(label) = &series.label else { continue };
            let _ = writeln!(
                s,
                r#"<line x1="{x:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="{}" stroke-width="2.5"{}/><text class="legend" x="{:.2}" y="{:.2}">{}</text>"#,
                x + 22.0,
                series.color,
                if series.dashed { r#" stroke-dasharray="6 4""# } else { "" },
                x + 28.0,
                y + 4.0,
                escape(label)
            );
            y += 18.0;
        }
    }
}

fn missing(kind: PlotKind) -> CliError {
    CliError::MissingPlotData(kind.name().to_string())
}

pub fn render(kind: PlotKind, data: &PlotData) -> Result<String, CliError> {
    if !kind.available(data) {
        return Err(missing(kind));
    }
    Ok(match kind {
        PlotKind::Km => km_chart(data),
        PlotKind::Path => path_chart(data),
        PlotKind::Pec => pec_chart(data),
        PlotKind::Roc => roc_chart(data),
        PlotKind::Calibration => calibration_chart(data),
    }
    .render())
}

fn km_chart(data: &PlotData) -> Chart {
    let km = data.km.as_ref().expect("checked by caller");
    let mut points = vec![(0.0, 1.0)];
    points.extend(km.times.iter().copied().zip(km.survival.iter().copied()));
    let end = km.last_time.max(km.times.last().copied().unwrap_or(0.0));
    let last = points.last().map_or(1.0, |p| p.1);
    if end > points.last().map_or(0.0, |p| p.0) {
        points.push((end, last));
    }
    let mut c = Chart::new("Kaplan-Meier estimate", "time", "survival probability", (0.0, end.max(1e-9)), (0.0, 1.0));
    c.series.push(Series {
        label: Some("Kaplan-Meier".into()),
        color: PALETTE[0],
        style: Style::Step,
        dashed: false,
        points,
    });
    c
}

fn path_chart(data: &PlotData) -> Chart {
    let path = data.path.as_ref().expect("checked by caller");
    let xs: Vec<f64> = path.lambdas.iter().map(|l| l.log10()).collect();
    let ys = path.coefficients.iter().flatten().copied();
    let mut c = Chart::new(
        "Coefficient path",
        "log10(lambda)",
        "coefficient",
        padded_range(xs.iter().copied()),
        padded_range(ys),
    );
    let labelled = path.features.len() <= 10;
    for (j, name) in path.features.iter().enumerate() {
        c.series.push(Series {
            label: labelled.then(|| name.clone()),
            color: PALETTE[j % PALETTE.len()],
            style: Style::Line,
            dashed: false,
            points: xs.iter().zip(&path.coefficients).map(|(&x, row)| (x, row[j])).collect(),
        });
    }
    if let Some(l) = path.selected_lambda {
        let x = l.log10();
        c.segments.push(Segment {
            from: (x, c.y_range.0),
            to: (x, c.y_range.1),
            color: "#444444",
            dashed: true,
        });
    }
    c
}

fn pec_chart(data: &PlotData) -> Chart {
    let pec = data.pec.as_ref().expect("checked by caller");
    let top = pec
        .null
        .iter()
        .chain(&pec.apparent)
        .chain(&pec.dot632plus)
        .chain(&pec.oob_q975)
        .copied()
        .fold(0.0, f64::max);
    let end = pec.times.last().copied().unwrap_or(1.0);
    let start = pec.times.first().copied().unwrap_or(0.0);
    let mut c = Chart::new(
        "Prediction error curves",
        "time",
        "Brier score",
        (start, if end > start { end } else { start + 1.0 }),
        (0.0, (top * 1.1).max(0.05)),
    );
    let line = |label: &str, color, dashed, ys: &[f64]| Series {
        label: Some(label.into()),
        color,
        style: Style::Line,
        dashed,
        points: pec.times.iter().copied().zip(ys.iter().copied()).collect(),
    };
    c.series.push(line("Null model", "#7f7f7f", false, &pec.null));
    c.series.push(line("Apparent", PALETTE[0], false, &pec.apparent));
    c.series.push(line(".632+", PALETTE[1], false, &pec.dot632plus));
    c.series.push(line("OOB 2.5%", "#e8a0a0", true, &pec.oob_q025));
    c.series.push(line("OOB 97.5%", "#e8a0a0", true, &pec.oob_q975));
    c
}

fn roc_chart(data: &PlotData) -> Chart {
    let mut c = Chart::new("Time-dependent ROC", "false positive rate", "true positive rate", (0.0, 1.0), (0.0, 1.0));
    c.segments.push(Segment {
        from: (0.0, 0.0),
        to: (1.0, 1.0),
        color: "#999999",
        dashed: true,
    });
    for (k, roc) in data.roc.iter().enumerate() {
        c.series.push(Series {
            label: Some(format!("t = {} (AUC {:.3})", tick_label(roc.horizon), roc.auc)),
            color: PALETTE[k % PALETTE.len()],
            style: Style::Line,
            dashed: false,
            points: roc.points.clone(),
        });
    }
    c
}

fn calibration_chart(data: &PlotData) -> Chart {
    let mut c = Chart::new(
        "Calibration",
        "predicted survival",
        "observed survival (Kaplan-Meier)",
        (0.0, 1.0),
        (0.0, 1.0),
    );
    c.segments.push(Segment {
        from: (0.0, 0.0),
        to: (1.0, 1.0),
        color: "#999999",
        dashed: true,
    });
    for (k, cal) in data.calibration.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        for g in &cal.groups {
            if g.ci_lo.is_finite() && g.ci_hi.is_finite() {
                c.segments.push(Segment {
                    from: (g.predicted, g.ci_lo),
                    to: (g.predicted, g.ci_hi),
                    color,
                    dashed: false,
                });
            }
        }
        c.series.push(Series {
            label: Some(format!("t = {}", tick_label(cal.horizon))),
            color,
            style: Style::Points,
            dashed: false,
            points: cal.groups.iter().map(|g| (g.predicted, g.observed)).collect(),
        });
    }
    c
}
