//! Serializable fit reports and their renderings: JSON, a fixed-width table,
//! plot-ready TSV and a standalone SVG chart.
//!
//! JSON keys follow struct field order, so output is stable across runs.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::compare::{test_interactions, ComparisonResult, DeltaTest};
use crate::inference::{InferenceReport, SelectionTrace};
use crate::model::{SegmentSummary, SegmentedModel};
use crate::scalar::Scalar;
use crate::series::{AnnualSeries, LogSeries};
use crate::solver::{FitConfig, FitResult, Termination};

/// What went into a fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputDigest {
    pub file: String,
    pub label: String,
    pub n_points: usize,
    /// Points actually used after dropping zero counts.
    pub n_used: usize,
    pub first_year: i32,
    pub last_year: i32,
    pub dropped_years: Vec<i32>,
}

impl InputDigest {
    pub fn new<T: Scalar>(file: impl Into<String>, series: &AnnualSeries<T>, log: &LogSeries<T>) -> Self {
        Self {
            file: file.into(),
            label: series.label().to_owned(),
            n_points: series.len(),
            n_used: log.len(),
            first_year: series.first_year(),
            last_year: series.last_year(),
            dropped_years: log.dropped_years().to_vec(),
        }
    }
}

/// Optimizer diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics<T> {
    pub sse: T,
    pub n_obs: usize,
    pub n_params: usize,
    pub converged: bool,
    pub termination: Termination,
    pub iterations: usize,
    pub starts_tried: usize,
    pub ridge_used: bool,
}

impl<T: Scalar> FitDiagnostics<T> {
    pub fn from_fit(fit: &FitResult<T>) -> Self {
        Self {
            sse: fit.sse,
            n_obs: fit.n_obs,
            n_params: fit.n_params,
            converged: fit.converged,
            termination: fit.termination,
            iterations: fit.iterations,
            starts_tried: fit.starts_tried,
            ridge_used: fit.ridge_used,
        }
    }
}

/// Observed and fitted values for one year.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRow<T> {
    pub year: i32,
    pub observed_count: T,
    pub predicted_count: T,
    /// `None` for zero counts.
    pub log_observed: Option<T>,
    pub log_predicted: T,
    /// 1-based.
    pub segment_index: usize,
}

/// One series, one fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Scalar"))]
pub struct Report<T> {
    pub input: InputDigest,
    pub config: FitConfig<T>,
    pub model: SegmentedModel<T>,
    /// `exp(b₀)`, the count at the origin year, when an intercept was fitted.
    pub exp_intercept: Option<T>,
    pub segments: Vec<SegmentSummary<T>>,
    pub diagnostics: FitDiagnostics<T>,
    pub inference: Option<InferenceReport<T>>,
    /// Set when inference could not be computed.
    pub inference_error: Option<String>,
    pub selection: Option<SelectionTrace<T>>,
    pub predictions: Vec<PredictionRow<T>>,
}

fn prediction_rows<T: Scalar>(model: &SegmentedModel<T>, series: &AnnualSeries<T>) -> Vec<PredictionRow<T>> {
    series
        .observations()
        .iter()
        .map(|o| {
            let x = T::year(o.year);
            let log_predicted = model.eval_log(x);
            PredictionRow {
                year: o.year,
                observed_count: o.count,
                predicted_count: log_predicted.exp(),
                log_observed: (o.count > T::zero()).then(|| o.count.ln()),
                log_predicted,
                segment_index: model.segment_of(x) + 1,
            }
        })
        .collect()
}

impl<T: Scalar> Report<T> {
    pub fn new(
        input: InputDigest,
        series: &AnnualSeries<T>,
        config: FitConfig<T>,
        fit: &FitResult<T>,
        inference: crate::error::Result<InferenceReport<T>>,
        selection: Option<SelectionTrace<T>>,
    ) -> Self {
        let (inference, inference_error) = match inference {
            Ok(r) => (Some(r), None),
            Err(e) => (None, Some(e.to_string())),
        };
        Self {
            input,
            config,
            exp_intercept: fit.model.intercept().map(|b0| b0.exp()),
            segments: fit.model.summarize(),
            diagnostics: FitDiagnostics::from_fit(fit),
            predictions: prediction_rows(&fit.model, series),
            model: fit.model.clone(),
            inference,
            inference_error,
            selection,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Parameter table with growth rates and doubling times per slope.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{} ({} points, {}..{})",
            self.input.label, self.input.n_used, self.input.first_year, self.input.last_year
        );
        if !self.input.dropped_years.is_empty() {
            let _ = writeln!(out, "dropped zero-count years: {:?}", self.input.dropped_years);
        }
        if self.model.origin() != T::zero() {
            let _ = writeln!(out, "time origin: {}", self.model.origin());
        }
        out.push('\n');
        out.push_str(&parameter_table(&self.model, self.inference.as_ref(), &self.segments));
        if let Some(e) = self.exp_intercept {
            let _ = writeln!(out, "exp(b0) = {}", fmt_num(e.as_f64(), 2));
        }
        out.push('\n');
        if let Some(inf) = &self.inference {
            let _ = writeln!(
                out,
                "R2 (centered) = {:.4}   R2 (uncentered) = {:.6}   sigma2 = {:.3e}   dof = {}",
                inf.r_squared_centered.as_f64(),
                inf.r_squared_uncentered.as_f64(),
                inf.sigma2_hat.as_f64(),
                inf.dof
            );
            if inf.pseudo_inverse {
                out.push_str("warning: singular JtJ, standard errors from pseudo-inverse\n");
            }
        } else if let Some(e) = &self.inference_error {
            let _ = writeln!(out, "inference unavailable: {e}");
        }
        let d = &self.diagnostics;
        let _ = writeln!(
            out,
            "SSE = {:.6e}   termination = {}   iterations = {}   starts = {}",
            d.sse.as_f64(),
            termination_name(d.termination),
            d.iterations,
            d.starts_tried
        );
        if let Some(sel) = &self.selection {
            out.push('\n');
            out.push_str(&selection_table(sel));
        }
        out
    }

    /// Tab-separated plot data, one row per input year.
    pub fn to_tsv(&self) -> String {
        let mut out =
            String::from("year\tobserved_count\tpredicted_count\tlog_observed\tlog_predicted\tsegment_index\n");
        for r in &self.predictions {
            let log_obs = r.log_observed.map_or_else(|| "NA".to_owned(), |v| v.to_string());
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{}",
                r.year, r.observed_count, r.predicted_count, log_obs, r.log_predicted, r.segment_index
            );
        }
        out
    }

    /// Log-scale chart of observed and fitted counts with breakpoint rules.
    pub fn to_svg(&self) -> String {
        let curves = [Curve {
            label: &self.input.label,
            rows: &self.predictions,
            colour: "#1f4e9c",
        }];
        svg_chart(&curves, self.model.breakpoints())
    }
}

/// Per-group separate fit carried inside a comparison report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Scalar"))]
pub struct SeparateFit<T> {
    pub model: SegmentedModel<T>,
    pub segments: Vec<SegmentSummary<T>>,
    pub diagnostics: FitDiagnostics<T>,
    pub inference: Option<InferenceReport<T>>,
    pub inference_error: Option<String>,
}

impl<T: Scalar> SeparateFit<T> {
    pub fn new(fit: &FitResult<T>, inference: crate::error::Result<InferenceReport<T>>) -> Self {
        let (inference, inference_error) = match inference {
            Ok(r) => (Some(r), None),
            Err(e) => (None, Some(e.to_string())),
        };
        Self {
            model: fit.model.clone(),
            segments: fit.model.summarize(),
            diagnostics: FitDiagnostics::from_fit(fit),
            inference,
            inference_error,
        }
    }
}

/// Joint interaction fit plus the two independent fits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Scalar"))]
pub struct ComparisonReport<T> {
    pub inputs: (InputDigest, InputDigest),
    pub config: FitConfig<T>,
    /// Always `"shared-breakpoints"` for the joint model.
    pub joint_model: String,
    pub joint: ComparisonResult<T>,
    pub delta_tests: Vec<DeltaTest<T>>,
    pub separate: (SeparateFit<T>, SeparateFit<T>),
    pub predictions: (Vec<PredictionRow<T>>, Vec<PredictionRow<T>>),
}

impl<T: Scalar> ComparisonReport<T> {
    pub fn new(
        inputs: (InputDigest, InputDigest),
        series: (&AnnualSeries<T>, &AnnualSeries<T>),
        config: FitConfig<T>,
        joint: ComparisonResult<T>,
        separate: (SeparateFit<T>, SeparateFit<T>),
    ) -> Self {
        let domain = |s: &AnnualSeries<T>| (T::year(s.first_year()), T::year(s.last_year()));
        let rows = |second: bool, s: &AnnualSeries<T>| {
            joint
                .group_model(second, domain(s))
                .map(|m| prediction_rows(&m, s))
                .unwrap_or_default()
        };
        let predictions = (rows(false, series.0), rows(true, series.1));
        Self {
            delta_tests: test_interactions(&joint),
            inputs,
            config,
            joint_model: "shared-breakpoints".to_owned(),
            joint,
            separate,
            predictions,
        }
    }

    /// True when the joint fit and both separate fits converged.
    pub fn converged(&self) -> bool {
        self.joint.converged && self.separate.0.diagnostics.converged && self.separate.1.diagnostics.converged
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_text(&self) -> String {
        let (l0, l1) = (&self.inputs.0.label, &self.inputs.1.label);
        let j = &self.joint;
        let mut out = String::new();
        let _ = writeln!(out, "joint fit, shared breakpoints: {l0} (D=0) vs {l1} (D=1)");
        let bps: Vec<String> = j.breakpoints.iter().map(|a| fmt_num(a.as_f64(), 1)).collect();
        let _ = writeln!(
            out,
            "breakpoints: {}",
            if bps.is_empty() { "-".into() } else { bps.join(", ") }
        );
        out.push('\n');
        let _ = writeln!(
            out,
            "{:<8} {:>17} {:>10} {:>17} {:>10} {:>10} {:>10} {:>10} {:>4}",
            "segment",
            "span",
            format!("b {}", short(l0)),
            "",
            format!("b {}", short(l1)),
            "delta",
            "SE",
            "p",
            ""
        );
        for (k, (s0, s1)) in j.summaries.0.iter().zip(&j.summaries.1).enumerate() {
            let t = &self.delta_tests[k];
            let _ = writeln!(
                out,
                "{:<8} {:>17} {:>10.4} {:>17} {:>10.4} {:>10.4} {:>10.4} {:>10.4} {:>4}",
                s0.index,
                format!("{}-{}", fmt_num(s0.span.0.as_f64(), 1), fmt_num(s0.span.1.as_f64(), 1)),
                s0.slope.as_f64(),
                format!("{}% / {}y", pct(s0.growth_rate_pct), years(s0.doubling_time_years)),
                s1.slope.as_f64(),
                t.delta.as_f64(),
                t.se.as_f64(),
                t.p.as_f64(),
                if t.significant { "*" } else { "" }
            );
        }
        if let (Some(b0), Some(g)) = (j.intercept, j.intercept_delta) {
            let _ = writeln!(out, "intercept b0 = {:.4}, gamma = {:.4}", b0.as_f64(), g.as_f64());
        }
        let _ = writeln!(
            out,
            "\nR2 (centered) = {:.4}   R2 (uncentered) = {:.6}   SSE = {:.6e}   dof = {}   termination = {}",
            j.r_squared_centered.as_f64(),
            j.r_squared_uncentered.as_f64(),
            j.sse.as_f64(),
            j.dof,
            termination_name(j.termination)
        );
        for (label, fit) in [(l0, &self.separate.0), (l1, &self.separate.1)] {
            let _ = writeln!(out, "\nseparate fit: {label}");
            out.push_str(&parameter_table(&fit.model, fit.inference.as_ref(), &fit.segments));
        }
        out
    }

    /// Both groups' plot rows, tagged by label in a leading column.
    pub fn to_tsv(&self) -> String {
        let mut out =
            String::from("group\tyear\tobserved_count\tpredicted_count\tlog_observed\tlog_predicted\tsegment_index\n");
        for (label, rows) in [
            (&self.inputs.0.label, &self.predictions.0),
            (&self.inputs.1.label, &self.predictions.1),
        ] {
            for r in rows {
                let log_obs = r.log_observed.map_or_else(|| "NA".to_owned(), |v| v.to_string());
                let _ = writeln!(
                    out,
                    "{label}\t{}\t{}\t{}\t{}\t{}\t{}",
                    r.year, r.observed_count, r.predicted_count, log_obs, r.log_predicted, r.segment_index
                );
            }
        }
        out
    }

    pub fn to_svg(&self) -> String {
        let curves = [
            Curve {
                label: &self.inputs.0.label,
                rows: &self.predictions.0,
                colour: "#1f4e9c",
            },
            Curve {
                label: &self.inputs.1.label,
                rows: &self.predictions.1,
                colour: "#b8410f",
            },
        ];
        svg_chart(&curves, &self.joint.breakpoints)
    }
}

fn termination_name(t: Termination) -> &'static str {
    match t {
        Termination::Converged => "converged",
        Termination::Stalled => "stalled",
        Termination::IterationCap => "iteration-cap",
    }
}

fn short(label: &str) -> String {
    label.chars().take(8).collect()
}

fn fmt_num(x: f64, decimals: usize) -> String {
    format!("{x:.decimals$}")
}

fn pct<T: Scalar>(g: T) -> String {
    format!("{:.2}", g.as_f64())
}

fn years<T: Scalar>(d: Option<T>) -> String {
    d.map_or_else(|| "-".to_owned(), |v| format!("{:.1}", v.as_f64()))
}

fn parameter_table<T: Scalar>(
    model: &SegmentedModel<T>,
    inference: Option<&InferenceReport<T>>,
    segments: &[SegmentSummary<T>],
) -> String {
    let layout = model.layout();
    let names = layout.names();
    let params = model.params();
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<10} {:>12} {:>10} {:>27} {:>14} {:>21}",
        "Parameter", "Estimate", "SE", "95% confidence interval", "% growth rate", "Doubling time [year]"
    );
    for (i, name) in names.iter().enumerate() {
        let est = params[i].as_f64();
        let (se, ci) = match inference {
            Some(inf) => (
                format!("{:.4}", inf.se[i].as_f64()),
                format!("[{:.4}, {:.4}]", inf.ci95[i].0.as_f64(), inf.ci95[i].1.as_f64()),
            ),
            None => ("-".to_owned(), "-".to_owned()),
        };
        let slope_idx = i.checked_sub(layout.slope_offset()).filter(|&k| k < layout.n_segments);
        let (growth, doubling) = match slope_idx.and_then(|k| segments.get(k)) {
            Some(s) => (pct(s.growth_rate_pct), years(s.doubling_time_years)),
            None => (String::new(), String::new()),
        };
        let decimals = if i >= layout.breakpoint_offset() { 2 } else { 4 };
        let _ = writeln!(
            out,
            "{:<10} {:>12} {:>10} {:>27} {:>14} {:>21}",
            name,
            fmt_num(est, decimals),
            se,
            ci,
            growth,
            doubling
        );
    }
    out
}

fn selection_table<T: Scalar>(sel: &SelectionTrace<T>) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "segment selection (threshold {} in centered R2)", sel.threshold);
    let _ = writeln!(out, "{:<9} {:>14} {:>10} {:>10}", "segments", "SSE", "R2", "dR2");
    for c in &sel.candidates {
        let num = |v: Option<T>, w: &str| v.map_or_else(|| "-".to_owned(), |x| format!("{:.*}", w.len(), x.as_f64()));
        let mark = if c.n_segments == sel.chosen { " <" } else { "" };
        match &c.skipped {
            Some(why) => {
                let _ = writeln!(out, "{:<9} skipped: {why}", c.n_segments);
            }
            None => {
                let _ = writeln!(
                    out,
                    "{:<9} {:>14} {:>10} {:>10}{mark}",
                    c.n_segments,
                    c.sse.map_or_else(|| "-".to_owned(), |s| format!("{:.6e}", s.as_f64())),
                    num(c.r_squared, "xxxxxx"),
                    num(c.delta_r_squared, "xxxxxx"),
                );
            }
        }
    }
    out
}

struct Curve<'a, T> {
    label: &'a str,
    rows: &'a [PredictionRow<T>],
    colour: &'a str,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn svg_chart<T: Scalar>(curves: &[Curve<'_, T>], breakpoints: &[T]) -> String {
    const W: f64 = 800.0;
    const H: f64 = 480.0;
    const L: f64 = 70.0;
    const R: f64 = 20.0;
    const TOP: f64 = 20.0;
    const B: f64 = 50.0;

    let mut x_lo = f64::INFINITY;
    let mut x_hi = f64::NEG_INFINITY;
    let mut y_lo = f64::INFINITY;
    let mut y_hi = f64::NEG_INFINITY;
    for c in curves {
        for r in c.rows {
            x_lo = x_lo.min(r.year as f64);
            x_hi = x_hi.max(r.year as f64);
            for v in r.log_observed.into_iter().chain([r.log_predicted]) {
                let v = v.as_f64() / std::f64::consts::LN_10;
                if v.is_finite() {
                    y_lo = y_lo.min(v);
                    y_hi = y_hi.max(v);
                }
            }
        }
    }
    if !x_lo.is_finite() || !y_lo.is_finite() {
        return format!("<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\"/>\n");
    }
    if x_hi <= x_lo {
        x_hi = x_lo + 1.0;
    }
    y_lo = y_lo.floor();
    y_hi = y_hi.ceil().max(y_lo + 1.0);
    let sx = |x: f64| L + (x - x_lo) / (x_hi - x_lo) * (W - L - R);
    let sy = |y: f64| H - B - (y - y_lo) / (y_hi - y_lo) * (H - TOP - B);

    let mut out = String::new();
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\" font-family=\"sans-serif\" font-size=\"12\">"
    );
    let _ = writeln!(out, "<rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>");
    let _ = writeln!(
        out,
        "<path d=\"M{L} {TOP}V{:.1}H{:.1}\" fill=\"none\" stroke=\"black\"/>",
        H - B,
        W - R
    );
    let decades = (y_hi - y_lo) as i64;
    for k in 0..=decades {
        let y = y_lo + k as f64;
        let py = sy(y);
        let _ = writeln!(
            out,
            "<path d=\"M{:.1} {py:.1}H{L}\" stroke=\"black\"/><text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">1e{}</text>",
            L - 5.0,
            L - 8.0,
            py + 4.0,
            y as i64
        );
    }
    let span = x_hi - x_lo;
    let step = [1.0, 2.0, 5.0, 10.0, 20.0, 25.0, 50.0, 100.0, 200.0, 500.0]
        .into_iter()
        .find(|s| span / s <= 10.0)
        .unwrap_or(1000.0);
    let mut tick = (x_lo / step).ceil() * step;
    while tick <= x_hi {
        let px = sx(tick);
        let _ = writeln!(
            out,
            "<path d=\"M{px:.1} {:.1}V{:.1}\" stroke=\"black\"/><text x=\"{px:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{tick}</text>",
            H - B,
            H - B + 5.0,
            H - B + 20.0
        );
        tick += step;
    }
    let _ = writeln!(
        out,
        "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">year</text>",
        L + (W - L - R) / 2.0,
        H - 10.0
    );
    for a in breakpoints {
        let px = sx(a.as_f64());
        let _ = writeln!(
            out,
            "<path d=\"M{px:.1} {TOP}V{:.1}\" stroke=\"grey\" stroke-dasharray=\"4 4\"/>",
            H - B
        );
    }
    for (i, c) in curves.iter().enumerate() {
        let mut observed = String::new();
        let mut pen_down = false;
        for r in c.rows {
            match r.log_observed {
                Some(v) => {
                    let cmd = if pen_down { 'L' } else { 'M' };
                    let _ = write!(
                        observed,
                        "{cmd}{:.1} {:.1}",
                        sx(r.year as f64),
                        sy(v.as_f64() / std::f64::consts::LN_10)
                    );
                    pen_down = true;
                }
                None => pen_down = false,
            }
        }
        let fitted: String = c
            .rows
            .iter()
            .enumerate()
            .map(|(j, r)| {
                format!(
                    "{}{:.1} {:.1}",
                    if j == 0 { 'M' } else { 'L' },
                    sx(r.year as f64),
                    sy(r.log_predicted.as_f64() / std::f64::consts::LN_10)
                )
            })
            .collect();
        let _ = writeln!(
            out,
            "<path d=\"{observed}\" fill=\"none\" stroke=\"{}\" stroke-opacity=\"0.5\"/>",
            c.colour
        );
        let _ = writeln!(
            out,
            "<path d=\"{fitted}\" fill=\"none\" stroke=\"{}\" stroke-width=\"2\"/>",
            c.colour
        );
        let _ = writeln!(
            out,
            "<text x=\"{:.1}\" y=\"{:.1}\" fill=\"{}\">{}</text>",
            L + 10.0,
            TOP + 15.0 + 15.0 * i as f64,
            c.colour,
            escape(c.label)
        );
    }
    out.push_str("</svg>\n");
    out
}
