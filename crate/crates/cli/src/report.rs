//! Machine-readable documents emitted with `--json`, and their text
//! renderings.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use delaykit::fit::{FitReport, ModelKind};
use delaykit::prober::PathFitMode;
use delaykit::{DelayKind, DelayModel, PathModel, SizeDelayPoint, TraceSummary};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolInfo {
    pub name: String,
    pub version: String,
}

impl ToolInfo {
    pub fn current() -> Self {
        Self {
            name: "delaykit".into(),
            version: env!("CARGO_PKG_VERSION").into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceInfo {
    pub source: String,
    pub target: String,
    pub delay_kind: DelayKind,
    pub owd_from_rtt: bool,
    pub n_ok: usize,
    pub n_lost: usize,
    pub loss_rate: f64,
    pub sizes: Vec<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeadroomRow {
    pub size_bytes: u32,
    pub p: f64,
    pub delay_us: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDocument {
    pub schema_version: u32,
    pub tool: ToolInfo,
    pub trace: TraceInfo,
    pub path_model: Option<PathModel>,
    pub summaries: Vec<TraceSummary>,
    pub fit: FitReport,
    pub headroom: Vec<HeadroomRow>,
    pub warnings: Vec<String>,
}

fn kind_name(k: ModelKind) -> &'static str {
    match k {
        ModelKind::Exponential => "exponential",
        ModelKind::TruncatedNormal => "truncated-normal",
    }
}

impl ReportDocument {
    /// Table-style text: one row per packet size with both correlation
    /// coefficients at two decimals, then model parameters and headroom.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        let sizes = self
            .trace
            .sizes
            .iter()
            .map(u32::to_string)
            .collect::<Vec<_>>()
            .join(",");
        let host_w = self.trace.target.len().max(4);
        let size_w = sizes.len().max(9);
        let _ = writeln!(
            out,
            "{:<2}  {:<host_w$}  {:<size_w$}  {:>5}  {:>5}  selected",
            "N", "host", "W (bytes)", "K_nor", "K_exp"
        );
        let _ = writeln!(
            out,
            "{:<2}  {:<host_w$}  {:<size_w$}  {:>5.2}  {:>5.2}  {}",
            1,
            self.trace.target,
            sizes,
            self.fit.k_nor,
            self.fit.k_exp,
            kind_name(self.fit.selected)
        );
        let _ = writeln!(out);
        let _ = writeln!(
            out,
            "samples: {} delivered, {} lost ({:.1}% loss), {}{}",
            self.trace.n_ok,
            self.trace.n_lost,
            self.trace.loss_rate * 100.0,
            self.trace.delay_kind,
            if self.trace.owd_from_rtt {
                " (RTT/2)"
            } else {
                ""
            }
        );
        for s in &self.summaries {
            let _ = writeln!(
                out,
                "W = {} bytes: D_min = {} us, D_av = {:.1} us",
                s.size_bytes, s.d_min_us, s.d_av_us
            );
        }
        if let Some(p) = &self.path_model {
            let _ = writeln!(
                out,
                "fixed delay: D_min = {:.3} us, C = {:.6} bytes/us; fitted on the variable component",
                p.d_min_us, p.capacity_bytes_per_us
            );
        }
        let e = &self.fit.exp_model;
        let n = &self.fit.nor_model;
        let _ = writeln!(
            out,
            "exponential:      location {:.1} us, lambda {:.6e} /us (mean {:.1} us)",
            e.d_min_us,
            e.lambda_per_us,
            e.mean_us()
        );
        let _ = writeln!(
            out,
            "truncated normal: location {:.1} us, sigma {:.1} us (mean {:.1} us)",
            n.d_min_us,
            n.sigma_us,
            n.mean_us()
        );
        if !self.headroom.is_empty() {
            let _ = writeln!(out);
            let _ = writeln!(
                out,
                "{:>9}  {:>6}  {:>14}",
                "W (bytes)", "p", "headroom (us)"
            );
            for h in &self.headroom {
                let _ = writeln!(out, "{:>9}  {:>6}  {:>14.1}", h.size_bytes, h.p, h.delay_us);
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathModelDocument {
    pub schema_version: u32,
    pub tool: ToolInfo,
    pub mode: PathFitMode,
    pub points: Vec<SizeDelayPoint>,
    pub path_model: PathModel,
    pub negative_d_min: bool,
    pub residuals_us: Vec<f64>,
}

impl PathModelDocument {
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        let mode = match self.mode {
            PathFitMode::TwoPoint => "two-point",
            PathFitMode::Regression => "regression (least squares)",
        };
        let _ = writeln!(out, "mode: {mode}");
        let _ = writeln!(
            out,
            "{:>9}  {:>14}  {:>12}",
            "W (bytes)", "min D (us)", "residual"
        );
        for (p, r) in self.points.iter().zip(&self.residuals_us) {
            let _ = writeln!(
                out,
                "{:>9}  {:>14.1}  {:>12.3}",
                p.size_bytes, p.min_delay_us, r
            );
        }
        let m = &self.path_model;
        let _ = writeln!(
            out,
            "D_min = {:.3} ms ({:.3} us)",
            m.d_min_us / 1000.0,
            m.d_min_us
        );
        let _ = writeln!(
            out,
            "C     = {:.6} bytes/us ({:.3} Mbit/s)",
            m.capacity_bytes_per_us,
            m.capacity_mbps()
        );
        let _ = writeln!(
            out,
            "D_fixed(W) = {:.3} us + W / {:.6} bytes/us",
            m.d_min_us, m.capacity_bytes_per_us
        );
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeadroomModel {
    pub d_min_us: f64,
    pub capacity_bytes_per_us: Option<f64>,
    pub lambda_per_us: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeadroomDocument {
    pub schema_version: u32,
    pub tool: ToolInfo,
    pub model: HeadroomModel,
    pub size_bytes: u32,
    pub fixed_delay_us: f64,
    pub rows: Vec<HeadroomRow>,
}

impl HeadroomDocument {
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "W = {} bytes, fixed delay {:.3} us, lambda {:.6e} /us",
            self.size_bytes, self.fixed_delay_us, self.model.lambda_per_us
        );
        let _ = writeln!(
            out,
            "{:>8}  {:>14}  {:>14}",
            "p", "headroom (us)", "over fixed (us)"
        );
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{:>8}  {:>14.3}  {:>14.3}",
                r.p,
                r.delay_us,
                r.delay_us - self.fixed_delay_us
            );
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeSample {
    pub seq: u64,
    pub delay_us: Option<u64>,
    pub size_bytes: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeDocument {
    pub schema_version: u32,
    pub tool: ToolInfo,
    pub host: String,
    pub count: u32,
    pub payload_bytes: u32,
    pub n_ok: usize,
    pub n_lost: usize,
    pub loss_rate: f64,
    pub summary: TraceSummary,
    pub samples: Vec<ProbeSample>,
}

impl ProbeDocument {
    pub fn render_text(&self) -> String {
        let s = &self.summary;
        format!(
            "{}: {} of {} replies ({:.1}% loss), W = {} bytes\nD_min = {} us, D_av = {:.1} us (RTT)\n",
            self.host,
            self.n_ok,
            self.count,
            self.loss_rate * 100.0,
            s.size_bytes,
            s.d_min_us,
            s.d_av_us
        )
    }
}
