//! Empirical CDFs, Pearson scoring of candidate models and model selection.
//!
//! A model is scored by the Pearson correlation between the empirical CDF
//! and the model CDF, both evaluated at the sorted sample delays.
//! Empirical probabilities use Hazen plotting positions `(i - 0.5) / n`;
//! tied delays collapse onto one point at the highest rank among them.
//!
//! Scoring counts every delivered sample once: a collapsed point weighs as
//! many samples as it absorbed. Unweighted correlation over distinct delays
//! would depend on timer resolution, since coarse clocks merge the dense
//! part of the distribution into few points and hand the sparse tail most
//! of the weight.

use std::borrow::Cow;
use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::decompose::{self, DecomposeError, PathModel};
use crate::models::{DelayModel, ExponentialDelayModel, ModelError, TruncatedNormalDelayModel};
use crate::trace::{DelayTrace, TraceError};

/// Fewest delivered probes accepted by [`compare_models`].
pub const MIN_FIT_SAMPLES: usize = 10;

#[derive(Debug, thiserror::Error)]
pub enum FitError {
    #[error("need at least {need} delivered samples, got {got}")]
    TooFewSamples { need: usize, got: usize },

    #[error("vectors differ in length ({left} vs {right})")]
    LengthMismatch { left: usize, right: usize },

    #[error("correlation undefined: one of the vectors is constant")]
    ConstantVector,

    #[error(transparent)]
    Model(#[from] ModelError),

    #[error(transparent)]
    Decompose(#[from] DecomposeError),

    #[error(transparent)]
    Trace(#[from] TraceError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EcdfPoint {
    pub delay_us: f64,
    pub prob: f64,
    /// Samples sharing this delay.
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalCdf {
    points: Vec<EcdfPoint>,
}

impl EmpiricalCdf {
    /// Builds the CDF from raw delays in any order.
    pub fn from_delays(mut delays: Vec<f64>) -> Result<Self, FitError> {
        if delays.len() < 2 {
            return Err(FitError::TooFewSamples {
                need: 2,
                got: delays.len(),
            });
        }
        delays.sort_by(f64::total_cmp);
        let n = delays.len() as f64;
        let mut points: Vec<EcdfPoint> = Vec::with_capacity(delays.len());
        let mut run_start = 0;
        for (i, &d) in delays.iter().enumerate() {
            if delays.get(i + 1) == Some(&d) {
                continue;
            }
            points.push(EcdfPoint {
                delay_us: d,
                prob: (i as f64 + 0.5) / n,
                count: i + 1 - run_start,
            });
            run_start = i + 1;
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[EcdfPoint] {
        &self.points
    }

    pub fn delays(&self) -> impl Iterator<Item = f64> + '_ {
        self.points.iter().map(|p| p.delay_us)
    }

    pub fn probs(&self) -> impl Iterator<Item = f64> + '_ {
        self.points.iter().map(|p| p.prob)
    }

    pub fn counts(&self) -> impl Iterator<Item = usize> + '_ {
        self.points.iter().map(|p| p.count)
    }

    /// Number of samples behind the CDF.
    pub fn n_samples(&self) -> usize {
        self.counts().sum()
    }
}

/// Empirical CDF over the delivered samples of `trace`.
pub fn empirical_cdf(trace: &DelayTrace) -> Result<EmpiricalCdf, FitError> {
    EmpiricalCdf::from_delays(trace.delivered().map(|(_, d)| d as f64).collect())
}

/// Product-moment correlation coefficient.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64, FitError> {
    if xs.len() != ys.len() {
        return Err(FitError::LengthMismatch {
            left: xs.len(),
            right: ys.len(),
        });
    }
    if xs.len() < 2 {
        return Err(FitError::TooFewSamples {
            need: 2,
            got: xs.len(),
        });
    }
    let constant = |v: &[f64]| v.iter().all(|&x| x == v[0]);
    if constant(xs) || constant(ys) {
        return Err(FitError::ConstantVector);
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for (&x, &y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(FitError::ConstantVector);
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Pearson correlation with per-pair frequency weights. Integer weights
/// give the same value as repeating each pair that many times.
pub fn weighted_pearson(xs: &[f64], ys: &[f64], weights: &[f64]) -> Result<f64, FitError> {
    if xs.len() != ys.len() || xs.len() != weights.len() {
        return Err(FitError::LengthMismatch {
            left: xs.len(),
            right: if xs.len() != ys.len() {
                ys.len()
            } else {
                weights.len()
            },
        });
    }
    if xs.len() < 2 {
        return Err(FitError::TooFewSamples {
            need: 2,
            got: xs.len(),
        });
    }
    let constant = |v: &[f64]| v.iter().all(|&x| x == v[0]);
    if constant(xs) || constant(ys) {
        return Err(FitError::ConstantVector);
    }
    let total: f64 = weights.iter().sum();
    let mean = |v: &[f64]| v.iter().zip(weights).map(|(x, w)| x * w).sum::<f64>() / total;
    let (mx, my) = (mean(xs), mean(ys));
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for ((&x, &y), &w) in xs.iter().zip(ys).zip(weights) {
        let (dx, dy) = (x - mx, y - my);
        sxx += w * dx * dx;
        syy += w * dy * dy;
        sxy += w * dx * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(FitError::ConstantVector);
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Correlation between the empirical probabilities and `model_cdf` at the
/// same abscissae, each point weighted by its sample count.
pub fn score_model(ecdf: &EmpiricalCdf, model_cdf: impl Fn(f64) -> f64) -> Result<f64, FitError> {
    let emp: Vec<f64> = ecdf.probs().collect();
    let model: Vec<f64> = ecdf.delays().map(model_cdf).collect();
    let weights: Vec<f64> = ecdf.counts().map(|c| c as f64).collect();
    weighted_pearson(&emp, &model, &weights)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModelKind {
    Exponential,
    TruncatedNormal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub k_nor: f64,
    pub k_exp: f64,
    pub exp_model: ExponentialDelayModel,
    pub nor_model: TruncatedNormalDelayModel,
    pub selected: ModelKind,
    pub n_samples: usize,
    pub loss_rate: f64,
    /// Set when the trace mixed packet sizes and was reduced to its
    /// variable component before fitting.
    pub path_model: Option<PathModel>,
    /// Samples clamped to zero during that reduction.
    pub clamped: usize,
}

/// The delays a fit actually runs on, with the location/mean pair that
/// parameterises both models.
#[derive(Debug, Clone)]
pub struct FitInput<'a> {
    pub trace: Cow<'a, DelayTrace>,
    pub d_min_us: f64,
    pub d_av_us: f64,
    pub path_model: Option<PathModel>,
    pub clamped: usize,
}

impl<'a> FitInput<'a> {
    /// Single-size traces are fitted as they are. Mixed-size traces are
    /// reduced to their variable component against the fitted fixed-delay
    /// line and fitted with location 0.
    pub fn from_trace(trace: &'a DelayTrace) -> Result<Self, FitError> {
        let sizes = trace.delivered_sizes();
        match sizes.len() {
            0 => Err(TraceError::NoSamples { size_bytes: None }.into()),
            1 => {
                let size = *sizes.first().expect("one size");
                let s = trace.summarize(size)?;
                Ok(Self {
                    trace: Cow::Borrowed(trace),
                    d_min_us: s.d_min_us as f64,
                    d_av_us: s.d_av_us,
                    path_model: None,
                    clamped: 0,
                })
            }
            _ => {
                let points = decompose::min_delay_by_size(trace)?;
                let path = decompose::fit_path_model(&points)?;
                let var = decompose::variable_component(trace, &path);
                let (n, sum) = var
                    .trace
                    .delivered()
                    .fold((0usize, 0u128), |(n, s), (_, d)| (n + 1, s + u128::from(d)));
                Ok(Self {
                    trace: Cow::Owned(var.trace),
                    d_min_us: 0.0,
                    d_av_us: sum as f64 / n as f64,
                    path_model: Some(path),
                    clamped: var.clamped,
                })
            }
        }
    }
}

/// Fits both models and keeps the one whose CDF correlates better with the
/// empirical CDF. Ties go to the exponential model.
pub fn compare_models(trace: &DelayTrace) -> Result<FitReport, FitError> {
    compare_fit_input(&FitInput::from_trace(trace)?)
}

pub fn compare_fit_input(input: &FitInput<'_>) -> Result<FitReport, FitError> {
    let trace = input.trace.as_ref();
    let n = trace.n_ok();
    if n < MIN_FIT_SAMPLES {
        return Err(FitError::TooFewSamples {
            need: MIN_FIT_SAMPLES,
            got: n,
        });
    }
    let exp_model = ExponentialDelayModel::from_moments(input.d_min_us, input.d_av_us)?;
    let nor_model = TruncatedNormalDelayModel::from_moments(input.d_min_us, input.d_av_us)?;
    let ecdf = empirical_cdf(trace)?;
    let k_exp = score_model(&ecdf, |d| exp_model.cdf(d))?;
    let k_nor = score_model(&ecdf, |d| nor_model.cdf(d))?;
    let selected = if k_exp >= k_nor {
        ModelKind::Exponential
    } else {
        ModelKind::TruncatedNormal
    };
    Ok(FitReport {
        k_nor,
        k_exp,
        exp_model,
        nor_model,
        selected,
        n_samples: n,
        loss_rate: trace.loss_rate(),
        path_model: input.path_model,
        clamped: input.clamped,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OverlayRow {
    pub delay_us: f64,
    pub f_emp: f64,
    pub f_nor: f64,
    pub f_exp: f64,
}

/// Empirical, truncated-normal and exponential CDFs side by side over the
/// empirical abscissae.
pub fn cdf_overlay(
    trace: &DelayTrace,
    exp_model: &ExponentialDelayModel,
    nor_model: &TruncatedNormalDelayModel,
) -> Result<Vec<OverlayRow>, FitError> {
    Ok(empirical_cdf(trace)?
        .points()
        .iter()
        .map(|p| OverlayRow {
            delay_us: p.delay_us,
            f_emp: p.prob,
            f_nor: nor_model.cdf(p.delay_us),
            f_exp: exp_model.cdf(p.delay_us),
        })
        .collect())
}

pub fn write_overlay_tsv(rows: &[OverlayRow], mut out: impl Write) -> io::Result<()> {
    writeln!(out, "delay_us\tF_emp\tF_nor\tF_exp")?;
    for r in rows {
        writeln!(out, "{}\t{}\t{}\t{}", r.delay_us, r.f_emp, r.f_nor, r.f_exp)?;
    }
    Ok(())
}
