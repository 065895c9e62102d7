//! Fixed/variable delay decomposition.
//!
//! The fixed part of the delay for a packet of `W` bytes is affine in `W`:
//! `D_fixed(W) = D_min + W / C`, where `C` is the end-to-end capacity. The
//! line is estimated from the per-size minimum delays, and whatever a packet
//! spends above the line is its variable (queueing) delay.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::trace::DelayTrace;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DecomposeError {
    #[error("trace has no delivered samples")]
    NoSamples,

    #[error("need at least two distinct packet sizes (got only {size_bytes} bytes)")]
    EqualSizes { size_bytes: u32 },

    #[error(
        "minimum delay does not grow with packet size (slope {slope_us_per_byte} us/byte); \
         minima are too noisy, probe with a higher count"
    )]
    NonPositiveCapacity { slope_us_per_byte: f64 },

    #[error("invalid path model: {0}")]
    InvalidModel(String),
}

/// `D_fixed(W) = d_min_us + W / capacity_bytes_per_us`.
///
/// `d_min_us` may come out negative when the line is fitted to noisy minima
/// on a short path; see [`PathModel::has_negative_d_min`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathModel {
    pub d_min_us: f64,
    pub capacity_bytes_per_us: f64,
}

impl PathModel {
    pub fn new(d_min_us: f64, capacity_bytes_per_us: f64) -> Result<Self, DecomposeError> {
        if !d_min_us.is_finite() {
            return Err(DecomposeError::InvalidModel(format!(
                "d_min {d_min_us} is not finite"
            )));
        }
        if !(capacity_bytes_per_us.is_finite() && capacity_bytes_per_us > 0.0) {
            return Err(DecomposeError::InvalidModel(format!(
                "capacity {capacity_bytes_per_us} must be positive and finite"
            )));
        }
        Ok(Self {
            d_min_us,
            capacity_bytes_per_us,
        })
    }

    pub fn fixed_delay_us(&self, size_bytes: u32) -> f64 {
        self.d_min_us + f64::from(size_bytes) / self.capacity_bytes_per_us
    }

    pub fn has_negative_d_min(&self) -> bool {
        self.d_min_us < 0.0
    }

    /// Capacity in megabits per second, for display.
    pub fn capacity_mbps(&self) -> f64 {
        self.capacity_bytes_per_us * 8.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SizeDelayPoint {
    pub size_bytes: u32,
    pub min_delay_us: f64,
}

/// One point per distinct packet size carrying the smallest delivered delay,
/// sorted by size.
pub fn min_delay_by_size(trace: &DelayTrace) -> Result<Vec<SizeDelayPoint>, DecomposeError> {
    let mut minima: BTreeMap<u32, u64> = BTreeMap::new();
    for (w, d) in trace.delivered() {
        minima
            .entry(w)
            .and_modify(|m| *m = (*m).min(d))
            .or_insert(d);
    }
    if minima.is_empty() {
        return Err(DecomposeError::NoSamples);
    }
    Ok(minima
        .into_iter()
        .map(|(size_bytes, d)| SizeDelayPoint {
            size_bytes,
            min_delay_us: d as f64,
        })
        .collect())
}

/// Solves the fixed-delay line exactly through two `(W, min D)` points.
pub fn two_point_path_model(
    p1: SizeDelayPoint,
    p2: SizeDelayPoint,
) -> Result<PathModel, DecomposeError> {
    if p1.size_bytes == p2.size_bytes {
        return Err(DecomposeError::EqualSizes {
            size_bytes: p1.size_bytes,
        });
    }
    let (a, b) = if p1.size_bytes < p2.size_bytes {
        (p1, p2)
    } else {
        (p2, p1)
    };
    let (w1, w2) = (f64::from(a.size_bytes), f64::from(b.size_bytes));
    let (d1, d2) = (a.min_delay_us, b.min_delay_us);
    if d2 <= d1 {
        return Err(DecomposeError::NonPositiveCapacity {
            slope_us_per_byte: (d2 - d1) / (w2 - w1),
        });
    }
    let d_min = (w2 * d1 - w1 * d2) / (w2 - w1);
    let capacity = (w2 - w1) / (d2 - d1);
    PathModel::new(d_min, capacity)
}

/// Ordinary least squares of minimum delay against packet size; the
/// intercept is `D_min` and the reciprocal slope is `C`.
pub fn regression_path_model(points: &[SizeDelayPoint]) -> Result<PathModel, DecomposeError> {
    let Some(first) = points.first() else {
        return Err(DecomposeError::NoSamples);
    };
    if points.iter().all(|p| p.size_bytes == first.size_bytes) {
        return Err(DecomposeError::EqualSizes {
            size_bytes: first.size_bytes,
        });
    }
    let n = points.len() as f64;
    let mean_w = points.iter().map(|p| f64::from(p.size_bytes)).sum::<f64>() / n;
    let mean_d = points.iter().map(|p| p.min_delay_us).sum::<f64>() / n;
    let (mut sww, mut swd) = (0.0, 0.0);
    for p in points {
        let dw = f64::from(p.size_bytes) - mean_w;
        sww += dw * dw;
        swd += dw * (p.min_delay_us - mean_d);
    }
    let slope = swd / sww;
    if slope <= 0.0 {
        return Err(DecomposeError::NonPositiveCapacity {
            slope_us_per_byte: slope,
        });
    }
    PathModel::new(mean_d - slope * mean_w, 1.0 / slope)
}

/// Two-point solve for exactly two points, least squares otherwise.
pub fn fit_path_model(points: &[SizeDelayPoint]) -> Result<PathModel, DecomposeError> {
    match points {
        [a, b] => two_point_path_model(*a, *b),
        _ => regression_path_model(points),
    }
}

/// `observed - fitted` for each point.
pub fn residuals(points: &[SizeDelayPoint], model: &PathModel) -> Vec<f64> {
    points
        .iter()
        .map(|p| p.min_delay_us - model.fixed_delay_us(p.size_bytes))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct VariableComponent {
    pub trace: DelayTrace,
    /// Samples that fell below the fixed-delay line and were set to 0.
    pub clamped: usize,
}

/// Replaces each delivered delay by its excess over the fixed-delay line,
/// rounded to whole microseconds and clamped at zero.
pub fn variable_component(trace: &DelayTrace, model: &PathModel) -> VariableComponent {
    let mut clamped = 0;
    let trace = trace.map_delays(|w, d| {
        let excess = (d as f64 - model.fixed_delay_us(w)).round();
        if excess < 0.0 {
            clamped += 1;
            0
        } else {
            excess as u64
        }
    });
    VariableComponent { trace, clamped }
}
