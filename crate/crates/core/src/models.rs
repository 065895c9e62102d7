//! Candidate delay distributions.
//!
//! Both models are located at the minimum delay `D_min` and take their scale
//! from the mean excess `D_av - D_min`:
//!
//! * exponential: `F(D) = 1 - exp(-λ (D - D_min))`, `λ = 1 / (D_av - D_min)`;
//! * truncated normal (half-normal on `[D_min, ∞)`):
//!   `F(D) = erf((D - D_min) / (σ √2))`, `σ = D_av - D_min`.
//!
//! The half-normal's own mean is `D_min + σ √(2/π)`, so the fitted
//! truncated-normal model does not reproduce the sample mean. That is the
//! estimator as defined, and reports call the gap out.

use std::f64::consts::{FRAC_2_SQRT_PI, SQRT_2};

use libm::erf;
use serde::{Deserialize, Serialize};

use crate::decompose::PathModel;
use crate::trace::TraceSummary;

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error(
        "mean delay equals minimum delay ({d_min_us} us); a constant-delay trace has no scale"
    )]
    DegenerateScale { d_min_us: f64 },

    #[error("probability {0} is outside [0, 1)")]
    BadProbability(f64),

    #[error("model parameter {name} = {value} must be positive and finite")]
    InvalidParameter { name: &'static str, value: f64 },
}

pub trait DelayModel {
    /// Delay below which the CDF is zero.
    fn location_us(&self) -> f64;

    fn cdf(&self, d_us: f64) -> f64;

    /// Inverse CDF on `[0, 1)`.
    fn quantile(&self, p: f64) -> Result<f64, ModelError>;

    fn mean_us(&self) -> f64;
}

fn check_probability(p: f64) -> Result<(), ModelError> {
    if (0.0..1.0).contains(&p) {
        Ok(())
    } else {
        Err(ModelError::BadProbability(p))
    }
}

fn positive(name: &'static str, value: f64) -> Result<f64, ModelError> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(ModelError::InvalidParameter { name, value })
    }
}

/// `erf⁻¹(p)` for `p` in `[0, 1)`: the statrs estimate polished by one
/// Newton step against [`erf`], so the pair inverts to rounding error.
fn inverse_erf(p: f64) -> f64 {
    let x = statrs::function::erf::erf_inv(p);
    if p == 0.0 || !x.is_finite() {
        return x;
    }
    x - (erf(x) - p) / (FRAC_2_SQRT_PI * (-x * x).exp())
}

fn mean_excess(d_min_us: f64, d_av_us: f64) -> Result<f64, ModelError> {
    let excess = d_av_us - d_min_us;
    if excess > 0.0 {
        Ok(excess)
    } else {
        Err(ModelError::DegenerateScale { d_min_us })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentialDelayModel {
    pub d_min_us: f64,
    pub lambda_per_us: f64,
}

impl ExponentialDelayModel {
    pub fn new(d_min_us: f64, lambda_per_us: f64) -> Result<Self, ModelError> {
        Ok(Self {
            d_min_us,
            lambda_per_us: positive("lambda", lambda_per_us)?,
        })
    }

    pub fn fit(summary: &TraceSummary) -> Result<Self, ModelError> {
        Self::from_moments(summary.d_min_us as f64, summary.d_av_us)
    }

    /// `λ = 1 / (d_av - d_min)`.
    pub fn from_moments(d_min_us: f64, d_av_us: f64) -> Result<Self, ModelError> {
        Self::new(d_min_us, 1.0 / mean_excess(d_min_us, d_av_us)?)
    }
}

impl DelayModel for ExponentialDelayModel {
    fn location_us(&self) -> f64 {
        self.d_min_us
    }

    fn cdf(&self, d_us: f64) -> f64 {
        if d_us <= self.d_min_us {
            0.0
        } else {
            -(-self.lambda_per_us * (d_us - self.d_min_us)).exp_m1()
        }
    }

    fn quantile(&self, p: f64) -> Result<f64, ModelError> {
        check_probability(p)?;
        Ok(self.d_min_us - (-p).ln_1p() / self.lambda_per_us)
    }

    fn mean_us(&self) -> f64 {
        self.d_min_us + 1.0 / self.lambda_per_us
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncatedNormalDelayModel {
    pub d_min_us: f64,
    pub sigma_us: f64,
}

impl TruncatedNormalDelayModel {
    pub fn new(d_min_us: f64, sigma_us: f64) -> Result<Self, ModelError> {
        Ok(Self {
            d_min_us,
            sigma_us: positive("sigma", sigma_us)?,
        })
    }

    pub fn fit(summary: &TraceSummary) -> Result<Self, ModelError> {
        Self::from_moments(summary.d_min_us as f64, summary.d_av_us)
    }

    /// `σ = d_av - d_min`.
    pub fn from_moments(d_min_us: f64, d_av_us: f64) -> Result<Self, ModelError> {
        Self::new(d_min_us, mean_excess(d_min_us, d_av_us)?)
    }
}

impl DelayModel for TruncatedNormalDelayModel {
    fn location_us(&self) -> f64 {
        self.d_min_us
    }

    fn cdf(&self, d_us: f64) -> f64 {
        if d_us <= self.d_min_us {
            0.0
        } else {
            erf((d_us - self.d_min_us) / (self.sigma_us * SQRT_2))
        }
    }

    fn quantile(&self, p: f64) -> Result<f64, ModelError> {
        check_probability(p)?;
        Ok(self.d_min_us + self.sigma_us * SQRT_2 * inverse_erf(p))
    }

    /// `d_min + σ √(2/π)`.
    fn mean_us(&self) -> f64 {
        // FRAC_2_SQRT_PI / SQRT_2 == sqrt(2/pi)
        self.d_min_us + self.sigma_us * FRAC_2_SQRT_PI / SQRT_2
    }
}

/// Exponential delay whose location moves with packet size along the fixed
/// delay line: `F(D, W) = 1 - exp(-λ (D - D_min - W/C))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SizeAwareExponentialModel {
    pub d_min_us: f64,
    pub capacity_bytes_per_us: f64,
    pub lambda_per_us: f64,
}

impl SizeAwareExponentialModel {
    pub fn new(
        d_min_us: f64,
        capacity_bytes_per_us: f64,
        lambda_per_us: f64,
    ) -> Result<Self, ModelError> {
        Ok(Self {
            d_min_us,
            capacity_bytes_per_us: positive("capacity", capacity_bytes_per_us)?,
            lambda_per_us: positive("lambda", lambda_per_us)?,
        })
    }

    pub fn from_path(path: &PathModel, lambda_per_us: f64) -> Result<Self, ModelError> {
        Self::new(path.d_min_us, path.capacity_bytes_per_us, lambda_per_us)
    }

    pub fn fixed_delay_us(&self, w_bytes: u32) -> f64 {
        self.d_min_us + f64::from(w_bytes) / self.capacity_bytes_per_us
    }

    /// The plain exponential model for packets of `w_bytes`.
    pub fn at_size(&self, w_bytes: u32) -> ExponentialDelayModel {
        ExponentialDelayModel {
            d_min_us: self.fixed_delay_us(w_bytes),
            lambda_per_us: self.lambda_per_us,
        }
    }

    pub fn cdf(&self, d_us: f64, w_bytes: u32) -> f64 {
        self.at_size(w_bytes).cdf(d_us)
    }

    pub fn quantile(&self, p: f64, w_bytes: u32) -> Result<f64, ModelError> {
        self.at_size(w_bytes).quantile(p)
    }

    /// Delay budget within which a fraction `p` of `w_bytes` packets arrive:
    /// `D_min + W/C + ln(1/(1-p)) / λ`.
    pub fn buffer_headroom(&self, p: f64, w_bytes: u32) -> Result<f64, ModelError> {
        self.quantile(p, w_bytes)
    }
}
