//! Seeded synthetic delay traces.
//!
//! Uniforms come from SplitMix64 (Steele, Lea & Flood 2014): the state
//! advances by `0x9E3779B97F4A7C15` and each output is mixed with the
//! multipliers `0xBF58476D1CE4E5B9` and `0x94D049BB133111EB` (shifts 30,
//! 27, 31). A uniform in `[0, 1)` takes the top 53 bits of one output.
//!
//! * exponential: `d = d_min - scale * ln(1 - u)`, one uniform per draw;
//! * half-normal: `d = d_min + σ |z|`, with `z` from the Marsaglia polar
//!   method. Each accepted pair `(u, v)` yields two normals; the second is
//!   kept and returned by the next draw.
//!
//! When a loss rate is set, one extra uniform is drawn before each sample
//! and the sample is lost when it falls below the rate. Delays are rounded
//! to whole microseconds.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::decompose::PathModel;
use crate::trace::{DelayKind, DelaySample, DelayTrace, TraceMetadata};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SynthError {
    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),

    #[error("both packet sizes are {size_bytes} bytes")]
    EqualSizes { size_bytes: u32 },
}

#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform on `[0, 1)`.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SynthFamily {
    Exponential,
    TruncatedNormal,
}

impl fmt::Display for SynthFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SynthFamily::Exponential => "exponential",
            SynthFamily::TruncatedNormal => "truncated-normal",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub family: SynthFamily,
    pub d_min_us: f64,
    /// `1/λ` for the exponential family, `σ` for the half-normal.
    pub scale_us: f64,
    pub n: usize,
    pub size_bytes: u32,
    pub seed: u64,
    /// Bernoulli loss probability per sample, in `[0, 1)`.
    pub loss_rate: f64,
}

impl SynthSpec {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::InvalidSpec(m));
        if !(self.scale_us.is_finite() && self.scale_us > 0.0) {
            return bad(format!("scale {} must be positive", self.scale_us));
        }
        if !(self.d_min_us.is_finite() && self.d_min_us >= 0.0) {
            return bad(format!("d_min {} must be non-negative", self.d_min_us));
        }
        if self.n == 0 {
            return bad("n must be at least 1".into());
        }
        if self.size_bytes == 0 {
            return bad("size must be at least 1 byte".into());
        }
        if !(0.0..1.0).contains(&self.loss_rate) {
            return bad(format!("loss rate {} must be in [0, 1)", self.loss_rate));
        }
        Ok(())
    }

    fn metadata(&self) -> TraceMetadata {
        TraceMetadata::new(
            "synth",
            "synth",
            DelayKind::Owd,
            format!("synth:{}:seed={}", self.family, self.seed),
        )
    }
}

pub fn exponential_from_uniform(d_min_us: f64, scale_us: f64, u: f64) -> f64 {
    d_min_us - scale_us * (-u).ln_1p()
}

struct Sampler {
    rng: SplitMix64,
    spare_normal: Option<f64>,
    family: SynthFamily,
    location_us: f64,
    scale_us: f64,
    loss_rate: f64,
}

impl Sampler {
    fn new(spec: &SynthSpec) -> Self {
        Self {
            rng: SplitMix64::new(spec.seed),
            spare_normal: None,
            family: spec.family,
            location_us: spec.d_min_us,
            scale_us: spec.scale_us,
            loss_rate: spec.loss_rate,
        }
    }

    fn standard_normal(&mut self) -> f64 {
        if let Some(z) = self.spare_normal.take() {
            return z;
        }
        loop {
            let u = 2.0 * self.rng.next_f64() - 1.0;
            let v = 2.0 * self.rng.next_f64() - 1.0;
            let s = u * u + v * v;
            if s > 0.0 && s < 1.0 {
                let k = (-2.0 * s.ln() / s).sqrt();
                self.spare_normal = Some(v * k);
                return u * k;
            }
        }
    }

    fn lost(&mut self) -> bool {
        self.loss_rate > 0.0 && self.rng.next_f64() < self.loss_rate
    }

    fn draw(&mut self) -> f64 {
        match self.family {
            SynthFamily::Exponential => {
                let u = self.rng.next_f64();
                exponential_from_uniform(self.location_us, self.scale_us, u)
            }
            SynthFamily::TruncatedNormal => {
                self.location_us + self.scale_us * self.standard_normal().abs()
            }
        }
    }
}

fn to_us(d: f64) -> u64 {
    d.round().max(0.0) as u64
}

/// `spec.n` single-size samples, sequence numbers from 1.
pub fn generate(spec: &SynthSpec) -> Result<DelayTrace, SynthError> {
    spec.validate()?;
    let mut s = Sampler::new(spec);
    let samples = (1..=spec.n as u64)
        .map(|seq| {
            if s.lost() {
                DelaySample::lost(seq, spec.size_bytes)
            } else {
                DelaySample::delivered(seq, to_us(s.draw()), spec.size_bytes)
            }
        })
        .collect();
    Ok(DelayTrace::new(spec.metadata(), samples).expect("generated trace is valid"))
}

/// `spec.n` samples per size, alternating `w1`, `w2`. Each delay is the
/// path's fixed delay for its size plus a variable draw located at
/// `spec.d_min_us` (normally 0). `spec.size_bytes` is ignored.
pub fn generate_two_size(
    spec: &SynthSpec,
    path: &PathModel,
    w1: u32,
    w2: u32,
) -> Result<DelayTrace, SynthError> {
    let mut probe = *spec;
    probe.size_bytes = w1.max(1);
    probe.validate()?;
    check_sizes(w1, w2)?;
    let mut s = Sampler::new(spec);
    two_size(&spec.metadata(), path, w1, w2, spec.n, || {
        if s.lost() {
            None
        } else {
            Some(s.draw())
        }
    })
}

/// Like [`generate_two_size`] with every variable draw equal to zero.
pub fn generate_two_size_noiseless(
    path: &PathModel,
    w1: u32,
    w2: u32,
    n: usize,
) -> Result<DelayTrace, SynthError> {
    check_sizes(w1, w2)?;
    if n == 0 {
        return Err(SynthError::InvalidSpec("n must be at least 1".into()));
    }
    let meta = TraceMetadata::new("synth", "synth", DelayKind::Owd, "synth:noiseless");
    two_size(&meta, path, w1, w2, n, || Some(0.0))
}

fn check_sizes(w1: u32, w2: u32) -> Result<(), SynthError> {
    if w1 == 0 || w2 == 0 {
        return Err(SynthError::InvalidSpec(
            "sizes must be at least 1 byte".into(),
        ));
    }
    if w1 == w2 {
        return Err(SynthError::EqualSizes { size_bytes: w1 });
    }
    Ok(())
}

fn two_size(
    meta: &TraceMetadata,
    path: &PathModel,
    w1: u32,
    w2: u32,
    n: usize,
    mut variable: impl FnMut() -> Option<f64>,
) -> Result<DelayTrace, SynthError> {
    let samples = (0..2 * n as u64)
        .map(|i| {
            let w = if i % 2 == 0 { w1 } else { w2 };
            match variable() {
                Some(v) => DelaySample::delivered(i + 1, to_us(path.fixed_delay_us(w) + v), w),
                None => DelaySample::lost(i + 1, w),
            }
        })
        .collect();
    Ok(DelayTrace::new(meta.clone(), samples).expect("generated trace is valid"))
}
