//! Delay-trace data model, ingestion and summary statistics.
//!
//! Delays are integer microseconds. Lost probes keep their sequence number
//! and packet size but carry no delay; they are excluded from every
//! statistic and only surface as a loss rate.

mod csv_io;
mod ping;

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

pub use csv_io::{read_trace_csv, trace_from_csv_str, trace_to_csv_string, write_trace_csv};
pub use ping::{parse_ping_text, ParsedPing};

#[derive(Debug, thiserror::Error)]
pub enum TraceError {
    #[error(
        "no ping reply or timeout line recognised ({skipped} lines skipped); is this ping output?"
    )]
    ZeroParsedLines { skipped: usize },

    #[error("line {line}: {message}")]
    Schema { line: u64, message: String },

    #[error("trace is already {0}")]
    Kind(DelayKind),

    #[error("no delivered samples{}", match .size_bytes { Some(w) => format!(" of size {w} bytes"), None => String::new() })]
    NoSamples { size_bytes: Option<u32> },

    #[error("invalid trace: {0}")]
    Invalid(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DelayKind {
    /// Round-trip time.
    #[serde(rename = "RTT")]
    Rtt,
    /// One-way delay.
    #[serde(rename = "OWD")]
    Owd,
}

impl fmt::Display for DelayKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DelayKind::Rtt => "RTT",
            DelayKind::Owd => "OWD",
        })
    }
}

impl FromStr for DelayKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "RTT" => Ok(DelayKind::Rtt),
            "OWD" => Ok(DelayKind::Owd),
            other => Err(format!(
                "unknown delay kind {other:?} (expected RTT or OWD)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceMetadata {
    pub source: String,
    pub target: String,
    pub delay_kind: DelayKind,
    pub collected_at: Option<DateTime<Utc>>,
    pub tool: String,
}

impl TraceMetadata {
    pub fn new(
        source: impl Into<String>,
        target: impl Into<String>,
        delay_kind: DelayKind,
        tool: impl Into<String>,
    ) -> Self {
        Self {
            source: source.into(),
            target: target.into(),
            delay_kind,
            collected_at: None,
            tool: tool.into(),
        }
    }
}

/// One probe. `delay_us` is `None` exactly when the probe was lost.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DelaySample {
    pub seq: u64,
    pub delay_us: Option<u64>,
    pub size_bytes: u32,
}

impl DelaySample {
    pub fn delivered(seq: u64, delay_us: u64, size_bytes: u32) -> Self {
        Self {
            seq,
            delay_us: Some(delay_us),
            size_bytes,
        }
    }

    pub fn lost(seq: u64, size_bytes: u32) -> Self {
        Self {
            seq,
            delay_us: None,
            size_bytes,
        }
    }

    pub fn is_lost(&self) -> bool {
        self.delay_us.is_none()
    }
}

/// Ordered samples for one path and direction.
///
/// Construction checks that sequence numbers strictly increase and that
/// every packet size is at least one byte; after that the trace is
/// immutable.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DelayTrace {
    metadata: TraceMetadata,
    samples: Vec<DelaySample>,
}

impl DelayTrace {
    pub fn new(metadata: TraceMetadata, samples: Vec<DelaySample>) -> Result<Self, TraceError> {
        for (i, s) in samples.iter().enumerate() {
            if s.size_bytes == 0 {
                return Err(TraceError::Invalid(format!(
                    "sample seq {} has zero packet size",
                    s.seq
                )));
            }
            if i > 0 && samples[i - 1].seq >= s.seq {
                return Err(TraceError::Invalid(format!(
                    "seq {} does not follow {}",
                    s.seq,
                    samples[i - 1].seq
                )));
            }
        }
        Ok(Self { metadata, samples })
    }

    pub fn metadata(&self) -> &TraceMetadata {
        &self.metadata
    }

    pub fn samples(&self) -> &[DelaySample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// `(size_bytes, delay_us)` for every delivered sample, in trace order.
    pub fn delivered(&self) -> impl Iterator<Item = (u32, u64)> + '_ {
        self.samples
            .iter()
            .filter_map(|s| s.delay_us.map(|d| (s.size_bytes, d)))
    }

    pub fn n_ok(&self) -> usize {
        self.delivered().count()
    }

    pub fn n_lost(&self) -> usize {
        self.samples.len() - self.n_ok()
    }

    pub fn loss_rate(&self) -> f64 {
        if self.samples.is_empty() {
            0.0
        } else {
            self.n_lost() as f64 / self.samples.len() as f64
        }
    }

    /// Distinct packet sizes, ascending. Includes sizes seen only on lost
    /// samples.
    pub fn sizes(&self) -> BTreeSet<u32> {
        self.samples.iter().map(|s| s.size_bytes).collect()
    }

    /// Distinct packet sizes that have at least one delivered sample.
    pub fn delivered_sizes(&self) -> BTreeSet<u32> {
        self.delivered().map(|(w, _)| w).collect()
    }

    pub fn with_metadata(mut self, metadata: TraceMetadata) -> Self {
        self.metadata = metadata;
        self
    }

    /// Rewrites every delivered delay. Order, sizes and losses are kept.
    pub(crate) fn map_delays(&self, mut f: impl FnMut(u32, u64) -> u64) -> DelayTrace {
        let samples = self
            .samples
            .iter()
            .map(|s| DelaySample {
                delay_us: s.delay_us.map(|d| f(s.size_bytes, d)),
                ..*s
            })
            .collect();
        DelayTrace {
            metadata: self.metadata.clone(),
            samples,
        }
    }

    /// Minimum and mean delay over delivered samples of one packet size.
    pub fn summarize(&self, size_bytes: u32) -> Result<TraceSummary, TraceError> {
        let mut n_ok = 0usize;
        let mut n_lost = 0usize;
        let mut min = u64::MAX;
        let mut sum = 0u128;
        for s in self.samples.iter().filter(|s| s.size_bytes == size_bytes) {
            match s.delay_us {
                Some(d) => {
                    n_ok += 1;
                    min = min.min(d);
                    sum += u128::from(d);
                }
                None => n_lost += 1,
            }
        }
        if n_ok == 0 {
            return Err(TraceError::NoSamples {
                size_bytes: Some(size_bytes),
            });
        }
        Ok(TraceSummary {
            size_bytes,
            n_ok,
            n_lost,
            d_min_us: min,
            d_av_us: sum as f64 / n_ok as f64,
        })
    }

    /// Halves every delivered delay (round half up) and relabels the trace
    /// as one-way delay. Path asymmetry is not accounted for.
    pub fn rtt_to_owd(&self) -> Result<DelayTrace, TraceError> {
        if self.metadata.delay_kind != DelayKind::Rtt {
            return Err(TraceError::Kind(self.metadata.delay_kind));
        }
        let mut out = self.map_delays(|_, d| d / 2 + d % 2);
        out.metadata.delay_kind = DelayKind::Owd;
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceSummary {
    pub size_bytes: u32,
    pub n_ok: usize,
    pub n_lost: usize,
    pub d_min_us: u64,
    pub d_av_us: f64,
}
