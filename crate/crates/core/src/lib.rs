//! Packet-delay modeling toolkit.
//!
//! Delay traces come in from ping transcripts or the canonical CSV format
//! ([`trace`]), get split into a fixed size-dependent part and a variable
//! part ([`decompose`]), and the variable part is scored against an
//! exponential and a truncated-normal (half-normal) model ([`models`],
//! [`fit`]). [`synth`] produces seeded traces from either family and
//! [`prober`] collects live traces by driving the system `ping`.

pub mod decompose;
pub mod fit;
pub mod models;
pub mod prober;
pub mod synth;
pub mod trace;

pub use decompose::{DecomposeError, PathModel, SizeDelayPoint};
pub use fit::{EmpiricalCdf, FitError, FitReport, ModelKind};
pub use models::{
    DelayModel, ExponentialDelayModel, ModelError, SizeAwareExponentialModel,
    TruncatedNormalDelayModel,
};
pub use trace::{DelayKind, DelaySample, DelayTrace, TraceError, TraceMetadata, TraceSummary};
