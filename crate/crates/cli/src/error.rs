use std::fmt;
use std::process::ExitCode;

use delaykit::fit::FitError;
use delaykit::models::ModelError;
use delaykit::prober::ProbeError;
use delaykit::synth::SynthError;
use delaykit::{DecomposeError, TraceError};

/// Failure classes, one exit code each.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Class {
    Other = 1,
    Usage = 2,
    Input = 3,
    Degenerate = 4,
    Network = 5,
}

#[derive(Debug)]
pub struct Failure {
    pub class: Class,
    pub error: anyhow::Error,
}

impl Failure {
    pub fn new(class: Class, error: impl Into<anyhow::Error>) -> Self {
        Self {
            class,
            error: error.into(),
        }
    }

    pub fn usage(msg: impl fmt::Display) -> Self {
        Self::new(Class::Usage, anyhow::anyhow!("{msg}"))
    }

    pub fn context(self, ctx: impl fmt::Display + Send + Sync + 'static) -> Self {
        Self {
            class: self.class,
            error: self.error.context(ctx),
        }
    }

    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(self.class as u8)
    }
}

fn trace_class(e: &TraceError) -> Class {
    match e {
        TraceError::NoSamples { .. } => Class::Degenerate,
        TraceError::Kind(_) => Class::Usage,
        TraceError::ZeroParsedLines { .. }
        | TraceError::Schema { .. }
        | TraceError::Invalid(_)
        | TraceError::Io(_) => Class::Input,
    }
}

fn model_class(e: &ModelError) -> Class {
    match e {
        ModelError::DegenerateScale { .. } => Class::Degenerate,
        ModelError::BadProbability(_) | ModelError::InvalidParameter { .. } => Class::Usage,
    }
}

fn decompose_class(e: &DecomposeError) -> Class {
    match e {
        DecomposeError::InvalidModel(_) => Class::Usage,
        _ => Class::Degenerate,
    }
}

impl From<TraceError> for Failure {
    fn from(e: TraceError) -> Self {
        Self::new(trace_class(&e), e)
    }
}

impl From<ModelError> for Failure {
    fn from(e: ModelError) -> Self {
        Self::new(model_class(&e), e)
    }
}

impl From<DecomposeError> for Failure {
    fn from(e: DecomposeError) -> Self {
        Self::new(decompose_class(&e), e)
    }
}

impl From<FitError> for Failure {
    fn from(e: FitError) -> Self {
        let class = match &e {
            FitError::Trace(t) => trace_class(t),
            FitError::Model(m) => model_class(m),
            FitError::Decompose(d) => decompose_class(d),
            FitError::TooFewSamples { .. }
            | FitError::LengthMismatch { .. }
            | FitError::ConstantVector => Class::Degenerate,
        };
        Self::new(class, e)
    }
}

impl From<ProbeError> for Failure {
    fn from(e: ProbeError) -> Self {
        let class = match &e {
            ProbeError::Trace(t) => trace_class(t),
            ProbeError::Decompose(d) => decompose_class(d),
            ProbeError::InvalidSpec(_) => Class::Usage,
            ProbeError::PingUnavailable(_)
            | ProbeError::HostUnresolvable(_)
            | ProbeError::AllLost { .. }
            | ProbeError::PingFailed(_)
            | ProbeError::UnsupportedPlatform => Class::Network,
        };
        Self::new(class, e)
    }
}

impl From<SynthError> for Failure {
    fn from(e: SynthError) -> Self {
        Self::new(Class::Usage, e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Self::new(Class::Other, e)
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Self::new(Class::Other, e)
    }
}
