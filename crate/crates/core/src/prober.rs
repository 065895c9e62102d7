//! Live probing through the system `ping`.
//!
//! Flag mapping per platform:
//!
//! | option           | Linux (iputils)  | BSD / macOS        |
//! |------------------|------------------|--------------------|
//! | probe count      | `-c N`           | `-c N`             |
//! | payload size     | `-s W`           | `-s W`             |
//! | interval         | `-i SECONDS`     | `-i SECONDS`       |
//! | reply timeout    | `-W SECONDS`     | `-W MILLISECONDS`  |
//! | report misses    | `-O`             | on by default      |
//! | numeric output   | `-n`             | `-n`               |
//!
//! Windows `ping` (`-n N -l W -w MS`) prints a different reply grammar and
//! is not supported.
//!
//! Reply lines report payload plus the 8-byte ICMP header, so a probe sent
//! with `-s 100` yields samples of 108 bytes. The offset is the same for
//! every size and does not change the fitted capacity.

use std::io;
use std::path::PathBuf;
use std::process::Command;

use chrono::Utc;
use serde::{Deserialize, Serialize};

use crate::decompose::{self, DecomposeError, PathModel, SizeDelayPoint};
use crate::trace::{
    parse_ping_text, DelayKind, DelaySample, DelayTrace, TraceError, TraceMetadata, TraceSummary,
};

pub const DEFAULT_COUNT: u32 = 10;
pub const DEFAULT_SIZE_BYTES: u32 = 100;
pub const DEFAULT_INTERVAL_MS: u32 = 1000;
pub const DEFAULT_TIMEOUT_MS: u32 = 1000;

#[derive(Debug, thiserror::Error)]
pub enum ProbeError {
    #[error("ping tool unavailable: {0}")]
    PingUnavailable(String),

    #[error("cannot resolve host: {0}")]
    HostUnresolvable(String),

    #[error("all {count} probes were lost")]
    AllLost { count: u32 },

    #[error("ping failed: {0}")]
    PingFailed(String),

    #[error("invalid probe spec: {0}")]
    InvalidSpec(String),

    #[error("no supported ping grammar for this platform")]
    UnsupportedPlatform,

    #[error(transparent)]
    Trace(#[from] TraceError),

    #[error(transparent)]
    Decompose(#[from] DecomposeError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProbeSpec {
    pub host: String,
    pub count: u32,
    pub size_bytes: u32,
    pub interval_ms: u32,
    pub timeout_ms: u32,
}

impl ProbeSpec {
    pub fn new(host: impl Into<String>) -> Self {
        Self {
            host: host.into(),
            count: DEFAULT_COUNT,
            size_bytes: DEFAULT_SIZE_BYTES,
            interval_ms: DEFAULT_INTERVAL_MS,
            timeout_ms: DEFAULT_TIMEOUT_MS,
        }
    }

    fn validate(&self) -> Result<(), ProbeError> {
        let bad = |m: &str| Err(ProbeError::InvalidSpec(m.into()));
        if self.host.is_empty() || self.host.starts_with('-') {
            return bad("host must be a name or address");
        }
        if self.count == 0 {
            return bad("count must be at least 1");
        }
        if self.timeout_ms == 0 {
            return bad("timeout must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Platform {
    Linux,
    Bsd,
}

impl Platform {
    pub fn current() -> Option<Platform> {
        if cfg!(any(target_os = "linux", target_os = "android")) {
            Some(Platform::Linux)
        } else if cfg!(any(
            target_os = "macos",
            target_os = "ios",
            target_os = "freebsd",
            target_os = "openbsd",
            target_os = "netbsd",
            target_os = "dragonfly"
        )) {
            Some(Platform::Bsd)
        } else {
            None
        }
    }

    /// Sequence number of the first probe.
    pub fn first_seq(self) -> u64 {
        match self {
            Platform::Linux => 1,
            Platform::Bsd => 0,
        }
    }

    pub fn ping_args(self, spec: &ProbeSpec) -> Vec<String> {
        let interval = format!("{}.{:03}", spec.interval_ms / 1000, spec.interval_ms % 1000);
        let mut args = vec![
            "-n".to_string(),
            "-c".into(),
            spec.count.to_string(),
            "-s".into(),
            spec.size_bytes.to_string(),
            "-i".into(),
            interval,
            "-W".into(),
        ];
        match self {
            Platform::Linux => {
                args.push(spec.timeout_ms.div_ceil(1000).to_string());
                args.push("-O".into());
            }
            Platform::Bsd => args.push(spec.timeout_ms.to_string()),
        }
        args.push(spec.host.clone());
        args
    }

    fn tool_label(self) -> &'static str {
        match self {
            Platform::Linux => "ping (iputils)",
            Platform::Bsd => "ping (bsd)",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PingOutput {
    pub exit_code: Option<i32>,
    pub stdout: String,
    pub stderr: String,
}

/// Runs one ping invocation. Implemented by [`SystemPing`] and by test
/// doubles that replay canned transcripts.
pub trait PingRunner {
    fn run(&self, args: &[String]) -> io::Result<PingOutput>;
}

#[derive(Debug, Clone)]
pub struct SystemPing {
    pub program: PathBuf,
}

impl Default for SystemPing {
    fn default() -> Self {
        Self {
            program: PathBuf::from("ping"),
        }
    }
}

impl PingRunner for SystemPing {
    fn run(&self, args: &[String]) -> io::Result<PingOutput> {
        let out = Command::new(&self.program).args(args).output()?;
        Ok(PingOutput {
            exit_code: out.status.code(),
            stdout: String::from_utf8_lossy(&out.stdout).into_owned(),
            stderr: String::from_utf8_lossy(&out.stderr).into_owned(),
        })
    }
}

const RESOLVE_FAILURES: [&str; 7] = [
    "unknown host",
    "name or service not known",
    "cannot resolve",
    "temporary failure in name resolution",
    "no address associated with hostname",
    "nodename nor servname provided",
    "could not find host",
];

fn resolution_failure(out: &PingOutput) -> bool {
    let text = format!("{}\n{}", out.stderr, out.stdout).to_lowercase();
    RESOLVE_FAILURES.iter().any(|m| text.contains(m))
}

/// One ping burst. The trace covers exactly `spec.count` probes: probes the
/// transcript never mentions are recorded as lost.
pub fn probe(
    runner: &dyn PingRunner,
    platform: Platform,
    spec: &ProbeSpec,
) -> Result<DelayTrace, ProbeError> {
    spec.validate()?;
    let out = runner
        .run(&platform.ping_args(spec))
        .map_err(|e| match e.kind() {
            io::ErrorKind::NotFound | io::ErrorKind::PermissionDenied => {
                ProbeError::PingUnavailable(e.to_string())
            }
            _ => ProbeError::PingFailed(e.to_string()),
        })?;
    if resolution_failure(&out) {
        return Err(ProbeError::HostUnresolvable(spec.host.clone()));
    }

    let (parsed_samples, lost_size) = match parse_ping_text(&out.stdout, spec.size_bytes.max(1)) {
        Ok(p) => {
            let size = p
                .trace
                .samples()
                .first()
                .map_or(spec.size_bytes.max(1), |s| s.size_bytes);
            (p.trace.samples().to_vec(), size)
        }
        Err(TraceError::ZeroParsedLines { .. }) if out.stdout.contains("packets transmitted") => {
            return Err(ProbeError::AllLost { count: spec.count });
        }
        Err(TraceError::ZeroParsedLines { .. }) => {
            let msg = out.stderr.trim();
            return Err(ProbeError::PingFailed(if msg.is_empty() {
                format!("no ping output (exit code {:?})", out.exit_code)
            } else {
                msg.to_string()
            }));
        }
        Err(e) => return Err(e.into()),
    };

    let first = platform.first_seq();
    let window = first..first + u64::from(spec.count);
    let mut samples: Vec<DelaySample> = Vec::with_capacity(spec.count as usize);
    let mut parsed = parsed_samples
        .into_iter()
        .filter(|s| window.clone().contains(&s.seq))
        .peekable();
    for seq in window.clone() {
        match parsed.next_if(|s| s.seq == seq) {
            Some(s) => samples.push(s),
            None => samples.push(DelaySample::lost(seq, lost_size)),
        }
    }

    let mut metadata = TraceMetadata::new(
        "local",
        spec.host.clone(),
        DelayKind::Rtt,
        platform.tool_label(),
    );
    metadata.collected_at = Some(Utc::now());
    let trace = DelayTrace::new(metadata, samples)?;
    if trace.n_ok() == 0 {
        return Err(ProbeError::AllLost { count: spec.count });
    }
    Ok(trace)
}

/// Ten probes at the default size, reduced to minimum and mean RTT.
pub fn quick_estimate(
    runner: &dyn PingRunner,
    platform: Platform,
    host: &str,
) -> Result<TraceSummary, ProbeError> {
    let trace = probe(runner, platform, &ProbeSpec::new(host))?;
    let (size, _) = trace
        .delivered()
        .next()
        .expect("probe returns a delivered sample");
    Ok(trace.summarize(size)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PathFitMode {
    TwoPoint,
    Regression,
}

#[derive(Debug, Clone)]
pub struct MultiSizeProbe {
    pub model: PathModel,
    pub mode: PathFitMode,
    pub points: Vec<SizeDelayPoint>,
    pub traces: Vec<DelayTrace>,
}

/// One burst per size, run one after another, then the fixed-delay line
/// through the per-size minima.
pub fn multi_size_probe(
    runner: &dyn PingRunner,
    platform: Platform,
    base: &ProbeSpec,
    sizes: &[u32],
) -> Result<MultiSizeProbe, ProbeError> {
    let mut distinct = sizes.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() != sizes.len() || sizes.len() < 2 {
        let size_bytes = sizes.first().copied().unwrap_or(base.size_bytes);
        let dup = sizes
            .iter()
            .enumerate()
            .find(|(i, w)| sizes[..*i].contains(w))
            .map_or(size_bytes, |(_, &w)| w);
        return Err(DecomposeError::EqualSizes { size_bytes: dup }.into());
    }

    let mut traces = Vec::with_capacity(sizes.len());
    let mut points = Vec::with_capacity(sizes.len());
    for &w in sizes {
        let spec = ProbeSpec {
            size_bytes: w,
            ..base.clone()
        };
        let trace = probe(runner, platform, &spec)?;
        points.extend(decompose::min_delay_by_size(&trace)?);
        traces.push(trace);
    }
    points.sort_by_key(|p| p.size_bytes);
    let (model, mode) = match points.as_slice() {
        [a, b] => (
            decompose::two_point_path_model(*a, *b)?,
            PathFitMode::TwoPoint,
        ),
        _ => (
            decompose::regression_path_model(&points)?,
            PathFitMode::Regression,
        ),
    };
    Ok(MultiSizeProbe {
        model,
        mode,
        points,
        traces,
    })
}
