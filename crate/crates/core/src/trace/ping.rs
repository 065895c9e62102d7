//! Ping transcript parsing.
//!
//! Two reply grammars are recognised, line by line:
//!
//! | tool            | reply                                                   | loss                                   |
//! |-----------------|---------------------------------------------------------|----------------------------------------|
//! | Linux iputils   | `64 bytes from h (a): icmp_seq=1 ttl=54 time=43.2 ms`   | `no answer yet for icmp_seq=2` (`-O`), `From a icmp_seq=3 Destination Host Unreachable` |
//! | BSD / macOS     | `64 bytes from a: icmp_seq=0 ttl=54 time=43.215 ms`     | `Request timeout for icmp_seq 1`       |
//!
//! BusyBox's `seq=` spelling is accepted as well. Windows `ping` output is
//! not supported.

use std::collections::BTreeMap;
use std::sync::LazyLock;

use regex::Regex;

use super::{DelayKind, DelaySample, DelayTrace, TraceError, TraceMetadata};

static REPLY: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"^(\d+) bytes from (.+?): (?:icmp_)?seq=(\d+)\b.*?\btime=(\d+(?:\.\d+)?) ?(ms|us|µs|s)\b",
    )
    .unwrap()
});
static BSD_TIMEOUT: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^Request timeout for icmp_seq (\d+)").unwrap());
static IPUTILS_NO_ANSWER: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^no answer yet for icmp_seq=(\d+)").unwrap());
static IPUTILS_ERROR: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^From \S+(?: \([^)]*\))?:? icmp_seq=(\d+) \S").unwrap());
static HEADER: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"^PING (\S+?)\s*\([^)]*\)\s*:?\s*(\d+)(?:\(\d+\))?\s+(?:data\s+)?bytes").unwrap()
});
static BOILERPLATE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"^(?:PING |--- .* ping statistics ---|\d+ packets transmitted|(?:rtt|round-trip) )")
        .unwrap()
});

/// ICMP echo header bytes included in the size printed on reply lines.
const ICMP_HEADER_BYTES: u32 = 8;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedPing {
    pub trace: DelayTrace,
    /// Non-blank lines that were neither samples nor ping boilerplate.
    pub skipped: usize,
}

/// Parses a ping transcript into an RTT trace.
///
/// Sizes come from the reply lines (`64 bytes from ...`). Lost probes take
/// the size of the first reply in the transcript, otherwise the header's
/// payload plus the ICMP header, otherwise `fallback_size`. A late reply
/// replaces an earlier loss line for the same sequence number; duplicate
/// replies are skipped.
pub fn parse_ping_text(text: &str, fallback_size: u32) -> Result<ParsedPing, TraceError> {
    let mut by_seq: BTreeMap<u64, Option<(u64, u32)>> = BTreeMap::new();
    let mut skipped = 0usize;
    let mut target: Option<String> = None;
    let mut reply_from: Option<String> = None;
    let mut header_size: Option<u32> = None;
    let mut reply_size: Option<u32> = None;

    for raw in text.lines() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(c) = REPLY.captures(line) {
            let parsed = (|| {
                let size: u32 = c[1].parse().ok()?;
                let seq: u64 = c[3].parse().ok()?;
                let delay = decimal_to_us(&c[4], &c[5])?;
                Some((seq, delay, size))
            })();
            match parsed {
                Some((seq, delay, size)) if size > 0 && !line.contains("(DUP!)") => {
                    match by_seq.get(&seq) {
                        Some(Some(_)) => skipped += 1,
                        _ => {
                            by_seq.insert(seq, Some((delay, size)));
                            reply_size.get_or_insert(size);
                            reply_from.get_or_insert_with(|| c[2].to_string());
                        }
                    }
                }
                _ => skipped += 1,
            }
            continue;
        }
        let lost_seq = [&*BSD_TIMEOUT, &*IPUTILS_NO_ANSWER, &*IPUTILS_ERROR]
            .iter()
            .find_map(|re| re.captures(line));
        if let Some(c) = lost_seq {
            match c[1].parse::<u64>() {
                Ok(seq) => {
                    by_seq.entry(seq).or_insert(None);
                }
                Err(_) => skipped += 1,
            }
            continue;
        }
        if let Some(c) = HEADER.captures(line) {
            target.get_or_insert_with(|| c[1].to_string());
            if let Ok(payload) = c[2].parse::<u32>() {
                header_size.get_or_insert(payload.saturating_add(ICMP_HEADER_BYTES));
            }
            continue;
        }
        if !BOILERPLATE.is_match(line) {
            skipped += 1;
        }
    }

    if by_seq.is_empty() {
        return Err(TraceError::ZeroParsedLines { skipped });
    }

    let lost_size = reply_size.or(header_size).unwrap_or(fallback_size).max(1);
    let samples = by_seq
        .into_iter()
        .map(|(seq, v)| match v {
            Some((delay, size)) => DelaySample::delivered(seq, delay, size),
            None => DelaySample::lost(seq, lost_size),
        })
        .collect();
    let metadata = TraceMetadata::new(
        "local",
        target.or(reply_from).unwrap_or_else(|| "unknown".into()),
        DelayKind::Rtt,
        "ping",
    );
    Ok(ParsedPing {
        trace: DelayTrace::new(metadata, samples)?,
        skipped,
    })
}

/// Converts a decimal time string to whole microseconds without going
/// through floating point. Digits beyond microsecond precision round half up.
fn decimal_to_us(value: &str, unit: &str) -> Option<u64> {
    let shift: usize = match unit {
        "s" => 6,
        "ms" => 3,
        "us" | "µs" => 0,
        _ => return None,
    };
    let (int_part, frac_part) = value.split_once('.').unwrap_or((value, ""));
    let mut us: u64 = int_part.parse().ok()?;
    us = us.checked_mul(10u64.pow(shift as u32))?;
    let frac = frac_part.as_bytes();
    let mut scaled = 0u64;
    for i in 0..shift {
        let digit = frac.get(i).map_or(0, |b| u64::from(b - b'0'));
        scaled = scaled * 10 + digit;
    }
    if frac.get(shift).is_some_and(|&b| b >= b'5') {
        scaled += 1;
    }
    us.checked_add(scaled)
}
