//! Canonical trace CSV.
//!
//! ```text
//! # source=local
//! # target=193.0.0.4
//! # kind=RTT
//! # tool=ping
//! seq,delay_us,size_bytes,lost
//! 1,43200,64,0
//! 2,,64,1
//! ```
//!
//! An optional `# collected_at=<RFC 3339>` comment follows `# tool=` when
//! the collection time is known. Unknown `#` comments are ignored on read.

use std::fs;
use std::path::Path;

use chrono::{DateTime, SecondsFormat, Utc};

use super::{DelayKind, DelaySample, DelayTrace, TraceError, TraceMetadata};

const COLUMNS: [&str; 4] = ["seq", "delay_us", "size_bytes", "lost"];

pub fn read_trace_csv(path: impl AsRef<Path>) -> Result<DelayTrace, TraceError> {
    trace_from_csv_str(&fs::read_to_string(path)?)
}

pub fn write_trace_csv(trace: &DelayTrace, path: impl AsRef<Path>) -> Result<(), TraceError> {
    fs::write(path, trace_to_csv_string(trace)?)?;
    Ok(())
}

fn schema(line: u64, message: impl Into<String>) -> TraceError {
    TraceError::Schema {
        line,
        message: message.into(),
    }
}

pub fn trace_to_csv_string(trace: &DelayTrace) -> Result<String, TraceError> {
    let m = trace.metadata();
    let mut out = String::new();
    for (key, value) in [("source", &m.source), ("target", &m.target)] {
        push_meta(&mut out, key, value)?;
    }
    push_meta(&mut out, "kind", &m.delay_kind.to_string())?;
    push_meta(&mut out, "tool", &m.tool)?;
    if let Some(at) = m.collected_at {
        push_meta(
            &mut out,
            "collected_at",
            &at.to_rfc3339_opts(SecondsFormat::AutoSi, true),
        )?;
    }

    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    let io = |e: csv::Error| TraceError::Invalid(e.to_string());
    w.write_record(COLUMNS).map_err(io)?;
    for s in trace.samples() {
        let delay = s.delay_us.map(|d| d.to_string()).unwrap_or_default();
        let lost = if s.is_lost() { "1" } else { "0" };
        w.write_record([
            s.seq.to_string(),
            delay,
            s.size_bytes.to_string(),
            lost.to_string(),
        ])
        .map_err(io)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| TraceError::Invalid(e.to_string()))?;
    out.push_str(std::str::from_utf8(&bytes).expect("csv output is ascii"));
    Ok(out)
}

fn push_meta(out: &mut String, key: &str, value: &str) -> Result<(), TraceError> {
    if value.contains(['\n', '\r']) {
        return Err(TraceError::Invalid(format!(
            "metadata field {key} contains a line break"
        )));
    }
    out.push_str("# ");
    out.push_str(key);
    out.push('=');
    out.push_str(value);
    out.push('\n');
    Ok(())
}

pub fn trace_from_csv_str(text: &str) -> Result<DelayTrace, TraceError> {
    let mut source = String::new();
    let mut target = String::new();
    let mut tool = String::new();
    let mut kind: Option<DelayKind> = None;
    let mut collected_at: Option<DateTime<Utc>> = None;

    for (i, line) in text.lines().enumerate() {
        let line_no = i as u64 + 1;
        let Some(comment) = line.strip_prefix('#') else {
            continue;
        };
        let Some((key, value)) = comment.strip_prefix(' ').unwrap_or(comment).split_once('=')
        else {
            continue;
        };
        match key {
            "source" => source = value.to_string(),
            "target" => target = value.to_string(),
            "tool" => tool = value.to_string(),
            "kind" => kind = Some(value.parse().map_err(|e: String| schema(line_no, e))?),
            "collected_at" => {
                let at = DateTime::parse_from_rfc3339(value)
                    .map_err(|e| schema(line_no, format!("bad collected_at: {e}")))?;
                collected_at = Some(at.with_timezone(&Utc));
            }
            _ => {}
        }
    }
    let kind = kind.ok_or_else(|| schema(1, "missing `# kind=RTT|OWD` header comment"))?;

    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .has_headers(true)
        .from_reader(text.as_bytes());
    let headers = rdr
        .headers()
        .map_err(|e| schema(csv_line(&e), e.to_string()))?
        .clone();
    let header_line = text
        .lines()
        .position(|l| !l.starts_with('#'))
        .map_or(1, |i| i as u64 + 1);
    let mut idx = [0usize; 4];
    let mut missing = Vec::new();
    for (slot, name) in idx.iter_mut().zip(COLUMNS) {
        match headers.iter().position(|h| h.trim() == name) {
            Some(p) => *slot = p,
            None => missing.push(name),
        }
    }
    if !missing.is_empty() {
        return Err(schema(
            header_line,
            format!("missing column(s): {}", missing.join(", ")),
        ));
    }

    let mut samples: Vec<DelaySample> = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| schema(csv_line(&e), e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line());
        let field = |k: usize| rec.get(idx[k]).unwrap_or("").trim();
        let seq: u64 = field(0).parse().map_err(|_| {
            schema(
                line,
                format!("seq {:?} is not a non-negative integer", field(0)),
            )
        })?;
        let size: u32 = field(2)
            .parse()
            .map_err(|_| schema(line, format!("size_bytes {:?} is not an integer", field(2))))?;
        if size == 0 {
            return Err(schema(line, "size_bytes must be at least 1"));
        }
        let lost = match field(3) {
            "0" => false,
            "1" => true,
            other => return Err(schema(line, format!("lost {other:?} must be 0 or 1"))),
        };
        let delay = match (field(1), lost) {
            ("", true) => None,
            ("", false) => return Err(schema(line, "delivered sample has empty delay_us")),
            (_, true) => return Err(schema(line, "lost sample must have empty delay_us")),
            (d, false) => Some(d.parse::<u64>().map_err(|_| {
                schema(
                    line,
                    format!("delay_us {d:?} is not a non-negative integer"),
                )
            })?),
        };
        if let Some(prev) = samples.last() {
            if prev.seq == seq {
                return Err(schema(line, format!("duplicate seq {seq}")));
            }
            if prev.seq > seq {
                return Err(schema(line, format!("seq {seq} follows {}", prev.seq)));
            }
        }
        samples.push(DelaySample {
            seq,
            delay_us: delay,
            size_bytes: size,
        });
    }

    let metadata = TraceMetadata {
        source,
        target,
        delay_kind: kind,
        collected_at,
        tool,
    };
    DelayTrace::new(metadata, samples)
}

fn csv_line(e: &csv::Error) -> u64 {
    e.position().map_or(0, |p| p.line())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const THREE_ROWS: &str = "\
# source=tt01
# target=tt143
# kind=OWD
# tool=ripe-export
seq,delay_us,size_bytes,lost
1,10000,100,0
2,12000,100,0
3,11000,100,0
";

    #[test]
    fn reads_three_rows() {
        let t = trace_from_csv_str(THREE_ROWS).unwrap();
        assert_eq!(t.n_ok(), 3);
        assert_eq!(t.metadata().delay_kind, DelayKind::Owd);
        assert_eq!(t.metadata().target, "tt143");
    }

    #[test]
    fn canonical_file_round_trips_byte_identical() {
        let t = trace_from_csv_str(THREE_ROWS).unwrap();
        assert_eq!(trace_to_csv_string(&t).unwrap(), THREE_ROWS);
    }

    #[test]
    fn lost_row() {
        let t = trace_from_csv_str("# kind=RTT\nseq,delay_us,size_bytes,lost\n4,,64,1\n").unwrap();
        assert!(t.samples()[0].is_lost());
        assert_eq!(t.n_lost(), 1);
    }

    #[test]
    fn schema_errors_carry_line_numbers() {
        let cases = [
            ("# kind=RTT\nseq,delay_us,lost\n1,5,0\n", 2, "size_bytes"),
            (
                "# kind=RTT\nseq,delay_us,size_bytes,lost\n1,abc,64,0\n",
                3,
                "delay_us",
            ),
            (
                "# kind=RTT\nseq,delay_us,size_bytes,lost\n1,5,64,0\n1,6,64,0\n",
                4,
                "duplicate",
            ),
            (
                "# kind=RTT\nseq,delay_us,size_bytes,lost\n2,5,64,0\n1,6,64,0\n",
                4,
                "follows",
            ),
            (
                "# kind=RTT\nseq,delay_us,size_bytes,lost\n1,,64,0\n",
                3,
                "empty",
            ),
            (
                "# kind=RTT\nseq,delay_us,size_bytes,lost\n1,5,64,1\n",
                3,
                "lost sample",
            ),
            ("seq,delay_us,size_bytes,lost\n1,5,64,0\n", 1, "kind"),
        ];
        for (text, want_line, needle) in cases {
            match trace_from_csv_str(text) {
                Err(TraceError::Schema { line, message }) => {
                    assert_eq!(line, want_line, "{text}: {message}");
                    assert!(message.contains(needle), "{message}");
                }
                other => panic!("{text}: expected schema error, got {other:?}"),
            }
        }
    }

    #[test]
    fn collected_at_round_trips() {
        let mut t = trace_from_csv_str(THREE_ROWS).unwrap();
        let mut m = t.metadata().clone();
        m.collected_at = Some(
            DateTime::parse_from_rfc3339("2026-10-16T12:00:00.25Z")
                .unwrap()
                .into(),
        );
        t = t.with_metadata(m);
        let s = trace_to_csv_string(&t).unwrap();
        assert!(s.contains("# collected_at=2026-10-16T12:00:00.250Z\n"));
        assert_eq!(trace_from_csv_str(&s).unwrap(), t);
    }

    fn arb_trace() -> impl Strategy<Value = DelayTrace> {
        let label = "[A-Za-z0-9._:-]{0,12}";
        (
            label,
            label,
            label,
            prop::bool::ANY,
            prop::collection::vec(
                (1u64..5, prop::option::of(0u64..100_000_000), 1u32..9000),
                0..60,
            ),
        )
            .prop_map(|(source, target, tool, rtt, rows)| {
                let kind = if rtt { DelayKind::Rtt } else { DelayKind::Owd };
                let mut seq = 0;
                let samples = rows
                    .into_iter()
                    .map(|(step, delay, size)| {
                        seq += step;
                        DelaySample {
                            seq,
                            delay_us: delay,
                            size_bytes: size,
                        }
                    })
                    .collect();
                DelayTrace::new(TraceMetadata::new(source, target, kind, tool), samples).unwrap()
            })
    }

    proptest! {
        #[test]
        fn csv_round_trip(t in arb_trace()) {
            let text = trace_to_csv_string(&t).unwrap();
            let back = trace_from_csv_str(&text).unwrap();
            prop_assert_eq!(&back, &t);
            prop_assert_eq!(trace_to_csv_string(&back).unwrap(), text);
        }
    }
}
