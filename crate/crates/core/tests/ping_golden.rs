use std::fs;
use std::path::PathBuf;

use delaykit::trace::{parse_ping_text, trace_to_csv_string};

fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data/ping")
}

#[test]
fn transcripts_match_golden_csv() {
    let dir = data_dir();
    let skipped = fs::read_to_string(dir.join("skipped.txt")).unwrap();
    let mut checked = 0;
    for line in skipped.lines() {
        let (name, want_skipped) = line.split_once(' ').unwrap();
        let text = fs::read_to_string(dir.join(format!("{name}.txt"))).unwrap();
        let want_csv = fs::read_to_string(dir.join(format!("{name}.csv"))).unwrap();
        let parsed = parse_ping_text(&text, 56).unwrap();
        assert_eq!(
            trace_to_csv_string(&parsed.trace).unwrap(),
            want_csv,
            "{name}"
        );
        assert_eq!(
            parsed.skipped,
            want_skipped.parse::<usize>().unwrap(),
            "{name}"
        );
        checked += 1;
    }
    assert!(checked >= 6);
}

#[test]
fn parser_output_obeys_trace_invariants() {
    for entry in fs::read_dir(data_dir()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_none_or(|e| e != "txt") || path.ends_with("skipped.txt") {
            continue;
        }
        let parsed = parse_ping_text(&fs::read_to_string(&path).unwrap(), 56).unwrap();
        let samples = parsed.trace.samples();
        assert!(samples.windows(2).all(|w| w[0].seq < w[1].seq), "{path:?}");
        assert!(samples.iter().all(|s| s.size_bytes >= 1));
    }
}
