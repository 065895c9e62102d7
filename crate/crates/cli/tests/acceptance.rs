//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails. Runs as a plain binary (`harness = false`).

use std::fs;
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use tempfile::TempDir;

use delaykit::decompose::{fit_path_model, min_delay_by_size};
use delaykit::fit::{compare_models, pearson, EmpiricalCdf};
use delaykit::models::{DelayModel, ExponentialDelayModel, TruncatedNormalDelayModel};
use delaykit::synth::{
    generate, generate_two_size, generate_two_size_noiseless, SynthFamily, SynthSpec,
};
use delaykit::trace::{parse_ping_text, trace_to_csv_string};
use delaykit::{ModelKind, PathModel};

type Outcome = Result<String, String>;

struct Criterion {
    id: u32,
    name: &'static str,
    budget: Duration,
    check: fn() -> Outcome,
}

/// `(d_min_us, scale_us)` for the i-th of 20 traces, spread over
/// D_min in [5, 200] ms and scale in [1, 50] ms.
fn grid(i: u64) -> (f64, f64) {
    let d_min = 5_000.0 + (i % 20) as f64 * 195_000.0 / 19.0;
    let scale = 1_000.0 + ((i * 7) % 20) as f64 * 49_000.0 / 19.0;
    (d_min, scale)
}

fn grid_spec(family: SynthFamily, i: u64, seed: u64) -> SynthSpec {
    let (d_min_us, scale_us) = grid(i);
    SynthSpec {
        family,
        d_min_us,
        scale_us,
        n: 10_000,
        size_bytes: 100,
        seed,
        loss_rate: 0.0,
    }
}

fn exponential_selection() -> Outcome {
    let mut hits = 0;
    let mut min_k = f64::INFINITY;
    let mut failures = Vec::new();
    for i in 0..20 {
        let trace = generate(&grid_spec(SynthFamily::Exponential, i, 1000 + i))
            .map_err(|e| e.to_string())?;
        let r = compare_models(&trace).map_err(|e| e.to_string())?;
        min_k = min_k.min(r.k_exp);
        if r.selected == ModelKind::Exponential && r.k_exp >= 0.99 && r.k_exp > r.k_nor {
            hits += 1;
        } else {
            failures.push(format!(
                "trace {i}: K_exp {:.4}, K_nor {:.4}",
                r.k_exp, r.k_nor
            ));
        }
    }
    let detail = format!("{hits}/20 exponential, min K_exp {min_k:.5}");
    if hits == 20 {
        Ok(detail)
    } else {
        Err(format!("{detail}; {}", failures.join("; ")))
    }
}

fn half_normal_selection() -> Outcome {
    let mut hits = 0;
    let mut misses = Vec::new();
    for i in 0..20 {
        let trace = generate(&grid_spec(SynthFamily::TruncatedNormal, i, 2000 + i))
            .map_err(|e| e.to_string())?;
        let r = compare_models(&trace).map_err(|e| e.to_string())?;
        if r.selected == ModelKind::TruncatedNormal {
            hits += 1;
        } else {
            misses.push(format!(
                "trace {i}: K_nor {:.4}, K_exp {:.4}",
                r.k_nor, r.k_exp
            ));
        }
    }
    let detail = format!("{hits}/20 truncated-normal");
    if hits >= 19 {
        Ok(detail)
    } else {
        Err(format!("{detail}; {}", misses.join("; ")))
    }
}

fn rel_err(got: f64, want: f64) -> f64 {
    ((got - want) / want).abs()
}

fn path_recovery() -> Outcome {
    let truth = PathModel::new(9_000.0, 0.1).unwrap();
    let mut worst_clean: f64 = 0.0;
    for (w1, w2) in [(100, 1000), (64, 1500), (1400, 200)] {
        let trace = generate_two_size_noiseless(&truth, w1, w2, 10).map_err(|e| e.to_string())?;
        let points = min_delay_by_size(&trace).map_err(|e| e.to_string())?;
        let m = fit_path_model(&points).map_err(|e| e.to_string())?;
        worst_clean = worst_clean
            .max(rel_err(m.d_min_us, truth.d_min_us))
            .max(rel_err(
                m.capacity_bytes_per_us,
                truth.capacity_bytes_per_us,
            ));
    }

    let spec = SynthSpec {
        family: SynthFamily::Exponential,
        d_min_us: 0.0,
        scale_us: 5_000.0,
        n: 10_000,
        size_bytes: 100,
        seed: 42,
        loss_rate: 0.0,
    };
    let trace = generate_two_size(&spec, &truth, 100, 1000).map_err(|e| e.to_string())?;
    let points = min_delay_by_size(&trace).map_err(|e| e.to_string())?;
    let m = fit_path_model(&points).map_err(|e| e.to_string())?;
    let noisy = rel_err(m.d_min_us, truth.d_min_us).max(rel_err(
        m.capacity_bytes_per_us,
        truth.capacity_bytes_per_us,
    ));

    let detail = format!("noiseless rel err {worst_clean:.1e}, noisy rel err {noisy:.4}");
    if worst_clean <= 1e-9 && noisy <= 0.02 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// Composite Simpson integral of the half-normal density from the location.
fn simpson_half_normal_cdf(d_min: f64, sigma: f64, d: f64) -> f64 {
    if d <= d_min {
        return 0.0;
    }
    let density = |x: f64| {
        let z = (x - d_min) / sigma;
        2.0 / (sigma * (2.0 * std::f64::consts::PI).sqrt()) * (-0.5 * z * z).exp()
    };
    let steps = 2_000;
    let h = (d - d_min) / steps as f64;
    let mut sum = density(d_min) + density(d);
    for k in 1..steps {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        sum += w * density(d_min + k as f64 * h);
    }
    sum * h / 3.0
}

fn cdf_checks() -> Outcome {
    let (d_min, sigma) = (20_000.0, 4_000.0);
    let nor = TruncatedNormalDelayModel::new(d_min, sigma).map_err(|e| e.to_string())?;
    let mut simpson_err: f64 = 0.0;
    for k in 0..100 {
        let d = d_min + k as f64 * (6.0 * sigma) / 99.0;
        simpson_err =
            simpson_err.max((nor.cdf(d) - simpson_half_normal_cdf(d_min, sigma, d)).abs());
    }

    let d_av = 27_500.0;
    let exp = ExponentialDelayModel::from_moments(d_min, d_av).map_err(|e| e.to_string())?;
    let at_mean_err = (exp.cdf(d_av) - (1.0 - (-1.0f64).exp())).abs();

    let mut inverse_err: f64 = 0.0;
    for k in 1..=99 {
        let p = k as f64 / 100.0;
        for m in [&exp as &dyn DelayModel, &nor] {
            let q = m.quantile(p).map_err(|e| e.to_string())?;
            inverse_err = inverse_err.max((m.cdf(q) - p).abs());
        }
    }

    let detail = format!(
        "Simpson err {simpson_err:.1e}, F_exp(D_av) err {at_mean_err:.1e}, inverse err {inverse_err:.1e}"
    );
    if simpson_err <= 1e-7 && at_mean_err <= 1e-12 && inverse_err < 1e-9 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

const CASES: u32 = 1_000;

fn run_property<S: Strategy>(
    name: &str,
    strategy: S,
    test: impl Fn(S::Value) -> Result<(), TestCaseError>,
) -> Result<(), String> {
    let mut runner = TestRunner::new(Config {
        cases: CASES,
        failure_persistence: None,
        ..Config::default()
    });
    runner
        .run(&strategy, test)
        .map_err(|e| format!("{name}: {e}"))
}

fn non_constant(len: std::ops::Range<usize>) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1e3f64..1e3, len).prop_filter("needs spread", |v| {
        let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        hi - lo > 1e-3
    })
}

fn property_invariants() -> Outcome {
    // Small integer range so ties are common.
    run_property("ecdf", prop::collection::vec(0u32..50, 2..300), |raw| {
        let n = raw.len();
        let ecdf = EmpiricalCdf::from_delays(raw.iter().map(|&d| f64::from(d)).collect())
            .map_err(|e| TestCaseError::fail(e.to_string()))?;
        let mut rank = 0usize;
        let mut prev: Option<(f64, f64)> = None;
        for p in ecdf.points() {
            prop_assert!(
                p.prob > 0.0 && p.prob < 1.0,
                "prob {} outside (0,1)",
                p.prob
            );
            if let Some((d, f)) = prev {
                prop_assert!(p.delay_us > d && p.prob > f, "not strictly increasing");
            }
            rank += p.count;
            let tied = raw.iter().filter(|&&d| f64::from(d) == p.delay_us).count();
            prop_assert_eq!(p.count, tied);
            prop_assert_eq!(p.prob, (rank as f64 - 0.5) / n as f64);
            prev = Some((p.delay_us, p.prob));
        }
        prop_assert_eq!(rank, n);
        Ok(())
    })?;

    run_property("self-correlation", non_constant(2..200), |xs| {
        let r = pearson(&xs, &xs).map_err(|e| TestCaseError::fail(e.to_string()))?;
        prop_assert!((r - 1.0).abs() <= 1e-12, "r = {r}");
        Ok(())
    })?;

    let affine = (
        non_constant(3..100),
        0.1f64..10.0,
        -100.0f64..100.0,
        any::<u64>(),
    );
    run_property("affine invariance", affine, |(xs, a, b, salt)| {
        // ys: a deterministic shuffle-ish companion series
        let ys: Vec<f64> = xs
            .iter()
            .enumerate()
            .map(|(i, x)| x + ((i as u64).wrapping_mul(salt | 1) % 997) as f64)
            .collect();
        let base = pearson(&xs, &ys);
        let moved: Vec<f64> = ys.iter().map(|y| a * y + b).collect();
        match (base, pearson(&xs, &moved)) {
            (Ok(r0), Ok(r1)) => prop_assert!((r0 - r1).abs() <= 1e-12, "{r0} vs {r1}"),
            (Err(_), Err(_)) => {}
            (l, r) => prop_assert!(false, "{l:?} vs {r:?}"),
        }
        Ok(())
    })?;

    Ok(format!("3 properties x {CASES} cases"))
}

fn parser_goldens() -> Outcome {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/data/ping");
    let mut names: Vec<String> = fs::read_dir(&dir)
        .map_err(|e| format!("{}: {e}", dir.display()))?
        .filter_map(|e| {
            let name = e.ok()?.file_name().into_string().ok()?;
            name.strip_suffix(".txt")
                .filter(|n| *n != "skipped")
                .map(str::to_owned)
        })
        .collect();
    names.sort();
    let mut mismatches = Vec::new();
    for name in &names {
        let text =
            fs::read_to_string(dir.join(format!("{name}.txt"))).map_err(|e| e.to_string())?;
        let want =
            fs::read_to_string(dir.join(format!("{name}.csv"))).map_err(|e| e.to_string())?;
        let got = parse_ping_text(&text, 56)
            .and_then(|p| trace_to_csv_string(&p.trace))
            .map_err(|e| format!("{name}: {e}"))?;
        if got != want {
            mismatches.push(name.clone());
        }
    }
    let linux = names.iter().filter(|n| n.starts_with("linux")).count();
    let bsd = names.iter().filter(|n| n.starts_with("bsd")).count();
    let detail = format!(
        "{} transcripts ({linux} Linux, {bsd} BSD/macOS)",
        names.len()
    );
    if names.len() >= 6 && linux > 0 && bsd > 0 && mismatches.is_empty() {
        Ok(detail)
    } else {
        Err(format!("{detail}; mismatched: {}", mismatches.join(", ")))
    }
}

fn synth_then_fit(dir: &Path) -> Result<Vec<u8>, String> {
    let bin = env!("CARGO_BIN_EXE_delaykit");
    let csv = dir.join("trace.csv");
    let synth = Command::new(bin)
        .args([
            "synth", "--family", "exp", "--dmin", "20000", "--scale", "5000", "--n", "10000",
            "--seed", "7", "-o",
        ])
        .arg(&csv)
        .output()
        .map_err(|e| e.to_string())?;
    if !synth.status.success() {
        return Err(String::from_utf8_lossy(&synth.stderr).into_owned());
    }
    let fit = Command::new(bin)
        .arg("fit")
        .arg(&csv)
        .arg("--json")
        .output()
        .map_err(|e| e.to_string())?;
    if !fit.status.success() {
        return Err(String::from_utf8_lossy(&fit.stderr).into_owned());
    }
    Ok(fit.stdout)
}

fn end_to_end_determinism() -> Outcome {
    let a = TempDir::new().map_err(|e| e.to_string())?;
    let b = TempDir::new().map_err(|e| e.to_string())?;
    let first = synth_then_fit(a.path())?;
    let second = synth_then_fit(b.path())?;
    serde_json::from_slice::<serde_json::Value>(&first).map_err(|e| format!("not JSON: {e}"))?;
    if first == second {
        Ok(format!("{} identical bytes", first.len()))
    } else {
        Err("JSON differs between runs".into())
    }
}

fn main() -> ExitCode {
    let criteria = [
        Criterion {
            id: 1,
            name: "exponential traces select Exponential",
            budget: Duration::from_secs(5),
            check: exponential_selection,
        },
        Criterion {
            id: 2,
            name: "half-normal traces select TruncatedNormal",
            budget: Duration::from_secs(5),
            check: half_normal_selection,
        },
        Criterion {
            id: 3,
            name: "path model recovery",
            budget: Duration::from_secs(2),
            check: path_recovery,
        },
        Criterion {
            id: 4,
            name: "CDF correctness",
            budget: Duration::from_secs(1),
            check: cdf_checks,
        },
        Criterion {
            id: 5,
            name: "ECDF and correlation properties",
            budget: Duration::from_secs(10),
            check: property_invariants,
        },
        Criterion {
            id: 6,
            name: "ping parser golden files",
            budget: Duration::from_secs(1),
            check: parser_goldens,
        },
        Criterion {
            id: 7,
            name: "synth -> fit --json determinism",
            budget: Duration::from_secs(2),
            check: end_to_end_determinism,
        },
    ];

    let mut failed = 0;
    for c in &criteria {
        let start = Instant::now();
        let outcome = (c.check)();
        let elapsed = start.elapsed();
        let (ok, detail) = match outcome {
            Ok(d) if elapsed <= c.budget => (true, d),
            Ok(d) => (false, format!("{d}; over time budget {:?}", c.budget)),
            Err(d) => (false, d),
        };
        if !ok {
            failed += 1;
        }
        println!(
            "{} criterion {}: {} ({detail}; {:.3}s)",
            if ok { "PASS" } else { "FAIL" },
            c.id,
            c.name,
            elapsed.as_secs_f64()
        );
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
