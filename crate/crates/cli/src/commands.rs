use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use delaykit::decompose::{self, SizeDelayPoint};
use delaykit::fit::{self, FitInput, FitReport};
use delaykit::models::{DelayModel, ExponentialDelayModel, SizeAwareExponentialModel};
use delaykit::prober::{self, PathFitMode, Platform, ProbeError, ProbeSpec, SystemPing};
use delaykit::synth::{self, SynthFamily, SynthSpec};
use delaykit::{DelayTrace, PathModel, TraceError};

use crate::error::{Class, Failure};
use crate::report::{
    HeadroomDocument, HeadroomModel, HeadroomRow, PathModelDocument, ProbeDocument, ProbeSample,
    ReportDocument, ToolInfo, TraceInfo, SCHEMA_VERSION,
};
use crate::Family;

fn emit_json<T: Serialize>(doc: &T) -> Result<(), Failure> {
    let mut out = io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, doc)?;
    out.write_all(b"\n")?;
    Ok(())
}

fn emit_text(text: &str) -> Result<(), Failure> {
    io::stdout().lock().write_all(text.as_bytes())?;
    Ok(())
}

fn load_trace(path: &Path) -> Result<DelayTrace, Failure> {
    delaykit::trace::read_trace_csv(path)
        .map_err(|e| Failure::from(e).context(path.display().to_string()))
}

/// Sorted, deduplicated percentiles, each in `[0, 1)`.
pub fn normalize_percentiles(ps: &[f64]) -> Result<Vec<f64>, Failure> {
    if let Some(bad) = ps.iter().find(|p| !(0.0..1.0).contains(*p)) {
        return Err(Failure::usage(format!(
            "percentile {bad} is outside [0, 1)"
        )));
    }
    let mut v = ps.to_vec();
    v.sort_by(f64::total_cmp);
    v.dedup();
    Ok(v)
}

fn platform() -> Result<Platform, Failure> {
    Platform::current().ok_or_else(|| ProbeError::UnsupportedPlatform.into())
}

pub fn probe(
    spec: &ProbeSpec,
    ping: &Path,
    output: Option<&Path>,
    json: bool,
) -> Result<(), Failure> {
    let runner = SystemPing {
        program: ping.to_path_buf(),
    };
    let trace = prober::probe(&runner, platform()?, spec)?;
    let (size, _) = trace
        .delivered()
        .next()
        .expect("probe returns a delivered sample");
    let summary = trace.summarize(size)?;
    if let Some(path) = output {
        delaykit::trace::write_trace_csv(&trace, path)
            .map_err(|e| Failure::new(Class::Other, e).context(path.display().to_string()))?;
    }
    let doc = ProbeDocument {
        schema_version: SCHEMA_VERSION,
        tool: ToolInfo::current(),
        host: spec.host.clone(),
        count: spec.count,
        payload_bytes: spec.size_bytes,
        n_ok: trace.n_ok(),
        n_lost: trace.n_lost(),
        loss_rate: trace.loss_rate(),
        summary,
        samples: trace
            .samples()
            .iter()
            .map(|s| ProbeSample {
                seq: s.seq,
                delay_us: s.delay_us,
                size_bytes: s.size_bytes,
            })
            .collect(),
    };
    if json {
        emit_json(&doc)
    } else {
        emit_text(&doc.render_text())
    }
}

fn prepare(path: &Path, owd_from_rtt: bool) -> Result<DelayTrace, Failure> {
    let trace = load_trace(path)?;
    if owd_from_rtt {
        Ok(trace.rtt_to_owd()?)
    } else {
        Ok(trace)
    }
}

fn fit_warnings(report: &FitReport) -> Vec<String> {
    let nor = &report.nor_model;
    let mut w = vec![format!(
        "truncated-normal sigma is set to the mean excess ({:.1} us), so its own mean ({:.1} us) \
         sits below the sample mean ({:.1} us)",
        nor.sigma_us,
        nor.mean_us(),
        report.exp_model.mean_us()
    )];
    if let Some(p) = report.path_model.filter(PathModel::has_negative_d_min) {
        w.push(format!(
            "fitted D_min is negative ({:.1} us); per-size minima are noisy, probe with a higher count",
            p.d_min_us
        ));
    }
    if report.clamped > 0 {
        w.push(format!(
            "{} samples fell below the fixed-delay line and were clamped to 0",
            report.clamped
        ));
    }
    w
}

/// Headroom rows at every delivered size of the trace.
fn headroom_rows(
    report: &FitReport,
    sizes: &[u32],
    ps: &[f64],
) -> Result<Vec<HeadroomRow>, Failure> {
    let mut rows = Vec::with_capacity(sizes.len() * ps.len());
    for &w in sizes {
        let model = match report.path_model {
            Some(path) => {
                SizeAwareExponentialModel::from_path(&path, report.exp_model.lambda_per_us)?
                    .at_size(w)
            }
            None => report.exp_model,
        };
        for &p in ps {
            rows.push(HeadroomRow {
                size_bytes: w,
                p,
                delay_us: model.quantile(p)?,
            });
        }
    }
    Ok(rows)
}

pub fn fit(
    path: &Path,
    owd_from_rtt: bool,
    json: bool,
    plot: Option<&Path>,
    percentiles: &[f64],
) -> Result<(), Failure> {
    let ps = normalize_percentiles(percentiles)?;
    let trace = prepare(path, owd_from_rtt)?;
    let input = FitInput::from_trace(&trace)?;
    let report = fit::compare_fit_input(&input)?;
    let sizes: Vec<u32> = trace.delivered_sizes().into_iter().collect();
    let summaries = sizes
        .iter()
        .map(|&w| trace.summarize(w))
        .collect::<Result<Vec<_>, TraceError>>()?;

    if let Some(out) = plot {
        let rows = fit::cdf_overlay(input.trace.as_ref(), &report.exp_model, &report.nor_model)?;
        let file =
            File::create(out).map_err(|e| Failure::from(e).context(out.display().to_string()))?;
        let mut w = BufWriter::new(file);
        fit::write_overlay_tsv(&rows, &mut w)
            .and_then(|()| w.flush())
            .map_err(|e| Failure::from(e).context(out.display().to_string()))?;
    }

    let meta = trace.metadata();
    let doc = ReportDocument {
        schema_version: SCHEMA_VERSION,
        tool: ToolInfo::current(),
        trace: TraceInfo {
            source: meta.source.clone(),
            target: meta.target.clone(),
            delay_kind: meta.delay_kind,
            owd_from_rtt,
            n_ok: trace.n_ok(),
            n_lost: trace.n_lost(),
            loss_rate: trace.loss_rate(),
            sizes: sizes.clone(),
        },
        path_model: report.path_model,
        summaries,
        headroom: headroom_rows(&report, &sizes, &ps)?,
        warnings: fit_warnings(&report),
        fit: report,
    };
    if json {
        emit_json(&doc)
    } else {
        for w in &doc.warnings {
            eprintln!("warning: {w}");
        }
        emit_text(&doc.render_text())
    }
}

fn path_document(points: Vec<SizeDelayPoint>) -> Result<PathModelDocument, Failure> {
    let (path_model, mode) = match points.as_slice() {
        [] => return Err(delaykit::DecomposeError::NoSamples.into()),
        [only] => {
            return Err(delaykit::DecomposeError::EqualSizes {
                size_bytes: only.size_bytes,
            }
            .into())
        }
        [a, b] => (
            decompose::two_point_path_model(*a, *b)?,
            PathFitMode::TwoPoint,
        ),
        _ => (
            decompose::regression_path_model(&points)?,
            PathFitMode::Regression,
        ),
    };
    Ok(PathModelDocument {
        schema_version: SCHEMA_VERSION,
        tool: ToolInfo::current(),
        mode,
        residuals_us: decompose::residuals(&points, &path_model),
        negative_d_min: path_model.has_negative_d_min(),
        points,
        path_model,
    })
}

fn emit_path(doc: &PathModelDocument, json: bool) -> Result<(), Failure> {
    if json {
        emit_json(doc)
    } else {
        if doc.negative_d_min {
            eprintln!("warning: fitted D_min is negative; per-size minima are noisy, probe with a higher count");
        }
        emit_text(&doc.render_text())
    }
}

pub fn pathmodel_traces(paths: &[PathBuf], json: bool) -> Result<(), Failure> {
    // Per-size minimum across every file.
    let mut minima: BTreeMap<u32, f64> = BTreeMap::new();
    for path in paths {
        let trace = load_trace(path)?;
        let points = decompose::min_delay_by_size(&trace)
            .map_err(|e| Failure::from(e).context(path.display().to_string()))?;
        for p in points {
            minima
                .entry(p.size_bytes)
                .and_modify(|m| *m = m.min(p.min_delay_us))
                .or_insert(p.min_delay_us);
        }
    }
    let points = minima
        .into_iter()
        .map(|(size_bytes, min_delay_us)| SizeDelayPoint {
            size_bytes,
            min_delay_us,
        })
        .collect();
    emit_path(&path_document(points)?, json)
}

pub fn pathmodel_live(
    host: &str,
    sizes: &[u32],
    count: u32,
    ping: &Path,
    json: bool,
) -> Result<(), Failure> {
    let runner = SystemPing {
        program: ping.to_path_buf(),
    };
    let base = ProbeSpec {
        count,
        ..ProbeSpec::new(host)
    };
    let probe = prober::multi_size_probe(&runner, platform()?, &base, sizes)?;
    emit_path(&path_document(probe.points)?, json)
}

pub struct SynthArgs {
    pub family: Family,
    pub dmin: f64,
    pub scale: f64,
    pub n: u64,
    pub seed: u64,
    pub size: u32,
    pub sizes: Option<Vec<u32>>,
    pub capacity: Option<f64>,
    pub loss: f64,
    pub output: PathBuf,
}

pub fn synth(args: SynthArgs) -> Result<(), Failure> {
    let n = usize::try_from(args.n).map_err(|_| Failure::usage("--n is too large"))?;
    let mut spec = SynthSpec {
        family: match args.family {
            Family::Exponential => SynthFamily::Exponential,
            Family::TruncatedNormal => SynthFamily::TruncatedNormal,
        },
        d_min_us: args.dmin,
        scale_us: args.scale,
        n,
        size_bytes: args.size,
        seed: args.seed,
        loss_rate: args.loss,
    };
    let trace = match (&args.sizes, args.capacity) {
        (None, _) => synth::generate(&spec)?,
        (Some(sizes), Some(capacity)) => {
            let &[w1, w2] = sizes.as_slice() else {
                return Err(Failure::usage("--sizes takes exactly two sizes"));
            };
            let path = PathModel::new(args.dmin, capacity)?;
            // The path carries the minimum delay; draws start at zero.
            spec.d_min_us = 0.0;
            synth::generate_two_size(&spec, &path, w1, w2)?
        }
        (Some(_), None) => return Err(Failure::usage("--sizes requires --capacity")),
    };
    delaykit::trace::write_trace_csv(&trace, &args.output)
        .map_err(|e| Failure::new(Class::Other, e).context(args.output.display().to_string()))
}

pub enum HeadroomSource {
    Trace {
        path: PathBuf,
        owd_from_rtt: bool,
    },
    Params {
        d_min_us: f64,
        capacity: f64,
        lambda: f64,
    },
}

pub fn headroom(
    source: HeadroomSource,
    size: Option<u32>,
    percentiles: &[f64],
    json: bool,
) -> Result<(), Failure> {
    let ps = normalize_percentiles(percentiles)?;
    let (model, size_bytes, exp) = match source {
        HeadroomSource::Params {
            d_min_us,
            capacity,
            lambda,
        } => {
            let size =
                size.ok_or_else(|| Failure::usage("--size is required with model parameters"))?;
            let m = SizeAwareExponentialModel::new(d_min_us, capacity, lambda)?;
            let model = HeadroomModel {
                d_min_us,
                capacity_bytes_per_us: Some(capacity),
                lambda_per_us: lambda,
            };
            (model, size, m.at_size(size))
        }
        HeadroomSource::Trace { path, owd_from_rtt } => {
            let trace = prepare(&path, owd_from_rtt)?;
            let report = fit::compare_models(&trace)?;
            let lambda = report.exp_model.lambda_per_us;
            match report.path_model {
                Some(p) => {
                    let size = size.ok_or_else(|| {
                        Failure::usage("--size is required for a trace with several packet sizes")
                    })?;
                    let model = HeadroomModel {
                        d_min_us: p.d_min_us,
                        capacity_bytes_per_us: Some(p.capacity_bytes_per_us),
                        lambda_per_us: lambda,
                    };
                    (
                        model,
                        size,
                        SizeAwareExponentialModel::from_path(&p, lambda)?.at_size(size),
                    )
                }
                None => {
                    let only = trace
                        .delivered_sizes()
                        .into_iter()
                        .next()
                        .expect("fit had samples");
                    if size.is_some_and(|w| w != only) {
                        return Err(Failure::usage(format!(
                            "trace only has {only}-byte packets; fit a multi-size trace to extrapolate"
                        )));
                    }
                    let model = HeadroomModel {
                        d_min_us: report.exp_model.d_min_us,
                        capacity_bytes_per_us: None,
                        lambda_per_us: lambda,
                    };
                    (model, only, report.exp_model)
                }
            }
        }
    };
    let doc = HeadroomDocument {
        schema_version: SCHEMA_VERSION,
        tool: ToolInfo::current(),
        model,
        size_bytes,
        fixed_delay_us: exp.d_min_us,
        rows: headroom_table(&exp, size_bytes, &ps)?,
    };
    if json {
        emit_json(&doc)
    } else {
        emit_text(&doc.render_text())
    }
}

fn headroom_table(
    m: &ExponentialDelayModel,
    size_bytes: u32,
    ps: &[f64],
) -> Result<Vec<HeadroomRow>, Failure> {
    ps.iter()
        .map(|&p| {
            Ok(HeadroomRow {
                size_bytes,
                p,
                delay_us: m.quantile(p)?,
            })
        })
        .collect()
}
