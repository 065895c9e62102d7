//! `delaykit` command-line front end.
//!
//! Exit codes: 0 success, 1 output/other I/O failure, 2 usage error,
//! 3 unreadable or malformed input, 4 degenerate data (too few samples,
//! constant delays, sizes that do not fit a fixed-delay line), 5 probing
//! or network failure.

mod commands;
mod error;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use crate::error::Failure;

#[derive(Debug, Parser)]
#[command(
    name = "delaykit",
    version,
    about = "Packet-delay distribution fitting toolkit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Family {
    #[value(name = "exp", alias = "exponential")]
    Exponential,
    #[value(name = "tn", alias = "truncated-normal", alias = "half-normal")]
    TruncatedNormal,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Ping a host and summarise minimum and mean round-trip time.
    Probe {
        host: String,
        #[arg(long, default_value_t = delaykit::prober::DEFAULT_COUNT, value_parser = clap::value_parser!(u32).range(1..))]
        count: u32,
        /// ICMP payload size in bytes.
        #[arg(long, default_value_t = delaykit::prober::DEFAULT_SIZE_BYTES)]
        size: u32,
        #[arg(long, default_value_t = delaykit::prober::DEFAULT_INTERVAL_MS)]
        interval_ms: u32,
        #[arg(long, default_value_t = delaykit::prober::DEFAULT_TIMEOUT_MS, value_parser = clap::value_parser!(u32).range(1..))]
        timeout_ms: u32,
        /// Also save the trace as canonical CSV.
        #[arg(short, long)]
        output: Option<PathBuf>,
        #[arg(long)]
        json: bool,
        /// ping executable to run.
        #[arg(long, env = "DELAYKIT_PING", default_value = "ping")]
        ping: PathBuf,
    },
    /// Fit exponential and truncated-normal models to a trace CSV.
    Fit {
        trace: PathBuf,
        /// Halve RTT delays into one-way delays before fitting.
        #[arg(long)]
        owd_from_rtt: bool,
        #[arg(long)]
        json: bool,
        /// Write empirical/normal/exponential CDF columns as TSV.
        #[arg(long, value_name = "OUT.tsv")]
        plot: Option<PathBuf>,
        /// Headroom percentiles in [0, 1).
        #[arg(long, value_delimiter = ',', default_value = "0.9,0.99")]
        percentiles: Vec<f64>,
    },
    /// Estimate minimum delay and capacity from delays at several packet sizes.
    Pathmodel {
        /// Probe this host live.
        #[arg(long, conflicts_with = "trace", required_unless_present = "trace")]
        host: Option<String>,
        /// Payload sizes to probe with --host.
        #[arg(long, value_delimiter = ',', default_value = "100,1000")]
        sizes: Vec<u32>,
        #[arg(long, default_value_t = delaykit::prober::DEFAULT_COUNT, value_parser = clap::value_parser!(u32).range(1..))]
        count: u32,
        /// Stored trace CSV; repeat for several files.
        #[arg(long)]
        trace: Vec<PathBuf>,
        #[arg(long)]
        json: bool,
        #[arg(long, env = "DELAYKIT_PING", default_value = "ping")]
        ping: PathBuf,
    },
    /// Generate a seeded synthetic trace.
    Synth {
        #[arg(long, value_enum)]
        family: Family,
        /// Minimum delay in microseconds (the path's D_min with --sizes).
        #[arg(long)]
        dmin: f64,
        /// Scale in microseconds: 1/lambda or sigma.
        #[arg(long)]
        scale: f64,
        /// Samples (per size with --sizes).
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        n: u64,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = delaykit::prober::DEFAULT_SIZE_BYTES)]
        size: u32,
        /// Two packet sizes, interleaved along a fixed-delay line.
        #[arg(long, value_delimiter = ',', requires = "capacity")]
        sizes: Option<Vec<u32>>,
        /// Path capacity in bytes per microsecond (with --sizes).
        #[arg(long)]
        capacity: Option<f64>,
        /// Per-sample loss probability.
        #[arg(long, default_value_t = 0.0)]
        loss: f64,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Delay budget at given percentiles for packets of one size.
    Headroom {
        /// Trace CSV to fit; omit to give model parameters instead.
        trace: Option<PathBuf>,
        #[arg(long, conflicts_with = "trace", requires_all = ["capacity", "lambda"])]
        dmin: Option<f64>,
        #[arg(long, conflicts_with = "trace")]
        capacity: Option<f64>,
        #[arg(long, conflicts_with = "trace")]
        lambda: Option<f64>,
        #[arg(long)]
        size: Option<u32>,
        #[arg(long, value_delimiter = ',', default_value = "0.9,0.99")]
        percentiles: Vec<f64>,
        #[arg(long)]
        owd_from_rtt: bool,
        #[arg(long)]
        json: bool,
    },
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Probe {
            host,
            count,
            size,
            interval_ms,
            timeout_ms,
            output,
            json,
            ping,
        } => {
            let spec = delaykit::prober::ProbeSpec {
                host,
                count,
                size_bytes: size,
                interval_ms,
                timeout_ms,
            };
            commands::probe(&spec, &ping, output.as_deref(), json)
        }
        Command::Fit {
            trace,
            owd_from_rtt,
            json,
            plot,
            percentiles,
        } => commands::fit(&trace, owd_from_rtt, json, plot.as_deref(), &percentiles),
        Command::Pathmodel {
            host,
            sizes,
            count,
            trace,
            json,
            ping,
        } => match host {
            Some(host) => commands::pathmodel_live(&host, &sizes, count, &ping, json),
            None => commands::pathmodel_traces(&trace, json),
        },
        Command::Synth {
            family,
            dmin,
            scale,
            n,
            seed,
            size,
            sizes,
            capacity,
            loss,
            output,
        } => commands::synth(commands::SynthArgs {
            family,
            dmin,
            scale,
            n,
            seed,
            size,
            sizes,
            capacity,
            loss,
            output,
        }),
        Command::Headroom {
            trace,
            dmin,
            capacity,
            lambda,
            size,
            percentiles,
            owd_from_rtt,
            json,
        } => {
            let source = match (trace, dmin, capacity, lambda) {
                (Some(path), ..) => commands::HeadroomSource::Trace { path, owd_from_rtt },
                (None, Some(d_min_us), Some(capacity), Some(lambda)) => {
                    commands::HeadroomSource::Params {
                        d_min_us,
                        capacity,
                        lambda,
                    }
                }
                _ => {
                    return Err(Failure::usage(
                        "give a trace CSV or all of --dmin, --capacity and --lambda",
                    ))
                }
            };
            commands::headroom(source, size, &percentiles, json)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            f.exit_code()
        }
    }
}
