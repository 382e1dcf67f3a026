//! `hcsplit`: generate planted instances, build trees from a simulated
//! splitting oracle, replay edge streams, and emit CSV reports.
//!
//! Exit status: 0 success, 2 configuration error, 3 algorithmic failure,
//! 4 I/O or parse error. `HCSPLIT_WORKERS` caps the worker threads used for
//! seed sweeps.

mod commands;
mod config;
mod report;

use std::process::ExitCode;

use clap::{Parser, Subcommand};
use hcsplit_core::Error;

use commands::{AlgoFailure, BenchArgs, BuildArgs, EvalArgs, GenerateArgs, StreamArgs};
use config::ConfigError;

#[derive(Parser, Debug)]
#[command(name = "hcsplit", version, about = "Hierarchical clustering from a noisy splitting oracle")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write planted graph and tree files.
    Generate(GenerateArgs),
    /// Run one algorithm over a seed sweep.
    Build(BuildArgs),
    /// Replay an edge stream through the single-pass simulation.
    Stream(StreamArgs),
    /// Score a tree against a graph.
    Eval(EvalArgs),
    /// Noise sweep over algorithms and correctness probabilities.
    Bench(BenchArgs),
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.is::<ConfigError>() {
        return 2;
    }
    if err.is::<AlgoFailure>() {
        return 3;
    }
    if let Some(e) = err.downcast_ref::<Error>() {
        return match e {
            Error::Fail { .. } => 3,
            Error::Io(_) | Error::Parse(_) | Error::Stream(_) => 4,
            _ => 2,
        };
    }
    if err.is::<std::io::Error>() || err.is::<csv::Error>() || err.is::<serde_json::Error>() {
        return 4;
    }
    2
}

/// The error chain, skipping causes already quoted by their parent.
fn describe(err: &anyhow::Error) -> String {
    let mut out = String::new();
    for cause in err.chain() {
        let text = cause.to_string();
        if !out.contains(&text) {
            if !out.is_empty() {
                out.push_str(": ");
            }
            out.push_str(&text);
        }
    }
    out
}

fn init_workers() {
    let Ok(raw) = std::env::var("HCSPLIT_WORKERS") else {
        return;
    };
    match raw.parse::<usize>() {
        Ok(k) if k > 0 => {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(k).build_global();
        }
        _ => eprintln!("ignoring HCSPLIT_WORKERS={raw:?}"),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_workers();
    let result = match &cli.command {
        Command::Generate(args) => commands::generate(args),
        Command::Build(args) => commands::build(args),
        Command::Stream(args) => commands::stream(args),
        Command::Eval(args) => commands::eval(args),
        Command::Bench(args) => commands::bench(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {}", describe(&err));
            ExitCode::from(exit_code(&err))
        }
    }
}
