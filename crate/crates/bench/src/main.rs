use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use anyhow::Context;
use clap::{ArgGroup, Parser};
use matchmg::RuntimeConfig;
use matchmg_bench::{run_benchmark, Problem, ReportFormat, RunConfig, Settings};

/// Solve a sparse SPD system with AMG-preconditioned CG on in-process ranks.
///
/// Exits with 0 when the solver converged, 1 when it hit the iteration cap
/// and 2 on any error.
#[derive(Debug, Parser)]
#[command(version, group(ArgGroup::new("problem").required(true).args(["nd", "matrix"])))]
struct Args {
    /// Generate the 7-point Poisson problem on an nd^3 grid.
    #[arg(short = 'n', value_name = "ND")]
    nd: Option<usize>,
    /// Read the system matrix from a MatrixMarket file.
    #[arg(short = 'm', value_name = "FILE")]
    matrix: Option<PathBuf>,
    /// Number of ranks.
    #[arg(short = 'P', value_name = "P", default_value_t = 1)]
    ranks: usize,
    /// 1 for AMG-PCG, 0 for plain CG; overrides the settings file.
    #[arg(short = 'p', value_name = "0|1", value_parser = clap::value_parser!(u8).range(0..=1))]
    precflag: Option<u8>,
    /// Solver settings file (`key = value` lines).
    #[arg(short = 'c', value_name = "FILE")]
    config: Option<PathBuf>,
    /// Print the report as JSON.
    #[arg(long)]
    json: bool,
    /// Seed for the random right-hand side of matrix files.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Seconds a rank may wait on a message before the run is aborted.
    #[arg(long, value_name = "SECS", default_value_t = 30)]
    timeout: u64,
}

fn run(args: Args) -> anyhow::Result<bool> {
    let mut settings = match &args.config {
        Some(path) => Settings::from_file(path)?,
        None => Settings::default(),
    };
    if let Some(p) = args.precflag {
        settings.precflag = p == 1;
    }
    let problem = match (args.nd, args.matrix) {
        (Some(nd), _) => Problem::Poisson { nd },
        (None, Some(path)) => Problem::File { path },
        (None, None) => unreachable!("clap requires a problem"),
    };
    let mut cfg = RunConfig::new(problem, args.ranks, settings);
    cfg.seed = args.seed;
    cfg.format = if args.json { ReportFormat::Json } else { ReportFormat::Text };
    let rt = RuntimeConfig {
        timeout: Duration::from_secs(args.timeout),
    };
    let report = run_benchmark(&cfg, &rt)?;
    match cfg.format {
        ReportFormat::Json => println!("{}", report.to_json().context("serializing report")?),
        ReportFormat::Text => print!("{report}"),
    }
    Ok(report.converged)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Args::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            log::warn!("solver did not converge");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
