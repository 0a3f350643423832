use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use ustein::bounds::WiringMode;
use ustein::cli::{
    cmd_bound, cmd_selftest, cmd_sweep, cmd_verify, selftest_names, RunConfig, SelftestMutation,
};
use ustein::Error;

/// Gaussian-approximation bounds for vectors of Poisson U-statistics,
/// with simulation-based verification.
#[derive(Parser)]
#[command(name = "ustein", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct RunArgs {
    /// JSON config path (see README for the schema)
    #[arg(long)]
    config: PathBuf,
    /// Override seeds.root
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (affects speed only; outputs are identical)
    #[arg(long)]
    threads: Option<usize>,
    /// Override out.path
    #[arg(long)]
    out: Option<PathBuf>,
    /// Shared-variable wiring of the variance terms: expansion | grouped
    #[arg(long)]
    wiring: Option<String>,
    /// Additionally report the single-table bound variant
    #[arg(long)]
    paper_literal: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Compute the covariance, the M-table, and the assembled bound
    Bound(RunArgs),
    /// Bound plus simulation: distance lower bound, moment diagnostics,
    /// and pass/fail domination checks
    Verify(RunArgs),
    /// One bound + verify per scheduled intensity; plot-ready CSV
    Sweep(RunArgs),
    /// Run the invariant suite at reduced budgets
    Selftest {
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// List test names without running
        #[arg(long)]
        list: bool,
        /// Fault-injection hook (e.g. partition-predicate); the suite
        /// must then fail
        #[arg(long)]
        mutate: Option<String>,
        #[arg(long)]
        threads: Option<usize>,
    },
}

const EXIT_CONFIG: u8 = 1;
const EXIT_NUMERICAL: u8 = 2;
const EXIT_VERIFICATION: u8 = 3;

fn exit_for(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(Error::Config(_)) | Some(Error::Json(_)) | Some(Error::Io(_)) => EXIT_CONFIG,
        Some(Error::Numerical(_)) | Some(Error::CostGuard(_)) | Some(Error::NonFinite(_)) => {
            EXIT_NUMERICAL
        }
        None => EXIT_CONFIG,
    }
}

fn init_threads(threads: Option<usize>) -> anyhow::Result<()> {
    if let Some(n) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("thread pool")?;
    }
    Ok(())
}

fn load_config(args: &RunArgs) -> anyhow::Result<RunConfig> {
    let text = std::fs::read_to_string(&args.config)
        .map_err(Error::Io)
        .with_context(|| format!("reading {}", args.config.display()))?;
    let mut config = RunConfig::from_json(&text)?;
    if let Some(seed) = args.seed {
        config.seeds.root = seed;
    }
    if let Some(out) = &args.out {
        config.out = Some(ustein::cli::OutSpec { path: out.display().to_string() });
    }
    if let Some(wiring) = &args.wiring {
        config.flags.wiring = match wiring.as_str() {
            "expansion" => WiringMode::Expansion,
            "grouped" => WiringMode::Grouped,
            other => {
                return Err(Error::config(format!(
                    "unknown wiring '{other}' (expected expansion|grouped)"
                ))
                .into())
            }
        };
    }
    if args.paper_literal {
        config.flags.paper_literal = true;
    }
    Ok(config)
}

fn emit(config: &RunConfig, payload: &str, summary: &str) -> anyhow::Result<()> {
    match &config.out {
        Some(out) => {
            std::fs::write(&out.path, payload)
                .map_err(Error::Io)
                .with_context(|| format!("writing {}", out.path))?;
            eprintln!("wrote {} ({summary})", out.path);
        }
        None => println!("{payload}"),
    }
    Ok(())
}

fn run() -> anyhow::Result<u8> {
    let cli = Cli::parse();
    match cli.command {
        Command::Bound(args) => {
            init_threads(args.threads)?;
            let config = load_config(&args)?;
            let out = cmd_bound(&config)?;
            let json = serde_json::to_string_pretty(&out).map_err(Error::Json)?;
            emit(
                &config,
                &json,
                &format!(
                    "total {} = {} + {}",
                    out.report.terms.total, out.report.terms.term1, out.report.terms.term2
                ),
            )?;
            Ok(0)
        }
        Command::Verify(args) => {
            init_threads(args.threads)?;
            let config = load_config(&args)?;
            let out = cmd_verify(&config)?;
            let json = serde_json::to_string_pretty(&out).map_err(Error::Json)?;
            for check in &out.checks {
                eprintln!(
                    "{} {}: observed {:.6e}, threshold {:.6e}",
                    if check.pass { "PASS" } else { "FAIL" },
                    check.name,
                    check.observed,
                    check.threshold
                );
            }
            emit(
                &config,
                &json,
                &format!("delta lower bound {} vs total {}", out.delta.lower_bound, out.report.terms.total),
            )?;
            Ok(if out.pass { 0 } else { EXIT_VERIFICATION })
        }
        Command::Sweep(args) => {
            init_threads(args.threads)?;
            let config = load_config(&args)?;
            let out = cmd_sweep(&config)?;
            emit(&config, &out.csv, &format!("{} rows", out.rows.len()))?;
            Ok(0)
        }
        Command::Selftest { seed, list, mutate, threads } => {
            init_threads(threads)?;
            if list {
                for name in selftest_names() {
                    println!("{name}");
                }
                return Ok(0);
            }
            let mutation = match mutate {
                None => None,
                Some(name) => Some(SelftestMutation::parse(&name)?),
            };
            let out = cmd_selftest(seed, mutation);
            for check in &out.checks {
                println!(
                    "{} {}: {}",
                    if check.pass { "PASS" } else { "FAIL" },
                    check.name,
                    check.detail
                );
            }
            Ok(if out.pass { 0 } else { EXIT_VERIFICATION })
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_for(&err))
        }
    }
}
