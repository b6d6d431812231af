//! `twopoint`: benchmarks, diagnostics and external-objective runs for the
//! two-point bandit optimizer.
//!
//! Exit codes: 0 success, 2 configuration error, 3 run aborted (or a check
//! failed), 4 external-protocol error.

mod bench;
mod check;
mod config;
mod external;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::LevelFilter;

use crate::config::{Config, ConfigError};

const EXIT_CONFIG: u8 = 2;
const EXIT_ABORTED: u8 = 3;
const EXIT_PROTOCOL: u8 = 4;

#[derive(Parser)]
#[command(
    name = "twopoint",
    version,
    about = "Two-point bandit convex optimization runner"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Seeded replications over a (d, T) grid; writes regret rows.
    Bench(RunArgs),
    /// Diagnostic suites; prints PASS/FAIL per invariant.
    Check(RunArgs),
    /// Optimize an external objective served by a child process.
    Optimize(RunArgs),
    /// Reference child: answers EVAL with ‖w − center‖₂.
    Serve(ServeArgs),
}

#[derive(Args)]
struct RunArgs {
    /// `key = value` config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a config key (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// csv or json
    #[arg(long)]
    format: Option<String>,
}

#[derive(Args)]
struct ServeArgs {
    /// Comma-separated coordinates of the hidden center.
    #[arg(
        long,
        value_delimiter = ',',
        allow_hyphen_values = true,
        required = true
    )]
    center: Vec<f64>,
}

fn init_logging() {
    let raw = std::env::var("ZO_LOG").ok();
    let level = match raw.as_deref() {
        None | Some("info") => LevelFilter::Info,
        Some("off") => LevelFilter::Off,
        Some("trace") => LevelFilter::Trace,
        Some(_) => LevelFilter::Info,
    };
    env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .target(env_logger::Target::Stderr)
        .init();
    if let Some(other) = raw.filter(|v| !["off", "info", "trace"].contains(&v.as_str())) {
        log::warn!("ZO_LOG={other} not recognized (off, info, trace); using info");
    }
}

/// File settings, then `--set` pairs, then the dedicated flags.
fn load(args: &RunArgs) -> Result<(Config, bool), ConfigError> {
    let mut cfg = match &args.config {
        Some(path) => Config::from_file(path)?,
        None => Config::default(),
    };
    for pair in &args.set {
        cfg.apply(pair)?;
    }
    if let Some(seed) = &args.seed {
        cfg.set("seed", seed);
    }
    if let Some(out) = &args.out {
        cfg.set("out", &out.to_string_lossy());
    }
    if let Some(format) = &args.format {
        cfg.set("format", format);
    }
    Ok((cfg, args.config.is_some()))
}

fn config_failure(e: ConfigError) -> ExitCode {
    eprintln!("{e}");
    ExitCode::from(EXIT_CONFIG)
}

fn cmd_bench(args: &RunArgs) -> Result<ExitCode, ConfigError> {
    let (cfg, from_file) = load(args)?;
    let bench_cfg = config::bench(&cfg, from_file)?;
    let report = bench::run(&bench_cfg, cfg.echo())?;
    output::emit(
        bench_cfg.common.out.as_deref(),
        &bench::render(&report, bench_cfg.common.format),
    )?;
    if report.aborted > 0 {
        log::error!("{} replication(s) aborted", report.aborted);
        return Ok(ExitCode::from(EXIT_ABORTED));
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_check(args: &RunArgs) -> Result<ExitCode, ConfigError> {
    let (cfg, from_file) = load(args)?;
    let check_cfg = config::check(&cfg, from_file, check::SUITES)?;
    let report = check::run(&check_cfg, cfg.echo())?;
    let text = check::render(&report, check_cfg.common.format);
    output::emit(check_cfg.common.out.as_deref(), &text)?;
    if check_cfg.common.out.is_some() {
        for r in &report.results {
            log::info!(
                "{} {}: {}",
                if r.passed { "PASS" } else { "FAIL" },
                r.suite,
                r.invariant
            );
        }
    }
    Ok(if report.all_passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_ABORTED)
    })
}

fn cmd_optimize(args: &RunArgs) -> Result<ExitCode, ConfigError> {
    let (cfg, from_file) = load(args)?;
    let opt_cfg = config::optimize(&cfg, from_file)?;
    match external::run(&opt_cfg, cfg.echo()) {
        Ok(report) => {
            output::emit(
                opt_cfg.common.out.as_deref(),
                &external::render(&report, opt_cfg.common.format),
            )?;
            Ok(ExitCode::SUCCESS)
        }
        Err(external::OptimizeError::Config(e)) => Err(e),
        Err(external::OptimizeError::Protocol(msg)) => {
            log::error!("external protocol error {msg}");
            Ok(ExitCode::from(EXIT_PROTOCOL))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_logging();
    let result = match &cli.command {
        Cmd::Bench(a) => cmd_bench(a),
        Cmd::Check(a) => cmd_check(a),
        Cmd::Optimize(a) => cmd_optimize(a),
        Cmd::Serve(a) => return ExitCode::from(external::serve(&a.center) as u8),
    };
    result.unwrap_or_else(config_failure)
}
