//! External black-box objectives over a line protocol on a child's
//! stdin/stdout:
//!
//! ```text
//! > EVAL <x_1> ... <x_d>
//! < VAL <value>
//! > END
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};

use serde::Serialize;
use twopoint_core::{
    default_parameters, run_bandit, DeltaSchedule, Error as CoreError, TwoPointOracle,
};

use crate::config::{ConfigError, OptimizeConfig, OutputFormat};
use crate::output::{join, VERSION};

/// Parses a `VAL <decimal>` reply.
pub fn parse_reply(line: &str) -> Result<f64, String> {
    let body = line.strip_suffix('\n').unwrap_or(line);
    let body = body.strip_suffix('\r').unwrap_or(body);
    let value = body
        .strip_prefix("VAL ")
        .ok_or_else(|| "expected `VAL <decimal>`".to_string())?;
    let v: f64 = value
        .trim()
        .parse()
        .map_err(|_| format!("malformed value `{value}`"))?;
    if !v.is_finite() {
        return Err(format!("non-finite value `{value}`"));
    }
    Ok(v)
}

pub fn request_line(w: &[f64]) -> String {
    format!("EVAL {}", join(w, " "))
}

/// A child process answering `EVAL` requests. The child is killed on drop
/// unless [`ChildOracle::shutdown`] ran.
pub struct ChildOracle {
    child: Child,
    stdin: Option<ChildStdin>,
    stdout: BufReader<ChildStdout>,
    dim: usize,
    queries: u64,
    failure: Option<String>,
}

impl ChildOracle {
    pub fn spawn(program: &str, args: &[String], dim: usize) -> std::io::Result<Self> {
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()?;
        let stdin = child.stdin.take();
        let stdout = BufReader::new(child.stdout.take().expect("piped stdout"));
        Ok(ChildOracle {
            child,
            stdin,
            stdout,
            dim,
            queries: 0,
            failure: None,
        })
    }

    /// The first protocol failure, if any.
    pub fn failure(&self) -> Option<&str> {
        self.failure.as_deref()
    }

    fn exchange(&mut self, request: &str) -> Result<f64, String> {
        let stdin = self.stdin.as_mut().ok_or("child input already closed")?;
        writeln!(stdin, "{request}")
            .and_then(|_| stdin.flush())
            .map_err(|e| format!("write failed: {e}"))?;
        let mut reply = String::new();
        let n = self
            .stdout
            .read_line(&mut reply)
            .map_err(|e| format!("read failed: {e}"))?;
        if n == 0 {
            return Err("child closed its output".into());
        }
        log::trace!("< {}", reply.trim_end());
        parse_reply(&reply).map_err(|e| format!("{e}; response `{}`", reply.trim_end()))
    }

    /// Sends `END` and waits; the child must exit with status 0.
    pub fn shutdown(mut self) -> Result<(), String> {
        if let Some(mut stdin) = self.stdin.take() {
            writeln!(stdin, "END")
                .and_then(|_| stdin.flush())
                .map_err(|e| format!("sending END failed: {e}"))?;
        }
        let status = self.child.wait().map_err(|e| format!("wait failed: {e}"))?;
        if status.success() {
            Ok(())
        } else {
            Err(format!("child exited with {status} after END"))
        }
    }
}

impl Drop for ChildOracle {
    fn drop(&mut self) {
        if self.stdin.is_some() {
            let _ = self.child.kill();
            let _ = self.child.wait();
        }
    }
}

impl TwoPointOracle for ChildOracle {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&mut self, w: &[f64]) -> twopoint_core::Result<f64> {
        let request = request_line(w);
        log::trace!("> {request}");
        self.queries += 1;
        match self.exchange(&request) {
            Ok(v) => Ok(v),
            Err(message) => {
                log::error!("protocol error on request `{request}`: {message}");
                self.failure.get_or_insert_with(|| message.clone());
                // an unusable child gets no further requests
                if let Some(stdin) = self.stdin.take() {
                    drop(stdin);
                }
                let _ = self.child.kill();
                let _ = self.child.wait();
                Err(CoreError::OracleFailure {
                    point: w.to_vec(),
                    message,
                })
            }
        }
    }

    fn query_count(&self) -> u64 {
        self.queries
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TrajectoryPoint {
    pub round: usize,
    pub f_plus: f64,
    pub f_minus: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct OptimizeReport {
    pub version: &'static str,
    pub seed: u64,
    pub config: BTreeMap<String, String>,
    pub rounds: usize,
    pub queries: u64,
    pub eta: f64,
    pub delta: f64,
    pub average_iterate: Vec<f64>,
    pub trajectory: Vec<TrajectoryPoint>,
}

#[derive(Debug)]
pub enum OptimizeError {
    Config(ConfigError),
    Protocol(String),
}

pub fn run(
    cfg: &OptimizeConfig,
    echo: BTreeMap<String, String>,
) -> Result<OptimizeReport, OptimizeError> {
    let cfg_err =
        |key: &str, e: CoreError| OptimizeError::Config(ConfigError::new(key, e.to_string()));
    let horizon = cfg.horizon.min((cfg.budget / 2) as usize);
    if horizon < cfg.horizon {
        log::info!(
            "budget {} allows {horizon} of {} rounds",
            cfg.budget,
            cfg.horizon
        );
    }
    let setup = cfg.setup.setup(cfg.d).map_err(|e| cfg_err("d", e))?;
    let mut params = default_parameters(&setup, cfg.lipschitz, cfg.d, horizon)
        .map_err(|e| cfg_err("lipschitz", e))?;
    if let Some(eta) = cfg.overrides.eta {
        params = params.with_eta(eta).map_err(|e| cfg_err("eta", e))?;
    }
    if let Some(delta) = cfg.overrides.delta {
        params = params
            .with_delta(DeltaSchedule::Constant(delta))
            .map_err(|e| cfg_err("delta", e))?;
    }
    let mut oracle = ChildOracle::spawn(&cfg.child, &cfg.child_args, cfg.d).map_err(|e| {
        OptimizeError::Config(ConfigError::new("child", format!("{}: {e}", cfg.child)))
    })?;
    let record = match run_bandit(&mut oracle, &setup, &params, cfg.common.seed) {
        Ok(r) => r,
        Err(f) => {
            let reason = oracle
                .failure()
                .map(str::to_string)
                .unwrap_or_else(|| f.to_string());
            return Err(OptimizeError::Protocol(format!(
                "after {} rounds: {reason}",
                f.partial.horizon()
            )));
        }
    };
    let queries = oracle.query_count();
    oracle.shutdown().map_err(OptimizeError::Protocol)?;
    log::info!(
        "{} rounds, {queries} queries, average iterate [{}]",
        record.horizon(),
        join(&record.average_iterate, ", ")
    );
    let trajectory = record
        .estimates
        .iter()
        .enumerate()
        .map(|(t, e)| TrajectoryPoint {
            round: t + 1,
            f_plus: e.f_plus,
            f_minus: e.f_minus_or_anchor,
        })
        .collect();
    Ok(OptimizeReport {
        version: VERSION,
        seed: cfg.common.seed,
        config: echo,
        rounds: record.horizon(),
        queries,
        eta: params.eta,
        delta: params.delta_at(0),
        average_iterate: record.average_iterate,
        trajectory,
    })
}

pub fn render(report: &OptimizeReport, format: OutputFormat) -> String {
    match format {
        OutputFormat::Json => {
            let mut s = serde_json::to_string_pretty(report).expect("serializable report");
            s.push('\n');
            s
        }
        OutputFormat::Csv => {
            let mut s = String::from("round,f_plus,f_minus\n");
            for p in &report.trajectory {
                let _ = writeln!(s, "{},{},{}", p.round, p.f_plus, p.f_minus);
            }
            let _ = writeln!(
                s,
                "# average_iterate: {}",
                join(&report.average_iterate, " ")
            );
            let _ = writeln!(
                s,
                "# rounds: {} queries: {} eta: {} delta: {}",
                report.rounds, report.queries, report.eta, report.delta
            );
            crate::output::metadata_lines(&mut s, report.seed, &report.config);
            s
        }
    }
}

/// Reference child: answers `EVAL` with `‖w − center‖₂` until `END`.
/// Returns the process exit code.
pub fn serve(center: &[f64]) -> i32 {
    let stdin = std::io::stdin();
    let mut stdout = std::io::stdout().lock();
    for line in stdin.lock().lines() {
        let Ok(line) = line else {
            return 4;
        };
        let line = line.trim_end();
        if line == "END" {
            return 0;
        }
        let Some(coords) = line.strip_prefix("EVAL ") else {
            eprintln!("serve: unexpected request `{line}`");
            return 4;
        };
        let w: Result<Vec<f64>, _> = coords.split_whitespace().map(str::parse::<f64>).collect();
        let w = match w {
            Ok(w) if w.len() == center.len() => w,
            _ => {
                eprintln!("serve: bad coordinates in `{line}`");
                return 4;
            }
        };
        let v = twopoint_core::linalg::dist2(&w, center);
        if writeln!(stdout, "VAL {v}")
            .and_then(|_| stdout.flush())
            .is_err()
        {
            return 4;
        }
    }
    0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn replies_parse() {
        assert_eq!(parse_reply("VAL 1.5\n"), Ok(1.5));
        assert_eq!(parse_reply("VAL -0.25\r\n"), Ok(-0.25));
        assert!(parse_reply("VAL nan\n").is_err());
        assert!(parse_reply("VAL inf\n").is_err());
        assert!(parse_reply("nan\n").is_err());
        assert!(parse_reply("VAL\n").is_err());
        assert!(parse_reply("VAL 1.5 2\n").is_err());
    }

    #[test]
    fn request_uses_round_trip_decimals() {
        let w = [0.1 + 0.2, -1.0, 2.5e-8];
        let line = request_line(&w);
        assert_eq!(line, "EVAL 0.30000000000000004 -1 0.000000025");
        let back: Vec<f64> = line[5..].split(' ').map(|s| s.parse().unwrap()).collect();
        assert_eq!(back, w);
    }
}
