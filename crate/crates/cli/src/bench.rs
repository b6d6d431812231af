//! `twopoint bench`: seeded replications over a `(d, T)` grid.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;
use twopoint_core::{
    fit_exponents, replication_seed, run_replication, ExperimentSpec, ExponentFit, Moments,
    ScalingRow,
};

use crate::config::{BenchConfig, ConfigError, OutputFormat};
use crate::output::{fmt_opt, VERSION};

pub const CSV_HEADER: &str = "rep,seed,d,T,eta,delta,avg_regret,opt_error,opt_error_se,status";

/// One CSV/JSON record: a replication or a per-cell summary.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub rep: Option<usize>,
    pub seed: u64,
    pub d: usize,
    #[serde(rename = "T")]
    pub horizon: usize,
    pub eta: Option<f64>,
    pub delta: Option<f64>,
    pub avg_regret: Option<f64>,
    pub opt_error: Option<f64>,
    pub opt_error_se: Option<f64>,
    pub status: &'static str,
}

impl BenchRow {
    fn csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            self.rep.map(|r| r.to_string()).unwrap_or_default(),
            self.seed,
            self.d,
            self.horizon,
            fmt_opt(self.eta),
            fmt_opt(self.delta),
            fmt_opt(self.avg_regret),
            fmt_opt(self.opt_error),
            fmt_opt(self.opt_error_se),
            self.status
        )
    }
}

/// Spread of a cell over its completed replications.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellSummary {
    pub d: usize,
    #[serde(rename = "T")]
    pub horizon: usize,
    pub completed: usize,
    pub aborted: usize,
    pub mean_regret: Option<f64>,
    pub regret_se: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchReport {
    pub version: &'static str,
    pub seed: u64,
    pub config: BTreeMap<String, String>,
    pub records: Vec<BenchRow>,
    pub summaries: Vec<CellSummary>,
    pub fit: Option<ExponentFit>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fit_error: Option<String>,
    #[serde(skip)]
    pub aborted: usize,
}

pub fn run(cfg: &BenchConfig, echo: BTreeMap<String, String>) -> Result<BenchReport, ConfigError> {
    let spec = ExperimentSpec {
        setup: cfg.setup,
        objective: cfg.objective.clone(),
        params: cfg.params.clone(),
        overrides: cfg.overrides,
        mc_samples: cfg.mc_samples,
    };
    let cells: Vec<(usize, usize)> = cfg
        .dims
        .iter()
        .flat_map(|&d| cfg.horizons.iter().map(move |&t| (d, t)))
        .collect();
    let jobs: Vec<(usize, usize)> = (0..cells.len())
        .flat_map(|c| (0..cfg.replications).map(move |r| (c, r)))
        .collect();
    let seed = cfg.common.seed;
    let rows = jobs
        .par_iter()
        .map(|&(c, rep)| {
            let (d, horizon) = cells[c];
            let rseed = replication_seed(seed, c, rep);
            log::debug!("cell d={d} T={horizon} rep={rep} seed={rseed}");
            let outcome = run_replication(&spec, d, horizon, rseed).map_err(|e| {
                ConfigError::new(crate::config::core_key(&e, "objective"), e.to_string())
            })?;
            Ok(match outcome {
                Ok(r) => BenchRow {
                    rep: Some(rep),
                    seed: rseed,
                    d,
                    horizon,
                    eta: Some(r.eta),
                    delta: Some(r.delta),
                    avg_regret: Some(r.average_regret),
                    opt_error: r.optimization_error.map(|e| e.value),
                    opt_error_se: r.optimization_error.map(|e| e.std_error),
                    status: "ok",
                },
                Err(f) => {
                    log::error!(
                        "replication {rep} (d={d}, T={horizon}, seed={rseed}) aborted: {}",
                        f.failure
                    );
                    BenchRow {
                        rep: Some(rep),
                        seed: rseed,
                        d,
                        horizon,
                        eta: Some(f.eta),
                        delta: Some(f.delta),
                        avg_regret: None,
                        opt_error: None,
                        opt_error_se: None,
                        status: "aborted",
                    }
                }
            })
        })
        .collect::<Result<Vec<BenchRow>, ConfigError>>()?;

    let mut records = Vec::with_capacity(rows.len() + cells.len());
    let mut summaries = Vec::with_capacity(cells.len());
    let mut scaling = Vec::new();
    for (c, chunk) in rows.chunks(cfg.replications).enumerate() {
        let (d, horizon) = cells[c];
        records.extend_from_slice(chunk);
        let ok: Vec<&BenchRow> = chunk.iter().filter(|r| r.status == "ok").collect();
        let regret: Moments = ok.iter().filter_map(|r| r.avg_regret).collect();
        let opt: Moments = ok.iter().filter_map(|r| r.opt_error).collect();
        let n = ok.len();
        let se = |m: &Moments| (m.count() >= 2).then(|| m.std_error());
        let mean = |m: &Moments| (m.count() >= 1).then(|| m.mean());
        records.push(BenchRow {
            rep: None,
            seed,
            d,
            horizon,
            eta: chunk[0].eta,
            delta: chunk[0].delta,
            avg_regret: mean(&regret),
            opt_error: mean(&opt),
            opt_error_se: se(&opt),
            status: "summary",
        });
        summaries.push(CellSummary {
            d,
            horizon,
            completed: n,
            aborted: chunk.len() - n,
            mean_regret: mean(&regret),
            regret_se: se(&regret),
        });
        if n > 0 {
            scaling.push(ScalingRow {
                d,
                horizon,
                mean_regret: regret.mean(),
                std_error: regret.std_error(),
                replications: n,
            });
        }
    }
    let grid = cfg.dims.len() > 1 || cfg.horizons.len() > 1;
    let (fit, fit_error) = if grid {
        match fit_exponents(&scaling) {
            Ok(f) => (Some(f), None),
            Err(e) => (None, Some(e.to_string())),
        }
    } else {
        (None, None)
    };
    let aborted = rows.iter().filter(|r| r.status == "aborted").count();
    Ok(BenchReport {
        version: VERSION,
        seed,
        config: echo,
        records,
        summaries,
        fit,
        fit_error,
        aborted,
    })
}

pub fn render(report: &BenchReport, format: OutputFormat) -> String {
    match format {
        OutputFormat::Json => {
            let mut s = serde_json::to_string_pretty(report).expect("serializable report");
            s.push('\n');
            s
        }
        OutputFormat::Csv => {
            let mut s = String::new();
            s.push_str(CSV_HEADER);
            s.push('\n');
            for r in &report.records {
                s.push_str(&r.csv());
                s.push('\n');
            }
            crate::output::metadata_lines(&mut s, report.seed, &report.config);
            for c in &report.summaries {
                let _ = writeln!(
                    s,
                    "# summary: d={} T={} completed={} aborted={} mean_regret={} regret_se={}",
                    c.d,
                    c.horizon,
                    c.completed,
                    c.aborted,
                    fmt_opt(c.mean_regret),
                    fmt_opt(c.regret_se)
                );
            }
            if let Some(f) = &report.fit {
                let exp = |e: Option<twopoint_core::Exponent>| match e {
                    Some(e) => format!("{} (se {})", e.value, e.std_error),
                    None => "n/a".to_string(),
                };
                let _ = writeln!(
                    s,
                    "# fit: alpha_d={} alpha_T={} log_constant={}",
                    exp(f.alpha_d),
                    exp(f.alpha_t),
                    f.log_constant
                );
            }
            if let Some(e) = &report.fit_error {
                let _ = writeln!(s, "# fit: unavailable: {e}");
            }
            s
        }
    }
}
