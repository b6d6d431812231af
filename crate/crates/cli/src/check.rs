//! `twopoint check`: diagnostic suites with PASS/FAIL verdicts.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use twopoint_core::linalg::{dot, norm2};
use twopoint_core::{
    builtin_objective, default_parameters, derive_seed, dual_norm_p_star, g2_from_g1,
    infinity_norm_moment, lipschitz_concentration_check, md_inequality_audit, run_bandit,
    second_moment_scan, smoothed_gradient_mc, smoothed_value, Error, EstimatorKind, FnOracle,
    NormId, ObjectiveParams, PointPolicy, SetupKind, DEFAULT_FOURTH_MOMENT_SAMPLES,
    P_STAR_CONSTANT,
};

use crate::config::{CheckConfig, ConfigError, OutputFormat};
use crate::output::VERSION;

pub const SUITES: &[&str] = &[
    "anchored_d2",
    "symmetric_moment",
    "unbiased",
    "smoothing",
    "md_inequality",
    "inf_norm",
    "concentration",
    "p_star",
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckLine {
    pub suite: &'static str,
    pub invariant: String,
    pub measured: f64,
    pub bound: String,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckReport {
    pub version: &'static str,
    pub seed: u64,
    pub config: BTreeMap<String, String>,
    pub results: Vec<CheckLine>,
}

impl CheckReport {
    pub fn all_passed(&self) -> bool {
        self.results.iter().all(|r| r.passed)
    }
}

fn line(
    suite: &'static str,
    invariant: String,
    measured: f64,
    bound: String,
    passed: bool,
) -> CheckLine {
    CheckLine {
        suite,
        invariant,
        measured,
        bound,
        passed,
    }
}

type SuiteResult = Result<Vec<CheckLine>, Error>;

pub fn run(cfg: &CheckConfig, echo: BTreeMap<String, String>) -> Result<CheckReport, ConfigError> {
    let mut results = Vec::new();
    for name in &cfg.suites {
        let idx = SUITES
            .iter()
            .position(|s| s == name)
            .expect("validated suite");
        let seed = derive_seed(cfg.common.seed, idx as u64);
        log::info!("running suite {name}");
        let lines = match SUITES[idx] {
            "anchored_d2" => anchored_d2(seed),
            "symmetric_moment" => symmetric_moment(cfg.samples.unwrap_or(10_000), seed),
            "unbiased" => unbiased(cfg.samples.unwrap_or(200_000), seed),
            "smoothing" => smoothing(cfg.samples.unwrap_or(10_000), seed),
            "md_inequality" => md_inequality(cfg.d.unwrap_or(5), cfg.horizon, seed),
            "inf_norm" => inf_norm(
                cfg.d.unwrap_or(2),
                cfg.samples.unwrap_or(DEFAULT_FOURTH_MOMENT_SAMPLES),
                seed,
            ),
            "concentration" => {
                concentration(cfg.samples.unwrap_or(DEFAULT_FOURTH_MOMENT_SAMPLES), seed)
            }
            "p_star" => p_star(
                cfg.d.unwrap_or(256),
                cfg.samples.unwrap_or(DEFAULT_FOURTH_MOMENT_SAMPLES),
                seed,
            ),
            _ => unreachable!(),
        };
        results.extend(lines.map_err(|e| suite_error(name, e))?);
    }
    Ok(CheckReport {
        version: VERSION,
        seed: cfg.common.seed,
        config: echo,
        results,
    })
}

fn suite_error(suite: &str, e: Error) -> ConfigError {
    let key = match &e {
        Error::InvalidParameter {
            name: "n_samples", ..
        } => "samples".to_string(),
        Error::InvalidDimension(_) => "d".to_string(),
        Error::InvalidParameter { name, .. } => (*name).to_string(),
        _ => "suites".to_string(),
    };
    ConfigError::new(key, format!("suite {suite}: {e}"))
}

fn norm_fn(w: &[f64]) -> f64 {
    norm2(w)
}

fn anchored_d2(seed: u64) -> SuiteResult {
    let dims = [2, 10, 100];
    let r = second_moment_scan(
        EstimatorKind::Anchored,
        &norm_fn,
        PointPolicy::Origin,
        NormId::L2,
        &dims,
        0.01,
        1000,
        seed,
    )?;
    Ok(dims
        .iter()
        .zip(&r.estimates)
        .map(|(&d, &e)| {
            let d2 = (d * d) as f64;
            line(
                "anchored_d2",
                format!("E‖g‖² at origin, d={d}"),
                e,
                format!("= {d2} ± 1e-9·d²"),
                (e - d2).abs() <= 1e-9 * d2,
            )
        })
        .collect())
}

fn symmetric_moment(samples: usize, seed: u64) -> SuiteResult {
    let dims: Vec<usize> = (1..=9).map(|k| 1usize << k).collect();
    let r = second_moment_scan(
        EstimatorKind::Symmetric,
        &norm_fn,
        PointPolicy::RandomBall,
        NormId::L2,
        &dims,
        0.01,
        samples,
        seed,
    )?;
    Ok(vec![
        line(
            "symmetric_moment",
            "log-log slope of E‖g‖² in d".into(),
            r.fitted_log_slope,
            "in [0.8, 1.2]".into(),
            (0.8..=1.2).contains(&r.fitted_log_slope),
        ),
        line(
            "symmetric_moment",
            "max_d E‖g‖²/d".into(),
            r.max_ratio_to_dim,
            "finite (reported constant)".into(),
            r.max_ratio_to_dim.is_finite(),
        ),
    ])
}

fn unbiased(samples: usize, seed: u64) -> SuiteResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = [0.5, -1.0, 0.25, 2.0];
    let w0 = [0.1, 0.2, -0.3, 0.0];
    let w = [0.3, -0.1, 0.2, 0.4];
    let mut out = Vec::new();
    let mut lin = FnOracle::new(4, |x: &[f64]| dot(&a, x));
    let g = smoothed_gradient_mc(&mut lin, &w, 0.01, samples, &mut rng)?;
    out.push(coordinate_line("linear", &g.value, &g.std_error, &a));
    let mut quad = FnOracle::new(4, |x: &[f64]| {
        0.5 * x
            .iter()
            .zip(&w0)
            .map(|(p, q)| (p - q) * (p - q))
            .sum::<f64>()
    });
    let g = smoothed_gradient_mc(&mut quad, &w, 0.01, samples, &mut rng)?;
    let exact: Vec<f64> = w.iter().zip(&w0).map(|(p, q)| p - q).collect();
    out.push(coordinate_line("quadratic", &g.value, &g.std_error, &exact));
    Ok(out)
}

fn coordinate_line(name: &str, mean: &[f64], se: &[f64], exact: &[f64]) -> CheckLine {
    let z = mean
        .iter()
        .zip(se)
        .zip(exact)
        .map(|((m, s), e)| (m - e).abs() / s)
        .fold(0.0, f64::max);
    line(
        "unbiased",
        format!("{name}: max |mean − ∇f̂|/se over coordinates"),
        z,
        "≤ 5".into(),
        z <= 5.0,
    )
}

fn smoothing(samples: usize, seed: u64) -> SuiteResult {
    let d = 3;
    let delta = 0.1;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut oracle = FnOracle::new(d, |x: &[f64]| norm2(x));
    let at0 = smoothed_value(&mut oracle, &[0.0; 3], delta, samples, &mut rng)?;
    let mut worst: f64 = f64::NEG_INFINITY;
    let ball = twopoint_core::Domain::l2_ball(d, 1.0)?;
    for _ in 0..100 {
        let w = ball.sample_point(&mut rng);
        let s = smoothed_value(&mut oracle, &w, delta, samples, &mut rng)?;
        worst = worst.max((s.value - norm2(&w)).abs() - delta - 4.0 * s.std_error);
    }
    Ok(vec![
        line(
            "smoothing",
            "|f̂(0) − f(0)| − δ".into(),
            (at0.value - delta).abs(),
            format!("≤ 4·se = {}", 4.0 * at0.std_error),
            (at0.value - delta).abs() <= 4.0 * at0.std_error + 1e-12,
        ),
        line(
            "smoothing",
            "max over 100 points of |f̂ − f| − δ − 4·se".into(),
            worst,
            "≤ 0".into(),
            worst <= 0.0,
        ),
    ])
}

fn md_inequality(d: usize, horizon: usize, seed: u64) -> SuiteResult {
    let mut out = Vec::new();
    for (i, (kind, objective)) in [
        (SetupKind::Euclidean { radius: 1.0 }, "abs_regression"),
        (SetupKind::Entropic, "shifted_l1norm"),
    ]
    .into_iter()
    .enumerate()
    {
        let d = if matches!(kind, SetupKind::Entropic) {
            d.max(2)
        } else {
            d
        };
        let setup = kind.setup(d)?;
        let params = ObjectiveParams {
            seed: derive_seed(seed, 2 * i as u64),
            ..Default::default()
        };
        let stream = builtin_objective(objective, &setup.domain, &params)?;
        let g2 = match (kind, stream.lipschitz_l1) {
            (SetupKind::Entropic, Some(g1)) => stream.lipschitz_l2.min(g2_from_g1(d, g1)),
            _ => stream.lipschitz_l2,
        };
        let p = default_parameters(&setup, g2, d, horizon)?;
        let record = run_bandit(
            &mut stream.oracle(),
            &setup,
            &p,
            derive_seed(seed, 2 * i as u64 + 1),
        )
        .map_err(|f| f.error)?;
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 100 + i as u64));
        let mut probes: Vec<Vec<f64>> = (0..100)
            .map(|_| setup.domain.sample_point(&mut rng))
            .collect();
        probes.extend(setup.domain.extreme_points());
        let v = md_inequality_audit(&record, &setup, &probes)?;
        let label = if i == 0 { "euclidean" } else { "entropic" };
        out.push(line(
            "md_inequality",
            format!("{label} {objective} d={d} T={horizon}: max violation"),
            v,
            "≤ 1e-6".into(),
            v <= 1e-6,
        ));
    }
    Ok(out)
}

fn inf_norm(d: usize, samples: usize, seed: u64) -> SuiteResult {
    let est = infinity_norm_moment(d, samples, seed)?;
    if d == 2 {
        let exact = (3.0 / 8.0 + 1.0 / std::f64::consts::PI).powf(0.25);
        let z = (est.value - exact).abs() / est.std_error;
        return Ok(vec![line(
            "inf_norm",
            format!(
                "(E‖u‖∞⁴)^¼ at d=2 = {} (se {}): |z| vs {exact}",
                est.value, est.std_error
            ),
            z,
            "≤ 3".into(),
            z <= 3.0,
        )]);
    }
    let ratio = est.value / ((d as f64).ln() / d as f64).sqrt();
    let c = 150f64.powf(0.25);
    Ok(vec![line(
        "inf_norm",
        format!("(E‖u‖∞⁴)^¼ / √(ln d/d) at d={d}"),
        ratio,
        format!("≤ 150^¼ = {c}"),
        ratio <= c,
    )])
}

fn concentration(samples: usize, seed: u64) -> SuiteResult {
    let a = [0.6, 0.0, -0.8, 0.0];
    let g = |u: &[f64]| dot(&a, u);
    let r = lipschitz_concentration_check(&g, 1.0, 4, samples, seed)?;
    let exact = (3.0f64 / 24.0).sqrt();
    let z = (r.sqrt_fourth_central_moment - exact).abs() / r.std_error;
    Ok(vec![line(
        "concentration",
        format!(
            "linear g, d=4: √E[(g−Eg)⁴] = {} (se {}): |z| vs {exact}",
            r.sqrt_fourth_central_moment, r.std_error
        ),
        z,
        "≤ 3".into(),
        z <= 3.0,
    )])
}

fn p_star(d: usize, samples: usize, seed: u64) -> SuiteResult {
    let est = dual_norm_p_star(NormId::L1, d, samples, seed)?;
    let bound = if d > 1 {
        P_STAR_CONSTANT * ((d as f64).ln() / d as f64).sqrt()
    } else {
        1.0
    };
    Ok(vec![line(
        "p_star",
        format!("(E‖u‖∞⁴)^¼ at d={d} vs the default p*"),
        est,
        format!("≤ {bound}"),
        est <= bound,
    )])
}

pub fn render(report: &CheckReport, format: OutputFormat) -> String {
    match format {
        OutputFormat::Json => {
            let mut s = serde_json::to_string_pretty(report).expect("serializable report");
            s.push('\n');
            s
        }
        OutputFormat::Csv => {
            let mut s = String::new();
            for r in &report.results {
                let _ = writeln!(
                    s,
                    "{} {}: {}: measured {} (bound {})",
                    if r.passed { "PASS" } else { "FAIL" },
                    r.suite,
                    r.invariant,
                    r.measured,
                    r.bound
                );
            }
            crate::output::metadata_lines(&mut s, report.seed, &report.config);
            s
        }
    }
}
