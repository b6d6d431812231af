//! Monte-Carlo checks of the estimator moment bounds, sphere concentration,
//! the ‖u‖∞ moment bound, the mirror-descent regret inequality, and
//! regret-scaling fits.
//!
//! Every routine takes a master seed; parallel cells draw from ChaCha8
//! streams derived from `(seed, cell index)`, so results do not depend on
//! scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{estimate_gradient, EstimatorKind, FnOracle, McEstimate};
use crate::geometry::{sample_unit_sphere, Domain, MirrorSetup, NormId};
use crate::linalg::{dot, norm_inf};
use crate::objectives::{builtin_objective, regret_with_samples, ObjectiveParams};
use crate::optimizer::{default_parameters, run_bandit, DeltaSchedule, RunFailure, RunRecord};
use crate::stats::{derive_seed, ols, Moments};

/// Default sample count for fourth-moment estimates.
pub const DEFAULT_FOURTH_MOMENT_SAMPLES: usize = 1_000_000;

fn cell_rng(seed: u64, cell: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(cell);
    rng
}

/// Where the estimator is evaluated in a moment scan.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PointPolicy {
    Origin,
    /// A fresh point uniform in the unit ball for every sample.
    RandomBall,
}

/// Second-moment estimates across dimensions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    pub dims: Vec<usize>,
    pub estimates: Vec<f64>,
    pub std_errors: Vec<f64>,
    /// Least-squares slope of `ln estimate` on `ln d`; NaN when an estimate
    /// is zero or fewer than two dimensions were scanned.
    pub fitted_log_slope: f64,
    /// `exp(intercept)` of the same fit.
    pub fitted_constant: f64,
    /// `max_d estimate/d`.
    pub max_ratio_to_dim: f64,
}

/// Scans `E‖g̃‖*²` over `dims` for the given estimator at `delta`.
#[allow(clippy::too_many_arguments)]
pub fn second_moment_scan<F>(
    kind: EstimatorKind,
    objective: &F,
    policy: PointPolicy,
    norm: NormId,
    dims: &[usize],
    delta: f64,
    n_samples: usize,
    seed: u64,
) -> Result<MomentReport>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    if dims.is_empty() {
        return Err(Error::param("dims", "empty dimension grid"));
    }
    if let Some(&d) = dims.iter().find(|&&d| d == 0) {
        return Err(Error::InvalidDimension(d));
    }
    if n_samples < 1000 {
        return Err(Error::param("n_samples", format!("{n_samples} < 1000")));
    }
    let cells: Vec<Result<Moments>> = dims
        .par_iter()
        .enumerate()
        .map(|(i, &d)| {
            let mut rng = cell_rng(seed, i as u64);
            let ball = Domain::l2_ball(d, 1.0)?;
            let mut oracle = FnOracle::new(d, |w: &[f64]| objective(w));
            let origin = vec![0.0; d];
            let mut m = Moments::new();
            for _ in 0..n_samples {
                let w = match policy {
                    PointPolicy::Origin => origin.clone(),
                    PointPolicy::RandomBall => ball.sample_point(&mut rng),
                };
                let u = sample_unit_sphere(d, &mut rng)?;
                let est = estimate_gradient(kind, &mut oracle, &w, delta, &u)?;
                let n = norm.dual_norm(&est.g);
                m.push(n * n);
            }
            Ok(m)
        })
        .collect();
    let moments = cells.into_iter().collect::<Result<Vec<_>>>()?;
    let estimates: Vec<f64> = moments.iter().map(Moments::mean).collect();
    let std_errors: Vec<f64> = moments.iter().map(Moments::std_error).collect();
    let (fitted_log_slope, fitted_constant) = log_log_fit(dims, &estimates);
    let max_ratio_to_dim = dims
        .iter()
        .zip(&estimates)
        .map(|(&d, e)| e / d as f64)
        .fold(0.0, f64::max);
    Ok(MomentReport {
        dims: dims.to_vec(),
        estimates,
        std_errors,
        fitted_log_slope,
        fitted_constant,
        max_ratio_to_dim,
    })
}

fn log_log_fit(dims: &[usize], values: &[f64]) -> (f64, f64) {
    if dims.len() < 2 || values.iter().any(|&v| !(v > 0.0)) {
        return (f64::NAN, f64::NAN);
    }
    let design: Vec<Vec<f64>> = dims.iter().map(|&d| vec![1.0, (d as f64).ln()]).collect();
    let y: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    match ols(&design, &y) {
        Some(fit) => (fit.coefficients[1], fit.coefficients[0].exp()),
        None => (f64::NAN, f64::NAN),
    }
}

/// `(E‖u‖∞⁴)^{1/4}` for `u` uniform on the sphere in `d > 1` dimensions,
/// with a delta-method standard error.
pub fn infinity_norm_moment(d: usize, n_samples: usize, seed: u64) -> Result<McEstimate> {
    if d <= 1 {
        return Err(Error::InvalidDimension(d));
    }
    if n_samples < 10_000 {
        return Err(Error::param("n_samples", format!("{n_samples} < 10000")));
    }
    Ok(fourth_root_moment(d, n_samples, seed))
}

fn fourth_root_moment(d: usize, n_samples: usize, seed: u64) -> McEstimate {
    // chunked so large scans use every core; chunk boundaries are fixed
    const CHUNK: usize = 1 << 14;
    let chunks = n_samples.div_ceil(CHUNK);
    let m = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = cell_rng(seed, c as u64);
            let n = CHUNK.min(n_samples - c * CHUNK);
            let mut m = Moments::new();
            for _ in 0..n {
                let u = sample_unit_sphere(d, &mut rng).expect("d ≥ 1");
                m.push(norm_inf(u.coords()).powi(4));
            }
            m
        })
        .collect::<Vec<_>>()
        .iter()
        .fold(Moments::new(), |a, b| a.merge(b));
    let m4 = m.mean();
    let root = m4.powf(0.25);
    McEstimate {
        value: root,
        std_error: m.std_error() * 0.25 * m4.powf(-0.75),
    }
}

/// One row of an ∞-norm moment scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InfNormRow {
    pub d: usize,
    pub fourth_root: McEstimate,
    /// `fourth_root / sqrt(ln d / d)`
    pub ratio: f64,
}

pub fn infinity_norm_scan(dims: &[usize], n_samples: usize, seed: u64) -> Result<Vec<InfNormRow>> {
    dims.iter()
        .enumerate()
        .map(|(i, &d)| {
            let est = infinity_norm_moment(d, n_samples, derive_seed(seed, i as u64))?;
            let scale = ((d as f64).ln() / d as f64).sqrt();
            Ok(InfNormRow {
                d,
                fourth_root: est,
                ratio: est.value / scale,
            })
        })
        .collect()
}

/// Monte-Carlo `(E‖u‖*⁴)^{1/4}`; exactly 1 for the Euclidean norm.
pub fn dual_norm_p_star(norm: NormId, d: usize, n_samples: usize, seed: u64) -> Result<f64> {
    if d == 0 {
        return Err(Error::InvalidDimension(0));
    }
    match norm {
        NormId::L2 => Ok(1.0),
        // ‖u‖∞ = 1 on the one-dimensional sphere
        NormId::L1 if d == 1 => Ok(1.0),
        NormId::L1 => Ok(infinity_norm_moment(d, n_samples, seed)?.value),
    }
}

/// Result of a fourth-central-moment concentration check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationReport {
    /// `sqrt(E[(g(u) − Ê g)⁴])`
    pub sqrt_fourth_central_moment: f64,
    pub std_error: f64,
    /// Ratio of the measured value to `L²/d`.
    pub bound_ratio: f64,
}

/// Measures `sqrt(E[(g(u) − E g)⁴])` for an `L`-Lipschitz `g` on the sphere.
pub fn lipschitz_concentration_check<G>(
    g: &G,
    lipschitz: f64,
    d: usize,
    n_samples: usize,
    seed: u64,
) -> Result<ConcentrationReport>
where
    G: Fn(&[f64]) -> f64 + Sync,
{
    if d == 0 {
        return Err(Error::InvalidDimension(0));
    }
    if !(lipschitz.is_finite() && lipschitz > 0.0) {
        return Err(Error::param(
            "lipschitz",
            format!("{lipschitz} must be positive"),
        ));
    }
    if n_samples < 100_000 {
        return Err(Error::param("n_samples", format!("{n_samples} < 100000")));
    }
    const CHUNK: usize = 1 << 14;
    let chunks = n_samples.div_ceil(CHUNK);
    let values: Vec<f64> = (0..chunks)
        .into_par_iter()
        .flat_map_iter(|c| {
            let mut rng = cell_rng(seed, c as u64);
            let n = CHUNK.min(n_samples - c * CHUNK);
            (0..n)
                .map(|_| g(sample_unit_sphere(d, &mut rng).expect("d ≥ 1").coords()))
                .collect::<Vec<_>>()
        })
        .collect();
    if let Some(v) = values.iter().find(|v| !v.is_finite()) {
        return Err(Error::param("g", format!("non-finite value {v}")));
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let m: Moments = values.iter().map(|v| (v - mean).powi(4)).collect();
    let m4 = m.mean();
    let root = m4.sqrt();
    let std_error = if m4 > 0.0 {
        m.std_error() / (2.0 * root)
    } else {
        0.0
    };
    Ok(ConcentrationReport {
        sqrt_fourth_central_moment: root,
        std_error,
        bound_ratio: root / (lipschitz * lipschitz / d as f64),
    })
}

/// Largest violation of `Σ⟨g̃_t, w_t − w*⟩ ≤ R²/η + ηΣ‖g̃_t‖*²` over the
/// probes. Nonpositive whenever the inequality holds.
pub fn md_inequality_audit(
    record: &RunRecord,
    setup: &MirrorSetup,
    probes: &[Vec<f64>],
) -> Result<f64> {
    if probes.is_empty() {
        return Err(Error::param("probes", "no probe points"));
    }
    if probes.iter().any(|p| !setup.domain.contains(p)) {
        return Err(Error::OutsideDomain);
    }
    if record.iterates.len() != record.estimates.len() {
        return Err(Error::param(
            "record",
            "iterates and estimates differ in length",
        ));
    }
    let d = setup.dim();
    let eta = record.eta;
    let r2 = setup.radius_bound * setup.radius_bound;
    let mut g_sum = vec![0.0; d];
    let mut inner_wt = 0.0;
    let mut sq_sum = 0.0;
    for (w, est) in record.iterates.iter().zip(&record.estimates) {
        if w.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: w.len(),
            });
        }
        inner_wt += dot(&est.g, w);
        for (s, g) in g_sum.iter_mut().zip(&est.g) {
            *s += g;
        }
        let n = setup.dual_norm(&est.g);
        sq_sum += n * n;
    }
    let rhs = r2 / eta + eta * sq_sum;
    Ok(probes
        .iter()
        .map(|p| inner_wt - dot(&g_sum, p) - rhs)
        .fold(f64::NEG_INFINITY, f64::max))
}

/// Geometry used by the scaling experiment and the benchmark runner.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SetupKind {
    /// `½‖·‖²` on the ball of the given radius.
    Euclidean { radius: f64 },
    /// Scaled negative entropy on the simplex.
    Entropic,
}

impl SetupKind {
    pub fn domain(&self, d: usize) -> Result<Domain> {
        match self {
            SetupKind::Euclidean { radius } => Domain::l2_ball(d, *radius),
            SetupKind::Entropic => Domain::simplex(d),
        }
    }

    pub fn setup(&self, d: usize) -> Result<MirrorSetup> {
        match self {
            SetupKind::Euclidean { .. } => MirrorSetup::euclidean(self.domain(d)?),
            SetupKind::Entropic => MirrorSetup::entropic(self.domain(d)?),
        }
    }
}

/// Optional overrides of the default schedule.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ScheduleOverrides {
    pub eta: Option<f64>,
    pub delta: Option<f64>,
}

/// Result of one seeded run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Replication {
    pub d: usize,
    pub horizon: usize,
    pub seed: u64,
    pub eta: f64,
    pub delta: f64,
    pub average_regret: f64,
    pub optimization_error: Option<McEstimate>,
}

/// A replication that stopped early.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationFailure {
    pub d: usize,
    pub horizon: usize,
    pub seed: u64,
    pub eta: f64,
    pub delta: f64,
    pub failure: RunFailure,
}

/// Setup for [`run_replication`] and [`regret_scaling_experiment`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub setup: SetupKind,
    pub objective: String,
    pub params: ObjectiveParams,
    pub overrides: ScheduleOverrides,
    /// Fresh draws for the optimization error of stochastic streams; zero
    /// skips it.
    pub mc_samples: usize,
}

/// `G₂` used for the step size: the declared bound, tightened by `√d·G₁`
/// for entropic setups.
fn effective_g2(spec: &ExperimentSpec, g2: f64, g1: Option<f64>, d: usize) -> f64 {
    match (spec.setup, g1) {
        (SetupKind::Entropic, Some(g1)) => g2.min(crate::optimizer::g2_from_g1(d, g1)),
        _ => g2,
    }
}

/// Builds the stream and schedule for one cell and runs it with `seed`.
/// The stream (loss draws) and the learner's directions use independent
/// seeds derived from `seed`.
pub fn run_replication(
    spec: &ExperimentSpec,
    d: usize,
    horizon: usize,
    seed: u64,
) -> Result<std::result::Result<Replication, ReplicationFailure>> {
    let setup = spec.setup.setup(d)?;
    let params = ObjectiveParams {
        seed: derive_seed(seed, 0),
        ..spec.params.clone()
    };
    let stream = builtin_objective(&spec.objective, &setup.domain, &params)?;
    let g2 = effective_g2(spec, stream.lipschitz_l2, stream.lipschitz_l1, d);
    let mut schedule = default_parameters(&setup, g2, d, horizon)?;
    if let Some(eta) = spec.overrides.eta {
        schedule = schedule.with_eta(eta)?;
    }
    if let Some(delta) = spec.overrides.delta {
        schedule = schedule.with_delta(DeltaSchedule::Constant(delta))?;
    }
    let delta = schedule.delta_at(0);
    let record = match run_bandit(
        &mut stream.oracle(),
        &setup,
        &schedule,
        derive_seed(seed, 1),
    ) {
        Ok(r) => r,
        Err(failure) => {
            return Ok(Err(ReplicationFailure {
                d,
                horizon,
                seed,
                eta: schedule.eta,
                delta,
                failure,
            }))
        }
    };
    let report = regret_with_samples(&record, &stream, None, spec.mc_samples)?;
    Ok(Ok(Replication {
        d,
        horizon,
        seed,
        eta: schedule.eta,
        delta,
        average_regret: report.average_regret,
        optimization_error: report.optimization_error,
    }))
}

/// Mean regret of one `(d, T)` cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    pub d: usize,
    pub horizon: usize,
    pub mean_regret: f64,
    pub std_error: f64,
    pub replications: usize,
}

/// A fitted exponent with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Exponent {
    pub value: f64,
    pub std_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub rows: Vec<ScalingRow>,
    pub replications: Vec<Replication>,
    /// Exponent of `d`; `None` when the grid has one dimension.
    pub alpha_d: Option<Exponent>,
    /// Exponent of `T`; `None` when the grid has one horizon.
    pub alpha_t: Option<Exponent>,
    pub log_constant: f64,
}

/// Seed of replication `rep` in cell `cell`.
pub fn replication_seed(master: u64, cell: usize, rep: usize) -> u64 {
    derive_seed(derive_seed(master, cell as u64), rep as u64)
}

/// Runs `replications` seeded runs on every `(d, T)` cell and fits
/// `ln mean regret ≈ c + α_d ln d + α_T ln T` by least squares.
pub fn regret_scaling_experiment(
    spec: &ExperimentSpec,
    dims: &[usize],
    horizons: &[usize],
    replications: usize,
    seed: u64,
) -> Result<ScalingReport> {
    let fit_d = distinct(dims) >= 2;
    let fit_t = distinct(horizons) >= 2;
    if !fit_d && !fit_t {
        return Err(Error::param(
            "grid",
            "need at least two grid points on a fitted axis",
        ));
    }
    if replications == 0 {
        return Err(Error::param("replications", "must be positive"));
    }
    let cells: Vec<(usize, usize)> = dims
        .iter()
        .flat_map(|&d| horizons.iter().map(move |&t| (d, t)))
        .collect();
    let jobs: Vec<(usize, usize, usize, usize)> = cells
        .iter()
        .enumerate()
        .flat_map(|(c, &(d, t))| (0..replications).map(move |r| (c, d, t, r)))
        .collect();
    let results: Vec<Replication> = jobs
        .par_iter()
        .map(|&(c, d, t, r)| {
            let seed = replication_seed(seed, c, r);
            match run_replication(spec, d, t, seed)? {
                Ok(rep) => Ok(rep),
                Err(f) => Err(f.failure.error),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let rows: Vec<ScalingRow> = results
        .chunks(replications)
        .map(|chunk| {
            let m: Moments = chunk.iter().map(|r| r.average_regret).collect();
            ScalingRow {
                d: chunk[0].d,
                horizon: chunk[0].horizon,
                mean_regret: m.mean(),
                std_error: m.std_error(),
                replications: chunk.len(),
            }
        })
        .collect();
    let fit = fit_exponents(&rows)?;
    Ok(ScalingReport {
        rows,
        replications: results,
        alpha_d: fit.alpha_d,
        alpha_t: fit.alpha_t,
        log_constant: fit.log_constant,
    })
}

/// Exponents of a log-log least-squares fit of mean regret.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentFit {
    pub alpha_d: Option<Exponent>,
    pub alpha_t: Option<Exponent>,
    pub log_constant: f64,
}

/// Fits `ln mean_regret ≈ c + α_d ln d + α_T ln T` over `rows`. An axis
/// enters the fit only when it takes at least two distinct values.
pub fn fit_exponents(rows: &[ScalingRow]) -> Result<ExponentFit> {
    let dims: Vec<usize> = rows.iter().map(|r| r.d).collect();
    let horizons: Vec<usize> = rows.iter().map(|r| r.horizon).collect();
    let fit_d = distinct(&dims) >= 2;
    let fit_t = distinct(&horizons) >= 2;
    if !fit_d && !fit_t {
        return Err(Error::param(
            "grid",
            "need at least two grid points on a fitted axis",
        ));
    }
    if let Some(row) = rows.iter().find(|r| !(r.mean_regret > 0.0)) {
        return Err(Error::param(
            "grid",
            format!(
                "mean regret {} at d={}, T={} cannot be log-fitted",
                row.mean_regret, row.d, row.horizon
            ),
        ));
    }
    let design: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| {
            let mut x = vec![1.0];
            if fit_d {
                x.push((r.d as f64).ln());
            }
            if fit_t {
                x.push((r.horizon as f64).ln());
            }
            x
        })
        .collect();
    let y: Vec<f64> = rows.iter().map(|r| r.mean_regret.ln()).collect();
    let fit = ols(&design, &y).ok_or_else(|| Error::param("grid", "degenerate design"))?;
    let exp = |i: usize| Exponent {
        value: fit.coefficients[i],
        std_error: fit.std_errors[i],
    };
    Ok(ExponentFit {
        alpha_d: fit_d.then(|| exp(1)),
        alpha_t: fit_t.then(|| exp(if fit_d { 2 } else { 1 })),
        log_constant: fit.coefficients[0],
    })
}

fn distinct(v: &[usize]) -> usize {
    let mut s = v.to_vec();
    s.sort_unstable();
    s.dedup();
    s.len()
}
