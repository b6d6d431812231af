//! Dual-averaging mirror descent driven by the symmetric two-point
//! estimator, its default step-size/exploration schedule, and iterate
//! averaging.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{two_point_gradient, GradientEstimate, TwoPointOracle};
use crate::geometry::{sample_unit_sphere, MirrorSetup};

/// Fraction of `R` used as the default ceiling on the exploration radius.
pub const DEFAULT_DELTA_CAP_FRACTION: f64 = 1e-3;

/// Exploration radii `δ_t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum DeltaSchedule {
    Constant(f64),
    /// One radius per round; must have exactly `horizon` entries.
    Sequence(Vec<f64>),
}

/// Horizon, dimension, step size and exploration radii of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleParams {
    pub horizon: usize,
    pub dim: usize,
    pub eta: f64,
    pub delta: DeltaSchedule,
    pub delta_cap: f64,
}

impl ScheduleParams {
    pub fn new(
        horizon: usize,
        dim: usize,
        eta: f64,
        delta: DeltaSchedule,
        delta_cap: f64,
    ) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::param("T", "horizon must be at least 1"));
        }
        if dim == 0 {
            return Err(Error::InvalidDimension(0));
        }
        if !(eta.is_finite() && eta > 0.0) {
            return Err(Error::param(
                "eta",
                format!("{eta} must be positive and finite"),
            ));
        }
        if !(delta_cap.is_finite() && delta_cap > 0.0) {
            return Err(Error::param(
                "delta_cap",
                format!("{delta_cap} must be positive"),
            ));
        }
        let ok = |d: f64| d.is_finite() && d > 0.0;
        match &delta {
            DeltaSchedule::Constant(d) if !ok(*d) => {
                return Err(Error::param(
                    "delta",
                    format!("{d} must be positive and finite"),
                ))
            }
            DeltaSchedule::Sequence(seq) => {
                if seq.len() != horizon {
                    return Err(Error::param(
                        "delta",
                        format!("sequence has {} entries for horizon {horizon}", seq.len()),
                    ));
                }
                if let Some(d) = seq.iter().find(|d| !ok(**d)) {
                    return Err(Error::param(
                        "delta",
                        format!("{d} must be positive and finite"),
                    ));
                }
            }
            _ => {}
        }
        Ok(ScheduleParams {
            horizon,
            dim,
            eta,
            delta,
            delta_cap,
        })
    }

    /// `δ_t` for the zero-based round `t`.
    pub fn delta_at(&self, t: usize) -> f64 {
        match &self.delta {
            DeltaSchedule::Constant(d) => *d,
            DeltaSchedule::Sequence(seq) => seq[t],
        }
    }

    pub fn with_eta(mut self, eta: f64) -> Result<Self> {
        if !(eta.is_finite() && eta > 0.0) {
            return Err(Error::param(
                "eta",
                format!("{eta} must be positive and finite"),
            ));
        }
        self.eta = eta;
        Ok(self)
    }

    pub fn with_delta(self, delta: DeltaSchedule) -> Result<Self> {
        ScheduleParams::new(self.horizon, self.dim, self.eta, delta, self.delta_cap)
    }
}

/// Lipschitz constant in `‖·‖₂` implied by one in `‖·‖₁`: `√d·G₁`.
pub fn g2_from_g1(d: usize, g1: f64) -> f64 {
    (d as f64).sqrt() * g1
}

/// `η = R/(p*·G₂·√(dT))`, constant `δ_t = min(p*·R·√(d/T), 1e−3·R)`.
pub fn default_parameters(
    setup: &MirrorSetup,
    g2: f64,
    d: usize,
    horizon: usize,
) -> Result<ScheduleParams> {
    default_parameters_with_cap(
        setup,
        g2,
        d,
        horizon,
        DEFAULT_DELTA_CAP_FRACTION * setup.radius_bound,
    )
}

/// As [`default_parameters`] with an explicit ceiling on `δ_t`.
pub fn default_parameters_with_cap(
    setup: &MirrorSetup,
    g2: f64,
    d: usize,
    horizon: usize,
    delta_cap: f64,
) -> Result<ScheduleParams> {
    if !(g2.is_finite() && g2 > 0.0) {
        return Err(Error::param(
            "G2",
            format!("{g2} must be positive and finite"),
        ));
    }
    if d == 0 {
        return Err(Error::InvalidDimension(0));
    }
    if d != setup.dim() {
        return Err(Error::DimensionMismatch {
            expected: setup.dim(),
            got: d,
        });
    }
    if horizon == 0 {
        return Err(Error::param("T", "horizon must be at least 1"));
    }
    let (r, p) = (setup.radius_bound, setup.p_star);
    let (df, tf) = (d as f64, horizon as f64);
    let eta = r / (p * g2 * (df * tf).sqrt());
    let delta_bound = p * r * (df / tf).sqrt();
    ScheduleParams::new(
        horizon,
        d,
        eta,
        DeltaSchedule::Constant(delta_bound.min(delta_cap)),
        delta_cap,
    )
}

/// Upper bound `p*·R·√(d/T)` on every exploration radius.
pub fn delta_bound(setup: &MirrorSetup, d: usize, horizon: usize) -> f64 {
    setup.p_star * setup.radius_bound * (d as f64 / horizon as f64).sqrt()
}

/// Full trajectory of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    /// `w_1, …, w_T`
    pub iterates: Vec<Vec<f64>>,
    /// `θ_1, …, θ_T` (the dual state each prediction was computed from).
    pub dual_states: Vec<Vec<f64>>,
    /// `θ_{T+1}`
    pub final_dual: Vec<f64>,
    pub estimates: Vec<GradientEstimate>,
    /// `f_t(w_t)` when the oracle supports out-of-band evaluation, else empty.
    pub losses: Vec<f64>,
    pub average_iterate: Vec<f64>,
    pub eta: f64,
    pub seed: u64,
    /// Queries spent by the learner (two per round).
    pub total_queries: u64,
    /// Out-of-band evaluations made for bookkeeping only.
    pub diagnostic_queries: u64,
}

impl RunRecord {
    pub fn empty(dim: usize, eta: f64, seed: u64) -> Self {
        RunRecord {
            iterates: Vec::new(),
            dual_states: Vec::new(),
            final_dual: vec![0.0; dim],
            estimates: Vec::new(),
            losses: Vec::new(),
            average_iterate: Vec::new(),
            eta,
            seed,
            total_queries: 0,
            diagnostic_queries: 0,
        }
    }

    pub fn horizon(&self) -> usize {
        self.iterates.len()
    }

    pub fn dim(&self) -> usize {
        self.final_dual.len()
    }

    /// All probe values `f_t(w_t ± δ_t u_t)` in query order.
    pub fn probe_values(&self) -> Vec<f64> {
        self.estimates
            .iter()
            .flat_map(|e| [e.f_plus, e.f_minus_or_anchor])
            .collect()
    }
}

/// A run that stopped early. `partial` holds every completed round.
#[derive(Debug, Clone, PartialEq)]
pub struct RunFailure {
    pub partial: RunRecord,
    pub error: Error,
}

impl std::fmt::Display for RunFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "run aborted after {} rounds: {}",
            self.partial.horizon(),
            self.error
        )
    }
}

impl std::error::Error for RunFailure {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

/// Runs the two-point bandit algorithm for `params.horizon` rounds.
///
/// `θ₁ = 0`; each round predicts `w_t = argmax ⟨θ_t, w⟩ − r(w)`, draws `u_t`
/// uniformly from the sphere, queries the round's loss at `w_t ± δ_t u_t`,
/// forms the symmetric estimate `g̃_t` and sets `θ_{t+1} = θ_t − η g̃_t`.
/// The oracle's [`TwoPointOracle::round_reset`] is called before every round.
/// Directions come from a ChaCha8 stream seeded with `seed`.
pub fn run_bandit<O: TwoPointOracle + ?Sized>(
    oracle: &mut O,
    setup: &MirrorSetup,
    params: &ScheduleParams,
    seed: u64,
) -> Result<RunRecord, RunFailure> {
    let d = setup.dim();
    let mut record = RunRecord::empty(d, params.eta, seed);
    let fail = |record: RunRecord, error: Error| RunFailure {
        partial: record,
        error,
    };
    for got in [params.dim, oracle.dim()] {
        if got != d {
            return Err(fail(record, Error::DimensionMismatch { expected: d, got }));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let start_queries = oracle.query_count();
    let mut theta = vec![0.0; d];
    record.iterates.reserve(params.horizon);
    record.dual_states.reserve(params.horizon);
    record.estimates.reserve(params.horizon);

    for t in 0..params.horizon {
        oracle.round_reset();
        let w = match setup.mirror_step(&theta) {
            Ok(w) => w,
            Err(e) => return Err(finish_partial(record, oracle, start_queries, e)),
        };
        if let Some(loss) = oracle.diagnostic_eval(&w) {
            match loss {
                Ok(v) => {
                    record.losses.push(v);
                    record.diagnostic_queries += 1;
                }
                Err(e) => return Err(finish_partial(record, oracle, start_queries, e)),
            }
        }
        let u = sample_unit_sphere(d, &mut rng).expect("d ≥ 1");
        let est = match two_point_gradient(oracle, &w, params.delta_at(t), &u) {
            Ok(est) => est,
            Err(e) => {
                // keep losses aligned with completed rounds
                record.losses.truncate(record.iterates.len());
                return Err(finish_partial(record, oracle, start_queries, e));
            }
        };
        let next: Vec<f64> = theta
            .iter()
            .zip(&est.g)
            .map(|(th, g)| th - params.eta * g)
            .collect();
        record.iterates.push(w);
        record.dual_states.push(std::mem::replace(&mut theta, next));
        record.estimates.push(est);
    }
    record.final_dual = theta;
    record.total_queries = oracle.query_count() - start_queries;
    record.average_iterate = average_iterate(&record).expect("horizon ≥ 1");
    Ok(record)
}

fn finish_partial<O: TwoPointOracle + ?Sized>(
    mut record: RunRecord,
    oracle: &O,
    start_queries: u64,
    error: Error,
) -> RunFailure {
    record.total_queries = oracle.query_count() - start_queries;
    if let Some(last) = record.dual_states.last() {
        let est = record.estimates.last().expect("one estimate per round");
        record.final_dual = last
            .iter()
            .zip(&est.g)
            .map(|(th, g)| th - record.eta * g)
            .collect();
    }
    record.average_iterate = average_iterate(&record).unwrap_or_default();
    RunFailure {
        partial: record,
        error,
    }
}

/// Arithmetic mean of the iterates.
pub fn average_iterate(record: &RunRecord) -> Result<Vec<f64>> {
    let first = record.iterates.first().ok_or(Error::EmptyRecord)?;
    let mut mean = vec![0.0; first.len()];
    for w in &record.iterates {
        for (m, x) in mean.iter_mut().zip(w) {
            *m += x;
        }
    }
    let n = record.iterates.len() as f64;
    mean.iter_mut().for_each(|m| *m /= n);
    Ok(mean)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::FnOracle;
    use crate::geometry::Domain;
    use crate::linalg::{dist2, dot, norm2};

    fn ball_setup(d: usize) -> MirrorSetup {
        MirrorSetup::euclidean(Domain::l2_ball(d, 1.0).unwrap()).unwrap()
    }

    #[test]
    fn default_schedule_example() {
        // R = 1, p* = 1: use a ball of radius √2 so that R = ρ/√2 = 1
        let setup = MirrorSetup::euclidean(Domain::l2_ball(4, 2f64.sqrt()).unwrap()).unwrap();
        assert!((setup.radius_bound - 1.0).abs() < 1e-15);
        let p = default_parameters(&setup, 1.0, 4, 100).unwrap();
        assert!((p.eta - 0.05).abs() < 1e-15);
        assert!((delta_bound(&setup, 4, 100) - 0.2).abs() < 1e-15);
        assert!((p.delta_at(0) - 1e-3).abs() < 1e-15);
        assert!((p.delta_cap - 1e-3).abs() < 1e-15);
    }

    #[test]
    fn quadrupling_horizon_halves_eta() {
        let setup = ball_setup(3);
        let a = default_parameters(&setup, 2.0, 3, 250).unwrap();
        let b = default_parameters(&setup, 2.0, 3, 1000).unwrap();
        assert!((a.eta / b.eta - 2.0).abs() < 1e-12);
    }

    #[test]
    fn entropic_schedule_uses_scaled_lipschitz() {
        let setup = MirrorSetup::entropic(Domain::simplex(9).unwrap()).unwrap();
        let g2 = g2_from_g1(9, 0.5);
        assert_eq!(g2, 1.5);
        let p = default_parameters(&setup, g2, 9, 400).unwrap();
        let expected = setup.radius_bound / (setup.p_star * 1.5 * (9.0f64 * 400.0).sqrt());
        assert!((p.eta - expected).abs() < 1e-15);
        assert!(p.delta_at(0) <= delta_bound(&setup, 9, 400));
    }

    #[test]
    fn default_delta_respects_bound_when_cap_is_loose() {
        let setup = ball_setup(2);
        let p = default_parameters_with_cap(&setup, 1.0, 2, 50, 10.0).unwrap();
        assert!((p.delta_at(0) - delta_bound(&setup, 2, 50)).abs() < 1e-15);
    }

    #[test]
    fn schedule_validation() {
        let setup = ball_setup(2);
        assert!(default_parameters(&setup, 0.0, 2, 10).is_err());
        assert!(default_parameters(&setup, 1.0, 2, 0).is_err());
        assert!(default_parameters(&setup, 1.0, 3, 10).is_err());
        assert!(
            ScheduleParams::new(3, 2, 0.1, DeltaSchedule::Sequence(vec![0.1, 0.1]), 1.0).is_err()
        );
        assert!(
            ScheduleParams::new(2, 2, 0.1, DeltaSchedule::Sequence(vec![0.1, -0.1]), 1.0).is_err()
        );
        assert!(ScheduleParams::new(2, 2, -0.1, DeltaSchedule::Constant(0.1), 1.0).is_err());
    }

    #[test]
    fn single_round_predicts_the_center() {
        let setup = ball_setup(3);
        let params = default_parameters(&setup, 1.0, 3, 1).unwrap();
        let mut o = FnOracle::new(3, |w: &[f64]| w[0]);
        let rec = run_bandit(&mut o, &setup, &params, 1).unwrap();
        assert_eq!(rec.iterates, vec![vec![0.0; 3]]);
        assert_eq!(rec.average_iterate, vec![0.0; 3]);
        assert_eq!(rec.total_queries, 2);

        let simplex = MirrorSetup::entropic(Domain::simplex(4).unwrap()).unwrap();
        let params = default_parameters(&simplex, 1.0, 4, 1).unwrap();
        let mut o = FnOracle::new(4, |w: &[f64]| w[0]);
        let rec = run_bandit(&mut o, &simplex, &params, 1).unwrap();
        assert_eq!(rec.iterates, vec![vec![0.25; 4]]);
    }

    #[test]
    fn run_bookkeeping() {
        let setup = ball_setup(3);
        let params = default_parameters(&setup, 1.0, 3, 200).unwrap();
        let mut o = FnOracle::new(3, |w: &[f64]| {
            norm2(&crate::linalg::sub(w, &[0.3, 0.1, -0.2]))
        });
        let rec = run_bandit(&mut o, &setup, &params, 11).unwrap();
        assert_eq!(rec.horizon(), 200);
        assert_eq!(rec.total_queries, 400);
        assert_eq!(rec.diagnostic_queries, 200);
        assert_eq!(rec.losses.len(), 200);
        assert_eq!(o.query_count(), 400);
        assert!(rec.dual_states[0].iter().all(|&x| x == 0.0));
        for t in 0..rec.horizon() {
            assert!(setup.domain.contains(&rec.iterates[t]));
            let next = if t + 1 < rec.horizon() {
                &rec.dual_states[t + 1]
            } else {
                &rec.final_dual
            };
            for i in 0..3 {
                assert_eq!(
                    next[i],
                    rec.dual_states[t][i] - rec.eta * rec.estimates[t].g[i]
                );
            }
        }
        let mean = average_iterate(&rec).unwrap();
        assert!(dist2(&mean, &rec.average_iterate) < 1e-9);
    }

    #[test]
    fn identical_seeds_identical_records() {
        let setup = MirrorSetup::entropic(Domain::simplex(5).unwrap()).unwrap();
        let params = default_parameters(&setup, 1.0, 5, 300).unwrap();
        let f = |w: &[f64]| (w[0] - 0.1).abs() + w[3];
        let a = run_bandit(&mut FnOracle::new(5, f), &setup, &params, 42).unwrap();
        let b = run_bandit(&mut FnOracle::new(5, f), &setup, &params, 42).unwrap();
        assert_eq!(a, b);
        let c = run_bandit(&mut FnOracle::new(5, f), &setup, &params, 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn linear_loss_drives_iterates_to_the_boundary() {
        let d = 5;
        let setup = ball_setup(d);
        let params = default_parameters(&setup, 1.0, d, 10_000).unwrap();
        let mut o = FnOracle::new(d, |w: &[f64]| w[0]);
        let rec = run_bandit(&mut o, &setup, &params, 3).unwrap();
        let avg_loss = rec.losses.iter().sum::<f64>() / rec.losses.len() as f64;
        assert!((avg_loss - (-1.0)).abs() < 0.1, "{avg_loss}");
        let last = rec.iterates.last().unwrap();
        assert!(last[0] < -0.9, "{last:?}");
    }

    #[test]
    fn oracle_failure_returns_partial_record() {
        let setup = ball_setup(2);
        let params = default_parameters(&setup, 1.0, 2, 50).unwrap();
        let mut calls = 0;
        let mut o = FnOracle::new(2, move |w: &[f64]| {
            calls += 1;
            if calls > 31 {
                f64::INFINITY
            } else {
                dot(w, w)
            }
        });
        let err = run_bandit(&mut o, &setup, &params, 5).unwrap_err();
        assert!(matches!(err.error, Error::OracleFailure { .. }));
        // 31 calls: 10 complete rounds use 30 (3 each incl. the diagnostic one)
        assert_eq!(err.partial.horizon(), 10);
        assert_eq!(err.partial.losses.len(), 10);
        assert_eq!(err.partial.average_iterate.len(), 2);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let setup = ball_setup(2);
        let params = default_parameters(&setup, 1.0, 2, 5).unwrap();
        let mut o = FnOracle::new(3, |w: &[f64]| w[0]);
        let err = run_bandit(&mut o, &setup, &params, 0).unwrap_err();
        assert!(matches!(err.error, Error::DimensionMismatch { .. }));
        assert_eq!(o.query_count(), 0);
    }

    #[test]
    fn average_iterate_examples() {
        let mut rec = RunRecord::empty(2, 0.1, 0);
        assert_eq!(average_iterate(&rec).unwrap_err(), Error::EmptyRecord);
        rec.iterates = vec![vec![0.0, 0.0], vec![1.0, 0.0]];
        assert_eq!(average_iterate(&rec).unwrap(), vec![0.5, 0.0]);
        rec.iterates = vec![vec![0.3, -0.2]; 7];
        let m = average_iterate(&rec).unwrap();
        assert!(dist2(&m, &[0.3, -0.2]) < 1e-15);
        rec.iterates = vec![
            vec![0.2, 0.3, 0.5],
            vec![0.9, 0.05, 0.05],
            vec![1.0 / 3.0; 3],
        ];
        let m = average_iterate(&rec).unwrap();
        assert!((m.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }
}
