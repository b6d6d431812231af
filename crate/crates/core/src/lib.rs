//! Derivative-free convex optimization from two function values per round.
//!
//! The learner runs dual-averaging mirror descent on the symmetric
//! two-point estimate `(d/2δ)(f(w+δu) − f(w−δu))u`, with `u` uniform on the
//! Euclidean unit sphere. Two geometries are provided: `½‖·‖²` on an
//! `ℓ₂`-ball and a scaled negative entropy on the probability simplex.
//!
//! ```
//! use twopoint_core::{default_parameters, run_bandit, Domain, FnOracle, MirrorSetup};
//!
//! let setup = MirrorSetup::euclidean(Domain::l2_ball(3, 1.0).unwrap()).unwrap();
//! let target = [0.3, -0.2, 0.1];
//! let mut oracle = FnOracle::new(3, |w: &[f64]| {
//!     w.iter().zip(&target).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()
//! });
//! let params = default_parameters(&setup, 1.0, 3, 2000).unwrap();
//! let record = run_bandit(&mut oracle, &setup, &params, 7).unwrap();
//! assert_eq!(record.total_queries, 4000);
//! ```

pub mod diagnostics;
pub mod error;
pub mod estimators;
pub mod geometry;
pub mod linalg;
pub mod objectives;
pub mod optimizer;
pub mod stats;

pub use diagnostics::{
    dual_norm_p_star, fit_exponents, infinity_norm_moment, infinity_norm_scan,
    lipschitz_concentration_check, md_inequality_audit, regret_scaling_experiment,
    replication_seed, run_replication, second_moment_scan, ConcentrationReport, ExperimentSpec,
    Exponent, ExponentFit, InfNormRow, MomentReport, PointPolicy, Replication, ReplicationFailure,
    ScalingReport, ScalingRow, ScheduleOverrides, SetupKind, DEFAULT_FOURTH_MOMENT_SAMPLES,
};
pub use error::{Error, Result};
pub use estimators::{
    anchored_gradient, estimate_gradient, smoothed_gradient_mc, smoothed_value, two_point_gradient,
    EstimatorKind, FnOracle, GradientEstimate, McEstimate, McVector, TwoPointOracle,
};
pub use geometry::{
    min_linear, mirror_step, project_euclidean, sample_unit_sphere, shrink_domain,
    shrink_factor_for_margin, Direction, Domain, MirrorSetup, NormId, RegularizerId,
    P_STAR_CONSTANT,
};
pub use objectives::{
    builtin_objective, check_lipschitz, online_to_batch_check, online_to_batch_check_with_samples,
    regret, regret_with_samples, solve_offline_comparator, BuiltinName, Comparator, LipschitzCheck,
    LossStream, ObjectiveParams, OnlineToBatch, RegretReport, RoundLoss, StreamKind, StreamOracle,
    DEFAULT_MC_SAMPLES, DEFAULT_SOLVER_ITERATIONS,
};
pub use optimizer::{
    average_iterate, default_parameters, default_parameters_with_cap, delta_bound, g2_from_g1,
    run_bandit, DeltaSchedule, RunFailure, RunRecord, ScheduleParams, DEFAULT_DELTA_CAP_FRACTION,
};
pub use stats::{derive_seed, Moments};
