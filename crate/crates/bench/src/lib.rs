//! Shared fixtures for the criterion benchmarks.

use twopoint_core::{builtin_objective, Domain, LossStream, MirrorSetup, ObjectiveParams};

/// Unit l2 ball with the `abs_regression` stream.
pub fn euclidean_fixture(d: usize) -> (MirrorSetup, LossStream) {
    let setup = MirrorSetup::euclidean(Domain::l2_ball(d, 1.0).unwrap()).unwrap();
    let stream =
        builtin_objective("abs_regression", &setup.domain, &ObjectiveParams::default()).unwrap();
    (setup, stream)
}

/// Simplex with the `shifted_l1norm` stream.
pub fn entropic_fixture(d: usize) -> (MirrorSetup, LossStream) {
    let setup = MirrorSetup::entropic(Domain::simplex(d).unwrap()).unwrap();
    let stream =
        builtin_objective("shifted_l1norm", &setup.domain, &ObjectiveParams::default()).unwrap();
    (setup, stream)
}
