use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use twopoint_core::*;

fn ball_setup(d: usize) -> MirrorSetup {
    MirrorSetup::euclidean(Domain::l2_ball(d, 1.0).unwrap()).unwrap()
}

fn run(stream: &LossStream, setup: &MirrorSetup, horizon: usize, seed: u64) -> RunRecord {
    let params = default_parameters(setup, stream.lipschitz_l2, setup.dim(), horizon).unwrap();
    run_bandit(&mut stream.oracle(), setup, &params, seed).unwrap()
}

#[test]
fn regret_is_recomputed_bit_identically() {
    let setup = ball_setup(4);
    let params = ObjectiveParams {
        noise: 0.2,
        seed: 3,
        ..Default::default()
    };
    let stream = builtin_objective("quadratic", &setup.domain, &params).unwrap();
    let rec = run(&stream, &setup, 500, 1);
    let a = regret_with_samples(&rec, &stream, None, 0).unwrap();
    let b = regret_with_samples(&rec.clone(), &stream.clone(), None, 0).unwrap();
    assert_eq!(a.average_regret.to_bits(), b.average_regret.to_bits());
    assert_eq!(a, b);
}

#[test]
fn optimal_comparator_dominates_sampled_points() {
    let setup = ball_setup(3);
    for name in ["l2norm", "quadratic", "linear", "shifted_l1norm"] {
        let stream = builtin_objective(name, &setup.domain, &ObjectiveParams::default()).unwrap();
        let rec = run(&stream, &setup, 400, 2);
        let best = regret_with_samples(&rec, &stream, None, 0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let w = setup.domain.sample_point(&mut rng);
            let other = regret_with_samples(&rec, &stream, Some(&w), 0).unwrap();
            assert!(
                best.average_regret >= other.average_regret - 1e-12,
                "{name}: {} < {}",
                best.average_regret,
                other.average_regret
            );
        }
    }
}

#[test]
fn solved_comparator_matches_closed_form() {
    let setup = ball_setup(3);
    let params = ObjectiveParams {
        center: Some(vec![2.0, 0.0, 0.0]),
        ..Default::default()
    };
    let stream = builtin_objective("l2norm", &setup.domain, &params).unwrap();
    let c = solve_offline_comparator(&stream, 10, 20_000).unwrap();
    let hint = stream.comparator_hint.clone().unwrap();
    assert!((c.value - 1.0).abs() <= c.gap + 1e-12);
    assert!(c.gap < 1e-3, "{}", c.gap);
    assert!(linalg::dist2(&c.point, &hint) < 0.05);
}

#[test]
fn entropic_run_concentrates_on_best_vertex() {
    let d = 5;
    let setup = MirrorSetup::entropic(Domain::simplex(d).unwrap()).unwrap();
    let params = ObjectiveParams {
        direction: Some(vec![0.9, 0.5, 0.1, 0.7, 0.8]),
        ..Default::default()
    };
    let stream = builtin_objective("linear", &setup.domain, &params).unwrap();
    let g2 = stream
        .lipschitz_l2
        .min(g2_from_g1(d, stream.lipschitz_l1.unwrap()));
    let p = default_parameters(&setup, g2, d, 20_000).unwrap();
    let rec = run_bandit(&mut stream.oracle(), &setup, &p, 4).unwrap();
    let last = rec.iterates.last().unwrap();
    assert!(setup.domain.contains(last));
    assert!(last[2] > 0.5, "{last:?}");
    let r = regret_with_samples(&rec, &stream, None, 0).unwrap();
    assert!(
        r.average_regret > 0.0 && r.average_regret < 0.1,
        "{}",
        r.average_regret
    );
}

#[test]
fn online_to_batch_holds_on_average() {
    let setup = ball_setup(2);
    let mut lhs = Moments::new();
    let mut rhs = Moments::new();
    let mut se2 = 0.0;
    for rep in 0..20 {
        let params = ObjectiveParams {
            noise: 0.5,
            seed: derive_seed(17, rep),
            ..Default::default()
        };
        let stream = builtin_objective("quadratic", &setup.domain, &params).unwrap();
        let rec = run(&stream, &setup, 1000, derive_seed(18, rep));
        let o2b = online_to_batch_check_with_samples(&rec, &stream, 20_000).unwrap();
        lhs.push(o2b.error_lhs);
        rhs.push(o2b.regret_rhs);
        se2 += o2b.error_se * o2b.error_se;
    }
    let se = se2.sqrt() / 20.0;
    assert!(
        lhs.mean() <= rhs.mean() + 5.0 * se,
        "{} vs {}",
        lhs.mean(),
        rhs.mean()
    );
}

#[test]
fn failed_oracle_keeps_completed_rounds() {
    let setup = ball_setup(2);
    let mut calls = 0;
    // three calls per round: two probes and the bookkeeping loss
    let mut oracle = FnOracle::new(2, |w: &[f64]| {
        calls += 1;
        if calls > 10 {
            f64::NAN
        } else {
            w[0]
        }
    });
    let p = default_parameters(&setup, 1.0, 2, 100).unwrap();
    let failure = run_bandit(&mut oracle, &setup, &p, 0).unwrap_err();
    assert_eq!(failure.partial.horizon(), 3);
    assert!(matches!(failure.error, Error::OracleFailure { .. }));
}

#[test]
fn shrunk_simplex_run_stays_inside() {
    let d = 4;
    let base = Domain::simplex(d).unwrap();
    let shrunk = shrink_domain(&base, 0.8).unwrap();
    let setup = MirrorSetup::entropic(shrunk).unwrap();
    let stream =
        builtin_objective("shifted_l1norm", &setup.domain, &ObjectiveParams::default()).unwrap();
    let rec = run(&stream, &setup, 300, 9);
    let m = shrink_factor_for_margin(&base, 0.01).unwrap();
    assert!(m < 1.0);
    for w in &rec.iterates {
        assert!(setup.domain.contains(w));
        assert!(w.iter().all(|&x| x >= 0.2 / d as f64 - 1e-12), "{w:?}");
    }
}
