//! Run-level invariants of the update: certified-ball soundness, infeasible
//! persistence, determinism, and agreement of the window emptiness flag.

use rand::prelude::*;
use rand_chacha::ChaCha12Rng;

use oco_core::algorithm::{advance, AlgorithmState, RoundCase};
use oco_core::benchmark::{generate_sequence, run_online, SequenceSpec, StartMode};
use oco_core::geometry::{min_over_ball, project_sublevel, BallSet, ProjectionSettings, SublevelSet, EPS_FEAS};
use oco_core::model::QuadraticFunction;
use oco_core::oracle::RoundOracle;
use oco_core::Point;

fn spec(seed: u64, start: StartMode) -> SequenceSpec {
    SequenceSpec {
        dim: 2,
        horizon: 120,
        ambient_radius: 2.0,
        f_drift: 0.02,
        g_drift: 0.01,
        g_level: 0.5,
        eig_f: (0.8, 1.6),
        eig_g: (0.9, 1.1),
        dist: 0.05,
        alpha: 0.5,
        seed,
        start,
        f_isotropic: true,
        g_isotropic: true,
        g_smoothness_floor: None,
    }
}

#[test]
fn certified_ball_is_entirely_feasible() {
    let mut rng = ChaCha12Rng::seed_from_u64(1);
    let seq = generate_sequence(&spec(2, StartMode::Boundary)).unwrap();
    let log = run_online(&seq, &ProjectionSettings::tight()).unwrap();
    let mut checked = 0;
    for rec in &log.records {
        if rec.case != RoundCase::StrictFeasibleBigBall {
            continue;
        }
        checked += 1;
        let g = &seq.rounds[rec.t - 1].g;
        for _ in 0..100 {
            let angle = rng.gen_range(0.0..std::f64::consts::TAU);
            let radius = rec.safe_radius * rng.gen_range(0.0f64..1.0).sqrt();
            let sample = rec.action.offset_by(
                &Point::new(vec![angle.cos(), angle.sin()]).unwrap(),
                radius,
            );
            let value = g.value(&sample).unwrap();
            assert!(
                value <= 1e-9,
                "round {}: point of the certified ball violates g: {value}",
                rec.t
            );
        }
    }
    assert!(checked > 0, "no certified-ball rounds exercised");
}

#[test]
fn explicit_gradient_steps_stay_infeasible() {
    // a smoothness floor keeps the guard branch alive for many rounds
    let mut s = spec(7, StartMode::InfeasibleFar);
    s.g_smoothness_floor = Some(60.0);
    let seq = generate_sequence(&s).unwrap();
    let log = run_online(&seq, &ProjectionSettings::tight()).unwrap();
    let mut checked = 0;
    for rec in &log.records {
        if matches!(
            rec.case,
            RoundCase::InfeasibleGradientStep | RoundCase::InfeasibleEmptyLocal
        ) {
            checked += 1;
            let g_next = seq.rounds[rec.t - 1].g.value(&rec.next_action).unwrap();
            assert!(
                g_next > 0.0,
                "round {} ({}): stepped action became feasible",
                rec.t,
                rec.case
            );
        }
    }
    assert!(checked > 0, "no explicit gradient-step rounds exercised");
}

#[test]
fn thin_lens_rounds_keep_the_contraction() {
    // seed 7 drives the action across the window-reach boundary, producing
    // near-tangent window intersections; the guarantees must survive them
    let mut s = spec(7, StartMode::InfeasibleFar);
    s.g_smoothness_floor = Some(60.0);
    let seq = generate_sequence(&s).unwrap();
    let outcome =
        oco_core::benchmark::execute_run(&seq, &ProjectionSettings::tight()).unwrap();
    assert!(outcome.bounds.per_step_ok, "{:?}", outcome.bounds);
    assert!(outcome.bounds.all_ok(), "{:?}", outcome.bounds);
}

#[test]
fn advance_is_bit_deterministic() {
    let seq = generate_sequence(&spec(11, StartMode::InfeasibleNear)).unwrap();
    let settings = ProjectionSettings::tight();
    let round = &seq.rounds[0];
    let run_once = || {
        let state = AlgorithmState::new(seq.start.clone(), seq.constants.clone()).unwrap();
        let mut oracle = RoundOracle::new(round, &seq.ambient, seq.constants.dist).unwrap();
        let (next, rec) = advance(state, &mut oracle, &seq.ambient, &settings).unwrap();
        (next.action, rec.case)
    };
    let (a1, c1) = run_once();
    let (a2, c2) = run_once();
    assert_eq!(c1, c2);
    assert!(a1.bits_eq(&a2), "identical transcripts must give identical actions");
}

#[test]
fn window_emptiness_flag_matches_both_tests() {
    let mut rng = ChaCha12Rng::seed_from_u64(23);
    let settings_dist = 0.4;
    for _ in 0..50 {
        let g = QuadraticFunction::isotropic(
            rng.gen_range(0.7..1.5),
            Point::new(vec![rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5)]).unwrap(),
            -rng.gen_range(0.2..0.6),
        )
        .unwrap();
        let action = Point::new(vec![rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)]).unwrap();
        let window = BallSet::new(action.clone(), settings_dist).unwrap();
        let (_, min_g) = min_over_ball(&g, &window).unwrap();
        let empty = min_g > EPS_FEAS;
        // equivalent cross-check: the sublevel set is out of reach of the window
        let reach = project_sublevel(&action, &SublevelSet::new(g)).unwrap().dist(&action);
        if (reach - settings_dist).abs() > 1e-9 {
            assert_eq!(empty, reach > settings_dist, "emptiness tests disagree");
        }
    }
}
