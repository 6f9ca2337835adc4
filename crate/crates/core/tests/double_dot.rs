//! Double-dot generators: structural identities, limits and dynamics.

use proptest::prelude::*;

use mesorate::analytic::{double_dot_current_bare, double_dot_current_measured};
use mesorate::builders::{
    build, build_double_dot_bare, build_double_dot_set, build_generalized_double_dot_set,
    build_reduced_double_dot,
};
use mesorate::model::{
    validate_state, BlockingConfig, RateSet, Scenario, StateLabel, StateVector, Widths,
};
use mesorate::observables::currents;
use mesorate::solver::{default_dt, evolve, relaxation_check, steady_state};
use mesorate::validation::non_increasing;

const SCENARIOS: [Scenario; 7] = [
    Scenario::SingleDotSet,
    Scenario::DoubleDotBare,
    Scenario::DoubleDotSet,
    Scenario::ReducedDoubleDot,
    Scenario::GeneralizedDoubleDotSet(BlockingConfig::DISTINGUISHING),
    Scenario::GeneralizedDoubleDotSet(BlockingConfig::INDISTINGUISHING),
    Scenario::GeneralizedDoubleDotSet(BlockingConfig::UNBLOCKED),
];

fn log_rate(lo: f64, hi: f64) -> impl Strategy<Value = f64> {
    (lo.log10()..hi.log10()).prop_map(|e| 10f64.powf(e))
}

fn rates_in(lo: f64, hi: f64) -> impl Strategy<Value = RateSet> {
    (
        prop::array::uniform5(log_rate(lo, hi)),
        -10.0f64..10.0,
        -3.0f64..3.0,
        -3.0f64..3.0,
    )
        .prop_map(|(v, eps, u1, u2)| {
            let mut r = RateSet::equal_amplitudes(
                Widths::new(v[0], v[1]),
                Widths::new(v[2], v[3]),
                v[4],
                eps,
            );
            r.u1 = u1;
            r.u2 = u2;
            r
        })
}

fn system_current(s: Scenario, r: &RateSet) -> f64 {
    let g = build(s, r).unwrap();
    currents(s, r, &steady_state(&g).unwrap()).unwrap().system
}

proptest! {
    #[test]
    fn every_builder_conserves_trace(r in rates_in(1e-2, 1e2)) {
        for s in SCENARIOS {
            let g = build(s, &r).unwrap();
            prop_assert!(g.trace_defect() <= 1e-12 * g.matrix.max_abs(), "{s:?}");
        }
    }

    #[test]
    fn steady_states_are_physical(r in rates_in(1e-2, 1e2)) {
        for s in SCENARIOS {
            let x = steady_state(&build(s, &r).unwrap()).unwrap();
            let v = validate_state(&x, 1e-9);
            prop_assert!(v.is_empty(), "{s:?}: {v:?}");
        }
    }

    #[test]
    fn rule_builder_reproduces_hand_coded(r in rates_in(1e-2, 1e2)) {
        let hand = build_double_dot_set(&r).unwrap();
        let rules = build_generalized_double_dot_set(&r, BlockingConfig::DISTINGUISHING).unwrap();
        prop_assert_eq!(hand.matrix, rules.matrix);
    }

    #[test]
    fn reduced_without_detector_is_bare(r in rates_in(1e-2, 1e2)) {
        let mut r = r;
        r.det.left = 0.0;
        prop_assert_eq!(
            build_reduced_double_dot(&r).unwrap().matrix,
            build_double_dot_bare(&r).unwrap().matrix
        );
    }

    /// The full model approaches the reduced one as the detector collector
    /// rate grows.
    #[test]
    fn full_model_converges_to_reduced(r in rates_in(1e-1, 1e1)) {
        let errs: Vec<f64> = [1e2, 1e3, 1e4]
            .iter()
            .map(|ratio| {
                let mut r = r;
                r.det.right = ratio * r.det.left;
                r = r.with_tied_primes();
                let want = double_dot_current_measured(&r).unwrap();
                (system_current(Scenario::DoubleDotSet, &r) - want).abs() / want
            })
            .collect();
        prop_assert!(non_increasing(&errs), "{errs:?}");
    }

    /// With equal Coulomb shifts the detector still dephases the dots. Only
    /// checked for detuning below the collector width, where dephasing can
    /// only slow transport.
    #[test]
    fn equal_shifts_still_suppress(r in rates_in(1e-1, 1e1), frac in -0.99f64..0.99) {
        let mut r = r;
        r.u2 = r.u1;
        r.epsilon = frac * 0.5 * r.sys.right;
        let bare = double_dot_current_bare(&r).unwrap();
        prop_assert!(system_current(Scenario::DoubleDotSet, &r) < bare);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    /// Long-time integration lands on the direct solve.
    #[test]
    fn evolution_reaches_steady_state(r in rates_in(0.3, 3.0)) {
        for s in SCENARIOS {
            let g = build(s, &r).unwrap();
            let x0 = StateVector::point_mass(&g.layout, StateLabel::A).unwrap();
            let t_final = 50.0 / g.matrix.min_nonzero_abs().unwrap();
            let traj = evolve(&g, &x0, t_final, default_dt(&g)).unwrap();
            let ss = steady_state(&g).unwrap();
            let dist = traj.last().values.iter().zip(&ss.values).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            prop_assert!(dist < 1e-6, "{s:?}: {dist:e}");
            prop_assert!(traj.trace_drift_rate() < 1e-9);
            prop_assert!(traj.max_negativity() < 1e-6);
        }
    }
}

fn aligned(gamma_l: f64, gamma_r: f64) -> RateSet {
    let mut r = RateSet::equal_amplitudes(
        Widths::new(gamma_l, gamma_r),
        Widths::new(1.0, 1.0),
        1.0,
        0.0,
    );
    r.u1 = 1.0;
    r.u2 = 2.0;
    r
}

#[test]
fn no_hopping_traps_electron_in_first_dot() {
    let mut r = aligned(1.0, 1.0);
    r.omega = 0.0;
    let g = build_double_dot_bare(&r).unwrap();
    let x = steady_state(&g).unwrap();
    assert_eq!(x.occupation(StateLabel::B), Some(1.0));
    assert_eq!(currents(g.scenario, &r, &x).unwrap().system, 0.0);
}

#[test]
fn reduced_all_ones_current() {
    let r = aligned(1.0, 1.0);
    assert!((system_current(Scenario::ReducedDoubleDot, &r) - 1.0 / 3.5).abs() < 1e-15);
}

#[test]
fn indistinguishing_detector_leaves_current_intact() {
    let r = aligned(1.0, 1e4);
    let s = Scenario::GeneralizedDoubleDotSet(BlockingConfig::INDISTINGUISHING);
    let g = build(s, &r).unwrap();
    let c = currents(s, &r, &steady_state(&g).unwrap()).unwrap();
    assert!((c.system - 1.0 / 3.25).abs() < 0.01 / 3.25);
    assert!(c.delta_detector.unwrap().abs() > 0.1);
}

#[test]
fn detector_signal_tracks_system_current() {
    let r = aligned(1.0, 1e4);
    let g = build_double_dot_set(&r).unwrap();
    let c = currents(g.scenario, &r, &steady_state(&g).unwrap()).unwrap();
    let ratio = c.delta_detector.unwrap() / c.system;
    assert!((ratio - r.det.left / r.sys.right).abs() < 0.01);
}

#[test]
fn hand_coded_builder_rejects_unequal_primes() {
    let mut r = aligned(1.0, 1.0);
    r.sys_p.left = 2.0;
    assert!(build_double_dot_set(&r).is_err());
    assert!(build_generalized_double_dot_set(&r, BlockingConfig::DISTINGUISHING).is_err());
}

#[test]
fn relaxation_time_is_a_few_inverse_rates() {
    let r = aligned(1.0, 1.0);
    let t = relaxation_check(&build(Scenario::SingleDotSet, &r).unwrap(), 1e-6).unwrap();
    assert!(t > 1.0 && t < 50.0, "{t}");
}
