use proptest::prelude::*;

use spinforge::sim::{self, signal_amplitude, stick_spectrum, SimOptions};
use spinforge::{Active, Axis, OperatorTerm, Sequence, SequenceEvent, SpinSet, SpinState, SpinSystem};

fn sys() -> SpinSystem {
    SpinSystem::glycine_fluoride()
}

fn term(n: usize) -> impl Strategy<Value = OperatorTerm> {
    (
        prop::collection::vec(prop_oneof![Just(None), Just(Some(Axis::X)), Just(Some(Axis::Y)), Just(Some(Axis::Z))], n),
        -3.0f64..3.0,
    )
        .prop_map(|(axes, c)| OperatorTerm::new(c, axes.into_iter().enumerate().filter_map(|(k, a)| a.map(|a| (k, a)))))
        .prop_filter("traceless", |t| t.order() > 0)
}

fn state() -> impl Strategy<Value = SpinState> {
    prop::collection::vec(term(5), 1..6).prop_map(|t| SpinState::from_terms(5, &t).unwrap())
}

fn event() -> impl Strategy<Value = SequenceEvent> {
    prop_oneof![
        (0usize..5, -360.0f64..360.0).prop_map(|(spin, angle)| SequenceEvent::ZRot { spin, angle }),
        (prop::collection::btree_set(0usize..5, 1..3), -359.0f64..360.0, 0.0f64..360.0)
            .prop_map(|(s, f, p)| SequenceEvent::pulse(SpinSet::list(s), f, p)),
        (0.0f64..0.02).prop_map(|d| SequenceEvent::delay(d, Active::All)),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn frame_tracking_equals_explicit_z_rotations(st in state(), events in prop::collection::vec(event(), 1..10)) {
        let s = sys();
        let seq = Sequence::new(events);
        let tracked = sim::run(&seq, &st, &s, SimOptions::default()).unwrap().aligned();
        let explicit = sim::run(&seq, &st, &s, SimOptions { frame_tracking: false, relaxation: false }).unwrap();
        prop_assert!(tracked.max_abs_diff(&explicit) < 1e-10);
    }

    #[test]
    fn events_preserve_hermiticity_and_trace(st in state(), events in prop::collection::vec(event(), 1..10), grad in any::<bool>()) {
        let s = sys();
        let mut events = events;
        if grad {
            events.push(SequenceEvent::Gradient);
        }
        let seq = Sequence::new(events);
        for relaxation in [false, true] {
            let out = sim::run(&seq, &st, &s, SimOptions::default().with_relaxation(relaxation)).unwrap();
            prop_assert!(out.hermiticity_error() < 1e-10);
            prop_assert!((out.trace() - st.trace()).norm() < 1e-10);
            let norm = |x: &SpinState| x.matrix().norm();
            prop_assert!(norm(&out) <= norm(&st) * (1.0 + 1e-10));
        }
    }

    #[test]
    fn total_stick_amplitude_is_the_ikx_coefficient(st in state(), k in 0usize..5) {
        let s = sys();
        let ikx = OperatorTerm::single(1.0, k, Axis::X);
        let total: f64 = stick_spectrum(&st, k, &[], &s).unwrap().iter().map(|x| x.amplitude.re).sum();
        prop_assert!((total - st.coefficient(&ikx).unwrap()).abs() < 1e-10);
        prop_assert!((signal_amplitude(&st, k, &s).unwrap() - total).abs() < 1e-10);
    }

    #[test]
    fn stick_offsets_are_half_coupling_sums(st in state(), k in 0usize..5) {
        let s = sys();
        let partners: Vec<f64> = (0..5).filter(|&l| l != k).map(|l| s.coupling(k, l)).filter(|j| *j != 0.0).collect();
        let allowed: Vec<f64> = (0..1usize << partners.len())
            .map(|m| partners.iter().enumerate().map(|(i, j)| if m >> i & 1 == 1 { j / 2.0 } else { -j / 2.0 }).sum())
            .collect();
        for stick in stick_spectrum(&st, k, &[], &s).unwrap() {
            prop_assert!(allowed.iter().any(|a| (a - stick.offset).abs() < 1e-6), "offset {}", stick.offset);
        }
    }
}

#[test]
fn spectrum_examples() {
    let s = sys();
    let st = SpinState::from_terms(5, &[OperatorTerm::single(-1.0, 4, Axis::X)]).unwrap();
    let sticks = stick_spectrum(&st, 4, &[2, 3], &s).unwrap();
    assert_eq!(sticks.len(), 1);
    assert!((sticks[0].amplitude.re + 1.0).abs() < 1e-12);

    let st = SpinState::from_terms(5, &[OperatorTerm::single(1.0, 1, Axis::Z)]).unwrap();
    assert!(stick_spectrum(&st, 1, &[], &s).unwrap().is_empty());

    let zero = SpinState::zero(5);
    for k in 0..5 {
        assert_eq!(signal_amplitude(&zero, k, &s).unwrap(), 0.0);
    }
}

#[test]
fn relaxation_only_damps_transverse_terms() {
    let s = sys();
    let st = SpinState::from_terms(
        5,
        &[OperatorTerm::single(1.0, 0, Axis::X), OperatorTerm::single(1.0, 2, Axis::Z)],
    )
    .unwrap();
    let seq = Sequence::new(vec![SequenceEvent::delay(0.05, Active::Pairs(vec![]))]);
    let out = sim::run(&seq, &st, &s, SimOptions::default().with_relaxation(true)).unwrap();
    let x = out.coefficient(&OperatorTerm::single(1.0, 0, Axis::X)).unwrap();
    let z = out.coefficient(&OperatorTerm::single(1.0, 2, Axis::Z)).unwrap();
    assert!((x - (-0.05 / s.t2[0]).exp()).abs() < 1e-12);
    assert!((z - 1.0).abs() < 1e-12);
}
