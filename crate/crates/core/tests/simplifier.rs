use proptest::prelude::*;

use spinforge::algebra::{overlap_fidelity, rotation_propagator};
use spinforge::compiler::{sequence_propagator, simplify, simplify_with, Rule};
use spinforge::sequence::{duration, parse_sequence};
use spinforge::{Active, CMatrix, Sequence, SequenceEvent, SpinSet, SpinSystem};

fn sys() -> SpinSystem {
    SpinSystem::glycine_fluoride()
}

fn pulse(spins: SpinSet, flip: f64, phase: f64) -> SequenceEvent {
    SequenceEvent::pulse(spins, flip, phase)
}

fn spin_set() -> impl Strategy<Value = SpinSet> {
    prop_oneof![
        4 => (0usize..5).prop_map(SpinSet::one),
        1 => prop::collection::btree_set(0usize..5, 2..4).prop_map(SpinSet::list),
        1 => Just(SpinSet::All),
    ]
}

fn phase() -> impl Strategy<Value = f64> {
    prop_oneof![4 => (0u8..4).prop_map(|q| f64::from(q) * 90.0), 1 => 0.0f64..360.0]
}

/// Short event groups that give each rule something to rewrite.
fn motif() -> impl Strategy<Value = Vec<SequenceEvent>> {
    prop_oneof![
        (spin_set(), phase()).prop_map(|(s, p)| vec![pulse(s.clone(), 180.0, p), pulse(s, 180.0, p)]),
        (0usize..5, phase(), any::<bool>(), any::<bool>()).prop_map(|(k, p, flip_axis, before)| {
            let ninety = pulse(SpinSet::one(k), 90.0, p);
            let pi = pulse(SpinSet::one(k), 180.0, if flip_axis { p + 180.0 } else { p });
            if before { vec![pi, ninety] } else { vec![ninety, pi] }
        }),
        (0usize..5, phase(), any::<bool>(), prop_oneof![Just(90.0), Just(180.0), 1.0f64..359.0]).prop_map(
            |(k, p, plus, t)| {
                vec![
                    pulse(SpinSet::one(k), 90.0, p),
                    pulse(SpinSet::one(k), t, if plus { p + 90.0 } else { p - 90.0 }),
                    pulse(SpinSet::one(k), 90.0, p + 180.0),
                ]
            }
        ),
        (0usize..5, prop_oneof![Just(90.0), Just(-90.0), -360.0f64..360.0])
            .prop_map(|(spin, angle)| vec![SequenceEvent::ZRot { spin, angle }]),
        (1e-4f64..3e-3, prop_oneof![Just(Active::All), Just(Active::Pairs(vec![(0, 1)])), Just(Active::Pairs(vec![]))])
            .prop_map(|(d, a)| vec![SequenceEvent::delay(d, a)]),
        (0usize..5, phase(), 1usize..5, any::<bool>()).prop_map(|(k, p, len, lead)| {
            let mut v = Vec::new();
            if lead {
                v.push(pulse(SpinSet::one(k), 90.0, p + 90.0));
            }
            for _ in 0..len * 2 {
                v.push(pulse(SpinSet::one(k), 180.0, p));
            }
            v.push(pulse(SpinSet::one(k), 90.0, p));
            v
        }),
        (spin_set(), prop_oneof![Just(90.0), Just(180.0), Just(-90.0), -359.0f64..360.0], phase())
            .prop_map(|(s, f, p)| vec![pulse(s, f, p)]),
    ]
}

fn context() -> impl Strategy<Value = Sequence> {
    prop::collection::vec(motif(), 1..7).prop_map(|m| Sequence::new(m.into_iter().flatten().collect()))
}

fn same_propagator(a: &Sequence, b: &Sequence) -> f64 {
    let s = sys();
    let ua = sequence_propagator(a, &s).unwrap();
    let ub = sequence_propagator(b, &s).unwrap();
    1.0 - overlap_fidelity(&ua, &ub)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn every_rule_preserves_the_propagator(seq in context()) {
        for rule in Rule::ALL {
            let out = simplify_with(&seq, &[rule]);
            let err = same_propagator(&seq, &out);
            prop_assert!(err < 1e-12, "{:?} changed the propagator by {:e}", rule, err);
        }
    }

    #[test]
    fn simplify_is_sound_idempotent_and_keeps_timing(seq in context()) {
        let once = simplify(&seq);
        prop_assert!(same_propagator(&seq, &once) < 1e-12);
        prop_assert_eq!(&simplify(&once), &once);
        prop_assert!(once.pulse_count() <= seq.pulse_count());
        prop_assert!((duration(&once) - duration(&seq)).abs() < 1e-15);
    }
}

#[test]
fn pi_pair_cancels() {
    let seq = parse_sequence("pulse s1 180 x\npulse s1 180 x\n").unwrap();
    let out = simplify_with(&seq, &[Rule::CancelPair]);
    assert_eq!(out.pulse_count(), 0);
    let u = rotation_propagator(&[0], 180.0, 0.0, 1).unwrap();
    assert!(overlap_fidelity(&CMatrix::identity(2, 2), &(&u * &u)) > 1.0 - 1e-15);
}

#[test]
fn minus_x_ninety_after_x_pi_is_x_ninety() {
    let seq = parse_sequence("pulse s1 180 x\npulse s1 90 -x\n").unwrap();
    let out = simplify_with(&seq, &[Rule::AbsorbIntoNinety]);
    assert_eq!(
        out.events,
        vec![SequenceEvent::pulse(SpinSet::one(0), 90.0, 0.0)]
    );
    let pi_x = rotation_propagator(&[0], 180.0, 0.0, 1).unwrap();
    let ninety_mx = rotation_propagator(&[0], 90.0, 180.0, 1).unwrap();
    let ninety_x = rotation_propagator(&[0], 90.0, 0.0, 1).unwrap();
    let d = &ninety_mx * &pi_x - &ninety_x;
    assert!(d.iter().all(|z| z.norm() < 1e-15));
}

#[test]
fn rules_fire_on_their_patterns() {
    let cases = [
        (Rule::CancelPair, "pulse s2 180 y\npulse s2 180 y\n"),
        (Rule::AbsorbIntoNinety, "pulse s3 90 y\npulse s3 180 -y\n"),
        (Rule::ZFromPulses, "pulse s1 90 x\npulse s1 45 y\npulse s1 90 -x\n"),
        (Rule::PushZ, "zrot s1 90\nzrot s1 -30\n"),
        (Rule::Mlev, "pulse s4 90 y\npulse s4 180 x\npulse s4 180 x\n"),
    ];
    for (rule, text) in cases {
        let seq = parse_sequence(text).unwrap();
        let out = simplify_with(&seq, &[rule]);
        assert_ne!(out, seq, "{rule:?} did not fire");
        assert!(same_propagator(&seq, &out) < 1e-12);
    }
}
