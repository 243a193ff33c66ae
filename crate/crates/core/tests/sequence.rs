use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use spinforge::sequence::{duration, parse_sequence, parse_sequence_bytes, render_sequence};
use spinforge::{Active, Error, Sequence, SequenceEvent, SpinSet};

fn spins() -> impl Strategy<Value = SpinSet> {
    prop_oneof![
        Just(SpinSet::All),
        prop::collection::btree_set(0usize..12, 1..4).prop_map(|s| SpinSet::List(s.into_iter().collect())),
    ]
}

fn active() -> impl Strategy<Value = Active> {
    prop_oneof![
        Just(Active::All),
        prop::collection::btree_set((0usize..12, 0usize..12), 0..4).prop_map(|s| {
            let mut v: Vec<(usize, usize)> = s
                .into_iter()
                .filter(|(k, l)| k != l)
                .map(|(k, l)| (k.min(l), k.max(l)))
                .collect();
            v.sort_unstable();
            v.dedup();
            Active::Pairs(v)
        }),
    ]
}

fn phase() -> impl Strategy<Value = f64> {
    prop_oneof![
        Just(0.0),
        Just(90.0),
        Just(180.0),
        Just(270.0),
        (0.0f64..360.0),
    ]
}

fn words() -> impl Strategy<Value = String> {
    prop::collection::vec("[a-zA-Z0-9=.,:()-]{1,8}", 0..4).prop_map(|w| w.join(" "))
}

fn event() -> impl Strategy<Value = SequenceEvent> {
    prop_oneof![
        (spins(), prop_oneof![Just(90.0), Just(180.0), Just(-90.0), Just(360.0), (-359.9f64..360.0)], phase())
            .prop_map(|(spins, flip, phase)| SequenceEvent::Pulse { spins, flip, phase }),
        (prop_oneof![Just(0.0), (0.0f64..1e-3), (1e-3f64..1.0), (1.0f64..10.0)], active())
            .prop_map(|(duration, active)| SequenceEvent::Delay { duration, active }),
        Just(SequenceEvent::Gradient),
        (0usize..12, -720.0f64..720.0).prop_map(|(spin, angle)| SequenceEvent::ZRot { spin, angle }),
        words().prop_map(SequenceEvent::Comment),
    ]
}

fn program() -> impl Strategy<Value = Sequence> {
    (
        prop::collection::vec(event(), 0..20),
        prop::option::of((0usize..12, prop::collection::btree_set(0usize..12, 0..3))),
        prop::option::of("[a-zA-Z][a-zA-Z0-9 _-]{0,12}[a-zA-Z0-9]"),
        prop::option::of("[a-zA-Z][a-zA-Z0-9]{0,8}"),
    )
        .prop_map(|(mut events, acq, name, target)| {
            if let Some((spin, dec)) = acq {
                let decoupled = dec.into_iter().filter(|&k| k != spin).collect();
                events.push(SequenceEvent::Acquire { spin, decoupled });
            }
            Sequence {
                name: name.map(|s| s.split_whitespace().collect::<Vec<_>>().join(" ")),
                target,
                events,
            }
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn render_then_parse_is_identity(seq in program()) {
        let text = render_sequence(&seq);
        let back = parse_sequence(&text).unwrap();
        prop_assert_eq!(&back, &seq, "{}", text);
        prop_assert_eq!(render_sequence(&back), text);
    }

    #[test]
    fn arbitrary_bytes_never_panic(bytes in prop::collection::vec(any::<u8>(), 0..200)) {
        if let Err(e) = parse_sequence_bytes(&bytes) {
            let located = matches!(e, Error::Parse { line, column, .. } if line >= 1 && column >= 1);
            prop_assert!(located);
        }
    }
}

/// Splices keywords, numbers and separators into lines, plus raw mutations
/// of valid programs.
#[test]
fn fuzzed_programs_never_panic() {
    const PIECES: &[&str] = &[
        "pulse", "delay", "zrot", "grad", "acquire", "@name", "@target", "#", "s1", "s0", "s99", "all", "x", "-y",
        "+x", "90", "-360", "360.0001", "1e308", "NaN", "inf", "-0", "1ms", "3us", "2µs", "5ns", "1.5s", "-1ms",
        "1kms", "ms", "active=J12", "active=J1-12", "active=none", "active=", "active=J11", "active=Jx",
        "decouple=s2,s3", "decouple=", "s1,s2", "s1,,s2", ",", "=", "é", "\t", " ", "\u{feff}",
    ];
    let base = "pulse s1 90 x\ndelay 1.38975ms active=J45\nzrot s2 -90\ngrad\n# note\nacquire s5 decouple=s3,s4\n";
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut parsed = 0usize;
    for _ in 0..100_000 {
        let text = if rng.random_bool(0.5) {
            let lines = rng.random_range(1..5);
            let mut s = String::new();
            for _ in 0..lines {
                for _ in 0..rng.random_range(0..6) {
                    s.push_str(PIECES[rng.random_range(0..PIECES.len())]);
                    if rng.random_bool(0.8) {
                        s.push(' ');
                    }
                }
                s.push('\n');
            }
            s.into_bytes()
        } else {
            let mut b = base.as_bytes().to_vec();
            for _ in 0..rng.random_range(1..4) {
                let i = rng.random_range(0..b.len());
                match rng.random_range(0..3) {
                    0 => b[i] = rng.random(),
                    1 => {
                        b.remove(i);
                    }
                    _ => b.insert(i, rng.random()),
                }
            }
            b
        };
        match parse_sequence_bytes(&text) {
            Ok(_) => parsed += 1,
            Err(Error::Parse { line, column, .. }) => assert!(line >= 1 && column >= 1),
            Err(e) => panic!("non-parse error {e:?}"),
        }
    }
    assert!(parsed > 0);
}

#[test]
fn durations() {
    assert_eq!(duration(&Sequence::default()), 0.0);
    assert_eq!(duration(&parse_sequence("delay 1ms").unwrap()), 1e-3);
    let seq = parse_sequence("pulse s1 90 x\ndelay 1ms\ngrad\ndelay 250us active=J12\nzrot s1 90\n").unwrap();
    assert!((duration(&seq) - 1.25e-3).abs() < 1e-18);
}
