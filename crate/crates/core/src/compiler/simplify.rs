use serde::{Deserialize, Serialize};

use crate::sequence::{normalize_phase, Sequence, SequenceEvent, SpinSet};

/// Peephole rewrite rules. Each preserves the propagator up to a global phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Rule {
    /// Two 180s on the same spins along the same axis cancel.
    CancelPair,
    /// A 180 next to a 90 along the same axis becomes one 90.
    AbsorbIntoNinety,
    /// `90_p, t_(p +- 90), 90_(p+180)` is a z-rotation by `-+t`.
    ZFromPulses,
    /// z-rotations move right through delays, gradients and pulses
    /// (re-phasing those on the same spin) and merge.
    PushZ,
    /// Runs of same-axis 180s on one spin take the `x, -x, -x, x` phase pattern.
    Mlev,
}

impl Rule {
    pub const ALL: [Rule; 5] = [Rule::CancelPair, Rule::AbsorbIntoNinety, Rule::ZFromPulses, Rule::PushZ, Rule::Mlev];
}

/// Applies every rule until nothing changes.
pub fn simplify(seq: &Sequence) -> Sequence {
    simplify_with(seq, &Rule::ALL)
}

/// Applies the given rules until nothing changes. Multi-spin pulses are
/// split into single-spin pulses first and regrouped afterwards.
pub fn simplify_with(seq: &Sequence, rules: &[Rule]) -> Sequence {
    let mut ev = split(&seq.events);
    let local: Vec<Rule> = rules.iter().copied().filter(|r| *r != Rule::Mlev).collect();
    loop {
        loop {
            let mut changed = false;
            for rule in &local {
                while apply_once(&mut ev, *rule) {
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        if !(rules.contains(&Rule::Mlev) && mlev(&mut ev)) {
            break;
        }
    }
    Sequence {
        name: seq.name.clone(),
        target: seq.target.clone(),
        events: regroup(ev),
    }
}

const EPS: f64 = 1e-9;

fn same_angle(a: f64, b: f64, modulus: f64) -> bool {
    let d = (a - b).rem_euclid(modulus);
    d < EPS || modulus - d < EPS
}

/// `(flip, phase)` with a negative flip folded into the phase.
fn effective(flip: f64, phase: f64) -> (f64, f64) {
    if flip < 0.0 {
        (-flip, normalize_phase(phase + 180.0))
    } else {
        (flip, phase)
    }
}

fn split(events: &[SequenceEvent]) -> Vec<SequenceEvent> {
    let mut out = Vec::with_capacity(events.len());
    for e in events {
        match e {
            SequenceEvent::Pulse { flip, .. } if same_angle(*flip, 0.0, 360.0) => {}
            SequenceEvent::Pulse {
                spins: SpinSet::List(v),
                flip,
                phase,
            } => {
                for &k in v {
                    out.push(SequenceEvent::Pulse {
                        spins: SpinSet::one(k),
                        flip: *flip,
                        phase: *phase,
                    });
                }
            }
            other => out.push(other.clone()),
        }
    }
    out
}

/// Merges runs of consecutive pulses with equal flip and phase on distinct spins.
fn regroup(events: Vec<SequenceEvent>) -> Vec<SequenceEvent> {
    let mut out: Vec<SequenceEvent> = Vec::with_capacity(events.len());
    for e in events {
        if let (
            Some(SequenceEvent::Pulse {
                spins: SpinSet::List(prev),
                flip: pf,
                phase: pp,
            }),
            SequenceEvent::Pulse {
                spins: SpinSet::List(cur),
                flip,
                phase,
            },
        ) = (out.last_mut(), &e)
        {
            if *pf == *flip && *pp == *phase && !cur.iter().any(|k| prev.contains(k)) {
                prev.extend(cur);
                prev.sort_unstable();
                continue;
            }
        }
        out.push(e);
    }
    out
}

/// Whether `e` commutes with any pulse on `spins`.
fn commutes_with_pulse(spins: &SpinSet, e: &SequenceEvent) -> bool {
    match e {
        SequenceEvent::Comment(_) => true,
        SequenceEvent::Pulse { spins: other, .. } => !spins.overlaps(other),
        SequenceEvent::ZRot { spin, .. } => !spins.contains(*spin),
        _ => false,
    }
}

/// Next event after `i` that does not commute with the pulse at `i`.
fn partner(ev: &[SequenceEvent], i: usize) -> Option<usize> {
    let SequenceEvent::Pulse { spins, .. } = &ev[i] else {
        return None;
    };
    (i + 1..ev.len()).find(|&j| !commutes_with_pulse(spins, &ev[j]))
}

fn pulse(e: &SequenceEvent) -> Option<(&SpinSet, f64, f64)> {
    match e {
        SequenceEvent::Pulse { spins, flip, phase } => {
            let (f, p) = effective(*flip, *phase);
            Some((spins, f, p))
        }
        _ => None,
    }
}

fn apply_once(ev: &mut Vec<SequenceEvent>, rule: Rule) -> bool {
    for i in 0..ev.len() {
        let fired = match rule {
            Rule::CancelPair => cancel_pair(ev, i),
            Rule::AbsorbIntoNinety => absorb(ev, i),
            Rule::ZFromPulses => z_from_pulses(ev, i),
            Rule::PushZ => push_z(ev, i),
            Rule::Mlev => false,
        };
        if fired {
            return true;
        }
    }
    false
}

fn cancel_pair(ev: &mut Vec<SequenceEvent>, i: usize) -> bool {
    let Some((s1, f1, p1)) = pulse(&ev[i]) else {
        return false;
    };
    if !same_angle(f1, 180.0, 360.0) {
        return false;
    }
    let Some(j) = partner(ev, i) else {
        return false;
    };
    let Some((s2, f2, p2)) = pulse(&ev[j]) else {
        return false;
    };
    if s1 == s2 && same_angle(f2, 180.0, 360.0) && same_angle(p1, p2, 180.0) {
        ev.remove(j);
        ev.remove(i);
        return true;
    }
    false
}

fn absorb(ev: &mut Vec<SequenceEvent>, i: usize) -> bool {
    let Some((s1, f1, p1)) = pulse(&ev[i]) else {
        return false;
    };
    let Some(j) = partner(ev, i) else {
        return false;
    };
    let Some((s2, f2, p2)) = pulse(&ev[j]) else {
        return false;
    };
    if s1 != s2 || !same_angle(p1, p2, 180.0) {
        return false;
    }
    // rotations about one axis add: 90 + 180 = 270 = -90
    let ninety = if same_angle(f1, 180.0, 360.0) && same_angle(f2, 90.0, 360.0) {
        p2
    } else if same_angle(f1, 90.0, 360.0) && same_angle(f2, 180.0, 360.0) {
        p1
    } else {
        return false;
    };
    let spins = s1.clone();
    ev[i] = SequenceEvent::pulse(spins, 90.0, ninety + 180.0);
    ev.remove(j);
    true
}

fn z_from_pulses(ev: &mut Vec<SequenceEvent>, i: usize) -> bool {
    let Some((s1, f1, p1)) = pulse(&ev[i]) else {
        return false;
    };
    let SpinSet::List(spins) = s1 else {
        return false;
    };
    if !same_angle(f1, 90.0, 360.0) {
        return false;
    }
    let Some(j) = partner(ev, i) else {
        return false;
    };
    let Some((s2, theta, p2)) = pulse(&ev[j]) else {
        return false;
    };
    let Some(k) = partner(ev, j) else {
        return false;
    };
    let Some((s3, f3, p3)) = pulse(&ev[k]) else {
        return false;
    };
    if s1 != s2 || s1 != s3 || !same_angle(f3, 90.0, 360.0) || !same_angle(p3, p1 + 180.0, 360.0) {
        return false;
    }
    let angle = if same_angle(p2, p1 + 90.0, 360.0) {
        -theta
    } else if same_angle(p2, p1 - 90.0, 360.0) {
        theta
    } else {
        return false;
    };
    let zs: Vec<SequenceEvent> = spins
        .iter()
        .map(|&spin| SequenceEvent::ZRot { spin, angle })
        .collect();
    ev.remove(k);
    ev.remove(j);
    ev.splice(i..=i, zs);
    true
}

/// Angle reduced to `(-180, 180]`.
fn wrap(angle: f64) -> f64 {
    let a = angle.rem_euclid(360.0);
    if a > 180.0 {
        a - 360.0
    } else {
        a
    }
}

fn push_z(ev: &mut Vec<SequenceEvent>, i: usize) -> bool {
    let SequenceEvent::ZRot { spin, angle } = ev[i] else {
        return false;
    };
    if same_angle(angle, 0.0, 360.0) {
        ev.remove(i);
        return true;
    }
    let mut moved_past = false;
    let mut j = i + 1;
    while j < ev.len() {
        match &ev[j] {
            SequenceEvent::ZRot { spin: s, angle: a } if *s == spin => {
                let merged = wrap(angle + a);
                ev[j] = SequenceEvent::ZRot { spin, angle: merged };
                rephase(&mut ev[i + 1..j], spin, angle);
                ev.remove(i);
                return true;
            }
            SequenceEvent::ZRot { .. } => {}
            SequenceEvent::Comment(_) | SequenceEvent::Delay { .. } | SequenceEvent::Gradient => moved_past = true,
            SequenceEvent::Pulse { spins, .. } if !spins.contains(spin) => moved_past = true,
            SequenceEvent::Pulse {
                spins: SpinSet::List(v),
                ..
            } if v.len() == 1 => moved_past = true,
            _ => break,
        }
        j += 1;
    }
    if !moved_past {
        return false;
    }
    rephase(&mut ev[i + 1..j], spin, angle);
    let z = ev.remove(i);
    // land after the other z-rotations directly in front of the blocker
    let mut at = j - 1;
    while at > i && matches!(ev[at - 1], SequenceEvent::ZRot { .. }) {
        at -= 1;
    }
    let mut end = at;
    while end < j - 1 && matches!(&ev[end], SequenceEvent::ZRot { spin: s, .. } if *s < spin) {
        end += 1;
    }
    ev.insert(end, z);
    true
}

/// Pulses on `spin` seen after moving `ZRot(spin, angle)` past them.
fn rephase(events: &mut [SequenceEvent], spin: usize, angle: f64) {
    for e in events {
        if let SequenceEvent::Pulse {
            spins: SpinSet::List(v),
            phase,
            ..
        } = e
        {
            if v.as_slice() == [spin] {
                *phase = normalize_phase(*phase - angle);
            }
        }
    }
}

/// Index runs of same-axis 180s on single spin `m`, with their axis.
fn runs_on(ev: &[SequenceEvent], m: usize) -> Vec<(Vec<usize>, f64)> {
    let mut runs = Vec::new();
    let mut run: Vec<usize> = Vec::new();
    let mut axis: Option<f64> = None;
    for (idx, e) in ev.iter().enumerate() {
        let breaks = match e {
            SequenceEvent::Pulse { spins, flip, phase } if spins.contains(m) => {
                let (f, p) = effective(*flip, *phase);
                if matches!(spins, SpinSet::List(v) if v.len() == 1) && same_angle(f, 180.0, 360.0) {
                    let a = p.rem_euclid(180.0);
                    if let Some(b) = axis {
                        if !same_angle(a, b, 180.0) {
                            runs.push((std::mem::take(&mut run), b));
                        }
                    }
                    axis = Some(a);
                    run.push(idx);
                    false
                } else {
                    true
                }
            }
            SequenceEvent::ZRot { spin, .. } => *spin == m,
            SequenceEvent::Acquire { .. } => true,
            _ => false,
        };
        if breaks {
            if let Some(b) = axis.take() {
                runs.push((std::mem::take(&mut run), b));
            }
        }
    }
    if let Some(b) = axis {
        runs.push((run, b));
    }
    runs
}

/// Axis of a 90 on exactly `{m}` that is the nearest non-commuting
/// neighbour of the pulse at `idx` in direction `forward`.
fn neighbouring_ninety(ev: &[SequenceEvent], idx: usize, m: usize, forward: bool) -> Option<f64> {
    let spins = SpinSet::one(m);
    let j = if forward {
        (idx + 1..ev.len()).find(|&j| !commutes_with_pulse(&spins, &ev[j]))?
    } else {
        (0..idx).rev().find(|&j| !commutes_with_pulse(&spins, &ev[j]))?
    };
    match pulse(&ev[j]) {
        Some((s, f, p)) if *s == spins && same_angle(f, 90.0, 360.0) => Some(p.rem_euclid(180.0)),
        _ => None,
    }
}

/// Re-phases every run to `b, b+180, b+180, b, ...`. A run of even length
/// is diagonal on its spin, so it may also be turned onto the axis of a
/// neighbouring 90 to let [`Rule::AbsorbIntoNinety`] fire. Returns whether
/// anything changed.
fn mlev(ev: &mut [SequenceEvent]) -> bool {
    let mut spins: Vec<usize> = ev
        .iter()
        .filter_map(|e| match e {
            SequenceEvent::Pulse {
                spins: SpinSet::List(v),
                ..
            } if v.len() == 1 => Some(v[0]),
            _ => None,
        })
        .collect();
    spins.sort_unstable();
    spins.dedup();
    let mut changed = false;
    for m in spins {
        for (run, axis) in runs_on(ev, m) {
            let base = if run.len() % 2 == 0 {
                neighbouring_ninety(ev, run[run.len() - 1], m, true)
                    .or_else(|| neighbouring_ninety(ev, run[0], m, false))
                    .unwrap_or(axis)
            } else {
                axis
            };
            for (n, &idx) in run.iter().enumerate() {
                let want = normalize_phase(if matches!(n % 4, 1 | 2) { base + 180.0 } else { base });
                if let SequenceEvent::Pulse { flip, phase, .. } = &mut ev[idx] {
                    if *flip != 180.0 || *phase != want {
                        *flip = 180.0;
                        *phase = want;
                        changed = true;
                    }
                }
            }
        }
    }
    changed
}
