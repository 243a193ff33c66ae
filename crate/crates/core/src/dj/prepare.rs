//! INEPT preparation of longitudinal product terms from thermal equilibrium.

use crate::algebra::{OperatorTerm, SpinState};
use crate::error::{Error, Result};
use crate::sequence::{normalize_phase, Active, Sequence, SequenceEvent, SpinSet};
use crate::sim::{self, SimOptions};
use crate::system::SpinSystem;

/// One INEPT block on spin `s` against partner `t`: adds `t` to the term if
/// absent, removes it if present.
fn inept(system: &SpinSystem, s: usize, t: usize) -> Vec<SequenceEvent> {
    let j = system.coupling(s, t);
    vec![
        SequenceEvent::pulse(SpinSet::one(s), 90.0, 0.0),
        SequenceEvent::delay(1.0 / (2.0 * j.abs()), Active::Pairs(vec![(s.min(t), s.max(t))])),
        SequenceEvent::pulse(SpinSet::one(s), 90.0, 270.0),
    ]
}

/// Chain positions of the target's spins, checked to be contiguous.
fn segment(system: &SpinSystem, target: &OperatorTerm) -> Result<(usize, usize)> {
    let n = system.n();
    target.check_spins(n)?;
    if target.order() == 0 || !target.is_longitudinal() {
        return Err(Error::Preparation(format!("{target} is not a product of z operators")));
    }
    let mut pos = Vec::new();
    for &k in target.factors().keys() {
        match system.chain_position(k) {
            Some(p) => pos.push(p),
            None => return Err(Error::Preparation(format!("spin {} is not on the coupling chain", k + 1))),
        }
    }
    pos.sort_unstable();
    if pos.windows(2).any(|w| w[1] != w[0] + 1) {
        return Err(Error::Preparation(format!("spins of {target} are not a contiguous chain segment")));
    }
    for w in system.chain.windows(2) {
        if system.coupling(w[0], w[1]) == 0.0 {
            return Err(Error::Preparation(format!("chain link {}-{} is not coupled", w[0] + 1, w[1] + 1)));
        }
    }
    Ok((pos[0], pos[pos.len() - 1]))
}

/// The `I_1z` idiom: selective 90s on every other spin, then a crusher.
fn first_spin_idiom(n: usize, first: usize) -> Vec<SequenceEvent> {
    let mut ev: Vec<SequenceEvent> = (0..n)
        .filter(|&k| k != first)
        .map(|k| SequenceEvent::pulse(SpinSet::one(k), 90.0, 0.0))
        .collect();
    ev.push(SequenceEvent::Gradient);
    ev
}

/// Sequence taking the thermal deviation state to `target` (up to its
/// magnitude): the spin-1 idiom followed by INEPT transfers along the chain.
pub fn prepare_term_sequence(system: &SpinSystem, target: &OperatorTerm) -> Result<Sequence> {
    prepare_term_sequence_cycled(system, target, 0.0)
}

/// As [`prepare_term_sequence`] with the first spin-1 pulse shifted by
/// `phi_a` degrees. When no INEPT transfer is needed, `phi_a = 180` is
/// realized as an inversion of spin 1.
pub fn prepare_term_sequence_cycled(system: &SpinSystem, target: &OperatorTerm, phi_a: f64) -> Result<Sequence> {
    let n = system.n();
    let (a, b) = segment(system, target)?;
    let chain = &system.chain;
    let p0 = system
        .chain_position(0)
        .ok_or_else(|| Error::Preparation("spin 1 is not on the coupling chain".into()))?;

    let mut seq = Sequence::new(first_spin_idiom(n, chain[p0])).named(format!("prepare {target}"));
    let mut blocks: Vec<SequenceEvent> = Vec::new();
    // walk the single-spin term to the nearest end of the segment
    let mut p = p0;
    while p < a || p > b {
        let q = if p < a { p + 1 } else { p - 1 };
        blocks.extend(inept(system, chain[p], chain[q]));
        blocks.extend(inept(system, chain[q], chain[p]));
        p = q;
    }
    for q in p + 1..=b {
        blocks.extend(inept(system, chain[q - 1], chain[q]));
    }
    for q in (a..p).rev() {
        blocks.extend(inept(system, chain[q + 1], chain[q]));
    }
    let transfers = !blocks.is_empty();
    let first_transfer = seq.len();
    seq.events.extend(blocks);

    // fix the overall sign with the phase of the last pulse
    let thermal = sim::thermal_state(system)?;
    let got = sim::run(&seq, &thermal, system, SimOptions::default())?.coefficient(target)?;
    if got * target.coeff < 0.0 {
        if transfers {
            if let Some(SequenceEvent::Pulse { phase, .. }) = seq.events.iter_mut().rev().find(|e| e.is_pulse()) {
                *phase = normalize_phase(*phase + 180.0);
            }
        } else {
            seq.push(SequenceEvent::pulse(SpinSet::one(chain[p0]), 180.0, 0.0));
        }
    }

    let phi_a = phi_a.rem_euclid(360.0);
    if phi_a != 0.0 {
        if transfers {
            if let SequenceEvent::Pulse { phase, .. } = &mut seq.events[first_transfer] {
                *phase = normalize_phase(*phase + phi_a);
            }
        } else if (phi_a - 180.0).abs() < 1e-9 {
            seq.push(SequenceEvent::pulse(SpinSet::one(chain[p0]), 180.0, 0.0));
        } else {
            return Err(Error::Preparation(format!(
                "phase {phi_a} cannot be applied to a preparation without transfer steps"
            )));
        }
    }
    Ok(seq.with_target(target.to_string()))
}

/// State reached by running the preparation on the thermal state.
pub fn prepared_state(system: &SpinSystem, target: &OperatorTerm, phi_a: f64, opts: SimOptions) -> Result<SpinState> {
    let seq = prepare_term_sequence_cycled(system, target, phi_a)?;
    sim::run(&seq, &sim::thermal_state(system)?, system, opts)
}
