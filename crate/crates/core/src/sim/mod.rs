//! Sequence execution on density matrices and stick-spectrum readout.

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::algebra::propagator::{conjugate_by_diagonal, conjugate_by_rotation, coupling_phases, z_rotation_phases};
use crate::algebra::term::spin_bit;
use crate::algebra::{OperatorTerm, SpinState};
use crate::error::{Error, Result};
use crate::sequence::{Active, Sequence, SequenceEvent};
use crate::system::SpinSystem;
use crate::tolerance;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimOptions {
    pub relaxation: bool,
    /// Realize `ZRot` as a frame-phase update instead of a matrix conjugation.
    pub frame_tracking: bool,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            relaxation: false,
            frame_tracking: true,
        }
    }
}

impl SimOptions {
    pub fn with_relaxation(mut self, on: bool) -> Self {
        self.relaxation = on;
        self
    }
}

/// One resolved line of a stick spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stick {
    /// Offset from the spin's rotating-frame frequency (Hz).
    pub offset: f64,
    /// Real part is the x (absorptive) signal, imaginary part the y signal.
    pub amplitude: Complex64,
}

/// Runs `seq` on `state`. A trailing `Acquire` is accepted and ignored; use
/// [`run_and_acquire`] for the readout it describes.
pub fn run(seq: &Sequence, state: &SpinState, system: &SpinSystem, opts: SimOptions) -> Result<SpinState> {
    let n = system.n();
    if state.n() != n {
        return Err(Error::Dimension {
            expected: n,
            actual: state.n(),
        });
    }
    let last = seq.events.len().saturating_sub(1);
    if let Some(i) = seq
        .events
        .iter()
        .position(|e| matches!(e, SequenceEvent::Acquire { .. }))
    {
        if i != last {
            return Err(Error::Validation(format!("acquire at event {i} is not the last event")));
        }
    }
    seq.validate(n)?;

    let mut st = state.clone();
    for e in &seq.events {
        match e {
            SequenceEvent::Pulse { spins, flip, phase } => {
                let phased: Vec<(usize, f64)> = spins
                    .resolve(n)
                    .into_iter()
                    .map(|k| (k, phase + st.frame_phase(k)))
                    .collect();
                conjugate_by_rotation(&mut st, &phased, *flip)?;
            }
            SequenceEvent::Delay { duration, active } => {
                let pairs = active_couplings(system, active);
                if !pairs.is_empty() && *duration > 0.0 {
                    let d = coupling_phases(&pairs, *duration, n);
                    conjugate_by_diagonal(&mut st, &d);
                }
                if opts.relaxation {
                    relax(&mut st, *duration, &system.t2);
                }
            }
            SequenceEvent::ZRot { spin, angle } => {
                if opts.frame_tracking {
                    st.shift_frame(*spin, -angle);
                } else {
                    let mut angles = vec![0.0; n];
                    angles[*spin] = *angle;
                    let d = z_rotation_phases(&angles, n);
                    conjugate_by_diagonal(&mut st, &d);
                }
            }
            SequenceEvent::Gradient => apply_gradient_in_place(&mut st),
            SequenceEvent::Acquire { .. } | SequenceEvent::Comment(_) => {}
        }
    }
    Ok(st)
}

/// `(k, l, J)` for every nonzero coupling switched on by `active`.
pub(crate) fn active_couplings(system: &SpinSystem, active: &Active) -> Vec<(usize, usize, f64)> {
    match active {
        Active::All => system.coupled_pairs().into_iter().map(|c| (c.k, c.l, c.j)).collect(),
        Active::Pairs(p) => p
            .iter()
            .map(|&(k, l)| (k, l, system.coupling(k, l)))
            .filter(|&(_, _, j)| j != 0.0)
            .collect(),
    }
}

/// Transverse relaxation for `t` seconds: every product-operator term is
/// scaled by `exp(-t/T2_k)` for each spin `k` carrying a transverse factor.
///
/// In the computational basis a term with transverse factors on the set `S`
/// only has elements `(a, b)` with `a xor b` = bits of `S`, so the damping is
/// elementwise.
pub fn relax(state: &mut SpinState, t: f64, t2: &[f64]) {
    if t <= 0.0 {
        return;
    }
    let n = state.n();
    let factors: Vec<f64> = t2.iter().map(|&t2| (-t / t2).exp()).collect();
    let dim = state.dim();
    let mut by_mask = vec![1.0; dim];
    for (mask, f) in by_mask.iter_mut().enumerate() {
        for (k, fk) in factors.iter().enumerate().take(n) {
            if mask & spin_bit(k, n) != 0 {
                *f *= fk;
            }
        }
    }
    let m = state.matrix_mut();
    for r in 0..dim {
        for c in 0..dim {
            m[(r, c)] *= by_mask[r ^ c];
        }
    }
}

/// Idealized crusher gradient: keeps only terms built from z factors
/// (including the identity), i.e. the diagonal of the density matrix.
pub fn apply_gradient(state: &SpinState) -> SpinState {
    let mut out = state.clone();
    apply_gradient_in_place(&mut out);
    out
}

fn apply_gradient_in_place(state: &mut SpinState) {
    let dim = state.dim();
    let m = state.matrix_mut();
    for r in 0..dim {
        for c in 0..dim {
            if r != c {
                m[(r, c)] = Complex64::new(0.0, 0.0);
            }
        }
    }
}

/// Stick spectrum of spin `k` with ideal decoupling of `decoupled`.
///
/// Offsets are `sum_l J_kl m_l` over coupled, non-decoupled spins; the
/// receiver phase is the spin's frame phase. Scaled so that `I_kx` gives a
/// total real amplitude of one. Sticks closer than the merge tolerance are
/// combined and zero sticks dropped; output is sorted by offset.
pub fn stick_spectrum(state: &SpinState, k: usize, decoupled: &[usize], system: &SpinSystem) -> Result<Vec<Stick>> {
    let n = state.n();
    if k >= n {
        return Err(Error::Index { index: k, n });
    }
    if system.n() != n {
        return Err(Error::Dimension {
            expected: n,
            actual: system.n(),
        });
    }
    if let Some(&bad) = decoupled.iter().find(|&&l| l >= n) {
        return Err(Error::Index { index: bad, n });
    }
    let bk = spin_bit(k, n);
    let scale = 2.0 / (1usize << (n - 1)) as f64;
    let receiver = Complex64::from_polar(1.0, -state.frame_phase(k).to_radians());
    let listened: Vec<(usize, f64)> = (0..n)
        .filter(|&l| l != k && !decoupled.contains(&l))
        .map(|l| (spin_bit(l, n), system.coupling(k, l)))
        .filter(|&(_, j)| j != 0.0)
        .collect();

    // keyed by offset in units of the merge tolerance
    let mut merged: BTreeMap<i64, (f64, Complex64)> = BTreeMap::new();
    let m = state.matrix();
    for a in (0..state.dim()).filter(|a| a & bk == 0) {
        let b = a | bk;
        let amp = m[(b, a)] * scale * receiver;
        let offset: f64 = listened
            .iter()
            .map(|&(bit, j)| if a & bit == 0 { 0.5 * j } else { -0.5 * j })
            .sum();
        let key = (offset / tolerance::STICK_MERGE_HZ).round() as i64;
        let slot = merged.entry(key).or_insert((offset, Complex64::new(0.0, 0.0)));
        slot.1 += amp;
    }
    Ok(merged
        .into_values()
        .filter(|(_, amp)| amp.norm() > tolerance::ALGEBRA)
        .map(|(offset, amplitude)| Stick { offset, amplitude })
        .collect())
}

/// Total absorptive signal of spin `k` with every other spin decoupled:
/// the `I_kx` coefficient seen through the receiver phase.
pub fn signal_amplitude(state: &SpinState, k: usize, system: &SpinSystem) -> Result<f64> {
    let others: Vec<usize> = (0..state.n()).filter(|&l| l != k).collect();
    Ok(stick_spectrum(state, k, &others, system)?
        .iter()
        .map(|s| s.amplitude.re)
        .sum())
}

/// Runs the sequence and reads out the spectrum named by its trailing
/// `Acquire`, if any.
pub fn run_and_acquire(
    seq: &Sequence,
    state: &SpinState,
    system: &SpinSystem,
    opts: SimOptions,
) -> Result<(SpinState, Option<Vec<Stick>>)> {
    let out = run(seq, state, system, opts)?;
    let sticks = match seq.events.last() {
        Some(SequenceEvent::Acquire { spin, decoupled }) => Some(stick_spectrum(&out, *spin, decoupled, system)?),
        _ => None,
    };
    Ok((out, sticks))
}

/// Thermal-equilibrium deviation `sum_k (nu_k / nu_1) I_kz`.
pub fn thermal_state(system: &SpinSystem) -> Result<SpinState> {
    let nu0 = system.nu[0];
    let terms: Vec<OperatorTerm> = (0..system.n())
        .map(|k| OperatorTerm::single(system.nu[k] / nu0, k, crate::Axis::Z))
        .collect();
    SpinState::from_terms(system.n(), &terms)
}
