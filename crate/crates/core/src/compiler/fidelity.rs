use num_complex::Complex64;

use crate::algebra::{overlap_fidelity, z_rotation_phases, CMatrix};
use crate::algebra::propagator::{coupling_phases, rotate_rows};
use crate::error::{Error, Result};
use crate::sequence::{Sequence, SequenceEvent};
use crate::sim::active_couplings;
use crate::system::SpinSystem;

/// Propagator of a gradient- and acquisition-free sequence, with the
/// deferred frame rotations applied at the end.
pub fn sequence_propagator(seq: &Sequence, system: &SpinSystem) -> Result<CMatrix> {
    let n = system.n();
    seq.validate(n)?;
    let dim = 1usize << n;
    let mut u = CMatrix::identity(dim, dim);
    let mut frame = vec![0.0; n];
    for e in &seq.events {
        match e {
            SequenceEvent::Pulse { spins, flip, phase } => {
                let phased: Vec<(usize, f64)> = spins.resolve(n).into_iter().map(|k| (k, phase + frame[k])).collect();
                rotate_rows(&mut u, &phased, *flip, n)?;
            }
            SequenceEvent::Delay { duration, active } => {
                let pairs = active_couplings(system, active);
                if !pairs.is_empty() {
                    scale_rows(&mut u, &coupling_phases(&pairs, *duration, n));
                }
            }
            SequenceEvent::ZRot { spin, angle } => frame[*spin] -= angle,
            SequenceEvent::Comment(_) => {}
            SequenceEvent::Gradient => return Err(Error::NonUnitary("sequence contains a gradient".into())),
            SequenceEvent::Acquire { .. } => return Err(Error::NonUnitary("sequence contains an acquisition".into())),
        }
    }
    // a frame phase p stands for exp(+i p I_z)
    let undo: Vec<f64> = frame.iter().map(|p| -p).collect();
    scale_rows(&mut u, &z_rotation_phases(&undo, n));
    Ok(u)
}

/// `D * U` for diagonal `D`.
fn scale_rows(u: &mut CMatrix, d: &[Complex64]) {
    for (r, dr) in d.iter().enumerate() {
        for c in 0..u.ncols() {
            u[(r, c)] *= dr;
        }
    }
}

/// `|tr(U_target^dagger U_seq)| / 2^n` after frame alignment.
pub fn gate_fidelity(seq: &Sequence, target: &CMatrix, system: &SpinSystem) -> Result<f64> {
    let u = sequence_propagator(seq, system)?;
    if target.nrows() != u.nrows() || target.ncols() != u.ncols() {
        return Err(Error::Dimension {
            expected: u.nrows(),
            actual: target.nrows(),
        });
    }
    Ok(overlap_fidelity(target, &u).min(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::phased_rotation_propagator;
    use crate::algebra::z_rotation;
    use crate::sequence::parse_sequence;

    #[test]
    fn identity_sequence() {
        let s = SpinSystem::glycine_fluoride();
        let f = gate_fidelity(&Sequence::default(), &CMatrix::identity(32, 32), &s).unwrap();
        assert!((f - 1.0).abs() < 1e-15);
    }

    #[test]
    fn zrot_is_a_z_rotation() {
        let s = SpinSystem::two_spin(100.0);
        let seq = parse_sequence("zrot s1 37\npulse s1 90 x\nzrot s2 -12").unwrap();
        let u = sequence_propagator(&seq, &s).unwrap();
        let want = z_rotation(1, -12.0, 2).unwrap()
            * phased_rotation_propagator(&[(0, 0.0)], 90.0, 2).unwrap()
            * z_rotation(0, 37.0, 2).unwrap();
        assert!((u - want).iter().all(|z| z.norm() < 1e-13));
    }

    #[test]
    fn non_unitary_events_rejected() {
        let s = SpinSystem::two_spin(100.0);
        let id = CMatrix::identity(4, 4);
        for t in ["grad", "acquire s1"] {
            let seq = parse_sequence(t).unwrap();
            assert!(matches!(gate_fidelity(&seq, &id, &s), Err(Error::NonUnitary(_))));
        }
    }
}
