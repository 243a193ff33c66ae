//! Pulse-sequence intermediate representation and its line-oriented text form.
//!
//! ```text
//! @name cnot45
//! pulse s5 90 -y
//! delay 1.36612ms active=J45
//! zrot s4 -90
//! pulse s5 90 y
//! acquire s5 decouple=s3,s4
//! ```
//!
//! Spins are written 1-based (`s3`); events store them 0-based.

mod parse;
mod render;

use serde::{Deserialize, Serialize};

pub use parse::{parse_sequence, parse_sequence_bytes, parse_sequence_for};
pub use render::{format_duration, format_phase, render_sequence};

use crate::error::{Error, Result};

/// Spins addressed by a pulse.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum SpinSet {
    All,
    /// Sorted, duplicate-free, 0-based.
    List(Vec<usize>),
}

impl SpinSet {
    pub fn one(k: usize) -> Self {
        SpinSet::List(vec![k])
    }

    pub fn list(spins: impl IntoIterator<Item = usize>) -> Self {
        let mut v: Vec<usize> = spins.into_iter().collect();
        v.sort_unstable();
        v.dedup();
        SpinSet::List(v)
    }

    pub fn resolve(&self, n: usize) -> Vec<usize> {
        match self {
            SpinSet::All => (0..n).collect(),
            SpinSet::List(v) => v.clone(),
        }
    }

    pub fn contains(&self, k: usize) -> bool {
        match self {
            SpinSet::All => true,
            SpinSet::List(v) => v.contains(&k),
        }
    }

    /// Whether the two sets share a spin (`All` overlaps everything).
    pub fn overlaps(&self, other: &SpinSet) -> bool {
        match (self, other) {
            (SpinSet::All, _) | (_, SpinSet::All) => true,
            (SpinSet::List(a), SpinSet::List(b)) => a.iter().any(|k| b.contains(k)),
        }
    }
}

/// Couplings evolving during a delay.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Active {
    /// Every nonzero coupling of the system (free evolution).
    All,
    /// Only the listed pairs (0-based, `k < l`); empty means no evolution.
    Pairs(Vec<(usize, usize)>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SequenceEvent {
    /// Ideal instantaneous rotation; angles in degrees, phase in `[0, 360)`.
    Pulse { spins: SpinSet, flip: f64, phase: f64 },
    /// Free evolution for `duration` seconds.
    Delay { duration: f64, active: Active },
    /// Idealized crusher gradient.
    Gradient,
    /// Virtual z-rotation `exp(-i angle I_z)` (degrees).
    ZRot { spin: usize, angle: f64 },
    /// Detection of `spin` with ideal decoupling of `decoupled`.
    Acquire { spin: usize, decoupled: Vec<usize> },
    Comment(String),
}

impl SequenceEvent {
    pub fn pulse(spins: SpinSet, flip: f64, phase: f64) -> Self {
        SequenceEvent::Pulse {
            spins,
            flip,
            phase: normalize_phase(phase),
        }
    }

    pub fn delay(duration: f64, active: Active) -> Self {
        SequenceEvent::Delay { duration, active }
    }

    pub fn is_pulse(&self) -> bool {
        matches!(self, SequenceEvent::Pulse { .. })
    }
}

/// Phase reduced to `[0, 360)`.
pub fn normalize_phase(phase: f64) -> f64 {
    let p = phase.rem_euclid(360.0);
    if p >= 360.0 || p == 0.0 {
        0.0
    } else {
        p
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Sequence {
    pub name: Option<String>,
    /// Free-form tag naming the gate the sequence implements.
    pub target: Option<String>,
    pub events: Vec<SequenceEvent>,
}

impl Sequence {
    pub fn new(events: Vec<SequenceEvent>) -> Self {
        Self {
            name: None,
            target: None,
            events,
        }
    }

    pub fn named(mut self, name: impl Into<String>) -> Self {
        self.name = Some(name.into());
        self
    }

    pub fn with_target(mut self, target: impl Into<String>) -> Self {
        self.target = Some(target.into());
        self
    }

    pub fn push(&mut self, e: SequenceEvent) {
        self.events.push(e);
    }

    pub fn extend(&mut self, other: &Sequence) {
        self.events.extend(other.events.iter().cloned());
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn pulse_count(&self) -> usize {
        self.events.iter().filter(|e| e.is_pulse()).count()
    }

    /// Checks event invariants and that every spin is below `n`.
    pub fn validate(&self, n: usize) -> Result<()> {
        let check = |k: usize| {
            if k >= n {
                Err(Error::Index { index: k, n })
            } else {
                Ok(())
            }
        };
        for (i, e) in self.events.iter().enumerate() {
            match e {
                SequenceEvent::Pulse { spins, flip, phase } => {
                    if let SpinSet::List(v) = spins {
                        v.iter().try_for_each(|&k| check(k))?;
                    }
                    if !(*flip > -360.0 && *flip <= 360.0) || !phase.is_finite() {
                        return Err(Error::Validation(format!("event {i}: flip angle out of range")));
                    }
                }
                SequenceEvent::Delay { duration, active } => {
                    if !(*duration >= 0.0) || !duration.is_finite() {
                        return Err(Error::Validation(format!("event {i}: negative delay")));
                    }
                    if let Active::Pairs(p) = active {
                        p.iter().try_for_each(|&(k, l)| check(k).and(check(l)))?;
                    }
                }
                SequenceEvent::ZRot { spin, angle } => {
                    check(*spin)?;
                    if !angle.is_finite() {
                        return Err(Error::Validation(format!("event {i}: angle not finite")));
                    }
                }
                SequenceEvent::Acquire { spin, decoupled } => {
                    check(*spin)?;
                    decoupled.iter().try_for_each(|&k| check(k))?;
                    if i + 1 != self.events.len() {
                        return Err(Error::Validation("acquire must be the last event".into()));
                    }
                }
                SequenceEvent::Gradient | SequenceEvent::Comment(_) => {}
            }
        }
        Ok(())
    }
}

/// Total delay time (s). Pulses are instantaneous.
pub fn duration(seq: &Sequence) -> f64 {
    seq.events
        .iter()
        .map(|e| match e {
            SequenceEvent::Delay { duration, .. } => *duration,
            _ => 0.0,
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duration_sums_delays() {
        assert_eq!(duration(&Sequence::default()), 0.0);
        let s = parse_sequence("delay 1ms").unwrap();
        assert!((duration(&s) - 1e-3).abs() < 1e-18);
        let s = parse_sequence("pulse all 90 y\ndelay 2ms\npulse s1 180 x\ndelay 3ms active=J12").unwrap();
        assert!((duration(&s) - 5e-3).abs() < 1e-15);
    }

    #[test]
    fn validate_checks_indices() {
        let s = parse_sequence("pulse s6 90 x").unwrap();
        assert_eq!(s.validate(5), Err(Error::Index { index: 5, n: 5 }));
        assert!(s.validate(6).is_ok());
    }

    #[test]
    fn phase_normalization() {
        assert_eq!(normalize_phase(-90.0), 270.0);
        assert_eq!(normalize_phase(360.0), 0.0);
        assert_eq!(normalize_phase(-0.0), 0.0);
        assert_eq!(normalize_phase(-1e-20), 0.0);
    }
}
