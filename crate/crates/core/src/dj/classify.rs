use serde::{Deserialize, Serialize};

use super::SignalTable;
use crate::error::{Error, Result};

/// Well above the few-percent spurious signals seen in practice.
pub const DEFAULT_THRESHOLD: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VerdictKind {
    Constant,
    Balanced,
    Inconclusive,
}

/// What one input spin contributed to the decision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evidence {
    pub spin: usize,
    pub set1: f64,
    pub set2: Option<f64>,
    /// Set-1 signal falls short of the reference by more than the threshold.
    pub attenuated: bool,
    /// Set-2 signal is negative beyond the threshold.
    pub reversed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub kind: VerdictKind,
    pub threshold: f64,
    /// Magnitude of the output spin's set-1 signal, the scale for the rest.
    pub reference: f64,
    pub evidence: Vec<Evidence>,
    /// Spins that decided a balanced verdict: sign reversals when there are
    /// any, otherwise attenuated spins.
    pub deciding: Vec<usize>,
}

/// Classifies a signal table. The last spin is the output; its set-1 signal
/// is the reference `r`. Constant needs every input set-1 signal above
/// `(1 - threshold) r` and no set-2 reversal below `-threshold r`.
pub fn classify(table: &SignalTable, threshold: f64) -> Result<Verdict> {
    if !(threshold > 0.0 && threshold < 0.5) {
        return Err(Error::Validation(format!("threshold must lie in (0, 0.5), got {threshold}")));
    }
    let n = table.spins;
    let set1 = table.set_amplitudes(1);
    if n < 2 || set1.iter().any(Option::is_none) {
        let missing: Vec<String> = set1
            .iter()
            .enumerate()
            .filter(|(_, a)| a.is_none())
            .map(|(k, _)| (k + 1).to_string())
            .collect();
        return Err(Error::IncompleteTable(format!("set 1 has no row for spins {}", missing.join(", "))));
    }
    let reference = set1[n - 1].unwrap_or(0.0).abs();
    let set2 = table.set_amplitudes(2);
    let evidence: Vec<Evidence> = (0..n - 1)
        .map(|k| {
            let a1 = set1[k].unwrap_or(0.0);
            Evidence {
                spin: k,
                set1: a1,
                set2: set2[k],
                attenuated: a1 < (1.0 - threshold) * reference,
                reversed: set2[k].is_some_and(|a| a < -threshold * reference),
            }
        })
        .collect();
    let mut verdict = Verdict {
        kind: VerdictKind::Inconclusive,
        threshold,
        reference,
        evidence,
        deciding: Vec::new(),
    };
    if reference < threshold {
        return Ok(verdict);
    }
    let reversed: Vec<usize> = verdict.evidence.iter().filter(|e| e.reversed).map(|e| e.spin).collect();
    let attenuated: Vec<usize> = verdict.evidence.iter().filter(|e| e.attenuated).map(|e| e.spin).collect();
    if !reversed.is_empty() {
        verdict.kind = VerdictKind::Balanced;
        verdict.deciding = reversed;
    } else if !attenuated.is_empty() {
        verdict.kind = VerdictKind::Balanced;
        verdict.deciding = attenuated;
    } else {
        verdict.kind = VerdictKind::Constant;
    }
    Ok(verdict)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dj::{run_dj, DjOptions, Mode, Program, SignalRow};
    use crate::system::SpinSystem;

    #[test]
    fn f0_constant_fb_balanced() {
        let s = SpinSystem::glycine_fluoride();
        let v0 = classify(&run_dj(&s, &Program::f0(5), DjOptions::default()).unwrap(), DEFAULT_THRESHOLD).unwrap();
        assert_eq!(v0.kind, VerdictKind::Constant);
        let vb = classify(&run_dj(&s, &Program::fb(), DjOptions::default()).unwrap(), DEFAULT_THRESHOLD).unwrap();
        assert_eq!(vb.kind, VerdictKind::Balanced);
        assert_eq!(vb.deciding, vec![3]);
    }

    #[test]
    fn zero_table_is_inconclusive() {
        let mut t = run_dj(&SpinSystem::glycine_fluoride(), &Program::f0(5), DjOptions::default()).unwrap();
        t.rows.iter_mut().for_each(|r| r.amplitude = 0.0);
        assert_eq!(classify(&t, 0.2).unwrap().kind, VerdictKind::Inconclusive);
    }

    #[test]
    fn missing_set_one_and_bad_threshold() {
        let t = SignalTable {
            program: "x".into(),
            mode: Mode::Ideal,
            spins: 2,
            rows: vec![SignalRow {
                set: 1,
                term_index: 0,
                term: "I1z".parse().unwrap(),
                spin: 0,
                amplitude: 1.0,
            }],
            evaluations: 1,
            terms: 1,
        };
        assert!(matches!(classify(&t, 0.2), Err(Error::IncompleteTable(_))));
        assert!(matches!(classify(&t, 0.7), Err(Error::Validation(_))));
    }
}
