use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::system::SpinSystem;

/// A coupling left active by a refocusing plan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Residual {
    pub k: usize,
    pub l: usize,
    /// Coupling constant (Hz).
    pub j: f64,
    /// Accumulated angle `2 pi J tau` of `exp(-i angle I_kz I_lz)` (rad).
    pub phase: f64,
}

/// Echo schedule for one delay: the delay is split into `intervals` equal
/// parts and spin `m` spends part `i` with its z-magnetization sign
/// `rows[m][i]`. A 180 degree pulse sits wherever a row changes sign, with
/// `+` assumed before the first and after the last part.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefocusPlan {
    pub intervals: usize,
    pub rows: Vec<Vec<i8>>,
    pub residual: Vec<Residual>,
    /// Total delay the plan covers (s).
    pub tau: f64,
    pub target: Option<(usize, usize)>,
}

impl RefocusPlan {
    /// Total number of single-spin 180 degree pulses.
    pub fn pulses(&self) -> usize {
        self.rows.iter().map(|r| row_pulses(r)).sum()
    }

    pub fn residual_phase(&self) -> f64 {
        self.residual.iter().map(|r| r.phase.abs()).sum()
    }

    /// Spins receiving a 180 at boundary `b` (0 = start, `intervals` = end).
    pub fn flips_at(&self, b: usize) -> Vec<usize> {
        (0..self.rows.len())
            .filter(|&m| sign_before(&self.rows[m], b) != sign_after(&self.rows[m], b))
            .collect()
    }

    /// Pairs whose coupling survives with a nonzero average, with the
    /// fraction `sum_i r_m r_p / intervals` it survives with.
    pub fn effective_couplings(&self, system: &SpinSystem) -> Vec<(usize, usize, f64)> {
        let n = self.rows.len();
        let mut out = Vec::new();
        for m in 0..n {
            for p in m + 1..n {
                let j = system.coupling(m, p);
                if j == 0.0 {
                    continue;
                }
                let s: i32 = (0..self.intervals)
                    .map(|i| i32::from(self.rows[m][i]) * i32::from(self.rows[p][i]))
                    .sum();
                if s != 0 {
                    out.push((m, p, j * f64::from(s) / self.intervals as f64));
                }
            }
        }
        out
    }
}

fn sign_before(row: &[i8], b: usize) -> i8 {
    if b == 0 {
        1
    } else {
        row[b - 1]
    }
}

fn sign_after(row: &[i8], b: usize) -> i8 {
    row.get(b).copied().unwrap_or(1)
}

fn row_pulses(row: &[i8]) -> usize {
    (0..=row.len())
        .filter(|&b| sign_before(row, b) != sign_after(row, b))
        .count()
}

/// Rows with a leading `+`. Negating a row never saves a pulse (it adds
/// one at the start), so these are the only candidates needed.
fn candidate_rows(intervals: usize) -> Vec<Vec<i8>> {
    (0..1usize << (intervals - 1))
        .map(|bits| {
            (0..intervals)
                .map(|i| if i > 0 && (bits >> (intervals - 1 - i)) & 1 == 1 { -1 } else { 1 })
                .collect()
        })
        .collect()
}

fn differences(a: &[i8], b: &[i8]) -> usize {
    a.iter().zip(b).filter(|(x, y)| x != y).count()
}

struct Search<'a> {
    system: &'a SpinSystem,
    intervals: usize,
    tau: f64,
    target: Option<(usize, usize)>,
    fixed: Vec<bool>,
    candidates: Vec<Vec<i8>>,
    /// Largest admissible residual phase.
    tol: f64,
    /// `true`: minimize (pulses, residual); `false`: minimize residual only.
    by_pulses: bool,
    best: Option<(usize, f64, Vec<Vec<i8>>)>,
}

impl Search<'_> {
    fn improves(&self, pulses: usize, residual: f64) -> bool {
        match &self.best {
            None => true,
            Some((bp, br, _)) if self.by_pulses => pulses < *bp || (pulses == *bp && residual < *br - 1e-15),
            Some((_, br, _)) => residual < *br - 1e-15,
        }
    }

    fn run(&mut self, rows: &mut Vec<Vec<i8>>, pulses: usize, residual: f64) {
        if residual > self.tol || !self.improves(pulses, residual) {
            return;
        }
        let m = rows.len();
        if m == self.system.n() {
            self.best = Some((pulses, residual, rows.clone()));
            return;
        }
        let options = if self.fixed[m] {
            vec![vec![1; self.intervals]]
        } else {
            self.candidates.clone()
        };
        'rows: for row in options {
            let mut extra = 0.0;
            for (p, other) in rows.iter().enumerate() {
                let j = self.system.coupling(m, p);
                if j == 0.0 || self.target == Some((p, m)) {
                    continue;
                }
                match differences(&row, other) {
                    0 => extra += 2.0 * PI * j.abs() * self.tau,
                    d if 2 * d == self.intervals => {}
                    _ => continue 'rows,
                }
            }
            let rp = row_pulses(&row);
            rows.push(row);
            self.run(rows, pulses + rp, residual + extra);
            rows.pop();
        }
    }
}

fn build_plan(
    system: &SpinSystem,
    intervals: usize,
    tau: f64,
    target: Option<(usize, usize)>,
    rows: Vec<Vec<i8>>,
) -> RefocusPlan {
    let n = system.n();
    let mut residual = Vec::new();
    for k in 0..n {
        for l in k + 1..n {
            let j = system.coupling(k, l);
            if j == 0.0 || target == Some((k, l)) {
                continue;
            }
            if differences(&rows[k], &rows[l]) == 0 {
                residual.push(Residual {
                    k,
                    l,
                    j,
                    phase: 2.0 * PI * j * tau,
                });
            }
        }
    }
    RefocusPlan {
        intervals,
        rows,
        residual,
        tau,
        target,
    }
}

fn plan(
    system: &SpinSystem,
    target: Option<(usize, usize)>,
    tau: f64,
    max_intervals: usize,
    phase_tol: f64,
) -> Result<RefocusPlan> {
    if !matches!(max_intervals, 1 | 2 | 4) {
        return Err(Error::Validation(format!("max_intervals must be 1, 2 or 4, got {max_intervals}")));
    }
    let n = system.n();
    let mut fixed = vec![false; n];
    if let Some((k, l)) = target {
        fixed[k] = true;
        fixed[l] = true;
    }
    let intervals_tried: Vec<usize> = [1, 2, 4].into_iter().filter(|&i| i <= max_intervals).collect();
    let search = |intervals: usize, tol: f64, by_pulses: bool| {
        let mut s = Search {
            system,
            intervals,
            tau,
            target,
            fixed: fixed.clone(),
            candidates: candidate_rows(intervals),
            tol,
            by_pulses,
            best: None,
        };
        s.run(&mut Vec::new(), 0, 0.0);
        s.best.map(|b| b.2)
    };
    for &intervals in &intervals_tried {
        if let Some(rows) = search(intervals, phase_tol, true) {
            return Ok(build_plan(system, intervals, tau, target, rows));
        }
    }

    let what = match target {
        Some((k, l)) => format!("CNOT{}{}", k + 1, l + 1),
        None => "decoupling".to_string(),
    };
    let widest = *intervals_tried.last().unwrap_or(&1);
    Err(Error::Planning(match search(widest, f64::INFINITY, false) {
        Some(rows) => {
            let p = build_plan(system, widest, tau, target, rows);
            let names: Vec<String> = p
                .residual
                .iter()
                .map(|r| format!("J{}{} ({:.3} rad)", r.k + 1, r.l + 1, r.phase))
                .collect();
            format!(
                "{what}: with up to {max_intervals} intervals the couplings {} stay active (tolerance {phase_tol} rad)",
                names.join(", ")
            )
        }
        None => format!("{what}: no echo schedule with up to {max_intervals} intervals separates the couplings"),
    }))
}

/// Echo schedule for the `1/(2 J_kl)` delay of a CNOT on `(k, l)`: the
/// target pair keeps the all-plus row, every other nonzero coupling is
/// refocused or reported as residual. Minimizes intervals, then pulses, then
/// residual phase; fails if the residual exceeds `phase_tol`.
pub fn plan_refocusing(
    system: &SpinSystem,
    k: usize,
    l: usize,
    max_intervals: usize,
    phase_tol: f64,
) -> Result<RefocusPlan> {
    let n = system.n();
    for s in [k, l] {
        if s >= n {
            return Err(Error::Index { index: s, n });
        }
    }
    if k == l {
        return Err(Error::Validation("refocusing target needs two distinct spins".into()));
    }
    let j = system.coupling(k, l);
    if j == 0.0 {
        return Err(Error::Validation(format!("spins {} and {} are not coupled", k + 1, l + 1)));
    }
    plan(system, Some((k.min(l), k.max(l))), 1.0 / (2.0 * j.abs()), max_intervals, phase_tol)
}

/// Echo schedule refocusing every coupling over a delay of `tau` seconds.
pub fn plan_decoupling(system: &SpinSystem, tau: f64, max_intervals: usize) -> Result<RefocusPlan> {
    plan(system, None, tau, max_intervals, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sys() -> SpinSystem {
        SpinSystem::glycine_fluoride()
    }

    #[test]
    fn cnot45_two_interval_plan_leaves_j13() {
        let p = plan_refocusing(&sys(), 3, 4, 2, 0.05).unwrap();
        assert_eq!(p.intervals, 2);
        assert_eq!(p.rows[0], vec![1, -1]);
        assert_eq!(p.rows[2], vec![1, -1]);
        assert_eq!(p.rows[1], vec![1, 1]);
        assert_eq!(p.residual.len(), 1);
        assert_eq!((p.residual[0].k, p.residual[0].l, p.residual[0].j), (0, 2, 2.7));
        assert_eq!(p.pulses(), 4);
        assert_eq!(p.flips_at(1), vec![0, 2]);
    }

    #[test]
    fn cnot12_needs_four_intervals() {
        let err = plan_refocusing(&sys(), 0, 1, 2, 0.05).unwrap_err();
        assert!(matches!(err, Error::Planning(ref m) if m.contains("J34")), "{err}");
        let p = plan_refocusing(&sys(), 0, 1, 4, 0.0).unwrap();
        assert_eq!(p.intervals, 4);
        assert!(p.residual.is_empty());
    }

    #[test]
    fn two_spin_plan_is_trivial() {
        let p = plan_refocusing(&SpinSystem::two_spin(100.0), 0, 1, 4, 0.0).unwrap();
        assert_eq!(p.intervals, 1);
        assert_eq!(p.pulses(), 0);
        assert!(p.residual.is_empty());
    }

    #[test]
    fn effective_couplings_match_residual() {
        let s = sys();
        for (k, l) in [(0, 1), (1, 2), (2, 3), (3, 4)] {
            let p = plan_refocusing(&s, k, l, 4, 0.05).unwrap();
            let eff = p.effective_couplings(&s);
            let mut want = vec![(k, l, s.coupling(k, l))];
            want.extend(p.residual.iter().map(|r| (r.k, r.l, r.j)));
            want.sort_by_key(|w| (w.0, w.1));
            assert_eq!(eff, want, "CNOT{}{}", k + 1, l + 1);
        }
    }

    #[test]
    fn full_decoupling() {
        let p = plan_decoupling(&sys(), 1e-3, 4).unwrap();
        assert_eq!(p.intervals, 4);
        assert!(p.effective_couplings(&sys()).is_empty());
    }

    #[test]
    fn bad_arguments() {
        assert!(matches!(plan_refocusing(&sys(), 0, 3, 4, 0.05), Err(Error::Validation(_))));
        assert!(matches!(plan_refocusing(&sys(), 0, 9, 4, 0.05), Err(Error::Index { .. })));
        assert!(plan_refocusing(&sys(), 0, 1, 3, 0.05).is_err());
    }
}
