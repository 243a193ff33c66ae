//! Deutsch-Jozsa experiments: pseudopure terms, the three experiment sets,
//! temporal averaging and the constant/balanced classifier.

mod classify;
mod prepare;
mod report;

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::algebra::propagator::permutation_vector;
use crate::algebra::term::spin_bit;
use crate::algebra::{cnot_matrix, conjugate, conjugate_permutation, oracle_permutation, BooleanFunction, OperatorTerm, SpinState};
use crate::compiler::compile_balanced_chain;
use crate::error::{Error, Result};
use crate::par::{self, Execution};
use crate::sequence::{Sequence, SequenceEvent, SpinSet};
use crate::sim::{self, SimOptions, Stick};
use crate::system::SpinSystem;
use crate::tolerance;

pub use classify::{classify, Evidence, Verdict, VerdictKind, DEFAULT_THRESHOLD};
pub use prepare::{prepare_term_sequence, prepare_term_sequence_cycled, prepared_state};
pub use report::{write_signal_csv, write_spectrum_csv};

/// One all-z term of the pseudopure state `|0...01><0...01|` (traceless
/// part), with the sign it carries there.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PseudopureTerm {
    pub term: OperatorTerm,
    pub sign: i8,
}

/// The `2^n - 1` longitudinal terms of `2^(n-1) |0...01><0...01| - 1/2`,
/// ordered by number of factors, then lexicographically by spin. A term
/// with `q` factors has coefficient `sign * 2^(q-1)`, negative exactly when
/// it contains the last spin.
pub fn pseudopure_terms(n: usize) -> Vec<PseudopureTerm> {
    let mut sets: Vec<Vec<usize>> = (1usize..1 << n)
        .map(|mask| (0..n).filter(|&k| mask & (1 << k) != 0).collect())
        .collect();
    sets.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    sets.into_iter()
        .map(|spins| {
            let sign: i8 = if spins.contains(&(n - 1)) { -1 } else { 1 };
            let coeff = f64::from(sign) * f64::from(1u32 << (spins.len() - 1));
            PseudopureTerm {
                term: OperatorTerm::longitudinal(coeff, spins),
                sign,
            }
        })
        .collect()
}

/// Index of the pseudopure term on exactly `spins`.
fn term_index(terms: &[PseudopureTerm], spins: &[usize]) -> Option<usize> {
    terms.iter().position(|t| t.term.factors().keys().copied().eq(spins.iter().copied()))
}

/// The program the specifier runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Program {
    /// `U(f)|x, y> = |x, y xor f(x)>` on the last spin.
    Oracle(BooleanFunction),
    /// CNOTs along the coupling chain in order. For the parity function it
    /// leaves the last spin as `U(f)` would, and is the form that is compiled.
    BalancedChain,
}

impl Program {
    /// The constant-zero function on `n - 1` inputs.
    pub fn f0(n: usize) -> Self {
        Program::Oracle(BooleanFunction::constant(n - 1, false))
    }

    pub fn fb() -> Self {
        Program::BalancedChain
    }

    pub fn label(&self) -> String {
        match self {
            Program::Oracle(f) if f.is_constant() && !f.eval(0) => "f0".into(),
            Program::Oracle(f) => format!("oracle {f}"),
            Program::BalancedChain => "fb".into(),
        }
    }

    /// Basis permutation of the ideal propagator.
    pub fn permutation(&self, system: &SpinSystem) -> Result<Vec<usize>> {
        let n = system.n();
        match self {
            Program::Oracle(f) => oracle_permutation(f, n),
            Program::BalancedChain => {
                let bits: Vec<(usize, usize)> = system
                    .chain
                    .windows(2)
                    .map(|w| (spin_bit(w[0], n), spin_bit(w[1], n)))
                    .collect();
                permutation_vector(n, |mut i| {
                    for &(c, t) in &bits {
                        if i & c != 0 {
                            i ^= t;
                        }
                    }
                    i
                })
            }
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    /// Programs applied as exact permutation propagators.
    #[default]
    Ideal,
    /// Programs simulated as compiled pulse sequences.
    Compiled,
}

/// One step of the preparation/readout phase cycle (degrees).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CycleStep {
    /// Phase of the first spin-1 pulse of the preparation.
    pub phi_a: f64,
    /// Phase of the `U_90` pulse; the shift from `y` is carried as a frame
    /// shift, so later pulses and the receiver follow it.
    pub phi_b: f64,
    pub receiver: f64,
}

pub const NO_CYCLE: [CycleStep; 1] = [CycleStep {
    phi_a: 0.0,
    phi_b: 90.0,
    receiver: 0.0,
}];

pub const FOUR_STEP_CYCLE: [CycleStep; 4] = [
    CycleStep { phi_a: 0.0, phi_b: 90.0, receiver: 0.0 },
    CycleStep { phi_a: 180.0, phi_b: 90.0, receiver: 180.0 },
    CycleStep { phi_a: 0.0, phi_b: 270.0, receiver: 0.0 },
    CycleStep { phi_a: 180.0, phi_b: 270.0, receiver: 180.0 },
];

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct DjOptions {
    pub mode: Mode,
    /// T2 damping during every simulated delay.
    pub relaxation: bool,
    /// Prepare each term from thermal equilibrium instead of setting it.
    pub full_preparation: bool,
    pub phase_cycle: bool,
}

impl DjOptions {
    fn sim(&self) -> SimOptions {
        SimOptions::default().with_relaxation(self.relaxation)
    }

    fn steps(&self) -> &'static [CycleStep] {
        if self.phase_cycle {
            &FOUR_STEP_CYCLE
        } else {
            &NO_CYCLE
        }
    }
}

/// One observation: experiment set, prepared term and observed spin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Experiment {
    pub set: u8,
    pub term_index: usize,
    pub spin: usize,
}

/// Set 1: `I_kz`, observe `k`. Set 2: `2 I_kz I_(k+1)z`, observe `k`.
/// Set 3: `2 I_(k-1)z I_kz`, observe `k`. Neighbours follow the chain.
pub fn experiments(system: &SpinSystem, terms: &[PseudopureTerm]) -> Vec<Experiment> {
    let mut out = Vec::new();
    for k in 0..system.n() {
        if let Some(i) = term_index(terms, &[k]) {
            out.push(Experiment { set: 1, term_index: i, spin: k });
        }
    }
    for w in system.chain.windows(2) {
        let mut pair = [w[0], w[1]];
        pair.sort_unstable();
        if let Some(i) = term_index(terms, &pair) {
            out.push(Experiment { set: 2, term_index: i, spin: w[0] });
            out.push(Experiment { set: 3, term_index: i, spin: w[1] });
        }
    }
    out.sort();
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalRow {
    pub set: u8,
    pub term_index: usize,
    pub term: OperatorTerm,
    pub spin: usize,
    pub amplitude: f64,
}

/// Signed, phase-cycle averaged signal amplitudes, one row per experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalTable {
    pub program: String,
    pub mode: Mode,
    pub spins: usize,
    pub rows: Vec<SignalRow>,
    /// Applications of the program's propagator.
    pub evaluations: usize,
    /// Distinct initial terms prepared.
    pub terms: usize,
}

impl SignalTable {
    pub fn amplitude(&self, set: u8, spin: usize) -> Option<f64> {
        self.rows.iter().find(|r| r.set == set && r.spin == spin).map(|r| r.amplitude)
    }

    /// Per-spin amplitudes of one set (`None` where the set has no row).
    pub fn set_amplitudes(&self, set: u8) -> Vec<Option<f64>> {
        (0..self.spins).map(|k| self.amplitude(set, k)).collect()
    }

    /// Temporal average: per observed spin, the sum over all rows.
    pub fn averaged(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.spins];
        for r in &self.rows {
            out[r.spin] += r.amplitude;
        }
        out
    }

    /// Program applications per prepared term.
    pub fn evaluations_per_term(&self) -> f64 {
        self.evaluations as f64 / self.terms.max(1) as f64
    }
}

/// Averaged stick spectrum of one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumRow {
    pub set: u8,
    pub term_index: usize,
    pub term: OperatorTerm,
    pub spin: usize,
    pub sticks: Vec<Stick>,
}

/// Precomputed initial states for running many programs on one system.
pub struct DjHarness<'a> {
    system: &'a SpinSystem,
    opts: DjOptions,
    terms: Vec<PseudopureTerm>,
    experiments: Vec<Experiment>,
    /// Distinct term indices used by the experiments.
    used: Vec<usize>,
    /// Per used term, per cycle step: the state after `U_90`.
    start: Vec<Vec<SpinState>>,
    chain: Option<Sequence>,
}

fn u90() -> Sequence {
    Sequence::new(vec![SequenceEvent::pulse(SpinSet::All, 90.0, 90.0)])
}

impl<'a> DjHarness<'a> {
    pub fn new(system: &'a SpinSystem, opts: DjOptions) -> Result<Self> {
        let n = system.n();
        if n < 2 {
            return Err(Error::Validation("Deutsch-Jozsa needs at least two spins".into()));
        }
        let terms = pseudopure_terms(n);
        let experiments = experiments(system, &terms);
        let mut used: Vec<usize> = experiments.iter().map(|e| e.term_index).collect();
        used.sort_unstable();
        used.dedup();
        let start = used
            .iter()
            .map(|&i| {
                opts.steps()
                    .iter()
                    .map(|step| initial_state(system, &terms[i].term, step, &opts))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        let chain = match opts.mode {
            Mode::Compiled => Some(compile_balanced_chain(system)?.sequence),
            Mode::Ideal => None,
        };
        Ok(Self {
            system,
            opts,
            terms,
            experiments,
            used,
            start,
            chain,
        })
    }

    pub fn terms(&self) -> &[PseudopureTerm] {
        &self.terms
    }

    pub fn experiments(&self) -> &[Experiment] {
        &self.experiments
    }

    /// Applies the program once to `state`.
    fn apply(&self, program: &Program, state: &SpinState, perm: Option<&[usize]>) -> Result<SpinState> {
        match self.opts.mode {
            Mode::Ideal => match perm {
                Some(p) => conjugate_permutation(&state.aligned(), p),
                None => conjugate_permutation(&state.aligned(), &program.permutation(self.system)?),
            },
            Mode::Compiled => match program {
                Program::BalancedChain => {
                    let chain = self.chain.as_ref().expect("compiled harness holds the chain");
                    sim::run(chain, state, self.system, self.opts.sim())
                }
                Program::Oracle(f) if f.is_constant() && !f.eval(0) => Ok(state.clone()),
                other => Err(Error::Unsupported(format!(
                    "no compiled sequence for {}; only f0 and fb are compiled",
                    other.label()
                ))),
            },
        }
    }

    /// Final states per used term and cycle step.
    fn final_states(&self, program: &Program) -> Result<Vec<Vec<SpinState>>> {
        let perm = match self.opts.mode {
            Mode::Ideal => Some(program.permutation(self.system)?),
            Mode::Compiled => None,
        };
        self.start
            .iter()
            .map(|steps| steps.iter().map(|s| self.apply(program, s, perm.as_deref())).collect())
            .collect()
    }

    fn slot(&self, term_index: usize) -> usize {
        self.used.binary_search(&term_index).expect("experiment term is prepared")
    }

    fn table(&self, program: &Program, finals: &[Vec<SpinState>]) -> Result<SignalTable> {
        let steps = self.opts.steps();
        let mut rows = Vec::with_capacity(self.experiments.len());
        for e in &self.experiments {
            let states = &finals[self.slot(e.term_index)];
            let mut sum = 0.0;
            for (st, step) in states.iter().zip(steps) {
                sum += read(st, e.spin, step.receiver, self.system)?;
            }
            rows.push(SignalRow {
                set: e.set,
                term_index: e.term_index,
                term: self.terms[e.term_index].term.clone(),
                spin: e.spin,
                amplitude: sum / steps.len() as f64,
            });
        }
        Ok(SignalTable {
            program: program.label(),
            mode: self.opts.mode,
            spins: self.system.n(),
            rows,
            evaluations: finals.iter().map(Vec::len).sum(),
            terms: self.used.len(),
        })
    }

    pub fn run(&self, program: &Program) -> Result<SignalTable> {
        let finals = self.final_states(program)?;
        self.table(program, &finals)
    }

    /// Signal table plus the averaged, fully coupled stick spectrum of every
    /// experiment.
    pub fn run_with_spectra(&self, program: &Program) -> Result<(SignalTable, Vec<SpectrumRow>)> {
        let finals = self.final_states(program)?;
        let table = self.table(program, &finals)?;
        let steps = self.opts.steps();
        let mut spectra = Vec::new();
        for e in &self.experiments {
            let mut merged: BTreeMap<i64, (f64, Complex64)> = BTreeMap::new();
            for (st, step) in finals[self.slot(e.term_index)].iter().zip(steps) {
                let rx = Complex64::from_polar(1.0 / steps.len() as f64, -step.receiver.to_radians());
                for s in sim::stick_spectrum(st, e.spin, &[], self.system)? {
                    let key = (s.offset / tolerance::STICK_MERGE_HZ).round() as i64;
                    let slot = merged.entry(key).or_insert((s.offset, Complex64::new(0.0, 0.0)));
                    slot.1 += s.amplitude * rx;
                }
            }
            spectra.push(SpectrumRow {
                set: e.set,
                term_index: e.term_index,
                term: self.terms[e.term_index].term.clone(),
                spin: e.spin,
                sticks: merged
                    .into_values()
                    .filter(|(_, a)| a.norm() > tolerance::ALGEBRA)
                    .map(|(offset, amplitude)| Stick { offset, amplitude })
                    .collect(),
            });
        }
        Ok((table, spectra))
    }

    /// Per-spin signals after `U_90` and the program, starting from an
    /// arbitrary state (no phase cycle).
    pub fn signals_from(&self, initial: &SpinState, program: &Program) -> Result<Vec<f64>> {
        let st = sim::run(&u90(), initial, self.system, self.opts.sim())?;
        let out = self.apply(program, &st, None)?;
        (0..self.system.n()).map(|k| read(&out, k, 0.0, self.system)).collect()
    }
}

/// Term state for one cycle step, carried through `U_90`.
fn initial_state(system: &SpinSystem, term: &OperatorTerm, step: &CycleStep, opts: &DjOptions) -> Result<SpinState> {
    let n = system.n();
    let mut st = if opts.full_preparation {
        prepared_state(system, term, step.phi_a, opts.sim())?
    } else {
        SpinState::from_term(n, &term.with_coeff(term.coeff * step.phi_a.to_radians().cos()))?
    };
    for k in 0..n {
        st.shift_frame(k, step.phi_b - 90.0);
    }
    sim::run(&u90(), &st, system, opts.sim())
}

/// In-phase signal of spin `k` with the other spins decoupled, read with an
/// extra receiver phase.
fn read(state: &SpinState, k: usize, receiver: f64, system: &SpinSystem) -> Result<f64> {
    let others: Vec<usize> = (0..state.n()).filter(|&l| l != k).collect();
    let total: Complex64 = sim::stick_spectrum(state, k, &others, system)?
        .iter()
        .map(|s| s.amplitude)
        .sum();
    Ok((total * Complex64::from_polar(1.0, -receiver.to_radians())).re)
}

/// Runs all three experiment sets for one program.
pub fn run_dj(system: &SpinSystem, program: &Program, opts: DjOptions) -> Result<SignalTable> {
    DjHarness::new(system, opts)?.run(program)
}

/// Pseudopure terms that give a nonzero in-phase signal on some spin after
/// `U_90` and at least one of the programs (ideal propagators).
pub fn detectable_subset(system: &SpinSystem, programs: &[Program]) -> Result<Vec<PseudopureTerm>> {
    if programs.is_empty() {
        return Err(Error::Validation("at least one program is required".into()));
    }
    let n = system.n();
    let perms = programs
        .iter()
        .map(|p| p.permutation(system))
        .collect::<Result<Vec<_>>>()?;
    let mut out = Vec::new();
    for t in pseudopure_terms(n) {
        let st = sim::run(&u90(), &SpinState::from_term(n, &t.term)?, system, SimOptions::default())?;
        let mut hit = false;
        for p in &perms {
            let fin = conjugate_permutation(&st, p)?;
            for k in 0..n {
                if read(&fin, k, 0.0, system)?.abs() > tolerance::ALGEBRA {
                    hit = true;
                }
            }
        }
        if hit {
            out.push(t);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceStage {
    /// `rho0` after `U_90`, then `CNOTkl` after each gate.
    pub label: String,
    pub terms: Vec<OperatorTerm>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermTrace {
    pub initial: OperatorTerm,
    pub stages: Vec<TraceStage>,
}

/// Decomposition of each initial term after `U_90` and after each CNOT of
/// the balanced chain.
pub fn intermediate_trace(system: &SpinSystem, initial: &[OperatorTerm]) -> Result<Vec<TermTrace>> {
    let n = system.n();
    let gates = system
        .chain
        .windows(2)
        .map(|w| Ok((format!("CNOT{}{}", w[0] + 1, w[1] + 1), cnot_matrix(w[0], w[1], n)?)))
        .collect::<Result<Vec<_>>>()?;
    initial
        .iter()
        .map(|t| {
            let mut st = sim::run(&u90(), &SpinState::from_term(n, t)?, system, SimOptions::default())?;
            let mut stages = vec![TraceStage {
                label: "rho0".into(),
                terms: st.decompose()?,
            }];
            for (label, u) in &gates {
                st = conjugate(&st, u)?;
                stages.push(TraceStage {
                    label: label.clone(),
                    terms: st.decompose()?,
                });
            }
            Ok(TermTrace {
                initial: t.clone(),
                stages,
            })
        })
        .collect()
}

/// Outcome of classifying every constant and balanced function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub functions: usize,
    pub constant: usize,
    pub balanced: usize,
    pub correct: usize,
    /// Truth tables of misclassified functions.
    pub misclassified: Vec<String>,
    /// Largest, over balanced functions, of the smallest input-spin set-1
    /// amplitude.
    pub max_min_balanced_input: f64,
    /// Program applications per function and initial term.
    pub evaluations_per_term: f64,
    /// Classical worst case for the same decision: `2^(m-1) + 1`.
    pub classical_worst_case: usize,
}

/// Runs every constant and balanced function of `n - 1` bits in ideal mode
/// with the full set of experiments and classifies each.
pub fn exhaustive_sweep(system: &SpinSystem, threshold: f64, exec: Execution) -> Result<SweepReport> {
    let n = system.n();
    let m = n - 1;
    let harness = DjHarness::new(system, DjOptions::default())?;
    let mut functions = vec![BooleanFunction::constant(m, false), BooleanFunction::constant(m, true)];
    functions.extend(BooleanFunction::balanced(m));
    let results = par::try_map(exec, &functions, |f| {
        let table = harness.run(&Program::Oracle(f.clone()))?;
        let verdict = classify(&table, threshold)?;
        let min_input = (0..n - 1)
            .filter_map(|k| table.amplitude(1, k))
            .fold(f64::INFINITY, f64::min);
        Ok::<_, Error>((verdict.kind, min_input, table.evaluations_per_term()))
    })?;
    let mut report = SweepReport {
        functions: functions.len(),
        constant: 0,
        balanced: 0,
        correct: 0,
        misclassified: Vec::new(),
        max_min_balanced_input: f64::NEG_INFINITY,
        evaluations_per_term: 0.0,
        classical_worst_case: (1 << (m - 1)) + 1,
    };
    for (f, (kind, min_input, evals)) in functions.iter().zip(results) {
        let want = if f.is_constant() {
            report.constant += 1;
            VerdictKind::Constant
        } else {
            report.balanced += 1;
            report.max_min_balanced_input = report.max_min_balanced_input.max(min_input);
            VerdictKind::Balanced
        };
        if kind == want {
            report.correct += 1;
        } else {
            report.misclassified.push(f.to_string());
        }
        report.evaluations_per_term = report.evaluations_per_term.max(evals);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::Axis;

    fn sys() -> SpinSystem {
        SpinSystem::glycine_fluoride()
    }

    fn close(a: &[Option<f64>], b: &[Option<f64>]) -> bool {
        a.len() == b.len()
            && a.iter().zip(b).all(|(x, y)| match (x, y) {
                (Some(x), Some(y)) => (x - y).abs() < 1e-9,
                (None, None) => true,
                _ => false,
            })
    }

    #[test]
    fn thirty_one_terms() {
        let t = pseudopure_terms(5);
        assert_eq!(t.len(), 31);
        assert!(t.iter().any(|p| p.term == "-I5z".parse().unwrap()));
        assert!(t.iter().any(|p| p.term == "-2*I4z*I5z".parse().unwrap()));
        assert_eq!(t[30].term, "-16*I1z*I2z*I3z*I4z*I5z".parse().unwrap());
        for p in &t {
            assert!(p.term.factors().values().all(|a| *a == Axis::Z));
            assert_eq!(p.term.coeff, f64::from(p.sign) * f64::from(1u32 << (p.term.order() - 1)));
        }
    }

    #[test]
    fn experiment_layout() {
        let s = sys();
        let e = experiments(&s, &pseudopure_terms(5));
        assert_eq!(e.len(), 5 + 4 + 4);
        assert_eq!(e.iter().filter(|x| x.set == 2).map(|x| x.spin).collect::<Vec<_>>(), vec![0, 1, 2, 3]);
        assert_eq!(e.iter().filter(|x| x.set == 3).map(|x| x.spin).collect::<Vec<_>>(), vec![1, 2, 3, 4]);
    }

    #[test]
    fn f0_and_fb_ideal() {
        let s = sys();
        let h = DjHarness::new(&s, DjOptions::default()).unwrap();
        let t0 = h.run(&Program::f0(5)).unwrap();
        assert!(close(&t0.set_amplitudes(1), &[Some(1.0), Some(1.0), Some(1.0), Some(1.0), Some(-1.0)]));
        assert!(close(&t0.set_amplitudes(2), &[Some(0.0), Some(0.0), Some(0.0), Some(0.0), None]));
        assert!(close(&t0.set_amplitudes(3), &[None, Some(0.0), Some(0.0), Some(0.0), Some(0.0)]));
        let tb = h.run(&Program::fb()).unwrap();
        assert!(close(&tb.set_amplitudes(1), &[Some(0.0), Some(0.0), Some(0.0), Some(0.0), Some(-1.0)]));
        assert!(close(&tb.set_amplitudes(2), &[Some(1.0), Some(1.0), Some(1.0), Some(-1.0), None]));
        assert!(close(&tb.set_amplitudes(3), &[None, Some(0.0), Some(0.0), Some(0.0), Some(0.0)]));
        assert_eq!(tb.evaluations_per_term(), 1.0);
        assert_eq!(tb.terms, 9);
    }

    #[test]
    fn exact_parity_oracle_keeps_only_the_last_pair() {
        // only 2 I4x I5x reaches a single-spin term under CNOT15..CNOT45
        let tb = run_dj(&sys(), &Program::Oracle(BooleanFunction::parity(4)), DjOptions::default()).unwrap();
        assert!(close(&tb.set_amplitudes(1), &[Some(0.0), Some(0.0), Some(0.0), Some(0.0), Some(-1.0)]));
        assert!(close(&tb.set_amplitudes(2), &[Some(0.0), Some(0.0), Some(0.0), Some(-1.0), None]));
        assert!((tb.amplitude(1, 4).unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn phase_cycle_is_neutral() {
        let s = sys();
        for mode in [Mode::Ideal, Mode::Compiled] {
            for prog in [Program::f0(5), Program::fb()] {
                let base = DjOptions { mode, ..Default::default() };
                let plain = run_dj(&s, &prog, base).unwrap();
                let cycled = run_dj(&s, &prog, DjOptions { phase_cycle: true, ..base }).unwrap();
                for (a, b) in plain.rows.iter().zip(&cycled.rows) {
                    assert!((a.amplitude - b.amplitude).abs() < 1e-9, "{mode:?} {} {a:?} {b:?}", prog.label());
                }
                assert_eq!(cycled.evaluations_per_term(), 4.0);
            }
        }
    }

    #[test]
    fn full_preparation_matches_direct() {
        let s = sys();
        let direct = run_dj(&s, &Program::fb(), DjOptions::default()).unwrap();
        let prepared = run_dj(&s, &Program::fb(), DjOptions { full_preparation: true, phase_cycle: true, ..Default::default() }).unwrap();
        for (a, b) in direct.rows.iter().zip(&prepared.rows) {
            assert!((a.amplitude - b.amplitude).abs() < 1e-9);
        }
    }

    #[test]
    fn compiled_mode_rejects_other_functions() {
        let s = sys();
        let h = DjHarness::new(&s, DjOptions { mode: Mode::Compiled, ..Default::default() }).unwrap();
        let err = h.run(&Program::Oracle(BooleanFunction::parity(4))).unwrap_err();
        assert!(matches!(err, Error::Unsupported(_)));
    }

    #[test]
    fn detectable_terms() {
        let s = sys();
        let both = detectable_subset(&s, &[Program::f0(5), Program::fb()]).unwrap();
        let names: Vec<String> = both.iter().map(|t| t.term.to_string()).collect();
        assert_eq!(
            names,
            ["I1z", "I2z", "I3z", "I4z", "-I5z", "2*I1z*I2z", "2*I2z*I3z", "2*I3z*I4z", "-2*I4z*I5z"]
        );
        let only_f0 = detectable_subset(&s, &[Program::f0(5)]).unwrap();
        assert_eq!(only_f0.len(), 5);
        assert!(only_f0.iter().all(|t| t.term.order() == 1));
        assert!(detectable_subset(&s, &[]).is_err());
    }

    #[test]
    fn linearity_of_temporal_averaging() {
        let s = sys();
        let h = DjHarness::new(&s, DjOptions::default()).unwrap();
        let terms: Vec<OperatorTerm> = pseudopure_terms(5).into_iter().map(|t| t.term).collect();
        for prog in [Program::f0(5), Program::fb()] {
            let mut sum = [0.0; 5];
            for t in &terms {
                let sig = h.signals_from(&SpinState::from_term(5, t).unwrap(), &prog).unwrap();
                sum.iter_mut().zip(sig).for_each(|(a, b)| *a += b);
            }
            let whole = h.signals_from(&SpinState::from_terms(5, &terms).unwrap(), &prog).unwrap();
            for (a, b) in sum.iter().zip(&whole) {
                assert!((a - b).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn trace_of_first_spin() {
        let tr = intermediate_trace(&sys(), &["I1z".parse().unwrap()]).unwrap();
        let want = ["I1x", "2*I1x*I2x", "4*I1x*I2x*I3x", "8*I1x*I2x*I3x*I4x", "16*I1x*I2x*I3x*I4x*I5x"];
        for (stage, w) in tr[0].stages.iter().zip(want) {
            assert_eq!(stage.terms.len(), 1, "{}", stage.label);
            assert!(stage.terms[0].same_basis(&w.parse().unwrap()));
            assert!((stage.terms[0].coeff - w.parse::<OperatorTerm>().unwrap().coeff).abs() < 1e-9);
        }
        assert_eq!(tr[0].stages.last().unwrap().label, "CNOT45");
    }
}
