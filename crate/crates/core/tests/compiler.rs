use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use spinforge::algebra::{
    cnot_matrix, conjugate, coupling_propagator, matrix_of_term, overlap_fidelity, permutation_propagator,
    swap_matrix,
};
use spinforge::compiler::{
    compile_balanced_chain, compile_balanced_chain_with, compile_cnot, compile_cnot_with, compile_swap,
    plan_decoupling, plan_refocusing, route_cnot, sequence_propagator, CompileOptions, GateReport,
};
use spinforge::sim::{self, SimOptions};
use spinforge::{Active, Axis, BooleanFunction, CMatrix, OperatorTerm, Sequence, SequenceEvent, SpinSet, SpinState, SpinSystem};

fn sys() -> SpinSystem {
    SpinSystem::glycine_fluoride()
}

const ADJACENT: [(usize, usize); 4] = [(0, 1), (1, 2), (2, 3), (3, 4)];

fn random_state(n: usize, rng: &mut impl Rng) -> SpinState {
    let dim = 1 << n;
    let a = CMatrix::from_fn(dim, dim, |_, _| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
    let mut h = &a + a.adjoint();
    let shift = h.trace() / dim as f64;
    for i in 0..dim {
        h[(i, i)] -= shift;
    }
    SpinState::from_matrix(n, h).unwrap()
}

fn decompose_after(u: &CMatrix, n: usize, term: &OperatorTerm) -> Vec<OperatorTerm> {
    let state = SpinState::from_term(n, term).unwrap();
    conjugate(&state, u).unwrap().decompose().unwrap()
}

fn assert_terms(got: &[OperatorTerm], want: &OperatorTerm, tol: f64) {
    assert_eq!(got.len(), 1, "got {got:?}, want {want}");
    assert!(got[0].same_basis(want), "got {}, want {want}", got[0]);
    assert!((got[0].coeff - want.coeff).abs() < tol, "got {}, want {want}", got[0]);
}

fn check_cnot_rules(u: &CMatrix, n: usize, k: usize, l: usize) {
    let ikx = OperatorTerm::single(1.0, k, Axis::X);
    let ilx = OperatorTerm::single(1.0, l, Axis::X);
    let both = OperatorTerm::new(2.0, [(k, Axis::X), (l, Axis::X)]);
    assert_terms(&decompose_after(u, n, &ikx), &both, 1e-9);
    assert_terms(&decompose_after(u, n, &both), &ikx, 1e-9);
    assert_terms(&decompose_after(u, n, &ilx), &ilx, 1e-9);
}

#[test]
fn cnot_rules_canonical() {
    let n = 5;
    for (a, b) in ADJACENT {
        for (k, l) in [(a, b), (b, a)] {
            check_cnot_rules(&cnot_matrix(k, l, n).unwrap(), n, k, l);
        }
    }
}

#[test]
fn cnot_rules_compiled() {
    let s = sys();
    for (a, b) in ADJACENT {
        for (k, l) in [(a, b), (b, a)] {
            let r = compile_cnot(&s, k, l).unwrap();
            let u = sequence_propagator(&r.sequence, &s).unwrap();
            check_cnot_rules(&u, s.n(), k, l);
        }
    }
}

#[test]
fn chain_duration_and_basis_action() {
    let s = sys();
    let r = compile_balanced_chain(&s).unwrap();
    assert_eq!(r.grid_units, Some(629));
    assert!((r.duration - 51.42075e-3).abs() < 1e-9);
    assert!(r.pulses_after < r.pulses_before);
    let u = sequence_propagator(&r.sequence, &s).unwrap();
    assert!(u[(0b11111, 0b10000)].norm() > 1.0 - 1e-9);
    // each input maps to prefix parities
    for x in 0..32usize {
        let mut y = 0;
        let mut parity = 0;
        for k in 0..5 {
            parity ^= (x >> (4 - k)) & 1;
            y |= parity << (4 - k);
        }
        assert!(u[(y, x)].norm() > 1.0 - 1e-9, "{x:05b} -> {y:05b}");
    }
}

#[test]
fn swap_squared_is_identity() {
    let s = sys();
    for (k, l) in ADJACENT {
        let r = compile_swap(&s, k, l).unwrap();
        assert!(r.fidelity >= 1.0 - 1e-8, "SWAP{}{} {}", k + 1, l + 1, r.fidelity);
        let u = sequence_propagator(&r.sequence, &s).unwrap();
        let id = CMatrix::identity(32, 32);
        assert!(overlap_fidelity(&id, &(&u * &u)) > 1.0 - 1e-8);
        assert!(overlap_fidelity(&swap_matrix(k, l, 5).unwrap(), &u) > 1.0 - 1e-8);
    }
}

#[test]
fn routed_cnot_matches_oracle() {
    let s = sys();
    let r = route_cnot(&s, 0, 4).unwrap();
    let f = BooleanFunction::from_fn(4, |x| (x >> 3) & 1 == 1);
    let u = sequence_propagator(&r.sequence, &s).unwrap();
    assert!(overlap_fidelity(&permutation_propagator(&f, 5).unwrap(), &u) > 1.0 - 1e-8);
    assert!(overlap_fidelity(&cnot_matrix(0, 4, 5).unwrap(), &u) > 1.0 - 1e-8);
}

fn compiled_gates(s: &SpinSystem, opts: &CompileOptions) -> Vec<GateReport> {
    let mut out: Vec<GateReport> = ADJACENT
        .iter()
        .map(|&(k, l)| compile_cnot_with(s, k, l, opts).unwrap())
        .collect();
    out.extend(ADJACENT.iter().map(|&(k, l)| compile_swap(s, k, l).unwrap()));
    out.push(compile_balanced_chain_with(s, opts).unwrap());
    out
}

#[test]
fn idealized_and_pulse_level_agree() {
    let s = sys();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let states: Vec<SpinState> = (0..200).map(|_| random_state(5, &mut rng)).collect();
    for r in compiled_gates(&s, &CompileOptions::strict()) {
        for st in &states {
            let a = sim::run(&r.sequence, st, &s, SimOptions::default()).unwrap().aligned();
            let b = sim::run(&r.idealized, st, &s, SimOptions::default()).unwrap().aligned();
            assert!(a.max_abs_diff(&b) < 1e-8, "{}", r.gate);
        }
    }
}

#[test]
fn quantization_error_bound() {
    let s = sys();
    for r in compiled_gates(&s, &CompileOptions::default()) {
        for t in &r.timings {
            let j = s.coupling(t.k, t.l);
            let err = 2.0 * std::f64::consts::PI * j * (t.quantized - t.exact);
            assert!(err.abs() < 0.06, "{} J{}{}: {err}", r.gate, t.k + 1, t.l + 1);
        }
    }
}

/// Delay split into the plan's intervals with 180 x pulses at the sign changes.
fn echo_sequence(plan: &spinforge::compiler::RefocusPlan) -> Sequence {
    let mut seq = Sequence::default();
    let step = plan.tau / plan.intervals as f64;
    for b in 0..=plan.intervals {
        let flips = plan.flips_at(b);
        if !flips.is_empty() {
            seq.push(SequenceEvent::pulse(SpinSet::list(flips), 180.0, 0.0));
        }
        if b < plan.intervals {
            seq.push(SequenceEvent::delay(step, Active::All));
        }
    }
    seq
}

#[test]
fn refocusing_plans_are_sound() {
    let s = sys();
    for (a, b) in ADJACENT {
        for tol in [0.0, 0.05] {
            let plan = plan_refocusing(&s, a, b, 4, tol).unwrap();
            let u = sequence_propagator(&echo_sequence(&plan), &s).unwrap();
            let mut want = coupling_propagator(a, b, s.coupling(a, b), plan.tau, 5).unwrap();
            for r in &plan.residual {
                want = coupling_propagator(r.k, r.l, r.j, plan.tau, 5).unwrap() * want;
            }
            assert!(overlap_fidelity(&want, &u) > 1.0 - 1e-9, "J{}{} tol {tol}", a + 1, b + 1);
        }
    }
    let plan = plan_decoupling(&s, 2e-3, 4).unwrap();
    let u = sequence_propagator(&echo_sequence(&plan), &s).unwrap();
    assert!(overlap_fidelity(&CMatrix::identity(32, 32), &u) > 1.0 - 1e-9);
}

#[test]
fn cnot45_residual_and_cnot12_intervals() {
    let s = sys();
    let p45 = plan_refocusing(&s, 3, 4, 2, 0.05).unwrap();
    assert_eq!(p45.intervals, 2);
    assert_eq!(p45.residual.len(), 1);
    assert_eq!((p45.residual[0].k, p45.residual[0].l), (0, 2));
    assert!(plan_refocusing(&s, 0, 1, 2, 0.0).is_err());
    assert_eq!(plan_refocusing(&s, 0, 1, 4, 0.0).unwrap().intervals, 4);
}

#[test]
fn target_term_basis_is_consistent() {
    // conjugating by the compiled gate equals conjugating by the canonical one
    let s = sys();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let r = compile_cnot_with(&s, 1, 2, &CompileOptions::strict()).unwrap();
    let u = sequence_propagator(&r.sequence, &s).unwrap();
    let c = cnot_matrix(1, 2, 5).unwrap();
    for _ in 0..20 {
        let st = random_state(5, &mut rng);
        let a = conjugate(&st, &u).unwrap();
        let b = conjugate(&st, &c).unwrap();
        assert!(a.max_abs_diff(&b) < 1e-8);
    }
    let m = matrix_of_term(&OperatorTerm::single(1.0, 0, Axis::Z), 5).unwrap();
    assert!((m[(0, 0)].re - 0.5).abs() < 1e-15);
}
