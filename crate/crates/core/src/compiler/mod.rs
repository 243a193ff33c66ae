//! Gate compilation: echo planning, delay quantization, peephole
//! simplification and propagator checks.
//!
//! A CNOT on `(k, l)` is compiled as
//!
//! ```text
//! pulse l 90 -y
//! <1/(2 J_kl) with only J_kl effective, other couplings echoed away>
//! zrot k -90
//! zrot l -90
//! pulse l 90 y
//! <padding to the next multiple of the frame grid, every coupling echoed away>
//! ```
//!
//! The coupling delay is always exact; only the padding absorbs the grid.

mod fidelity;
mod plan;
mod simplify;

use serde::{Deserialize, Serialize};

pub use fidelity::{gate_fidelity, sequence_propagator};
pub use plan::{plan_decoupling, plan_refocusing, RefocusPlan, Residual};
pub use simplify::{simplify, simplify_with, Rule};

use crate::algebra::{cnot_matrix, swap_matrix, CMatrix};
use crate::error::{Error, Result};
use crate::sequence::{duration, Active, Sequence, SequenceEvent, SpinSet};
use crate::system::{frame_grid, SpinSystem};

/// Nearest positive multiple of `grid` (ties round up); `t` itself when
/// there is no grid.
pub fn quantize_delay(t: f64, grid: Option<f64>) -> f64 {
    match grid {
        Some(g) if g > 0.0 => grid_units(t, g) as f64 * g,
        _ => t,
    }
}

fn grid_units(t: f64, g: f64) -> u64 {
    ((t / g + 0.5).floor() as u64).max(1)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompileOptions {
    /// Largest number of echo intervals per delay (1, 2 or 4).
    pub max_intervals: usize,
    /// Largest accepted residual coupling angle per gate (rad).
    pub phase_tol: f64,
    pub simplify: bool,
    /// Pad gates to a multiple of the frame grid.
    pub pad_to_grid: bool,
}

impl Default for CompileOptions {
    fn default() -> Self {
        Self {
            max_intervals: 4,
            phase_tol: 0.05,
            simplify: true,
            pad_to_grid: true,
        }
    }
}

impl CompileOptions {
    /// Zero residual coupling.
    pub fn strict() -> Self {
        Self {
            phase_tol: 0.0,
            ..Self::default()
        }
    }
}

/// Timing of one coupling delay.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DelayTiming {
    pub k: usize,
    pub l: usize,
    /// `1 / (2 J_kl)`.
    pub exact: f64,
    /// `exact` rounded to the nearest grid multiple.
    pub quantized: f64,
    pub quantized_units: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateReport {
    pub gate: String,
    /// Pulse-level sequence with explicit echo pulses.
    pub sequence: Sequence,
    /// Same gate written with `active=` delays.
    pub idealized: Sequence,
    /// `|tr(U_target^dagger U)| / 2^n` of `sequence`.
    pub fidelity: f64,
    pub duration: f64,
    pub grid: Option<f64>,
    pub grid_units: Option<u64>,
    pub pulses_before: usize,
    pub pulses_after: usize,
    pub residual: Vec<Residual>,
    pub timings: Vec<DelayTiming>,
}

/// Single-spin pulse operations (a pulse on `m` spins counts `m` times).
pub fn pulse_operations(seq: &Sequence, n: usize) -> usize {
    seq.events
        .iter()
        .map(|e| match e {
            SequenceEvent::Pulse { spins, .. } => spins.resolve(n).len(),
            _ => 0,
        })
        .sum()
}

/// Pulse-level and idealized event lists for one piece of a gate.
#[derive(Default)]
struct Block {
    pulsed: Vec<SequenceEvent>,
    ideal: Vec<SequenceEvent>,
    residual: Vec<Residual>,
    timings: Vec<DelayTiming>,
}

impl Block {
    fn append(&mut self, other: Block) {
        self.pulsed.extend(other.pulsed);
        self.ideal.extend(other.ideal);
        self.residual.extend(other.residual);
        self.timings.extend(other.timings);
    }
}

/// Echo-pulsed delay of `total` seconds following `plan`. 180s take the
/// `x, -x, -x, x` phase pattern per spin.
fn echo(plan: &RefocusPlan, total: f64) -> Vec<SequenceEvent> {
    let n = plan.rows.len();
    let mut count = vec![0usize; n];
    let mut out = Vec::new();
    for b in 0..=plan.intervals {
        let mut x = Vec::new();
        let mut minus_x = Vec::new();
        for m in plan.flips_at(b) {
            if matches!(count[m] % 4, 1 | 2) {
                minus_x.push(m);
            } else {
                x.push(m);
            }
            count[m] += 1;
        }
        for (spins, phase) in [(x, 0.0), (minus_x, 180.0)] {
            if !spins.is_empty() {
                out.push(SequenceEvent::pulse(SpinSet::List(spins), 180.0, phase));
            }
        }
        if b < plan.intervals {
            out.push(SequenceEvent::delay(total / plan.intervals as f64, Active::All));
        }
    }
    out
}

fn check_pair(system: &SpinSystem, k: usize, l: usize) -> Result<()> {
    let n = system.n();
    for s in [k, l] {
        if s >= n {
            return Err(Error::Index { index: s, n });
        }
    }
    if k == l {
        return Err(Error::Validation(format!("gate needs two distinct spins, got {} twice", k + 1)));
    }
    Ok(())
}

fn cnot_block(system: &SpinSystem, k: usize, l: usize, grid: Option<f64>, opts: &CompileOptions) -> Result<Block> {
    check_pair(system, k, l)?;
    if !system.adjacent_on_chain(k, l) {
        return Err(Error::Routing(format!(
            "spins {} and {} are not adjacent on the coupling chain; use route_cnot",
            k + 1,
            l + 1
        )));
    }
    let plan = plan_refocusing(system, k, l, opts.max_intervals, opts.phase_tol)?;
    let tau = plan.tau;
    let pre = SequenceEvent::pulse(SpinSet::one(l), 90.0, 270.0);
    let post = [
        SequenceEvent::ZRot { spin: k, angle: -90.0 },
        SequenceEvent::ZRot { spin: l, angle: -90.0 },
        SequenceEvent::pulse(SpinSet::one(l), 90.0, 90.0),
    ];
    let mut pulsed = vec![pre.clone()];
    pulsed.extend(echo(&plan, tau));
    pulsed.extend(post.iter().cloned());

    let mut pairs = vec![(k.min(l), k.max(l))];
    pairs.extend(plan.residual.iter().map(|r| (r.k, r.l)));
    pairs.sort_unstable();
    let mut ideal = vec![pre, SequenceEvent::delay(tau, Active::Pairs(pairs))];
    ideal.extend(post);

    Ok(Block {
        pulsed,
        ideal,
        residual: plan.residual.clone(),
        timings: vec![DelayTiming {
            k,
            l,
            exact: tau,
            quantized: quantize_delay(tau, grid),
            quantized_units: grid.map(|g| grid_units(tau, g)),
        }],
    })
}

/// Delay of `pad` seconds with every coupling echoed away.
fn padding(system: &SpinSystem, pad: f64, opts: &CompileOptions) -> Result<Block> {
    if pad <= 0.0 {
        return Ok(Block::default());
    }
    let plan = plan_decoupling(system, pad, opts.max_intervals)?;
    Ok(Block {
        pulsed: echo(&plan, pad),
        ideal: vec![SequenceEvent::delay(pad, Active::Pairs(Vec::new()))],
        ..Block::default()
    })
}

/// Time needed to reach the next grid multiple (none within 1 ps).
fn pad_to_grid(active: f64, grid: Option<f64>, opts: &CompileOptions) -> f64 {
    match grid {
        Some(g) if opts.pad_to_grid => {
            let units = (active / g - 1e-9).ceil().max(1.0);
            let pad = units * g - active;
            if pad < 1e-12 {
                0.0
            } else {
                pad
            }
        }
        _ => 0.0,
    }
}

fn padded_cnot(system: &SpinSystem, k: usize, l: usize, grid: Option<f64>, opts: &CompileOptions) -> Result<Block> {
    let mut b = cnot_block(system, k, l, grid, opts)?;
    let active = b.timings[0].exact;
    b.append(padding(system, pad_to_grid(active, grid, opts), opts)?);
    Ok(b)
}

fn finish(
    gate: String,
    block: Block,
    target: &CMatrix,
    system: &SpinSystem,
    grid: Option<f64>,
    opts: &CompileOptions,
) -> Result<GateReport> {
    let n = system.n();
    let raw = Sequence::new(block.pulsed).named(gate.clone()).with_target(gate.clone());
    let sequence = if opts.simplify { simplify(&raw) } else { raw.clone() };
    let idealized = Sequence::new(block.ideal).named(format!("{gate} (idealized)")).with_target(gate.clone());
    let fidelity = gate_fidelity(&sequence, target, system)?;
    let dur = duration(&sequence);
    Ok(GateReport {
        gate,
        fidelity,
        duration: dur,
        grid,
        grid_units: grid.map(|g| (dur / g).round() as u64),
        pulses_before: pulse_operations(&raw, n),
        pulses_after: pulse_operations(&sequence, n),
        residual: block.residual,
        timings: block.timings,
        sequence,
        idealized,
    })
}

pub fn compile_cnot(system: &SpinSystem, k: usize, l: usize) -> Result<GateReport> {
    compile_cnot_with(system, k, l, &CompileOptions::default())
}

/// CNOT with control `k` and target `l` (0-based, adjacent on the chain).
pub fn compile_cnot_with(system: &SpinSystem, k: usize, l: usize, opts: &CompileOptions) -> Result<GateReport> {
    let grid = frame_grid(system)?;
    let block = padded_cnot(system, k, l, grid, opts)?;
    let target = cnot_matrix(k, l, system.n())?;
    finish(format!("cnot {} {}", k + 1, l + 1), block, &target, system, grid, opts)
}

pub fn compile_swap(system: &SpinSystem, k: usize, l: usize) -> Result<GateReport> {
    compile_swap_with(system, k, l, &CompileOptions::strict())
}

/// SWAP as `CNOT_kl CNOT_lk CNOT_kl`, each padded to the grid.
pub fn compile_swap_with(system: &SpinSystem, k: usize, l: usize, opts: &CompileOptions) -> Result<GateReport> {
    let grid = frame_grid(system)?;
    let block = swap_block(system, k, l, grid, opts)?;
    let target = swap_matrix(k, l, system.n())?;
    finish(format!("swap {} {}", k + 1, l + 1), block, &target, system, grid, opts)
}

fn swap_block(system: &SpinSystem, k: usize, l: usize, grid: Option<f64>, opts: &CompileOptions) -> Result<Block> {
    let mut b = padded_cnot(system, k, l, grid, opts)?;
    b.append(padded_cnot(system, l, k, grid, opts)?);
    b.append(padded_cnot(system, k, l, grid, opts)?);
    Ok(b)
}

/// CNOT between any two chain spins: the control is swapped along the chain
/// next to the target, the adjacent CNOT applied, and the swaps undone.
pub fn route_cnot(system: &SpinSystem, j: usize, k: usize) -> Result<GateReport> {
    let opts = CompileOptions::strict();
    check_pair(system, j, k)?;
    let (Some(pj), Some(pk)) = (system.chain_position(j), system.chain_position(k)) else {
        return Err(Error::Routing(format!(
            "spins {} and {} are not both on the coupling chain",
            j + 1,
            k + 1
        )));
    };
    let path: Vec<usize> = if pj < pk {
        system.chain[pj..=pk].to_vec()
    } else {
        system.chain[pk..=pj].iter().rev().copied().collect()
    };
    let grid = frame_grid(system)?;
    let m = path.len() - 1;
    let mut block = Block::default();
    for i in 0..m - 1 {
        block.append(swap_block(system, path[i], path[i + 1], grid, &opts)?);
    }
    block.append(padded_cnot(system, path[m - 1], path[m], grid, &opts)?);
    for i in (0..m - 1).rev() {
        block.append(swap_block(system, path[i], path[i + 1], grid, &opts)?);
    }
    let target = cnot_matrix(j, k, system.n())?;
    finish(format!("cnot {} {}", j + 1, k + 1), block, &target, system, grid, &opts)
}

/// `CNOT_(c(m-1) c(m)) ... CNOT_(c1 c2) CNOT_(c0 c1)` along the chain `c`.
pub fn balanced_chain_target(system: &SpinSystem) -> Result<CMatrix> {
    let n = system.n();
    let mut u = CMatrix::identity(1 << n, 1 << n);
    for w in system.chain.windows(2) {
        u = cnot_matrix(w[0], w[1], n)? * u;
    }
    Ok(u)
}

pub fn compile_balanced_chain(system: &SpinSystem) -> Result<GateReport> {
    compile_balanced_chain_with(system, &CompileOptions::default())
}

/// CNOTs along the whole chain in order, padded once at the end.
pub fn compile_balanced_chain_with(system: &SpinSystem, opts: &CompileOptions) -> Result<GateReport> {
    if system.chain.len() < 2 {
        return Err(Error::Validation("balanced chain needs a coupling chain of at least two spins".into()));
    }
    let grid = frame_grid(system)?;
    let mut block = Block::default();
    for w in system.chain.windows(2) {
        block.append(cnot_block(system, w[0], w[1], grid, opts)?);
    }
    let active: f64 = block.timings.iter().map(|t| t.exact).sum();
    block.append(padding(system, pad_to_grid(active, grid, opts), opts)?);
    let target = balanced_chain_target(system)?;
    finish("balanced-chain".into(), block, &target, system, grid, opts)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sys() -> SpinSystem {
        SpinSystem::glycine_fluoride()
    }

    const GRID: f64 = 81.75e-6;

    #[test]
    fn quantization_examples() {
        assert!((quantize_delay(1.0 / 732.0, Some(GRID)) - 17.0 * GRID).abs() < 1e-15);
        assert!((quantize_delay(1.0 / 188.2, Some(GRID)) - 65.0 * GRID).abs() < 1e-15);
        assert!((quantize_delay(1.0 / 27.0, Some(GRID)) - 453.0 * GRID).abs() < 1e-14);
        assert_eq!(quantize_delay(1.234e-3, None), 1.234e-3);
        assert_eq!(quantize_delay(1.5, Some(1.0)), 2.0);
        assert_eq!(quantize_delay(0.0, Some(1.0)), 1.0);
    }

    #[test]
    fn cnot45_duration_and_residual() {
        let r = compile_cnot(&sys(), 3, 4).unwrap();
        assert_eq!(r.grid_units, Some(17));
        assert!((r.duration - 1.38975e-3).abs() < 1e-12);
        assert_eq!(r.residual.len(), 1);
        assert!(r.fidelity >= 0.9999 && r.fidelity < 1.0, "{}", r.fidelity);
    }

    #[test]
    fn exact_cnots() {
        for (k, l) in [(0, 1), (1, 2), (2, 3), (1, 0), (4, 3)] {
            let r = compile_cnot_with(&sys(), k, l, &CompileOptions::strict()).unwrap();
            assert!(r.fidelity > 1.0 - 1e-9, "CNOT{}{}: {}", k + 1, l + 1, r.fidelity);
            assert!(r.pulses_after <= r.pulses_before);
        }
    }

    #[test]
    fn non_adjacent_needs_routing() {
        assert!(matches!(compile_cnot(&sys(), 0, 2), Err(Error::Routing(_))));
        assert!(matches!(compile_cnot(&sys(), 0, 8), Err(Error::Index { .. })));
    }

    #[test]
    fn two_spin_gate_without_grid() {
        let s = SpinSystem::two_spin(100.0);
        let r = compile_cnot(&s, 0, 1).unwrap();
        assert!((r.duration - 5e-3).abs() < 1e-15);
        assert_eq!(r.grid, None);
        assert!(r.fidelity > 1.0 - 1e-12);
    }
}
