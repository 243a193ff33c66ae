use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;

use spinforge::compiler::{self, CompileOptions, DelayTiming, GateReport};
use spinforge::dj::{self, DjHarness, DjOptions, Mode, Program, Verdict, VerdictKind};
use spinforge::par::Execution;
use spinforge::sequence::render_sequence;
use spinforge::system::load_system;
use spinforge::{BooleanFunction, SpinState, SpinSystem};

use crate::args::{Cli, Command, CompileArgs, Gate, ModeArg, RunDjArgs, SpectrumArgs, SweepArgs};
use crate::manifest::RunManifest;
use crate::Usage;

const DEFAULT_OUT: &str = "spinforge-out";

pub fn run(cli: &Cli) -> Result<u8> {
    let system = load(cli.system.as_deref())?;
    match &cli.command {
        Command::Compile(a) => compile(cli, &system, a),
        Command::RunDj(a) => run_dj(cli, &system, a),
        Command::Spectrum(a) => spectrum(cli, &system, a),
        Command::Sweep(a) => sweep(cli, &system, a),
    }
}

fn load(path: Option<&Path>) -> Result<SpinSystem> {
    match path {
        None => Ok(SpinSystem::glycine_fluoride()),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| Usage(format!("cannot read system file `{}`: {e}", p.display())))?;
            Ok(load_system(&text)?)
        }
    }
}

fn out_dir(cli: &Cli) -> PathBuf {
    cli.out.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
}

/// 1-based spin number from the command line to a library index.
fn spin_index(system: &SpinSystem, k: usize) -> Result<usize> {
    if (1..=system.n()).contains(&k) {
        Ok(k - 1)
    } else {
        Err(Usage(format!("spin {k} out of range 1..={}", system.n())).into())
    }
}

#[derive(Serialize)]
struct ResidualOut {
    coupling: String,
    j_hz: f64,
    phase_rad: f64,
}

#[derive(Serialize)]
struct CompileReport {
    gate: String,
    passed: bool,
    min_fidelity: f64,
    fidelity: Option<f64>,
    duration_ms: Option<f64>,
    grid_us: Option<f64>,
    grid_units: Option<u64>,
    pulses_before: Option<usize>,
    pulses_after: Option<usize>,
    residual: Vec<ResidualOut>,
    timings: Vec<DelayTiming>,
    error: Option<String>,
}

impl CompileReport {
    fn from_gate(r: &GateReport, min_fidelity: f64) -> Self {
        Self {
            gate: r.gate.clone(),
            passed: r.fidelity >= min_fidelity,
            min_fidelity,
            fidelity: Some(r.fidelity),
            duration_ms: Some(r.duration * 1e3),
            grid_us: r.grid.map(|g| g * 1e6),
            grid_units: r.grid_units,
            pulses_before: Some(r.pulses_before),
            pulses_after: Some(r.pulses_after),
            residual: r
                .residual
                .iter()
                .map(|x| ResidualOut {
                    coupling: format!("J{}{}", x.k + 1, x.l + 1),
                    j_hz: x.j,
                    phase_rad: x.phase,
                })
                .collect(),
            timings: r.timings.clone(),
            error: None,
        }
    }

    fn failed(gate: String, min_fidelity: f64, error: String) -> Self {
        Self {
            gate,
            passed: false,
            min_fidelity,
            fidelity: None,
            duration_ms: None,
            grid_us: None,
            grid_units: None,
            pulses_before: None,
            pulses_after: None,
            residual: Vec::new(),
            timings: Vec::new(),
            error: Some(error),
        }
    }
}

fn compile(cli: &Cli, system: &SpinSystem, a: &CompileArgs) -> Result<u8> {
    let out = out_dir(cli);
    let (stem, result) = match &a.gate {
        Gate::Cnot { k, l } => {
            let (k0, l0) = (spin_index(system, *k)?, spin_index(system, *l)?);
            let opts = if a.strict { CompileOptions::strict() } else { CompileOptions::default() };
            let r = if k0 != l0 && !system.adjacent_on_chain(k0, l0) {
                compiler::route_cnot(system, k0, l0)
            } else {
                compiler::compile_cnot_with(system, k0, l0, &opts)
            };
            (format!("cnot_{k}_{l}"), r)
        }
        Gate::Swap { k, l } => {
            let r = compiler::compile_swap(system, spin_index(system, *k)?, spin_index(system, *l)?);
            (format!("swap_{k}_{l}"), r)
        }
        Gate::BalancedChain => {
            let opts = if a.strict { CompileOptions::strict() } else { CompileOptions::default() };
            ("balanced_chain".to_string(), compiler::compile_balanced_chain_with(system, &opts))
        }
    };

    let mut manifest = RunManifest::new(cli.system.as_deref(), "compile", cli.seed);
    manifest.option("gate", &a.gate);
    manifest.option("min_fidelity", a.min_fidelity);
    manifest.option("strict", a.strict);
    let report = match result {
        Ok(r) => r,
        Err(e @ (spinforge::Error::Index { .. } | spinforge::Error::Validation(_) | spinforge::Error::Routing(_))) => {
            return Err(e.into());
        }
        Err(e) => {
            manifest.check_inputs(&[], &out)?;
            let rep = CompileReport::failed(stem.replace('_', " "), a.min_fidelity, e.to_string());
            manifest.write(&out, &format!("{stem}.report.json"), &json(&rep)?)?;
            manifest.save(&out)?;
            return Err(e.into());
        }
    };
    manifest.check_inputs(&[], &out)?;
    manifest.write(&out, &format!("{stem}.seq"), render_sequence(&report.sequence).as_bytes())?;
    manifest.write(&out, &format!("{stem}.ideal.seq"), render_sequence(&report.idealized).as_bytes())?;
    let rep = CompileReport::from_gate(&report, a.min_fidelity);
    manifest.write(&out, &format!("{stem}.report.json"), &json(&rep)?)?;
    manifest.save(&out)?;

    println!("gate:      {}", report.gate);
    println!("duration:  {:.5} ms", report.duration * 1e3);
    if let (Some(g), Some(u)) = (report.grid, report.grid_units) {
        println!("grid:      {:.2} us x {u}", g * 1e6);
    }
    println!("fidelity:  {:.10}", report.fidelity);
    println!("pulses:    {} -> {}", report.pulses_before, report.pulses_after);
    for r in &rep.residual {
        println!("residual:  {} ({:.4} rad)", r.coupling, r.phase_rad);
    }
    if rep.passed {
        Ok(0)
    } else {
        eprintln!("fidelity {:.10} below {}", report.fidelity, a.min_fidelity);
        Ok(1)
    }
}

#[derive(Serialize)]
struct EvidenceOut {
    spin: usize,
    set1: f64,
    set2: Option<f64>,
    attenuated: bool,
    reversed: bool,
}

#[derive(Serialize)]
struct VerdictReport {
    program: String,
    mode: ModeArg,
    relaxation: bool,
    verdict: VerdictKind,
    threshold: f64,
    reference: f64,
    deciding_spins: Vec<usize>,
    evidence: Vec<EvidenceOut>,
    evaluations_per_term: f64,
    set1: Vec<Option<f64>>,
    set2: Vec<Option<f64>>,
    set3: Vec<Option<f64>>,
}

fn verdict_report(label: &str, a: &RunDjArgs, table: &dj::SignalTable, v: &Verdict) -> VerdictReport {
    VerdictReport {
        program: label.to_string(),
        mode: a.mode,
        relaxation: a.relaxation,
        verdict: v.kind,
        threshold: v.threshold,
        reference: v.reference,
        deciding_spins: v.deciding.iter().map(|k| k + 1).collect(),
        evidence: v
            .evidence
            .iter()
            .map(|e| EvidenceOut {
                spin: e.spin + 1,
                set1: e.set1,
                set2: e.set2,
                attenuated: e.attenuated,
                reversed: e.reversed,
            })
            .collect(),
        evaluations_per_term: table.evaluations_per_term(),
        set1: table.set_amplitudes(1),
        set2: table.set_amplitudes(2),
        set3: table.set_amplitudes(3),
    }
}

fn run_dj(cli: &Cli, system: &SpinSystem, a: &RunDjArgs) -> Result<u8> {
    let out = out_dir(cli);
    let mut manifest = RunManifest::new(cli.system.as_deref(), "run-dj", cli.seed);
    let inputs: Vec<&Path> = a.truth_table.iter().map(PathBuf::as_path).collect();
    manifest.check_inputs(&inputs, &out)?;

    let (label, program) = match (&a.function, &a.truth_table) {
        (_, Some(path)) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let f: BooleanFunction = text.parse().with_context(|| format!("truth table {}", path.display()))?;
            let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            (stem, Program::Oracle(f))
        }
        (Some(name), None) => match name.as_str() {
            "f0" => ("f0".to_string(), Program::f0(system.n())),
            "fb" => ("fb".to_string(), Program::fb()),
            other => return Err(Usage(format!("unknown function `{other}`; use f0, fb or --truth-table")).into()),
        },
        (None, None) => return Err(Usage("a function or --truth-table is required".into()).into()),
    };
    let opts = DjOptions {
        mode: match a.mode {
            ModeArg::Ideal => Mode::Ideal,
            ModeArg::Compiled => Mode::Compiled,
        },
        relaxation: a.relaxation,
        full_preparation: a.full_preparation,
        phase_cycle: a.phase_cycle,
    };
    manifest.option("program", &label);
    manifest.option("mode", a.mode);
    manifest.option("relaxation", a.relaxation);
    manifest.option("threshold", a.threshold);
    manifest.option("full_preparation", a.full_preparation);
    manifest.option("phase_cycle", a.phase_cycle);
    if let Some(p) = &a.truth_table {
        manifest.option("truth_table", p);
    }

    let harness = DjHarness::new(system, opts)?;
    let (table, spectra) = harness.run_with_spectra(&program)?;
    let verdict = dj::classify(&table, a.threshold)?;

    let mut buf = Vec::new();
    dj::write_signal_csv(&table, &mut buf)?;
    manifest.write(&out, &format!("{label}_signals.csv"), &buf)?;
    let mut buf = Vec::new();
    dj::write_spectrum_csv(&spectra, &mut buf)?;
    manifest.write(&out, &format!("{label}_spectra.csv"), &buf)?;
    let report = verdict_report(&label, a, &table, &verdict);
    manifest.write(&out, &format!("{label}_verdict.json"), &json(&report)?)?;
    manifest.save(&out)?;

    for set in 1..=3u8 {
        let cells: Vec<String> = table
            .set_amplitudes(set)
            .iter()
            .map(|x| x.map_or_else(|| "     -".to_string(), |v| format!("{v:+.3}")))
            .collect();
        println!("set {set}: {}", cells.join(" "));
    }
    let deciding: Vec<String> = report.deciding_spins.iter().map(usize::to_string).collect();
    println!(
        "verdict: {:?}{}",
        verdict.kind,
        if deciding.is_empty() { String::new() } else { format!(" (spins {})", deciding.join(", ")) }
    );
    Ok(0)
}

fn spectrum(cli: &Cli, system: &SpinSystem, a: &SpectrumArgs) -> Result<u8> {
    let expr = match a.state.strip_prefix('@') {
        Some(path) => std::fs::read_to_string(path).map_err(|e| Usage(format!("cannot read state file `{path}`: {e}")))?,
        None => a.state.clone(),
    };
    let terms = spinforge::algebra::parse_terms(expr.trim())?;
    let state = SpinState::from_terms(system.n(), &terms)?;
    let k = spin_index(system, a.spin)?;
    let decoupled = a.decouple.iter().map(|&d| spin_index(system, d)).collect::<Result<Vec<_>>>()?;
    let sticks = spinforge::sim::stick_spectrum(&state, k, &decoupled, system)?;

    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["offset_hz", "re", "im"])?;
    for s in &sticks {
        w.write_record([
            format!("{:.6}", s.offset),
            format!("{:.12}", s.amplitude.re),
            format!("{:.12}", s.amplitude.im),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| anyhow::anyhow!("{e}"))?;
    if let Some(out) = &cli.out {
        let mut manifest = RunManifest::new(cli.system.as_deref(), "spectrum", cli.seed);
        manifest.check_inputs(&[], out)?;
        manifest.option("state", &a.state);
        manifest.option("spin", a.spin);
        manifest.option("decouple", &a.decouple);
        manifest.write(out, &format!("spectrum_spin{}.csv", a.spin), &bytes)?;
        manifest.save(out)?;
    }
    print!("{}", String::from_utf8_lossy(&bytes));
    Ok(0)
}

fn sweep(cli: &Cli, system: &SpinSystem, a: &SweepArgs) -> Result<u8> {
    let exec = if a.sequential { Execution::Sequential } else { Execution::Parallel };
    let report = dj::exhaustive_sweep(system, a.threshold, exec)?;
    if let Some(out) = &cli.out {
        let mut manifest = RunManifest::new(cli.system.as_deref(), "sweep", cli.seed);
        manifest.check_inputs(&[], out)?;
        manifest.option("threshold", a.threshold);
        manifest.option("sequential", a.sequential);
        manifest.write(out, "sweep.json", &json(&report)?)?;
        manifest.save(out)?;
    }
    println!(
        "functions: {} ({} constant, {} balanced)",
        report.functions, report.constant, report.balanced
    );
    println!("correct:   {}", report.correct);
    println!(
        "evaluations per term: {} (classical worst case {})",
        report.evaluations_per_term, report.classical_worst_case
    );
    for f in &report.misclassified {
        println!("misclassified: {f}");
    }
    Ok(if report.misclassified.is_empty() { 0 } else { 1 })
}

fn json<T: Serialize>(v: &T) -> Result<Vec<u8>> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    Ok(s.into_bytes())
}
