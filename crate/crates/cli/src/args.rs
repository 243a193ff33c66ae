use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(name = "spinforge", version, about = "NMR quantum computing simulator and gate compiler")]
pub struct Cli {
    /// Spin-system TOML file (default: bundled glycine fluoride).
    #[arg(long, global = true, env = "SPINFORGE_SYSTEM")]
    pub system: Option<PathBuf>,

    /// Output directory for reports and data files.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// Recorded in the run manifest.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compile a gate to a pulse sequence and report its fidelity.
    Compile(CompileArgs),
    /// Run the three Deutsch-Jozsa experiment sets and classify the result.
    RunDj(RunDjArgs),
    /// Stick spectrum of one spin for a product-operator state.
    Spectrum(SpectrumArgs),
    /// Classify every constant and balanced function exhaustively.
    Sweep(SweepArgs),
}

#[derive(Debug, Clone, Subcommand, Serialize)]
pub enum Gate {
    /// CNOT with control K and target L (1-based); routed if not adjacent.
    Cnot { k: usize, l: usize },
    Swap { k: usize, l: usize },
    /// The CNOT chain implementing the balanced function.
    BalancedChain,
}

#[derive(Debug, Args)]
pub struct CompileArgs {
    #[command(subcommand)]
    pub gate: Gate,

    /// Fidelity below which the command fails with exit code 1.
    #[arg(long, default_value_t = 0.9999, global = true)]
    pub min_fidelity: f64,

    /// Refuse any residual coupling.
    #[arg(long, global = true)]
    pub strict: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeArg {
    Ideal,
    Compiled,
}

#[derive(Debug, Args)]
pub struct RunDjArgs {
    /// `f0` or `fb`; omit when a truth table is given.
    #[arg(required_unless_present = "truth_table", conflicts_with = "truth_table")]
    pub function: Option<String>,

    /// File with the truth table as 0/1 characters, `#` comments allowed.
    #[arg(long)]
    pub truth_table: Option<PathBuf>,

    #[arg(long, value_enum, default_value_t = ModeArg::Ideal)]
    pub mode: ModeArg,

    /// Apply T2 relaxation during delays.
    #[arg(long)]
    pub relaxation: bool,

    /// Classifier threshold in (0, 0.5).
    #[arg(long, default_value_t = spinforge::dj::DEFAULT_THRESHOLD)]
    pub threshold: f64,

    /// Prepare each term from thermal equilibrium with INEPT transfers.
    #[arg(long)]
    pub full_preparation: bool,

    /// Average over the four-step phase cycle.
    #[arg(long)]
    pub phase_cycle: bool,
}

#[derive(Debug, Args)]
pub struct SpectrumArgs {
    /// Term expression such as `2*I1x*I2z`, or `@file` holding one.
    pub state: String,

    /// Observed spin (1-based).
    #[arg(long)]
    pub spin: usize,

    /// Comma-separated spins to decouple (1-based).
    #[arg(long, value_delimiter = ',')]
    pub decouple: Vec<usize>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long, default_value_t = spinforge::dj::DEFAULT_THRESHOLD)]
    pub threshold: f64,

    /// Run on one thread.
    #[arg(long)]
    pub sequential: bool,
}
