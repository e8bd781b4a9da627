use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod output;

/// Cost estimation and bit-level simulation for SOT-MRAM in-memory
/// floating-point arithmetic.
#[derive(Debug, Parser)]
#[command(name = "sotpim", version)]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub cmd: Cmd,
}

#[derive(Debug, Args)]
pub struct Global {
    /// Calibration JSON; the bundled file is used when omitted.
    #[arg(long, global = true)]
    pub calibration: Option<PathBuf>,
    /// Float layout as `<n_e>,<n_m>`.
    #[arg(long, global = true, default_value = "8,23")]
    pub layout: String,
    /// Swap in the fast-MRAM switching time.
    #[arg(long, global = true)]
    pub fast_mram: bool,
    #[arg(long, global = true, default_value_t = 1)]
    pub seed: u64,
    /// Output directory, created if missing.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum Cmd {
    /// Closed-form add, mul and MAC costs against the baseline.
    Cost,
    /// Random bit-level MACs checked against the reference model.
    SimulateMac(SimulateMacArgs),
    /// Training cost of a network, normalized to the baseline.
    EstimateTrain(EstimateTrainArgs),
    /// Train a tiny MLP with every operation on the simulated array.
    TrainTiny(TrainTinyArgs),
    /// Simulated add and mul costs against the closed forms.
    Reconcile(ReconcileArgs),
}

#[derive(Debug, Args)]
pub struct SimulateMacArgs {
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    /// Write the micro-op trace of the first MAC to trace.csv.
    #[arg(long)]
    pub trace: bool,
    /// Flip one result cell after MAC number K (test hook).
    #[arg(long, value_name = "K")]
    pub inject_fault: Option<usize>,
}

#[derive(Debug, Args)]
pub struct EstimateTrainArgs {
    /// Preset name or path to a network JSON.
    #[arg(long, default_value = "lenet5")]
    pub net: String,
    #[arg(long, default_value_t = 64)]
    pub batch: u64,
    #[arg(long, default_value_t = 1000)]
    pub steps: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Backend {
    Pim,
    Reference,
}

#[derive(Debug, Args)]
pub struct TrainTinyArgs {
    #[arg(default_value = "xor-mlp")]
    pub preset: String,
    #[arg(long, default_value_t = 500)]
    pub epochs: u32,
    #[arg(long, default_value_t = 0.1)]
    pub lr: f64,
    #[arg(long, value_enum, default_value_t = Backend::Pim)]
    pub backend: Backend,
}

#[derive(Debug, Args)]
pub struct ReconcileArgs {
    /// Random operand pairs per operation.
    #[arg(long, default_value_t = 500)]
    pub n: usize,
}

/// Failure carrying the process exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub msg: String,
}

pub const EXIT_VERIFY: u8 = 1;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_DIVERGED: u8 = 3;

impl Failure {
    pub fn new(code: u8, msg: impl Into<String>) -> Self {
        Failure { code, msg: msg.into() }
    }
}

impl From<sotpim::Error> for Failure {
    fn from(e: sotpim::Error) -> Self {
        Failure::new(EXIT_CONFIG, e.to_string())
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::new(EXIT_CONFIG, format!("{e:#}"))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("sotpim: {}", f.msg);
            ExitCode::from(f.code)
        }
    }
}
