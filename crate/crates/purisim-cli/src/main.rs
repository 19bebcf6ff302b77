//! Command-line front end for the purification simulator.
//!
//! Four subcommands cover the workflows: `simulate` (seeded Monte Carlo runs
//! or deterministic replays, entropy traces + summary), `closed-form`
//! (posterior state of a whole detection history), `cat-sweep` (stationary
//! bounds and efficiency thresholds over parameter grids), and
//! `oracle-verify` (brute-force network contraction against the engine).
//!
//! Exit codes: 0 success, 1 validation error, 2 verification failure.

mod cat_sweep;
mod closed_form;
mod common;
mod oracle_verify;
mod simulate;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "purisim",
    version,
    about = "Iterative random purification of truncated multi-mode mixtures"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run seeded purification trajectories and emit entropy traces.
    Simulate(SimulateArgs),
    /// Evaluate the posterior state of a whole detection history.
    ClosedForm(ClosedFormArgs),
    /// Tabulate stationary bounds and efficiency thresholds.
    CatSweep(CatSweepArgs),
    /// Cross-check the index-level engine against the network contraction.
    OracleVerify(OracleVerifyArgs),
}

#[derive(Debug, Args)]
pub(crate) struct SimulateArgs {
    /// Explicit source weights, e.g. "0.75,0.25".
    #[arg(long)]
    pub(crate) source: Option<String>,
    /// Source preset: fig2 | geometric:RATIO,M | uniform:M.
    #[arg(long)]
    pub(crate) preset: Option<String>,
    #[arg(long, default_value_t = 0)]
    pub(crate) seed: u64,
    #[arg(long, default_value_t = 1)]
    pub(crate) runs: usize,
    #[arg(long = "max-steps", default_value_t = 1000)]
    pub(crate) max_steps: usize,
    /// Purity threshold that stops a run; 1.0 stops only on exact purity.
    #[arg(long = "stop-purity", default_value_t = 1.0 - 1e-9)]
    pub(crate) stop_purity: f64,
    /// Detection granularity: full | binary.
    #[arg(long)]
    pub(crate) mode: Option<String>,
    /// Replay this event record instead of sampling (full mode: integers;
    /// binary mode: zero/notzero tokens).
    #[arg(long)]
    pub(crate) record: Option<String>,
    /// Worker threads for multi-run simulations.
    #[arg(long, default_value_t = 1)]
    pub(crate) workers: usize,
    /// Trace output file; the summary lands next to it as *.summary.json.
    #[arg(long)]
    pub(crate) out: PathBuf,
    /// Trace format: csv | jsonl.
    #[arg(long, default_value = "csv")]
    pub(crate) format: String,
}

#[derive(Debug, Args)]
pub(crate) struct ClosedFormArgs {
    #[arg(long)]
    pub(crate) source: Option<String>,
    #[arg(long)]
    pub(crate) preset: Option<String>,
    /// Detection granularity the counts refer to: full | binary.
    #[arg(long, default_value = "full")]
    pub(crate) mode: String,
    /// Full mode: per-outcome counts "s0,...,sM". Binary mode: "J,Q".
    #[arg(long)]
    pub(crate) counts: String,
    #[arg(long)]
    pub(crate) out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub(crate) struct CatSweepArgs {
    /// Source purity grid: comma list or start:stop:count.
    #[arg(long = "r-grid")]
    pub(crate) r_grid: String,
    /// Feedback efficiency grid: comma list or start:stop:count.
    #[arg(long = "etaF-grid")]
    pub(crate) eta_f_grid: String,
    /// Stationary-bound shortfall for the required-efficiency column.
    #[arg(long, default_value_t = 0.01)]
    pub(crate) epsilon: f64,
    #[arg(long)]
    pub(crate) out: Option<PathBuf>,
    /// Table format: csv | jsonl.
    #[arg(long, default_value = "csv")]
    pub(crate) format: String,
}

#[derive(Debug, Args)]
pub(crate) struct OracleVerifyArgs {
    /// Truncation orders to verify, comma list.
    #[arg(long = "M", default_value = "1,2")]
    pub(crate) truncations: String,
    /// Mode counts to verify, comma list.
    #[arg(long = "N", default_value = "1,2")]
    pub(crate) modes: String,
    /// Per-mode Fock cutoff; defaults to 2(M+1) per case.
    #[arg(long)]
    pub(crate) cutoff: Option<usize>,
    #[arg(long, default_value_t = 20)]
    pub(crate) trials: usize,
    #[arg(long, default_value_t = 7)]
    pub(crate) seed: u64,
    #[arg(long)]
    pub(crate) out: Option<PathBuf>,
    /// Negative control: skip the engine-side renormalization so the
    /// comparison must fail.
    #[arg(long = "skip-renormalization", hide = true, default_value_t = false)]
    pub(crate) skip_renormalization: bool,
}

/// Whether a successfully executed command vouches for its checks.
pub(crate) enum Outcome {
    Success,
    VerificationFailed,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // Help and version are not validation errors.
            if matches!(
                err.kind(),
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion
            ) {
                let _ = err.print();
                return ExitCode::SUCCESS;
            }
            let _ = err.print();
            return ExitCode::from(1);
        }
    };
    let result = match cli.command {
        Command::Simulate(args) => simulate::run(&args),
        Command::ClosedForm(args) => closed_form::run(&args),
        Command::CatSweep(args) => cat_sweep::run(&args),
        Command::OracleVerify(args) => oracle_verify::run(&args),
    };
    match result {
        Ok(Outcome::Success) => ExitCode::SUCCESS,
        Ok(Outcome::VerificationFailed) => ExitCode::from(2),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}
