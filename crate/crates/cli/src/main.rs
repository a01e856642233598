//! `cpcnet`: dataset generation, auditing, training, evaluation, ablation
//! sweeps and gradient checks.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.

mod commands;
mod failure;
mod gradcheck;
mod manifest;
mod settings;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand};

use crate::failure::Failure;
use crate::settings::Settings;

#[derive(Parser, Debug)]
#[command(name = "cpcnet", about = "CPCNet on procedurally generated RAVEN-style matrices")]
struct Cli {
    /// Optional `key=value` file supplying defaults for any long flag of
    /// the chosen command (explicit flags win).
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate train/val/test RPMD files and print the train balance table.
    Generate(GenerateArgs),
    /// Print the rule×attribute balance table of an RPMD file.
    Audit(AuditArgs),
    /// Train a model; writes the best checkpoint and a CSV metric log.
    Train(TrainArgs),
    /// Single-choice evaluation of a checkpoint (or a stub scorer).
    Eval(EvalArgs),
    /// Train and test several variants on the same data and seed.
    Ablate(AblateArgs),
    /// Finite-difference gradient checks of every op and the full model.
    Gradcheck(GradcheckArgs),
}

#[derive(Args, Debug)]
pub struct GenerateArgs {
    /// ab-raven, raven, uniform or center.
    #[arg(long)]
    pub mix: Option<String>,
    #[arg(long)]
    pub train: Option<usize>,
    #[arg(long)]
    pub val: Option<usize>,
    #[arg(long)]
    pub test: Option<usize>,
    #[arg(long)]
    pub resolution: Option<u16>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct AuditArgs {
    /// RPMD file.
    #[arg(long)]
    pub data: Option<PathBuf>,
}

/// Model and optimization flags shared by `train` and `ablate`.
#[derive(Args, Debug, Clone)]
pub struct ModelArgs {
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub head_width: Option<usize>,
    /// f32 or f64.
    #[arg(long)]
    pub precision: Option<String>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub base_lr: Option<f64>,
    #[arg(long)]
    pub peak_lr: Option<f64>,
    #[arg(long)]
    pub warmup_steps: Option<u64>,
    /// Defaults to the remaining steps of the run.
    #[arg(long)]
    pub decay_steps: Option<u64>,
    /// Epochs without validation improvement before stopping; 0 disables.
    #[arg(long)]
    pub patience: Option<usize>,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Directory holding train.rpmd and val.rpmd.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub l: Option<usize>,
    /// full, UP, LP, IC, UC or LC.
    #[arg(long)]
    pub ablation: Option<String>,
    /// Also keep a checkpoint every N epochs; 0 keeps only the best.
    #[arg(long)]
    pub checkpoint_every: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub model: ModelArgs,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    /// RPMD file.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// CPCW file written by `train`; its `.cfg` sibling holds the model config.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Score the stored target 1 and everything else 0.
    #[arg(long)]
    pub oracle_stub: bool,
    /// Score with the symbolic solver.
    #[arg(long)]
    pub symbolic: bool,
}

#[derive(Args, Debug)]
pub struct AblateArgs {
    /// Directory holding train.rpmd, val.rpmd and test.rpmd.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Comma-separated variants `L` or `L:ABLATION`, e.g. `0,2,2:IC`.
    #[arg(long)]
    pub grid: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub model: ModelArgs,
}

#[derive(Args, Debug)]
pub struct GradcheckArgs {
    /// toy (under a minute) or full (ten instances per op).
    #[arg(long)]
    pub scale: Option<String>,
}

fn version() -> String {
    format!(
        "{} (RPMD format v{}, CPCW format v{})",
        env!("CARGO_PKG_VERSION"),
        rpm::dataset::VERSION,
        autodiff::checkpoint::VERSION
    )
}

fn run(cli: Cli) -> Result<(), Failure> {
    let mut settings = Settings::load(cli.config.as_deref())?;
    match cli.command {
        Command::Generate(a) => commands::generate(a, &mut settings),
        Command::Audit(a) => commands::audit(a, &mut settings),
        Command::Train(a) => commands::train(a, &mut settings),
        Command::Eval(a) => commands::eval(a, &mut settings),
        Command::Ablate(a) => commands::ablate(a, &mut settings),
        Command::Gradcheck(a) => gradcheck::run(a, &mut settings),
    }
}

fn main() -> ExitCode {
    let command = Cli::command().version(&*version().leak());
    let cli = match command.try_get_matches().and_then(|m| Cli::from_arg_matches(&m)) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(Failure::USAGE) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
