mod commands;
mod config;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use msms_core::codec::CodecKind;
use msms_core::monitor::{ReadPolicy, Strategy};
use msms_core::sim::{CostFormula, PriorityMode};

/// Exit status when the attack scenario flipped victim data undetected.
pub const EXIT_ATTACK_SUCCEEDED: u8 = 2;

#[derive(Debug, Parser)]
#[command(name = "msms", version, about = "Priority-flagged memory integrity simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the detection/overhead experiment and write CSV, JSON and a manifest.
    Simulate(SimulateArgs),
    /// Print the normalized time/space cost table.
    CostModel(CostModelArgs),
    /// Run the dedup-then-hammer scenario against one victim word.
    Attack(AttackArgs),
    /// Verify the audit hash chain in a state dump.
    Audit(AuditArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// key=value config file; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Number of simulated operations.
    #[arg(long)]
    pub n: Option<u64>,
    /// Word width in bits.
    #[arg(long)]
    pub width: Option<u32>,
    /// Probability that an operation is priority-classified.
    #[arg(long = "p-priority")]
    pub p_priority: Option<f64>,
    /// Per-operation single-bit error probability.
    #[arg(long = "error-prob")]
    pub error_prob: Option<f64>,
    /// none | enhanced | full
    #[arg(long)]
    pub strategy: Option<Strategy>,
    /// parity | berger | dup | dup:<copies> | none
    #[arg(long)]
    pub codec: Option<CodecKind>,
    /// Run seed; falls back to the config file, then MSMS_SEED.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Run all three strategies with the same seed.
    #[arg(long)]
    pub compare: bool,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Let injected faults land in the check zone too.
    #[arg(long = "inject-check-zone")]
    pub inject_check_zone: bool,
    /// bernoulli | quota
    #[arg(long = "priority-mode")]
    pub priority_mode: Option<PriorityMode>,
    /// return-unchecked | return-marked-invalid | suppress-on-invalid
    #[arg(long)]
    pub policy: Option<ReadPolicy>,
    #[arg(long = "words-per-page")]
    pub words_per_page: Option<u32>,
}

#[derive(Debug, Args)]
pub struct CostModelArgs {
    #[arg(long = "p-priority", default_value_t = 0.15)]
    pub p_priority: f64,
    #[arg(long = "time-mult", default_value_t = 3.0)]
    pub time_mult: f64,
    #[arg(long = "space-mult", default_value_t = 4.0)]
    pub space_mult: f64,
    #[arg(long = "base-time", default_value_t = 100.0)]
    pub base_time: f64,
    #[arg(long = "base-space", default_value_t = 100.0)]
    pub base_space: f64,
    /// additive | blended
    #[arg(long, default_value = "additive")]
    pub formula: CostFormula,
    /// Print JSON instead of a table.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct AttackArgs {
    /// none | enhanced | full
    #[arg(long, default_value = "none")]
    pub strategy: Strategy,
    /// Exclude the victim page from deduplication.
    #[arg(long = "protect-page", conflicts_with = "force_merge")]
    pub protect_page: bool,
    /// Priority-flag the victim word.
    #[arg(long = "priority-victim")]
    pub priority_victim: bool,
    /// Fail unless the merge step succeeds.
    #[arg(long = "force-merge")]
    pub force_merge: bool,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value = "return-marked-invalid")]
    pub policy: ReadPolicy,
    #[arg(long = "words-per-page", default_value_t = 64)]
    pub words_per_page: u32,
    /// Also write the store's state dump and the outcome here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AuditArgs {
    /// State dump written by `simulate` or `attack`.
    pub dump: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = if err.use_stderr() { 1 } else { 0 };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Simulate(args) => commands::simulate(args),
        Command::CostModel(args) => commands::cost_model(args),
        Command::Attack(args) => commands::attack(args),
        Command::Audit(args) => commands::audit(args),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}
