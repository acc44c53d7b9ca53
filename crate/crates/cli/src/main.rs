use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod config;
mod distribution;
mod labsmooth;
mod mimic;

use config::{AcceptanceFailure, UsageError};

#[derive(Parser)]
#[command(name = "contcat", version, about = "Continuous-categorical distribution toolkit and laboratories")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Options shared by every file-producing command.
#[derive(Args, Debug, Clone, serde::Serialize)]
pub struct Common {
    /// TOML file of `key = value` settings; flags take precedence.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Directory receiving the CSV outputs and manifest.json.
    #[arg(long)]
    pub output_dir: Option<String>,
    /// Worker threads (0 = one per core).
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Print `logC,condition_number,near_centroid,tie_adjusted[,nll]` for one parameter.
    CcEval(distribution::EvalArgs),
    /// Compare the normalizer against the Monte Carlo and closed-form oracles.
    CcCheck(distribution::CheckArgs),
    /// Measure cancellation in the closed-form sum across dimensions.
    ProbePrecision(distribution::ProbeArgs),
    /// Train the regularizer × loss grid on Gaussian blobs.
    LsAblate(labsmooth::AblateArgs),
    /// Project penultimate activations onto the plane of three class templates.
    LsProject(labsmooth::ProjectArgs),
    /// Distill gridworld experts into one mimic network.
    MimicTrain(mimic::TrainArgs),
    /// Score expert, uniform and (optionally) trained mimic policies.
    MimicEval(mimic::EvalArgs),
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<UsageError>() {
            return 2;
        }
        if cause.is::<AcceptanceFailure>() {
            return 4;
        }
        if let Some(e) = cause.downcast_ref::<contcat::Error>() {
            return if is_input_error(e) { 2 } else { 3 };
        }
    }
    1
}

fn is_input_error(e: &contcat::Error) -> bool {
    use contcat::Error::*;
    match e {
        AtSample { source, .. } => is_input_error(source),
        DimensionMismatch { .. }
        | InvalidSimplex(_)
        | InvalidParameter(_)
        | UntrustedDimension(_)
        | Shape(_)
        | MissingClass(_)
        | UnreachableQuota(_) => true,
        _ => false,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::CcEval(a) => distribution::cc_eval(&a),
        Command::CcCheck(a) => distribution::cc_check(&a),
        Command::ProbePrecision(a) => distribution::probe_precision(&a),
        Command::LsAblate(a) => labsmooth::ls_ablate(&a),
        Command::LsProject(a) => labsmooth::ls_project(&a),
        Command::MimicTrain(a) => mimic::mimic_train(&a),
        Command::MimicEval(a) => mimic::mimic_eval(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
