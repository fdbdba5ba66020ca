//! `tbrf`: train, apply and benchmark two-stage best-scored random forests.

mod bench;
mod commands;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tbrf::{Error, HyperParams, ScalarKind};

/// Exit status per failure class.
pub mod exit {
    pub const USAGE: u8 = 2;
    pub const IO: u8 = 3;
    pub const VALIDATION: u8 = 4;
    pub const NUMERIC: u8 = 5;
}

#[derive(Parser)]
#[command(
    name = "tbrf",
    version,
    about = "Two-stage best-scored random forest regression"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a forest on a CSV file and save it.
    Train(commands::TrainArgs),
    /// Append predictions to the rows of a CSV file.
    Predict(commands::PredictArgs),
    /// Test MSE of a saved model on a labelled CSV file.
    Evaluate(commands::EvaluateArgs),
    /// Generate the noisy sine benchmark.
    Synth(commands::SynthArgs),
    /// Sweep a hyperparameter grid and tabulate MSE and training time.
    Bench(bench::BenchArgs),
    /// Evaluate a 1-D or 2-D model on a regular grid.
    GridExport(commands::GridArgs),
}

/// Hyperparameters shared by `train` and `bench`. Unset flags keep the
/// value from `--config`, or the default.
#[derive(Args, Debug, Clone)]
pub struct ParamArgs {
    /// Flat `key = value` config file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub votes: Option<String>,
    #[arg(long)]
    pub lambda: Option<String>,
    /// constant, linear or gaussian.
    #[arg(long)]
    pub leaf_model: Option<String>,
    /// mean or one_nn.
    #[arg(long)]
    pub vacancy_fill: Option<String>,
    /// axis_parallel or oblique.
    #[arg(long)]
    pub geometry: Option<String>,
    /// penalized_risk or holdout.
    #[arg(long)]
    pub scoring: Option<String>,
    #[arg(long)]
    pub holdout_fraction: Option<String>,
    #[arg(long)]
    pub c_grid: Option<String>,
    #[arg(long)]
    pub gamma_grid: Option<String>,
    #[arg(long)]
    pub min_leaf_for_model: Option<String>,
    #[arg(long)]
    pub target_bound: Option<String>,
    #[arg(long)]
    pub seed: Option<String>,
    /// Choose stage-two leaves uniformly instead of by vote.
    #[arg(long)]
    pub pure: bool,
    /// Worker threads (default: all cores).
    #[arg(long, env = "TBRF_WORKERS")]
    pub workers: Option<usize>,
    /// Store model values as f32 instead of f64.
    #[arg(long, default_value = "f64", value_parser = parse_precision)]
    pub precision: ScalarKind,
}

fn parse_precision(s: &str) -> Result<ScalarKind, String> {
    match s {
        "f64" => Ok(ScalarKind::F64),
        "f32" => Ok(ScalarKind::F32),
        _ => Err(format!("expected f64 or f32, got {s:?}")),
    }
}

impl ParamArgs {
    /// Config file, then flags.
    pub fn resolve(&self, extra: &[(&str, Option<String>)]) -> Result<HyperParams, Error> {
        let mut params = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
                    path: path.clone(),
                    source: e,
                })?;
                HyperParams::from_config_str(&text)?
            }
            None => HyperParams::default(),
        };
        let flags = [
            ("adaptive_votes", &self.votes),
            ("lambda", &self.lambda),
            ("leaf_model", &self.leaf_model),
            ("vacancy_fill", &self.vacancy_fill),
            ("geometry", &self.geometry),
            ("scoring", &self.scoring),
            ("holdout_fraction", &self.holdout_fraction),
            ("c_grid", &self.c_grid),
            ("gamma_grid", &self.gamma_grid),
            ("min_leaf_for_model", &self.min_leaf_for_model),
            ("target_bound", &self.target_bound),
            ("master_seed", &self.seed),
        ];
        for (key, value) in flags
            .iter()
            .map(|(k, v)| (*k, *v))
            .chain(extra.iter().map(|(k, v)| (*k, v)))
        {
            if let Some(v) = value {
                params.set(key, v)?;
            }
        }
        if self.pure {
            params.stage_two_choice = tbrf::LeafChoice::Uniform;
        }
        params.validate()?;
        Ok(params)
    }

    pub fn workers(&self) -> Result<usize, Error> {
        match self.workers {
            Some(0) => Err(Error::Invalid("workers must be at least 1".into())),
            Some(w) => Ok(w),
            None => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
        }
    }
}

pub fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io { .. }
        | Error::Corrupt(_)
        | Error::Checksum { .. }
        | Error::VersionMismatch { .. } => exit::IO,
        Error::Parse { .. } | Error::Invalid(_) => exit::VALIDATION,
        Error::Numeric(_) => exit::NUMERIC,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(exit::USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Train(a) => commands::train(&a),
        Command::Predict(a) => commands::predict(&a),
        Command::Evaluate(a) => commands::evaluate(&a),
        Command::Synth(a) => commands::synth(&a),
        Command::Bench(a) => bench::bench(&a),
        Command::GridExport(a) => commands::grid_export(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("tbrf: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
