//! `roughnas` command-line driver.
//!
//! Exit codes: 0 success, 1 configuration or usage error, 2 data error,
//! 3 runtime failure (divergence, numerical breakdown).

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use roughnas::{Error, ErrorClass};

#[derive(Debug, Parser)]
#[command(name = "roughnas", version, about = "Architecture search and two-stage training for tabular regression")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Options shared by the commands that read a config and a dataset.
#[derive(Debug, Args)]
pub struct Common {
    /// Pipeline config (JSON); defaults apply when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Input CSV with a header row.
    #[arg(long)]
    pub data: PathBuf,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Master seed; overrides the config.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Target column name; defaults to the last column.
    #[arg(long)]
    pub target_column: Option<String>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Full pipeline: augmentation, search, both training stages, evaluation.
    Run(Common),
    /// Re-runs the pipeline once per value of one parameter.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// `poly_order` or `acquisition`.
        #[arg(long)]
        param: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
    },
    /// Appends VAE-generated rows to a dataset.
    Augment(Common),
    /// Architecture search only; writes the winning spec and the trace.
    Search(Common),
    /// Both training stages for a given architecture.
    Train {
        #[command(flatten)]
        common: Common,
        /// Spec JSON as written by `search` (or a bare architecture object).
        #[arg(long)]
        spec: PathBuf,
    },
    /// Predictions of a trained artifact on a features-only CSV.
    Predict {
        #[arg(long)]
        artifact: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Metrics of an artifact on labelled data, or of a `y,yhat` CSV.
    Evaluate {
        #[arg(long)]
        artifact: Option<PathBuf>,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        target_column: Option<String>,
    },
    /// Classical regressor on the pipeline's split, or on an explicit test file.
    Baseline {
        #[command(flatten)]
        common: Common,
        /// lr, ridge, lasso, enr, knn or gpr.
        #[arg(long)]
        algo: String,
        /// Labelled test CSV; when given, the model is fit on all of `--data`.
        #[arg(long)]
        test: Option<PathBuf>,
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        k: Option<usize>,
    },
}

/// An error carrying its process exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        Self { code: 1, message: message.into() }
    }

    pub fn data(message: impl Into<String>) -> Self {
        Self { code: 2, message: message.into() }
    }

    pub fn runtime(message: impl Into<String>) -> Self {
        Self { code: 3, message: message.into() }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e.class() {
            ErrorClass::Config => 1,
            ErrorClass::Data => 2,
            ErrorClass::Runtime => 3,
        };
        Self { code, message: e.to_string() }
    }
}

fn dispatch(cmd: Command) -> Result<(), CliError> {
    match cmd {
        Command::Run(c) => commands::run(&c),
        Command::Sweep { common, param, values } => commands::sweep(&common, &param, &values),
        Command::Augment(c) => commands::augment(&c),
        Command::Search(c) => commands::search(&c),
        Command::Train { common, spec } => commands::train(&common, &spec),
        Command::Predict { artifact, data, out } => commands::predict(&artifact, &data, &out),
        Command::Evaluate {
            artifact,
            data,
            out,
            target_column,
        } => commands::evaluate(artifact.as_deref(), &data, &out, target_column.as_deref()),
        Command::Baseline {
            common,
            algo,
            test,
            lambda,
            alpha,
            k,
        } => commands::baseline(&common, &algo, test.as_deref(), lambda, alpha, k),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let first = e.to_string();
            let line = first.lines().next().unwrap_or("invalid usage").trim_start_matches("error: ");
            eprintln!("roughnas: error: {line}");
            return ExitCode::from(1);
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("roughnas: error: {}", e.message.replace('\n', " "));
            ExitCode::from(e.code)
        }
    }
}
