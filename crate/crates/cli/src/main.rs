use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;
mod output;

#[derive(Debug, Parser)]
#[command(name = "midecode", version, about = "Motor-imagery onset/offset decoding toolkit", arg_required_else_help = true)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct GlobalArgs {
    /// Session directory.
    #[arg(long, global = true)]
    session: Option<PathBuf>,
    /// JSON configuration (pipeline config; synth config for `synth`).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Decoding task; both tasks when omitted.
    #[arg(long, global = true, value_enum)]
    task: Option<TaskArg>,
    /// Classifier pipeline (`train` defaults to dlda).
    #[arg(long, global = true, value_enum)]
    pipeline: Option<PipelineArg>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Overrides the seed of the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Leave the wall-clock time out of the provenance.
    #[arg(long, global = true)]
    no_timestamp: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum TaskArg {
    Onset,
    Offset,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PipelineArg {
    Dlda,
    Mdm,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic session and its ground truth.
    Synth {
        /// Make half of each run's trials control trials.
        #[arg(long)]
        control: bool,
    },
    /// Band-pass, EOG-regress and re-reference every run.
    Preprocess,
    /// Write the spectral feature matrix.
    Features,
    /// Trial-averaged spectrogram of one channel.
    Spectrogram {
        #[arg(long)]
        channel: Option<String>,
        /// Express power as log10 ratio to the rest baseline.
        #[arg(long)]
        erd: bool,
    },
    /// Fit a model on every run of the session.
    Train,
    /// Leave-one-run-out cross-validation (dLDA).
    EvalOffline,
    /// Causal replay of every run with the MDM pipeline.
    EvalPseudoOnline,
    /// Test-vs-control spectral contrast using the ground truth.
    Contrast {
        #[arg(long)]
        channel: Option<String>,
    },
    /// Collect eval_*.json results into a summary.
    Report {
        /// Directory holding the evaluation results (default: --out).
        #[arg(long)]
        input: Option<PathBuf>,
    },
}

#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct UsageError(pub String);

fn error_line(kind: &str, message: &str) -> String {
    serde_json::json!({ "error": { "kind": kind, "message": message } }).to_string()
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("MIDECODE_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = e.print();
                    ExitCode::SUCCESS
                }
                ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand | ErrorKind::MissingSubcommand => {
                    let _ = e.print();
                    ExitCode::from(2)
                }
                _ => {
                    let _ = e.print();
                    let msg = e.render().to_string();
                    let first = msg.lines().next().unwrap_or("invalid arguments").trim_start_matches("error: ");
                    eprintln!("{}", error_line("usage", first));
                    ExitCode::from(2)
                }
            };
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let (kind, code) = if e.is::<UsageError>() {
                ("usage", 2)
            } else if let Some(core) = e.downcast_ref::<mi_core::Error>() {
                (core.kind(), 1)
            } else {
                ("cli", 1)
            };
            let mut message = String::new();
            for part in e.chain().map(|c| c.to_string()) {
                if !message.contains(&part) {
                    if !message.is_empty() {
                        message.push_str(": ");
                    }
                    message.push_str(&part);
                }
            }
            log::debug!("{kind}: {message}");
            eprintln!("{}", error_line(kind, &message));
            ExitCode::from(code)
        }
    }
}
