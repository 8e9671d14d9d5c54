mod commands;
mod config;
mod error;
mod inputs;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{area, candidates, evaluate, loss, refine, synth};
use config::{Overrides, RunConfig, DEFAULTS_HELP};
use error::CliResult;

/// Safe landing zone estimation from depth, normals and segmentation
#[derive(Debug, Parser)]
#[command(name = "slz", version, after_help = DEFAULTS_HELP)]
struct Cli {
    #[command(flatten)]
    overrides: Overrides,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Metric area of safe regions
    Area(area::AreaArgs),
    Candidates(candidates::CandidatesArgs),
    Evaluate(evaluate::EvaluateArgs),
    #[command(name = "refine-demo")]
    RefineDemo(refine::RefineArgs),
    Loss(loss::LossArgs),
    Synth(synth::SynthArgs),
}

fn dispatch(cli: &Cli) -> CliResult {
    let cfg = RunConfig::resolve(&cli.overrides)?;
    match &cli.command {
        Command::Area(a) => area::run(a, &cfg),
        Command::Candidates(a) => candidates::run(a, &cfg),
        Command::Evaluate(a) => evaluate::run(a),
        Command::RefineDemo(a) => refine::run(a, &cfg),
        Command::Loss(a) => loss::run(a, &cfg),
        Command::Synth(a) => synth::run(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(error::EXIT_INPUT)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code)
        }
    }
}
