//! `liqd` — container liquid-level monitoring from frame sequences.
//!
//! Subcommands cover the full pipeline: synthesizing test corpora, damaging
//! and repairing masks, frame differencing, training and running the level
//! classifier, scoring candidate masks, and sweeping thresholds. Settings
//! resolve in order: flags, `LIQD_*` environment variables, the TOML config
//! file, defaults.

mod commands;
mod dump;
mod output;
mod settings;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::settings::{GlobalArgs, Settings};

#[derive(Parser)]
#[command(
    name = "liqd",
    version,
    about = "Liquid-level change detection for container monitoring"
)]
struct Cli {
    #[command(flatten)]
    globals: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render synthetic sequences into a corpus directory.
    Synth(commands::SynthArgs),
    /// Damage masks with holes and boundary breaks.
    Corrupt(commands::CorruptArgs),
    /// Repair masks by closing and hole filling.
    Compensate(commands::CompensateArgs),
    /// Difference two frames and report the changed band.
    Diff(commands::DiffArgs),
    /// Train the level classifier on a labeled corpus.
    Train(commands::TrainArgs),
    /// Label every frame pair of a corpus.
    Classify(commands::ClassifyArgs),
    /// Score candidate masks against a consensus map.
    ScoreMasks(commands::ScoreMasksArgs),
    /// Split scored masks into accepted and rejected sets.
    Filter(commands::FilterArgs),
    /// Chart accuracy and white-pixel rate across thresholds.
    Sweep(commands::SweepArgs),
    /// Score corpus predictions against ground truth.
    Evaluate(commands::EvaluateArgs),
    /// Run the full pipeline: records, reports, optional intermediates.
    Pipeline(commands::PipelineArgs),
}

fn run(cli: &Cli) -> anyhow::Result<()> {
    let settings = Settings::resolve(&cli.globals)?;
    match &cli.command {
        Command::Synth(args) => commands::synth(&settings, args),
        Command::Corrupt(args) => commands::corrupt(&settings, args),
        Command::Compensate(args) => commands::compensate(&settings, args),
        Command::Diff(args) => commands::diff(&settings, args),
        Command::Train(args) => commands::train_cmd(&settings, args),
        Command::Classify(args) => commands::classify(&settings, args),
        Command::ScoreMasks(args) => commands::score_masks(&settings, args),
        Command::Filter(args) => commands::filter(&settings, args),
        Command::Sweep(args) => commands::sweep(&settings, args),
        Command::Evaluate(args) => commands::evaluate_cmd(&settings, args),
        Command::Pipeline(args) => commands::pipeline(&settings, args),
    }
}

fn is_broken_pipe(err: &anyhow::Error) -> bool {
    err.chain().any(|cause| {
        cause
            .downcast_ref::<std::io::Error>()
            .is_some_and(|io| io.kind() == std::io::ErrorKind::BrokenPipe)
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) if is_broken_pipe(&err) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
