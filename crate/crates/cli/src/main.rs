use std::process::ExitCode;

use clap::{Parser, Subcommand};
use psp_ns::commands::{self, AblateArgs, PrepareArgs, SynthArgs, TrainArgs};

/// Positive-sample-pair construction and BPR training for implicit feedback.
#[derive(Parser)]
#[command(name = "pspns", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load an interaction file, split it and write the binary cache.
    Prepare(PrepareArgs),
    /// Generate a planted-block dataset with noise and ground truth.
    Synth(SynthArgs),
    /// Build the pair table, train, and evaluate on the test split.
    Train(TrainArgs),
    /// Run a grid of variants over several seeds.
    Ablate(AblateArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (name, outcome) = match &cli.command {
        Command::Prepare(a) => ("prepare", commands::prepare(a)),
        Command::Synth(a) => ("synth", commands::synth(a)),
        Command::Train(a) => ("train", commands::train(a).map(|run| run.summary())),
        Command::Ablate(a) => (
            "ablate",
            commands::ablate(a, &mut |line| eprintln!("{line}")).map(|table| table.to_tsv()),
        ),
    };
    match outcome {
        Ok(text) => {
            println!("{}", text.trim_end());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("pspns {name}: error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
