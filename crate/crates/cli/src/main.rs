//! `divrec`: train a matrix-factorization recommender, score its top-k lists,
//! re-rank them to a per-user diversity floor, and sweep that floor across a
//! grid, writing every artifact as deterministic CSV or a versioned binary.

mod commands;
mod config;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "divrec",
    version,
    about = "Diversity-aware matrix-factorization recommender"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a factor model and write the artifact plus a training log.
    Train(commands::TrainArgs),
    /// Score a trained model's plain top-k lists for relevance and diversity.
    Evaluate(commands::EvaluateArgs),
    /// Re-rank each user's list until it clears the diversity floor.
    Diversify(commands::DiversifyArgs),
    /// Sweep the diversity floor across a grid; write report and exposure CSVs.
    Sweep(commands::SweepArgs),
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train(args) => commands::run_train(args),
        Command::Evaluate(args) => commands::run_evaluate(args),
        Command::Diversify(args) => commands::run_diversify(args),
        Command::Sweep(args) => commands::run_sweep(args),
    };
    if let Err(err) = result {
        eprintln!("error: {err:#}");
        std::process::exit(1);
    }
}
