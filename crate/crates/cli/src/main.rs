//! `airy-edge`: reproducible experiments on finite-N edge kernels, gap
//! probabilities and sampled largest eigenvalues.

mod commands;
mod config;
mod error;

use clap::{Parser, Subcommand};

use config::{Flags, RunConfig};

#[derive(Parser)]
#[command(name = "airy-edge", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    flags: Flags,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Recurrence coefficients `j, a_j, b_j`.
    Recurrence,
    /// Edge scaling constants for N or an N ladder.
    Scaling,
    /// Edge-scaled finite-N kernel and its limit on a grid.
    Kernel,
    /// Sup errors against the limit kernels along an N ladder.
    Converge,
    /// Finite-N and limiting largest-eigenvalue distributions on a grid.
    Gap,
    /// Limiting distributions with order-doubling error estimates.
    Tw,
    /// Metropolis samples of the eigenvalues.
    Sample,
    /// Markdown report over the artifacts in the output directory.
    Report,
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = RunConfig::resolve(&cli.flags).and_then(|cfg| match cli.command {
        Command::Recurrence => commands::recurrence(&cfg),
        Command::Scaling => commands::scaling(&cfg),
        Command::Kernel => commands::kernel(&cfg),
        Command::Converge => commands::converge(&cfg),
        Command::Gap => commands::gap(&cfg),
        Command::Tw => commands::tw(&cfg),
        Command::Sample => commands::sample_cmd(&cfg),
        Command::Report => commands::report(&cfg),
    });
    if let Err(e) = result {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
