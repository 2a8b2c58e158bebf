use clap::{Args, Parser, Subcommand};
use histvar_cli::commands::{run, Command, Options};
use std::path::PathBuf;
use std::process::ExitCode;

/// Optimal history variables for linear hereditary laws.
#[derive(Parser)]
#[command(name = "histvar", version)]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Singular values of S_M over a sweep of basis sizes.
    Spectrum(Common),
    /// Assemble S_M and write rank-N models.
    Identify(Common),
    /// Run strain programs through identified or stored models.
    Predict(Common),
    /// Generate the RVE, its histograms and basis responses.
    Rve(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Output directory, overriding `output_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Model file: read by `predict`, written by `identify`.
    #[arg(long)]
    model: Option<PathBuf>,
    /// RVE at 4³ grains, 8³ elements, m = 20, T = 5.
    #[arg(long)]
    paper_scale: bool,
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (cmd, c) = match cli.command {
        Sub::Spectrum(c) => (Command::Spectrum, c),
        Sub::Identify(c) => (Command::Identify, c),
        Sub::Predict(c) => (Command::Predict, c),
        Sub::Rve(c) => (Command::Rve, c),
    };
    let opts = Options {
        config: c.config,
        out: c.out,
        model: c.model,
        paper_scale: c.paper_scale,
        seed: c.seed,
    };
    match run(cmd, &opts) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("histvar: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
