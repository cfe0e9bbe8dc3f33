use std::path::PathBuf;

use clap::{Parser, Subcommand};
use nsp_cli::{run, Command, RunConfig};

#[derive(Parser)]
#[command(
    name = "nsp",
    version,
    about = "Navier-Stokes-Poisson steady states, perturbation runs and inequality checks"
)]
struct Cli {
    #[command(subcommand)]
    command: Sub,

    /// Configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory; defaults to `[output] dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// `section.key=value` override, applied after the file.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,

    /// Seed of every random ensemble.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand, Clone, Copy)]
enum Sub {
    /// Steady state, certificates and regularity norms.
    Steady,
    /// Perturbation run with energy diagnostics and stability verdict.
    Simulate,
    /// Ensemble checks of the functional inequalities.
    VerifyInequalities,
    /// Cartesian sweep over the `[sweep]` lists.
    Sweep,
}

fn main() {
    let cli = Cli::parse();
    let Some(config_path) = cli.config else {
        eprintln!("nsp: --config <path> is required");
        std::process::exit(nsp_cli::exit::PARSE);
    };
    let command = match cli.command {
        Sub::Steady => Command::Steady,
        Sub::Simulate => Command::Simulate,
        Sub::VerifyInequalities => Command::VerifyInequalities,
        Sub::Sweep => Command::Sweep,
    };
    let code = run(&RunConfig {
        command,
        config_path,
        output_dir: cli.out,
        overrides: cli.overrides,
        seed: cli.seed,
    });
    std::process::exit(code);
}
