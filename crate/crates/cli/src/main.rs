use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use qdnls_cli::commands::{self, Context};
use qdnls_cli::CliError;

#[derive(Parser)]
#[command(name = "qdnls", version, about = "Null-structure checks and simulations for quadratic derivative NLS systems")]
struct Cli {
    /// Scenario file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output / run directory (overrides the scenario's `output`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for random-field data (overrides the scenario's `seed`).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for data-parallel sweeps.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Decide the null condition and print the symbols.
    CheckNull,
    /// Print the null-form decomposition of a null tensor.
    Decompose,
    /// Integrate the scenario and write a run directory.
    Simulate,
    /// Run the identity sweep and write residuals.
    Identities,
    /// Fit the decay of a run's sup norm or nonlinearity.
    Decay,
    /// Measure convergence to a free profile.
    Scatter,
    /// Effective lifespan over a list of amplitudes.
    Lifespan,
    /// Compare a null and a non-null run.
    Contrast,
}

fn run(cli: &Cli) -> Result<i32, CliError> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("--threads: {e}")))?;
    }
    let config = cli.config.as_ref().ok_or_else(|| CliError::Config("--config PATH is required".into()))?;
    let ctx = Context::load(config, cli.out.as_deref(), cli.seed)?;
    let report = match cli.command {
        Command::CheckNull => commands::check_null(&ctx)?,
        Command::Decompose => commands::decompose(&ctx)?,
        Command::Simulate => commands::simulate(&ctx)?,
        Command::Identities => commands::identities(&ctx)?,
        Command::Decay => commands::decay(&ctx)?,
        Command::Scatter => commands::scatter(&ctx)?,
        Command::Lifespan => commands::lifespan(&ctx)?,
        Command::Contrast => commands::contrast(&ctx)?,
    };
    print!("{}", report.text);
    for f in &report.failures {
        eprintln!("check failed: {f}");
    }
    if let Some(why) = &report.interrupted {
        eprintln!("run interrupted: {why}");
    }
    Ok(report.exit_code())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
