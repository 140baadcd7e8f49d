mod artifacts;
mod config;
mod pipeline;
mod table;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};

use config::{ConfigError, ExperimentConfig, Overrides};

/// Low-rank stochastic Galerkin eigensolver experiments.
#[derive(Debug, Parser)]
#[command(name = "sgeig", version)]
struct Cli {
    /// Upper bound on worker threads.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Suppress progress output on stderr.
    #[arg(long, short, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Stochastic Galerkin solve plus Monte Carlo error report.
    Run(Experiment),
    /// Monte Carlo reference only.
    Mc(Experiment),
    /// Low-rank and full-rank solves against one Monte Carlo reference.
    Compare(Experiment),
    /// Render artifacts of finished runs as text tables.
    Table {
        #[arg(value_enum)]
        which: table::Which,
        /// Run directories; the errors and timings tables get one column each.
        #[arg(required = true)]
        dirs: Vec<PathBuf>,
    },
}

#[derive(Debug, clap::Args)]
struct Experiment {
    /// JSON experiment description. Defaults apply without one.
    #[arg(long, short)]
    config: Option<PathBuf>,
    #[command(flatten)]
    overrides: Overrides,
}

impl Experiment {
    fn load(&self) -> Result<ExperimentConfig> {
        ExperimentConfig::load(self.config.as_deref(), &self.overrides)
    }
}

/// 2 for bad input, 3 for numerical failures, 1 for anything else.
fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<ConfigError>() {
            return 2;
        }
        if let Some(e) = cause.downcast_ref::<sgeig::Error>() {
            return if e.is_config() { 2 } else { 3 };
        }
    }
    1
}

fn execute(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(ConfigError("--threads must be positive".into()).into());
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    let verbose = !cli.quiet;
    let report = |dir: PathBuf| {
        if verbose {
            eprintln!("artifacts written to {}", dir.display());
        }
    };
    match cli.command {
        Command::Run(e) => report(pipeline::run(&e.load()?, verbose)?),
        Command::Mc(e) => report(pipeline::mc(&e.load()?, verbose)?),
        Command::Compare(e) => report(pipeline::compare_modes(&e.load()?, verbose)?),
        Command::Table { which, dirs } => print!("{}", table::table(which, &dirs)?),
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
