//! `tracklab <subcommand> --config <path> [--set key=value ...] --out <dir>`

mod config;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;

use run::{Command, Output};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] tracklab::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Parser, Debug)]
#[command(name = "tracklab", version, about = "Tipping and tracking in scalar nonautonomous ODEs")]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    #[arg(long)]
    config: PathBuf,
    /// Override a config leaf by dotted path, e.g. `mechanism.path.c=0.99`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let start = Instant::now();
    let cfg = match config::load(&cli.config, &cli.set) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("tracklab: {e}");
            return ExitCode::from(1);
        }
    };
    if cfg.experiment.threads > 0 {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.experiment.threads)
            .build_global();
    }
    let mut out = match Output::new(&cli.out) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("tracklab: {e}");
            return ExitCode::from(1);
        }
    };
    let code = match run::execute(cli.command, &cfg, &mut out) {
        Ok(()) if out.indeterminate => {
            eprintln!("tracklab: indeterminate result, see outputs");
            2
        }
        Ok(()) => 0,
        Err(CliError::Core(e @ tracklab::Error::Indeterminate(_))) => {
            eprintln!("tracklab: {e}");
            2
        }
        Err(e) => {
            eprintln!("tracklab: {e}");
            1
        }
    };
    if let Err(e) = out.manifest(&cfg, cli.command, start.elapsed().as_secs_f64(), code) {
        eprintln!("tracklab: cannot write manifest: {e}");
        return ExitCode::from(1);
    }
    ExitCode::from(code as u8)
}
