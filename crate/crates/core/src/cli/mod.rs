//! The `mbar` command line.

pub mod commands;
pub mod config;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::error::{Error, Result};

pub use commands::{cmd_dataset, cmd_entangle, cmd_gram, cmd_scaling, cmd_train, write_atomic};
pub use config::RunConfig;

#[derive(Debug, Parser)]
#[command(name = "mbar", version, about = "Kerr qubit + multimode resonator simulation and quantum-kernel experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// JSON run configuration (MHz, us); defaults apply when absent.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory; overrides `out_dir` from the configuration.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads for simulation and training.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// First training seed; the configured seed count is kept.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Fidelity and entanglement trajectories after the resonant pulses.
    Entangle,
    /// Labeled mesh datasets for each Kerr strength.
    Dataset,
    /// Quantum Gram matrices over the datasets.
    Gram,
    /// Tuned quantum-kernel and RBF SVM accuracies.
    Train,
    /// Wall-clock cost of one kernel entry versus system size.
    Scaling,
    /// Prints the default configuration.
    Config,
}

/// Resolves configuration and output directory, then runs the command.
pub fn run(cli: &Cli) -> Result<Vec<PathBuf>> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.override_seed(seed);
    }
    if cli.command == Command::Config {
        println!("{}", serde_json::to_string_pretty(&cfg)?);
        return Ok(Vec::new());
    }
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(Error::Config("--threads must be >= 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    }
    let out = cli.out.clone().or_else(|| cfg.out_dir.clone()).unwrap_or_else(|| PathBuf::from("out"));
    cfg.out_dir = Some(out.clone());
    std::fs::create_dir_all(&out)?;
    match cli.command {
        Command::Entangle => cmd_entangle(&cfg, &out),
        Command::Dataset => cmd_dataset(&cfg, &out),
        Command::Gram => cmd_gram(&cfg, &out),
        Command::Train => cmd_train(&cfg, &out),
        Command::Scaling => cmd_scaling(&cfg, &out),
        Command::Config => unreachable!(),
    }
}

/// Entry point for the binary; returns the process exit code.
pub fn main() -> i32 {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn arguments_parse() {
        Cli::command().debug_assert();
        let cli = Cli::try_parse_from(["mbar", "train", "--out", "x", "--threads", "2", "--seed", "5"]).unwrap();
        assert_eq!(cli.command, Command::Train);
        assert_eq!(cli.threads, Some(2));
        assert_eq!(cli.seed, Some(5));
        assert!(Cli::try_parse_from(["mbar", "fly"]).is_err());
    }
}
