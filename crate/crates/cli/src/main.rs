//! `tegnas`: score architectures, run searches, export landscapes and
//! analyze indicator/accuracy agreement.

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tegnas::netgen::SpaceKind;
use tegnas::search::Method;

use crate::error::CliError;

#[derive(Parser)]
#[command(name = "tegnas", version, about = "Training-free architecture search")]
struct Cli {
    /// Worker threads; defaults to the number of cores. Results do not depend on it.
    #[arg(long, global = true, env = "TEGNAS_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

/// Options shared by every command.
#[derive(Args, Clone, Default)]
pub struct Common {
    /// TOML run config; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_parser = parse_space)]
    pub space: Option<SpaceKind>,
    /// Seed for the command's randomness (see each command).
    #[arg(long)]
    pub seed: Option<u64>,
}

fn parse_space(s: &str) -> Result<SpaceKind, String> {
    match s {
        "cell201" => Ok(SpaceKind::Cell201),
        "graph101" => Ok(SpaceKind::Graph101),
        "toy" => Ok(SpaceKind::Toy),
        _ => Err(format!("unknown space `{s}` (cell201, graph101, toy)")),
    }
}

fn parse_pair(s: &str) -> Result<[u64; 2], String> {
    let v: Vec<u64> = s
        .split(',')
        .map(|p| p.trim().parse().map_err(|e| format!("`{p}`: {e}")))
        .collect::<Result<_, _>>()?;
    <[u64; 2]>::try_from(v).map_err(|v| format!("expected two seeds, got {}", v.len()))
}

#[derive(Subcommand)]
enum Command {
    /// Print indicator reports as JSON lines. `--seed` sets the indicator base seed.
    Score {
        #[command(flatten)]
        common: Common,
        /// Architecture string. Omit with `--all`.
        arch: Option<String>,
        /// Score every architecture of an enumerable space.
        #[arg(long, conflicts_with = "arch")]
        all: bool,
        #[arg(long)]
        repeats: Option<usize>,
        /// Write to this file instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a search and write its artifacts. `--seed` sets the search seed.
    Search {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        method: Option<Method>,
        #[arg(long)]
        hard_cap: Option<usize>,
        #[arg(long)]
        repeats: Option<usize>,
        /// Output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Spawn two children from a run's checkpoint and export the landscape.
    Landscape {
        /// Directory written by `search`.
        #[arg(long)]
        run: PathBuf,
        #[arg(long)]
        spawn_step: usize,
        /// Two child seeds, e.g. `1,2`.
        #[arg(long, value_parser = parse_pair)]
        child_seeds: [u64; 2],
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        grid: Option<usize>,
        #[arg(long)]
        interp: Option<usize>,
        /// Defaults to `<run>/landscape_<spawn_step>`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Exclusive subsets, preferences and (with `--bench`) Kendall taus.
    Analyze {
        #[command(flatten)]
        common: Common,
        /// Indicator reports as written by `score`.
        #[arg(long)]
        reports: PathBuf,
        /// Accuracy table `arch,train_acc,test_acc`.
        #[arg(long)]
        bench: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train every architecture of an enumerable space and write an accuracy table.
    /// `--seed` is the first training seed.
    BenchTrain {
        #[command(flatten)]
        common: Common,
        /// Training runs averaged per architecture.
        #[arg(long, default_value_t = 1)]
        seeds: u64,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(e.to_string()))?;
    }
    match cli.command {
        Command::Score {
            common,
            arch,
            all,
            repeats,
            out,
        } => commands::score(&common, arch.as_deref(), all, repeats, out.as_deref()),
        Command::Search {
            common,
            method,
            hard_cap,
            repeats,
            out,
        } => commands::search(&common, method, hard_cap, repeats, out),
        Command::Landscape {
            run,
            spawn_step,
            child_seeds,
            steps,
            grid,
            interp,
            out,
        } => commands::landscape(&run, spawn_step, child_seeds, steps, grid, interp, out),
        Command::Analyze {
            common,
            reports,
            bench,
            out,
        } => commands::analyze(&common, &reports, bench.as_deref(), out.as_deref()),
        Command::BenchTrain {
            common,
            seeds,
            epochs,
            out,
        } => commands::bench_train(&common, seeds, epochs, out.as_deref()),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("tegnas: {e}");
            e.exit_code()
        }
    }
}
