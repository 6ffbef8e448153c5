//! `tvwb`: command-line front end for tvwb-core.
//!
//! Exit codes: 0 success, 1 semantic rejection, 2 I/O or parse failure.
//! Human-readable output goes to stdout; with `--json` the run report goes
//! to stdout and the human text to stderr. `--out` writes the report to a
//! file.

mod commands;
mod error;
mod input;
mod report;

use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use tvwb_core::{Caps, Exec};

use crate::commands::{EstimateArgs, GenericArgs, Ran};
use crate::error::CliError;

#[derive(Parser)]
#[command(name = "tvwb", version, about = "Tree very weak Bernoulli toolkit")]
struct Cli {
    /// Print the JSON run report on stdout (human text moves to stderr).
    #[arg(long, global = true)]
    json: bool,
    /// Also write the JSON run report to this file.
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Run data-parallel loops on the calling thread.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// End(p) row criterion, entropy, stationary vector, irreducibility.
    CheckEndo { path: PathBuf },
    /// Decide tvwB for a Markov shift or memory-1 group extension.
    DecideTvwb { path: PathBuf },
    /// t-bar between two tree-name documents, or state distances with --states.
    Tbar {
        #[arg(num_args = 1..=2, required = true)]
        paths: Vec<PathBuf>,
        #[arg(long)]
        height: Option<usize>,
        /// Cross-check against exhaustive enumeration of the automorphisms.
        #[arg(long)]
        brute_force: bool,
        /// Treat the single input as a system and tabulate heights 1..=height.
        #[arg(long)]
        states: bool,
    },
    /// Per-height t-bar matrices between the state tree names of a system.
    StateDistance {
        path: PathBuf,
        /// Heights 1..=N.
        #[arg(long, default_value_t = 12, conflicts_with = "heights")]
        height: usize,
        /// Explicit comma-separated heights.
        #[arg(long, value_delimiter = ',')]
        heights: Option<Vec<usize>>,
    },
    /// Convex decomposition of a constant-sum matrix (or block coupling).
    Birkhoff {
        path: PathBuf,
        #[arg(long)]
        block: bool,
    },
    /// Empirical eps-hat profile over sampled point pairs.
    EstimateTvwb {
        path: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "2,4,6,8,10,12")]
        heights: Vec<usize>,
        #[arg(long, default_value_t = 64)]
        samples: usize,
        #[arg(long, default_value_t = 200)]
        pairs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Genericity deviation of sampled points at height M.
    GenericCheck {
        path: PathBuf,
        #[arg(long = "m", default_value_t = 100)]
        m: usize,
        #[arg(long, default_value_t = 10)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// label, dyadic:N or map:c1,c2,...
        #[arg(long, default_value = "label")]
        partition: String,
        #[arg(long)]
        eps: Option<f64>,
    },
    /// N^(3N) path bound and 2^N subset bound.
    SyncBound { n_states: usize },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::CheckEndo { .. } => "check-endo",
            Command::DecideTvwb { .. } => "decide-tvwb",
            Command::Tbar { .. } => "tbar",
            Command::StateDistance { .. } => "state-distance",
            Command::Birkhoff { .. } => "birkhoff",
            Command::EstimateTvwb { .. } => "estimate-tvwb",
            Command::GenericCheck { .. } => "generic-check",
            Command::SyncBound { .. } => "sync-bound",
        }
    }
}

fn run(command: &Command, caps: &Caps, exec: Exec) -> Result<Ran, CliError> {
    match command {
        Command::CheckEndo { path } => commands::check_endo(path),
        Command::DecideTvwb { path } => commands::decide(path, caps),
        Command::Tbar {
            paths,
            height,
            brute_force,
            states,
        } => {
            if *states {
                if paths.len() != 1 {
                    return Err(CliError::Semantic("--states takes a single system".into()));
                }
                let h = height.unwrap_or(12);
                let heights: Vec<usize> = (1..=h).collect();
                commands::state_distance(&paths[0], &heights, caps)
            } else if paths.len() == 2 {
                commands::tbar_names(&paths[0], &paths[1], *height, *brute_force, caps)
            } else {
                Err(CliError::Semantic(
                    "tbar needs two tree-name documents, or one system with --states".into(),
                ))
            }
        }
        Command::StateDistance {
            path,
            height,
            heights,
        } => {
            let list = heights.clone().unwrap_or_else(|| (1..=*height).collect());
            commands::state_distance(path, &list, caps)
        }
        Command::Birkhoff { path, block } => commands::birkhoff(path, *block),
        Command::EstimateTvwb {
            path,
            heights,
            samples,
            pairs,
            seed,
        } => commands::estimate(
            path,
            EstimateArgs {
                heights,
                samples: *samples,
                pairs: *pairs,
                seed: *seed,
            },
            caps,
            exec,
        ),
        Command::GenericCheck {
            path,
            m,
            samples,
            seed,
            partition,
            eps,
        } => commands::generic(
            path,
            GenericArgs {
                m: *m,
                samples: *samples,
                seed: *seed,
                partition,
                eps: *eps,
            },
            caps,
            exec,
        ),
        Command::SyncBound { n_states } => commands::sync_bound_cmd(*n_states),
    }
}

fn emit_json(cli: &Cli, value: &serde_json::Value) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).expect("reports serialise") + "\n";
    if let Some(path) = &cli.out {
        fs::write(path, &text)
            .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))?;
    }
    if cli.json {
        std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| CliError::Io(e.to_string()))?;
    }
    Ok(())
}

fn human(cli: &Cli, text: &str) {
    if cli.json {
        eprint!("{text}");
    } else {
        print!("{text}");
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let caps = Caps::from_env();
    let exec = if cli.sequential {
        Exec::Sequential
    } else {
        Exec::Parallel
    };
    let name = cli.command.name();
    match run(&cli.command, &caps, exec) {
        Ok(ran) => {
            human(&cli, &ran.outcome.human);
            let value = report::run_report(name, &ran.digest, &ran.outcome);
            if let Err(e) = emit_json(&cli, &value) {
                eprintln!("error: {e}");
                return ExitCode::from(e.exit_code());
            }
            ExitCode::from(if ran.outcome.rejected.is_some() { 1 } else { 0 })
        }
        Err(e) => {
            eprintln!("error: {e}");
            let class = match e {
                CliError::Io(_) => "io",
                CliError::Parse(_) => "parse",
                CliError::Semantic(_) => "semantic",
            };
            let value = report::error_report(name, class, e.exit_code(), &e.to_string());
            let _ = emit_json(&cli, &value);
            ExitCode::from(e.exit_code())
        }
    }
}
