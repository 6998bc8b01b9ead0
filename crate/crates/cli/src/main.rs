//! The `capax` binary: `run` executes experiment configs, `verify` runs
//! the acceptance suite. Exit code 0 means everything passed, 1 means an
//! experiment or criterion failed, 2 means the config or arguments were
//! unusable.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use capax_cli::config;
use capax_cli::experiments::{self, RunOptions};
use capax_cli::verify::{self, VerifyContext};

#[derive(Parser)]
#[command(name = "capax", version, about = "Obstacle, measure, and control experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiments listed in a config file.
    Run {
        config: PathBuf,
        /// Output directory, overriding the config preamble.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Master seed, overriding the config preamble.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads, overriding the config preamble.
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Run the acceptance criteria of a suite config.
    Verify {
        config: Option<PathBuf>,
        /// Print the criterion names and exit.
        #[arg(long)]
        list: bool,
        /// Scratch directory, overriding the config preamble.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Master seed, overriding the config preamble.
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn load_config(path: &PathBuf) -> Result<(config::ConfigFile, String), String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    let cfg = config::parse(&text).map_err(|e| e.to_string())?;
    Ok((cfg, text))
}

fn preamble_path(cfg: &config::ConfigFile, key: &str) -> Option<PathBuf> {
    cfg.preamble.get(key).map(|e| PathBuf::from(&e.value))
}

fn run_command(
    path: PathBuf,
    out: Option<PathBuf>,
    seed: Option<u64>,
    threads: Option<usize>,
) -> ExitCode {
    let (cfg, raw) = match load_config(&path) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitCode::from(2);
        }
    };
    if let Err(e) = experiments::validate(&cfg) {
        eprintln!("config error: {e}");
        return ExitCode::from(2);
    }
    let opts = RunOptions {
        out: out
            .or_else(|| preamble_path(&cfg, "out"))
            .unwrap_or_else(|| PathBuf::from("capax-out")),
        seed: seed
            .or_else(|| cfg.preamble.get_u64("seed").expect("validated"))
            .unwrap_or(0),
        threads: threads
            .or_else(|| cfg.preamble.get_usize("threads").expect("validated"))
            .unwrap_or(1),
    };
    let outcomes = experiments::run(&cfg, &raw, &opts);
    let mut failed = false;
    for outcome in &outcomes {
        let status = if outcome.ok { "ok" } else { "FAILED" };
        println!("experiment {}: {status} ({})", outcome.name, outcome.detail);
        failed |= !outcome.ok;
    }
    if failed {
        ExitCode::from(1)
    } else {
        ExitCode::SUCCESS
    }
}

fn verify_command(
    path: Option<PathBuf>,
    list: bool,
    out: Option<PathBuf>,
    seed: Option<u64>,
) -> ExitCode {
    if list {
        for name in verify::CRITERIA {
            println!("{name}");
        }
        return ExitCode::SUCCESS;
    }
    let Some(path) = path else {
        eprintln!("config error: verify needs a config file or --list");
        return ExitCode::from(2);
    };
    let (cfg, _) = match load_config(&path) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitCode::from(2);
        }
    };
    let plan = match verify::validate_suite(&cfg) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitCode::from(2);
        }
    };
    let ctx = VerifyContext {
        seed: seed
            .or_else(|| cfg.preamble.get_u64("seed").expect("validated"))
            .unwrap_or(0),
        binary: std::env::current_exe().ok(),
        scratch: out
            .or_else(|| preamble_path(&cfg, "out"))
            .unwrap_or_else(verify::default_scratch),
    };
    let mut failed = false;
    for (name, overrides) in plan {
        let outcome = verify::run_criterion(name, overrides, &ctx);
        let verdict = if outcome.pass { "PASS" } else { "FAIL" };
        println!("criterion {}: {verdict} ({})", outcome.name, outcome.summary);
        failed |= !outcome.pass;
    }
    if failed {
        ExitCode::from(1)
    } else {
        ExitCode::SUCCESS
    }
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run {
            config,
            out,
            seed,
            threads,
        } => run_command(config, out, seed, threads),
        Command::Verify {
            config,
            list,
            out,
            seed,
        } => verify_command(config, list, out, seed),
    }
}
