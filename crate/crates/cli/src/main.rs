//! `landscape-lab <command> --config <path> [--out <dir>] [--seed <u64>] [--quiet]`
//!
//! Exit status 0 on success, 2 when the config (or environment) is invalid,
//! 3 when the experiment itself fails.

mod commands;
mod config;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Parser, ValueEnum};

use config::Command;

const EXIT_INVALID: u8 = 2;
const EXIT_FAILED: u8 = 3;
const THREADS_VAR: &str = "LANDSCAPE_LAB_THREADS";

#[derive(Debug, Clone, Copy, ValueEnum)]
enum CommandArg {
    Optimize,
    ProbeConcavity,
    LevelSet,
    RankCheck,
    FalseTrap,
    RealTrap,
    Oracle,
}

impl From<CommandArg> for Command {
    fn from(c: CommandArg) -> Self {
        match c {
            CommandArg::Optimize => Command::Optimize,
            CommandArg::ProbeConcavity => Command::ProbeConcavity,
            CommandArg::LevelSet => Command::LevelSet,
            CommandArg::RankCheck => Command::RankCheck,
            CommandArg::FalseTrap => Command::FalseTrap,
            CommandArg::RealTrap => Command::RealTrap,
            CommandArg::Oracle => Command::Oracle,
        }
    }
}

/// Control-landscape experiments: trap-freeness checks, convexity probes and
/// the constrained-control fixtures.
#[derive(Debug, Parser)]
#[command(name = "landscape-lab", version)]
struct Cli {
    command: CommandArg,
    /// JSON experiment config.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides output.dir in the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Print nothing on success.
    #[arg(long)]
    quiet: bool,
}

fn configure_threads() -> Result<usize, String> {
    let Ok(raw) = std::env::var(THREADS_VAR) else {
        return Ok(rayon::current_num_threads());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| format!("{THREADS_VAR}: must be a positive integer, got \"{raw}\""))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| format!("{THREADS_VAR}: {e}"))?;
    Ok(n)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let threads = match configure_threads() {
        Ok(n) => n,
        Err(msg) => {
            eprintln!("error: {msg}");
            return ExitCode::from(EXIT_INVALID);
        }
    };
    let text = match std::fs::read(&cli.config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", cli.config.display());
            return ExitCode::from(EXIT_INVALID);
        }
    };
    let mut cfg = match config::validate(&text, Some(cli.command.into()), cli.seed) {
        Ok(cfg) => cfg,
        Err(errors) => {
            eprintln!("error: invalid config {}", cli.config.display());
            for e in &errors {
                eprintln!("  {e}");
            }
            return ExitCode::from(EXIT_INVALID);
        }
    };
    if let Some(out) = cli.out {
        cfg.output.dir = out;
    }

    let started_at = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0.0, |d| d.as_secs_f64());
    let clock = Instant::now();
    let outcome = match commands::run(&cfg) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {} failed: {e}", cfg.command);
            return ExitCode::from(EXIT_FAILED);
        }
    };
    let metadata = report::Metadata {
        started_at_unix_seconds: started_at,
        wall_clock_seconds: clock.elapsed().as_secs_f64(),
        threads,
    };

    let written = report::write_report(&cfg, &outcome.payload, &metadata).and_then(|report| {
        let csv = if cfg.output.csv {
            Some(report::write_trajectories(&cfg, &outcome.trajectories)?)
        } else {
            None
        };
        Ok((report, csv))
    });
    match written {
        Ok((report, csv)) => {
            if !cli.quiet {
                println!("{}", outcome.summary);
                println!("report: {}", report.display());
                if let Some(csv) = csv {
                    println!("trajectories: {}", csv.display());
                }
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!(
                "error: cannot write outputs to {}: {e}",
                cfg.output.dir.display()
            );
            ExitCode::from(EXIT_FAILED)
        }
    }
}
