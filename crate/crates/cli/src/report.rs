//! Report and CSV writers.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

use crate::commands::downsample;
use crate::config::ExperimentConfig;

/// Bumped whenever a report field is renamed, removed or changes meaning.
pub const SCHEMA_VERSION: u32 = 1;

/// Run-dependent facts kept apart from the reproducible sections.
#[derive(Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Metadata {
    pub started_at_unix_seconds: f64,
    pub wall_clock_seconds: f64,
    pub threads: usize,
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct Report<'a> {
    schema_version: u32,
    command: &'a str,
    library_version: &'a str,
    seed: u64,
    config: &'a ExperimentConfig,
    payload: &'a Value,
    metadata: &'a Metadata,
}

pub fn stem(cfg: &ExperimentConfig) -> String {
    format!("{}-{}", cfg.command, cfg.seed)
}

pub fn write_report(
    cfg: &ExperimentConfig,
    payload: &Value,
    metadata: &Metadata,
) -> io::Result<PathBuf> {
    fs::create_dir_all(&cfg.output.dir)?;
    let path = cfg.output.dir.join(format!("{}.report.json", stem(cfg)));
    let report = Report {
        schema_version: SCHEMA_VERSION,
        command: cfg.command.name(),
        library_version: landscape_lab::VERSION,
        seed: cfg.seed,
        config: cfg,
        payload,
        metadata,
    };
    let mut text = serde_json::to_string_pretty(&report).map_err(io::Error::other)?;
    text.push('\n');
    fs::write(&path, text)?;
    Ok(path)
}

/// (runIndex, iteration, objective) rows, every `stride`-th iteration plus the last.
pub fn write_trajectories(
    cfg: &ExperimentConfig,
    runs: &[(usize, Vec<f64>)],
) -> io::Result<PathBuf> {
    fs::create_dir_all(&cfg.output.dir)?;
    let path = cfg
        .output
        .dir
        .join(format!("{}.trajectories.csv", stem(cfg)));
    write_csv(&path, runs, cfg.output.trajectory_stride)?;
    Ok(path)
}

fn write_csv(path: &Path, runs: &[(usize, Vec<f64>)], stride: usize) -> io::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["runIndex", "iteration", "objective"])?;
    for (index, trajectory) in runs {
        for (it, value) in downsample(trajectory, stride) {
            w.serialize((index, it, value))?;
        }
    }
    w.flush()
}
