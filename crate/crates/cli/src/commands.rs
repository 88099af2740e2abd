//! Command execution. Each command returns a JSON payload, the trajectories
//! worth exporting, and a one-line summary.

use landscape_lab::channels::{
    rank_survey, ControlMap, KinematicMap, LindbladControl, StochasticControl,
};
use landscape_lab::classical::{Distribution, PhaseSpace};
use landscape_lab::landscape::{
    classify_against, concavity_probe, false_trap_demo, level_set_path, multistart_ascent,
    oracle_optimum, real_trap_demo, same_level_pair, verify_trap_free, CriticalPointReport,
    OptimizationRun,
};
use landscape_lab::objectives::{evaluate, ObjectiveSpec};
use landscape_lab::quantum::{random_density, DensityMatrix};
use landscape_lab::rng::{self, streams};
use landscape_lab::{LabError, Result, State};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{Command, ExperimentConfig, InitialState, MapConfig, Preset};

pub struct Outcome {
    pub payload: Value,
    /// (runIndex, full trajectory) for the CSV export.
    pub trajectories: Vec<(usize, Vec<f64>)>,
    pub summary: String,
}

pub fn run(cfg: &ExperimentConfig) -> Result<Outcome> {
    match cfg.command {
        Command::Optimize => optimize(cfg),
        Command::ProbeConcavity => probe_concavity(cfg),
        Command::LevelSet => level_set(cfg),
        Command::RankCheck => rank_check(cfg),
        Command::FalseTrap => false_trap(cfg),
        Command::RealTrap => real_trap(cfg),
        Command::Oracle => oracle(cfg),
    }
}

fn spec(cfg: &ExperimentConfig) -> Result<&ObjectiveSpec> {
    cfg.spec
        .as_ref()
        .ok_or_else(|| LabError::InvalidParameter(format!("{} needs a spec", cfg.command)))
}

fn to_value<T: Serialize>(x: &T) -> Result<Value> {
    serde_json::to_value(x)
        .map_err(|e| LabError::EvaluationFailure(format!("report serialization: {e}")))
}

/// Every `stride`-th point plus the last one.
pub fn downsample(trajectory: &[f64], stride: usize) -> Vec<(usize, f64)> {
    let mut out: Vec<(usize, f64)> = trajectory
        .iter()
        .copied()
        .enumerate()
        .step_by(stride)
        .collect();
    if let Some(last) = trajectory.len().checked_sub(1) {
        if out.last().map(|p| p.0) != Some(last) {
            out.push((last, trajectory[last]));
        }
    }
    out
}

fn build_map(cfg: &ExperimentConfig) -> Result<Box<dyn ControlMap>> {
    let map = cfg
        .map
        .as_ref()
        .ok_or_else(|| LabError::InvalidParameter(format!("{} needs a map", cfg.command)))?;
    let mut r = rng::stream(cfg.seed, streams::INITIAL_STATE);
    let quantum = |init: &InitialState, n: usize, r: &mut _| -> Result<DensityMatrix> {
        match init {
            InitialState::Preset(Preset::Random) => Ok(random_density(r, n)),
            InitialState::Explicit(State::Quantum(rho)) => Ok(rho.clone()),
            InitialState::Preset(Preset::MaximallyMixed) => Ok(DensityMatrix::maximally_mixed(n)),
            other => Err(LabError::InvalidParameter(format!(
                "{other:?} is not a quantum initial state"
            ))),
        }
    };
    Ok(match map {
        MapConfig::Kinematic {
            dim,
            rank,
            initial_state,
        } => Box::new(KinematicMap::new(
            quantum(initial_state, *dim, &mut r)?,
            *rank,
        )?),
        MapConfig::Lindblad {
            model,
            t0,
            t1,
            steps,
            initial_state,
        } => Box::new(LindbladControl::new(
            model.clone(),
            *t0,
            *t1,
            *steps,
            quantum(initial_state, model.dim(), &mut r)?,
        )?),
        MapConfig::Stochastic {
            cells,
            initial_distribution,
        } => {
            let space = PhaseSpace::new(*cells)?;
            let d = match initial_distribution {
                InitialState::Preset(Preset::Random) => Distribution::random(&mut r, space),
                InitialState::Explicit(State::Classical(d)) => d.clone(),
                InitialState::Preset(Preset::Uniform) => Distribution::uniform(space),
                other => {
                    return Err(LabError::InvalidParameter(format!(
                        "{other:?} is not a classical initial distribution"
                    )))
                }
            };
            Box::new(StochasticControl::new(d))
        }
    })
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct RunSummary<'a> {
    index: usize,
    seed: u64,
    final_objective: f64,
    oracle_gap: f64,
    gradient_norm_at_end: f64,
    converged: bool,
    iterations: usize,
    stalled: bool,
    regularized_gradients: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<&'a str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    critical_point: Option<CriticalPointReport>,
    /// (iteration, objective) pairs after down-sampling.
    trajectory: Vec<(usize, f64)>,
}

fn optimize(cfg: &ExperimentConfig) -> Result<Outcome> {
    let spec = spec(cfg)?;
    let run_cfg = cfg
        .run
        .as_ref()
        .ok_or_else(|| LabError::InvalidParameter("optimize needs run settings".into()))?;
    let map = build_map(cfg)?;
    let oracle = oracle_optimum(spec)?;
    let runs = multistart_ascent(spec, map.as_ref(), run_cfg.n_starts, &run_cfg.ascent)?;
    let verdict = verify_trap_free(&runs, oracle.value, run_cfg.value_tol);
    let mut summaries = Vec::with_capacity(runs.len());
    for run in &runs {
        let critical_point = if run_cfg.classify && run.error.is_none() {
            Some(classify_against(
                spec,
                map.as_ref(),
                &run.final_params,
                &run_cfg.ascent,
                oracle.value,
                run_cfg.value_tol,
            )?)
        } else {
            None
        };
        summaries.push(RunSummary {
            index: run.index,
            seed: run.seed,
            final_objective: run.final_objective,
            oracle_gap: oracle.value - run.final_objective,
            gradient_norm_at_end: run.gradient_norm_at_end,
            converged: run.converged,
            iterations: run.iterations,
            stalled: run.stalled,
            regularized_gradients: run.regularized_gradients,
            error: run.error.as_deref(),
            critical_point,
            trajectory: downsample(&run.trajectory, cfg.output.trajectory_stride),
        });
    }
    let summary = format!(
        "optimize: trapFree={} worstGap={:.3e} converged {}/{}",
        verdict.trap_free, verdict.worst_gap, verdict.n_converged, verdict.n_runs
    );
    Ok(Outcome {
        payload: json!({
            "oracle": to_value(&oracle)?,
            "verdict": to_value(&verdict)?,
            "runs": to_value(&summaries)?,
        }),
        trajectories: trajectories(&runs),
        summary,
    })
}

fn trajectories(runs: &[OptimizationRun]) -> Vec<(usize, Vec<f64>)> {
    runs.iter()
        .map(|r| (r.index, r.trajectory.clone()))
        .collect()
}

fn probe_concavity(cfg: &ExperimentConfig) -> Result<Outcome> {
    let spec = spec(cfg)?;
    let samples = cfg.probe.as_ref().map_or(10_000, |p| p.samples);
    let report = concavity_probe(spec, samples, cfg.seed)?;
    let summary = format!(
        "probe-concavity: passed={} linear={} maxAbsViolation={:.3e} minMargin={:.3e}",
        report.passed, report.linear, report.max_abs_violation, report.min_margin
    );
    Ok(Outcome {
        payload: to_value(&report)?,
        trajectories: Vec::new(),
        summary,
    })
}

/// Rebuilds a state from its raw entries, so every validity check reruns.
fn revalidate(s: &State) -> Result<()> {
    match s {
        State::Quantum(rho) => DensityMatrix::new(rho.matrix().clone()).map(drop),
        State::Classical(d) => Distribution::new(d.space().clone(), d.weights().to_vec()).map(drop),
    }
}

fn level_set(cfg: &ExperimentConfig) -> Result<Outcome> {
    let spec = spec(cfg)?;
    let ls = cfg
        .level_set
        .as_ref()
        .ok_or_else(|| LabError::InvalidParameter("level-set needs levelSet settings".into()))?;
    if let Some([s0, s1]) = &ls.endpoints {
        let path = level_set_path(spec, s0, s1, ls.steps)?;
        for s in &path.states {
            revalidate(s)?;
        }
        let summary = format!(
            "level-set: explicit pair, maxDeviation={:.3e}",
            path.max_deviation
        );
        return Ok(Outcome {
            payload: json!({ "path": to_value(&path)?, "allStatesValid": true }),
            trajectories: Vec::new(),
            summary,
        });
    }
    let mut r = rng::stream(cfg.seed, streams::LEVEL_SET);
    let mut pairs = Vec::with_capacity(ls.pairs);
    let mut worst = 0.0f64;
    for _ in 0..ls.pairs {
        let (s0, s1) = same_level_pair(&mut r, spec)?;
        let path = level_set_path(spec, &s0, &s1, ls.steps)?;
        for s in &path.states {
            revalidate(s)?;
        }
        worst = worst.max(path.max_deviation);
        pairs.push(json!({ "level": evaluate(spec, &s0)?, "maxDeviation": path.max_deviation }));
    }
    let summary = format!("level-set: {} pairs, maxDeviation={:.3e}", ls.pairs, worst);
    Ok(Outcome {
        payload: json!({
            "pairs": pairs,
            "maxDeviation": worst,
            "allStatesValid": true,
        }),
        trajectories: Vec::new(),
        summary,
    })
}

fn rank_check(cfg: &ExperimentConfig) -> Result<Outcome> {
    let rc = cfg
        .rank_check
        .as_ref()
        .ok_or_else(|| LabError::InvalidParameter("rank-check needs rankCheck settings".into()))?;
    let map = build_map(cfg)?;
    let dim = cfg.map.as_ref().map_or(0, MapConfig::dim);
    let state_dimension = match map.regime() {
        landscape_lab::Regime::Quantum => dim * dim - 1,
        landscape_lab::Regime::Classical => dim - 1,
    };
    let ranks = rank_survey(map.as_ref(), rc.points, cfg.seed, rc.fd_step)?;
    let full = ranks.iter().filter(|&&k| k == state_dimension).count();
    let summary = format!(
        "rank-check: {full}/{} points at full rank {state_dimension}",
        ranks.len()
    );
    Ok(Outcome {
        payload: json!({
            "stateDimension": state_dimension,
            "nParams": map.n_params(),
            "ranks": ranks,
            "fullRankPoints": full,
            "locallySurjective": full == ranks.len(),
        }),
        trajectories: Vec::new(),
        summary,
    })
}

fn fixture(cfg: &ExperimentConfig) -> Result<&landscape_lab::landscape::FixtureConfig> {
    cfg.fixture.as_ref().ok_or_else(|| {
        LabError::InvalidParameter(format!("{} needs fixture settings", cfg.command))
    })
}

fn false_trap(cfg: &ExperimentConfig) -> Result<Outcome> {
    let report = false_trap_demo(fixture(cfg)?)?;
    let summary = format!(
        "false-trap: θ=π start {:?} at J={:.6}; constrained trapFree={}; unconstrained trapFree={}",
        report.trap_start.critical_point.classification,
        report.trap_start.final_objective,
        report.constrained_verdict.trap_free,
        report.unconstrained_verdict.trap_free,
    );
    Ok(Outcome {
        payload: to_value(&report)?,
        trajectories: trajectories(&report.constrained_runs),
        summary,
    })
}

fn real_trap(cfg: &ExperimentConfig) -> Result<Outcome> {
    let report = real_trap_demo(fixture(cfg)?)?;
    let summary = format!(
        "real-trap: dynamic trapFree={} (factor {:.6}); kinematic trapFree={}",
        report.dynamic_verdict.trap_free,
        report.dephasing_factor,
        report.kinematic_verdict.trap_free,
    );
    Ok(Outcome {
        payload: to_value(&report)?,
        trajectories: trajectories(&report.dynamic_runs),
        summary,
    })
}

fn oracle(cfg: &ExperimentConfig) -> Result<Outcome> {
    let o = oracle_optimum(spec(cfg)?)?;
    let summary = format!("oracle: value={} degenerate={}", o.value, o.degenerate);
    Ok(Outcome {
        payload: to_value(&o)?,
        trajectories: Vec::new(),
        summary,
    })
}
