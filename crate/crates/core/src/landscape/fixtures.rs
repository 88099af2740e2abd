//! Built-in trap fixtures: a constrained Bloch family with a false trap and
//! an uncontrollable dephasing system with a real one.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::ascent::{ascend, multistart_ascent, multistart_with, AscentConfig, OptimizationRun};
use super::critical::{
    classify_against, classify_critical_point, Classification, CriticalPointReport,
};
use super::probes::{oracle_optimum, verify_trap_free, TrapFreeVerdict};
use crate::channels::{
    jacobian_rank, rank_survey, ControlMap, Dissipator, KinematicMap, LindbladControl,
    LindbladModel,
};
use crate::error::{LabError, Result};
use crate::linalg::pauli_z;
use crate::objectives::{evaluate, ControlledObjective, ObjectiveSpec};
use crate::quantum::{pauli, plus_state, DensityMatrix};
use crate::state::{Regime, State, StateGradient};
use crate::tolerances::TOLERANCES;

/// Bloch z-component of the constrained family.
pub fn bloch_rz(theta: f64) -> f64 {
    0.6 * theta.cos() + 0.3 * (2.0 * theta).cos()
}

pub fn bloch_rz_derivative(theta: f64) -> f64 {
    -0.6 * theta.sin() - 0.6 * (2.0 * theta).sin()
}

/// One-parameter family θ ↦ (I + r_z(θ)σ_z)/2.
#[derive(Debug, Clone, Copy, Default)]
pub struct BlochFamily;

impl ControlMap for BlochFamily {
    fn regime(&self) -> Regime {
        Regime::Quantum
    }

    fn n_params(&self) -> usize {
        1
    }

    fn state(&self, params: &[f64]) -> Result<State> {
        let rz = bloch_rz(params[0]);
        Ok(DensityMatrix::diagonal(&[0.5 * (1.0 + rz), 0.5 * (1.0 - rz)])?.into())
    }

    fn pullback(&self, params: &[f64], gradient: &StateGradient) -> Option<Result<Vec<f64>>> {
        let tangent = StateGradient::Quantum(pauli_z().scale(0.5));
        let along = gradient.directional(&tangent)?;
        Some(Ok(vec![along * bloch_rz_derivative(params[0])]))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct FixtureConfig {
    pub n_starts: usize,
    pub value_tol: f64,
    /// Random control points for the rank check.
    pub rank_points: usize,
    pub ascent: AscentConfig,
    /// Step for the unconstrained kinematic comparison (n = 2, r = 4).
    pub kinematic_step_size: f64,
}

impl Default for FixtureConfig {
    fn default() -> Self {
        Self {
            n_starts: 100,
            value_tol: super::critical::DEFAULT_VALUE_TOL,
            rank_points: 10,
            ascent: AscentConfig::default(),
            kinematic_step_size: 16.0,
        }
    }
}

impl FixtureConfig {
    /// Defaults for [`real_trap_demo`]. Propagated objectives carry ~1e-14
    /// round-off, which hides gradients much below 1e-7 at this curvature,
    /// so the tolerance is looser and the step larger than the generic default.
    pub fn dynamic() -> Self {
        let ascent = AscentConfig {
            step_size: 4.0,
            gradient_tolerance: 1e-6,
            ..AscentConfig::default()
        };
        Self {
            ascent,
            ..Self::default()
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.ascent.seed = seed;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct FamilyCriticalPoint {
    pub theta: f64,
    pub value: f64,
    pub classification: Option<Classification>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SingleStart {
    pub theta0: f64,
    pub final_theta: f64,
    pub final_objective: f64,
    pub converged: bool,
    pub iterations: usize,
    pub critical_point: CriticalPointReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct FalseTrapReport {
    pub grid_points: usize,
    pub max_abs_rz: f64,
    pub family_valid: bool,
    /// Critical angles in [0, 2π) from the grid scan, refined by bisection.
    pub critical_points: Vec<FamilyCriticalPoint>,
    pub family_optimum: f64,
    pub full_space_optimum: f64,
    pub trap_start: SingleStart,
    pub near_zero_start: SingleStart,
    pub jacobian_rank_generic: usize,
    pub jacobian_rank_at_trap: usize,
    pub state_dimension: usize,
    /// Uniform θ starts judged against the family optimum.
    pub constrained_verdict: TrapFreeVerdict,
    /// Kinematic controls (n = 2, r = 4) judged against λ_max(σ_z).
    pub unconstrained_verdict: TrapFreeVerdict,
    pub unconstrained_trap_candidates: usize,
    pub constrained_runs: Vec<OptimizationRun>,
    pub unconstrained_runs: Vec<OptimizationRun>,
}

pub const FALSE_TRAP_GRID: usize = 10_000;
pub const TRAP_START_THETA: f64 = 3.0;
pub const NEAR_ZERO_THETA: f64 = 0.3;
const GENERIC_THETA: f64 = 1.0;

/// Sign changes of r_z′ on a uniform grid, each refined by bisection.
pub fn family_critical_angles(points: usize) -> Vec<f64> {
    let step = 2.0 * PI / points as f64;
    let mut roots: Vec<f64> = Vec::new();
    for k in 0..points {
        let (a, b) = (k as f64 * step, (k + 1) as f64 * step);
        let (fa, fb) = (bloch_rz_derivative(a), bloch_rz_derivative(b));
        if fa == 0.0 {
            roots.push(a);
            continue;
        }
        if fa * fb >= 0.0 {
            continue;
        }
        let (mut lo, mut hi, mut flo) = (a, b, fa);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            let fm = bloch_rz_derivative(mid);
            if fm == 0.0 || hi - lo <= f64::EPSILON * hi.abs() {
                lo = mid;
                hi = mid;
                break;
            }
            if (fm > 0.0) == (flo > 0.0) {
                lo = mid;
                flo = fm;
            } else {
                hi = mid;
            }
        }
        roots.push(0.5 * (lo + hi));
    }
    // Wrap into [0, 2π) and merge roots found from both sides of a grid point.
    let mut out: Vec<f64> = Vec::new();
    for r in roots
        .into_iter()
        .map(|r| if r >= 2.0 * PI - 1e-9 { 0.0 } else { r })
    {
        if !out.iter().any(|&o| (o - r).abs() < 1e-6) {
            out.push(r);
        }
    }
    out.sort_by(f64::total_cmp);
    out
}

fn validate(cfg: &FixtureConfig) -> Result<()> {
    cfg.ascent.validate()?;
    kinematic_config(cfg).validate()?;
    if cfg.n_starts == 0 {
        return Err(LabError::InvalidParameter(
            "nStarts must be at least 1".into(),
        ));
    }
    if !(cfg.value_tol.is_finite() && cfg.value_tol > 0.0) {
        return Err(LabError::InvalidParameter(
            "valueTol must be positive".into(),
        ));
    }
    Ok(())
}

fn single_start(
    spec: &ObjectiveSpec,
    theta0: f64,
    cfg: &FixtureConfig,
    family_optimum: f64,
) -> Result<SingleStart> {
    let map = BlochFamily;
    let objective = ControlledObjective::new(spec, &map)?;
    let run = ascend(&objective, vec![theta0], &cfg.ascent, 0);
    let critical_point = classify_against(
        spec,
        &map,
        &run.final_params,
        &cfg.ascent,
        family_optimum,
        cfg.value_tol,
    )?;
    Ok(SingleStart {
        theta0,
        final_theta: run.final_params[0],
        final_objective: run.final_objective,
        converged: run.converged,
        iterations: run.iterations,
        critical_point,
    })
}

pub fn false_trap_demo(cfg: &FixtureConfig) -> Result<FalseTrapReport> {
    validate(cfg)?;
    let spec = ObjectiveSpec::type_one(pauli('z'));
    let map = BlochFamily;

    let grid: Vec<f64> = (0..FALSE_TRAP_GRID)
        .map(|k| bloch_rz(2.0 * PI * k as f64 / FALSE_TRAP_GRID as f64))
        .collect();
    let max_abs_rz = grid.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let grid_best = grid.iter().cloned().fold(f64::NEG_INFINITY, f64::max);

    let mut critical_points = Vec::new();
    for theta in family_critical_angles(FALSE_TRAP_GRID) {
        let value = evaluate(&spec, &map.state(&[theta])?)?;
        critical_points.push(FamilyCriticalPoint {
            theta,
            value,
            classification: None,
        });
    }
    let family_optimum = critical_points
        .iter()
        .map(|p| p.value)
        .fold(grid_best, f64::max);
    for p in &mut critical_points {
        p.classification = classify_against(
            &spec,
            &map,
            &[p.theta],
            &cfg.ascent,
            family_optimum,
            cfg.value_tol,
        )?
        .classification;
    }

    let trap_start = single_start(&spec, TRAP_START_THETA, cfg, family_optimum)?;
    let near_zero_start = single_start(&spec, NEAR_ZERO_THETA, cfg, family_optimum)?;

    let objective = ControlledObjective::new(&spec, &map)?;
    let constrained_runs = multistart_with(&objective, cfg.n_starts, &cfg.ascent, &|r, _| {
        vec![r.random_range(0.0..2.0 * PI)]
    })?;
    let constrained_verdict = verify_trap_free(&constrained_runs, family_optimum, cfg.value_tol);

    let kinematic = KinematicMap::new(DensityMatrix::maximally_mixed(2), 4)?;
    let full_space_optimum = oracle_optimum(&spec)?.value;
    let unconstrained_runs =
        multistart_ascent(&spec, &kinematic, cfg.n_starts, &kinematic_config(cfg))?;
    let unconstrained_verdict =
        verify_trap_free(&unconstrained_runs, full_space_optimum, cfg.value_tol);
    let unconstrained_trap_candidates =
        count_trap_candidates(&spec, &kinematic, &unconstrained_runs, cfg)?;

    Ok(FalseTrapReport {
        grid_points: FALSE_TRAP_GRID,
        max_abs_rz,
        family_valid: max_abs_rz < 1.0,
        critical_points,
        family_optimum,
        full_space_optimum,
        trap_start,
        near_zero_start,
        jacobian_rank_generic: jacobian_rank(&map, &[GENERIC_THETA], TOLERANCES.fd_step)?,
        jacobian_rank_at_trap: jacobian_rank(&map, &[PI], TOLERANCES.fd_step)?,
        state_dimension: 3,
        constrained_verdict,
        unconstrained_verdict,
        unconstrained_trap_candidates,
        constrained_runs,
        unconstrained_runs,
    })
}

fn kinematic_config(cfg: &FixtureConfig) -> AscentConfig {
    AscentConfig {
        step_size: cfg.kinematic_step_size,
        ..cfg.ascent
    }
}

fn count_trap_candidates(
    spec: &ObjectiveSpec,
    map: &dyn ControlMap,
    runs: &[OptimizationRun],
    cfg: &FixtureConfig,
) -> Result<usize> {
    let mut count = 0;
    for run in runs.iter().filter(|r| r.converged) {
        let report = classify_critical_point(
            spec,
            map,
            &run.final_params,
            &kinematic_config(cfg),
            cfg.value_tol,
        )?;
        count += (report.classification == Some(Classification::TrapCandidate)) as usize;
    }
    Ok(count)
}

pub const REAL_TRAP_STEPS: usize = 4;
pub const REAL_TRAP_DURATION: f64 = 1.0;
pub const REAL_TRAP_RATE: f64 = 1.0;

/// Two-level model with diagonal drift σ_z, control σ_z and dephasing σ_z.
pub fn dephasing_control() -> Result<LindbladControl> {
    let z = pauli('z');
    let model = LindbladModel::new(
        z.clone(),
        vec![z.clone()],
        vec![Dissipator {
            operator: z.matrix().clone(),
            rate: REAL_TRAP_RATE,
        }],
    )?;
    LindbladControl::new(
        model,
        0.0,
        REAL_TRAP_DURATION,
        REAL_TRAP_STEPS,
        plus_state(),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RealTrapReport {
    /// e^{−2γ(t_f − t_i)}: the coherence surviving dephasing.
    pub dephasing_factor: f64,
    pub oracle_value: f64,
    pub final_objectives: Vec<f64>,
    pub max_deviation_from_dephasing: f64,
    pub jacobian_ranks: Vec<usize>,
    pub state_dimension: usize,
    pub dynamic_verdict: TrapFreeVerdict,
    pub terminal_classifications: Vec<Option<Classification>>,
    pub kinematic_verdict: TrapFreeVerdict,
    pub dynamic_runs: Vec<OptimizationRun>,
    pub kinematic_runs: Vec<OptimizationRun>,
}

pub fn real_trap_demo(cfg: &FixtureConfig) -> Result<RealTrapReport> {
    validate(cfg)?;
    let spec = ObjectiveSpec::type_one(pauli('x'));
    let control = dephasing_control()?;
    let oracle_value = oracle_optimum(&spec)?.value;
    let dephasing_factor = (-2.0 * REAL_TRAP_RATE * REAL_TRAP_DURATION).exp();

    let dynamic_runs = multistart_ascent(&spec, &control, cfg.n_starts, &cfg.ascent)?;
    let final_objectives: Vec<f64> = dynamic_runs.iter().map(|r| r.final_objective).collect();
    let max_deviation_from_dephasing = final_objectives
        .iter()
        .fold(0.0f64, |m, j| m.max((j - dephasing_factor).abs()));
    let dynamic_verdict = verify_trap_free(&dynamic_runs, oracle_value, cfg.value_tol);
    let mut terminal_classifications = Vec::with_capacity(dynamic_runs.len());
    for run in &dynamic_runs {
        let report = classify_against(
            &spec,
            &control,
            &run.final_params,
            &cfg.ascent,
            oracle_value,
            cfg.value_tol,
        )?;
        terminal_classifications.push(report.classification);
    }

    let jacobian_ranks = rank_survey(
        &control,
        cfg.rank_points,
        cfg.ascent.seed,
        TOLERANCES.fd_step,
    )?;

    let kinematic = KinematicMap::new(plus_state(), 4)?;
    let kinematic_runs =
        multistart_ascent(&spec, &kinematic, cfg.n_starts, &kinematic_config(cfg))?;
    let kinematic_verdict = verify_trap_free(&kinematic_runs, oracle_value, cfg.value_tol);

    Ok(RealTrapReport {
        dephasing_factor,
        oracle_value,
        final_objectives,
        max_deviation_from_dephasing,
        jacobian_ranks,
        state_dimension: 3,
        dynamic_verdict,
        terminal_classifications,
        kinematic_verdict,
        dynamic_runs,
        kinematic_runs,
    })
}
