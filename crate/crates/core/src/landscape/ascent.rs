//! Gradient ascent with Armijo backtracking and seeded multistart batches.

use rand::Rng;
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channels::ControlMap;
use crate::error::{LabError, Result};
use crate::objectives::{ControlledObjective, ObjectiveSpec};
use crate::rng;

const ARMIJO_SHRINK: f64 = 0.5;
const ARMIJO_SUFFICIENT_INCREASE: f64 = 1e-4;
const ARMIJO_MAX_HALVINGS: usize = 40;

/// A differentiable objective over an unconstrained parameter vector.
pub trait Landscape: Sync {
    fn n_params(&self) -> usize;

    fn value(&self, params: &[f64]) -> Result<f64>;

    /// Gradient and whether the state had to be regularized for it.
    fn gradient(&self, params: &[f64]) -> Result<(Vec<f64>, bool)>;
}

impl Landscape for ControlledObjective<'_> {
    fn n_params(&self) -> usize {
        self.map.n_params()
    }

    fn value(&self, params: &[f64]) -> Result<f64> {
        ControlledObjective::value(self, params)
    }

    fn gradient(&self, params: &[f64]) -> Result<(Vec<f64>, bool)> {
        self.gradient_outcome(params)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AscentConfig {
    pub max_iterations: usize,
    pub step_size: f64,
    pub gradient_tolerance: f64,
    pub armijo_backtracking: bool,
    pub seed: u64,
}

impl Default for AscentConfig {
    fn default() -> Self {
        Self {
            max_iterations: 2000,
            step_size: 1.0,
            gradient_tolerance: 1e-8,
            armijo_backtracking: true,
            seed: 0,
        }
    }
}

impl AscentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(LabError::InvalidParameter(
                "maxIterations must be positive".into(),
            ));
        }
        if !(self.step_size.is_finite() && self.step_size > 0.0) {
            return Err(LabError::InvalidParameter(
                "stepSize must be positive".into(),
            ));
        }
        if !(self.gradient_tolerance.is_finite() && self.gradient_tolerance > 0.0) {
            return Err(LabError::InvalidParameter(
                "gradientTolerance must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct OptimizationRun {
    pub index: usize,
    pub seed: u64,
    pub initial_params: Vec<f64>,
    pub final_params: Vec<f64>,
    /// Objective before the first step and after every accepted step.
    pub trajectory: Vec<f64>,
    pub final_objective: f64,
    pub gradient_norm_at_end: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Line search found no sufficient increase within the halving budget.
    pub stalled: bool,
    /// Gradients evaluated on a regularized (floor-mixed) state.
    pub regularized_gradients: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Single ascent from `initial`. Evaluation failures end the run and are
/// recorded in `error`.
pub fn ascend(
    landscape: &dyn Landscape,
    initial: Vec<f64>,
    cfg: &AscentConfig,
    index: usize,
) -> OptimizationRun {
    let mut run = OptimizationRun {
        index,
        seed: cfg.seed,
        initial_params: initial.clone(),
        final_params: initial.clone(),
        trajectory: Vec::new(),
        final_objective: f64::NAN,
        gradient_norm_at_end: f64::NAN,
        converged: false,
        iterations: 0,
        stalled: false,
        regularized_gradients: 0,
        error: None,
    };
    if let Err(e) = ascend_into(landscape, initial, cfg, &mut run) {
        run.error = Some(e.to_string());
        run.converged = false;
    }
    run
}

fn ascend_into(
    landscape: &dyn Landscape,
    mut x: Vec<f64>,
    cfg: &AscentConfig,
    run: &mut OptimizationRun,
) -> Result<()> {
    if x.len() != landscape.n_params() {
        return Err(LabError::DimensionMismatch {
            expected: landscape.n_params(),
            found: x.len(),
        });
    }
    let mut f = landscape.value(&x)?;
    let (mut g, reg) = landscape.gradient(&x)?;
    run.regularized_gradients += reg as usize;
    run.trajectory.push(f);
    let mut gn = norm(&g);
    let mut trial = vec![0.0; x.len()];

    while gn > cfg.gradient_tolerance && run.iterations < cfg.max_iterations {
        let mut t = cfg.step_size;
        let mut accepted = None;
        let tries = if cfg.armijo_backtracking {
            ARMIJO_MAX_HALVINGS + 1
        } else {
            1
        };
        for _ in 0..tries {
            for ((y, xi), gi) in trial.iter_mut().zip(&x).zip(&g) {
                *y = xi + t * gi;
            }
            match landscape.value(&trial) {
                Ok(ft) if !cfg.armijo_backtracking => {
                    accepted = Some(ft);
                    break;
                }
                Ok(ft) if ft >= f + ARMIJO_SUFFICIENT_INCREASE * t * gn * gn => {
                    accepted = Some(ft);
                    break;
                }
                Ok(_) => t *= ARMIJO_SHRINK,
                Err(e) if !cfg.armijo_backtracking => return Err(e),
                Err(_) => t *= ARMIJO_SHRINK,
            }
        }
        let Some(ft) = accepted else {
            run.stalled = true;
            break;
        };
        std::mem::swap(&mut x, &mut trial);
        f = ft;
        let (gt, reg) = landscape.gradient(&x)?;
        run.regularized_gradients += reg as usize;
        g = gt;
        gn = norm(&g);
        run.iterations += 1;
        run.trajectory.push(f);
    }

    run.final_objective = f;
    run.gradient_norm_at_end = gn;
    run.converged = gn <= cfg.gradient_tolerance;
    run.final_params = x;
    Ok(())
}

/// Standard-normal starting point for run `index`, drawn from ChaCha20
/// stream `index` of the configured seed.
pub fn standard_normal_start(seed: u64, index: usize, n_params: usize) -> Vec<f64> {
    let mut r = rng::stream(seed, index as u64);
    (0..n_params).map(|_| r.sample(StandardNormal)).collect()
}

/// `n_starts` independent ascents; results are ordered by run index.
pub fn multistart_with(
    landscape: &dyn Landscape,
    n_starts: usize,
    cfg: &AscentConfig,
    init: &(dyn Fn(&mut ChaCha20Rng, usize) -> Vec<f64> + Sync),
) -> Result<Vec<OptimizationRun>> {
    if n_starts == 0 {
        return Err(LabError::InvalidParameter(
            "nStarts must be at least 1".into(),
        ));
    }
    cfg.validate()?;
    let n = landscape.n_params();
    Ok((0..n_starts)
        .into_par_iter()
        .map(|k| {
            let mut r = rng::stream(cfg.seed, k as u64);
            ascend(landscape, init(&mut r, n), cfg, k)
        })
        .collect())
}

/// Multistart ascent of J ∘ ξ from standard-normal control coordinates.
pub fn multistart_ascent(
    spec: &ObjectiveSpec,
    map: &dyn ControlMap,
    n_starts: usize,
    cfg: &AscentConfig,
) -> Result<Vec<OptimizationRun>> {
    let objective = ControlledObjective::new(spec, map)?;
    multistart_with(&objective, n_starts, cfg, &|r, n| {
        (0..n).map(|_| r.sample(StandardNormal)).collect()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::{FrozenMap, KinematicMap};
    use crate::entropy::EntropyFamily;
    use crate::quantum::{pauli, random_density, DensityMatrix};
    use proptest::prelude::*;

    fn kinematic_cfg(map: &KinematicMap, seed: u64) -> AscentConfig {
        AscentConfig {
            step_size: map.typical_step(),
            seed,
            ..AscentConfig::default()
        }
    }

    #[test]
    fn type_one_sigma_z_reaches_top_eigenvalue() {
        let map = KinematicMap::new(DensityMatrix::maximally_mixed(2), 4).unwrap();
        let spec = ObjectiveSpec::type_one(pauli('z'));
        let runs = multistart_ascent(&spec, &map, 100, &kinematic_cfg(&map, 1)).unwrap();
        assert_eq!(runs.len(), 100);
        for run in &runs {
            assert!(
                (run.final_objective - 1.0).abs() <= 1e-6,
                "run {} ended at {}",
                run.index,
                run.final_objective
            );
        }
    }

    #[test]
    fn type_two_sigma_z_reaches_free_energy() {
        let map = KinematicMap::new(DensityMatrix::maximally_mixed(2), 4).unwrap();
        let spec = ObjectiveSpec::type_two(pauli('z'), 1.0, EntropyFamily::VonNeumann).unwrap();
        let runs = multistart_ascent(&spec, &map, 100, &kinematic_cfg(&map, 2)).unwrap();
        for run in &runs {
            assert!((run.final_objective - 1.126928).abs() <= 1e-6);
        }
    }

    #[test]
    fn frozen_map_converges_immediately() {
        let mut r = rng::stream(3, 0);
        let rho = random_density(&mut r, 3);
        let spec = ObjectiveSpec::type_one(crate::quantum::Observable::random(&mut r, 3));
        let expected = crate::objectives::evaluate(&spec, &rho.clone().into()).unwrap();
        let map = FrozenMap {
            state: rho.into(),
            n_params: 5,
        };
        let runs = multistart_ascent(&spec, &map, 4, &AscentConfig::default()).unwrap();
        for run in &runs {
            assert!(run.converged);
            assert_eq!(run.iterations, 0);
            assert_eq!(run.gradient_norm_at_end, 0.0);
            assert_eq!(run.final_objective, expected);
        }
    }

    #[test]
    fn batches_are_reproducible_and_ordered() {
        let map = KinematicMap::new(DensityMatrix::maximally_mixed(2), 2).unwrap();
        let spec = ObjectiveSpec::type_one(pauli('x'));
        let cfg = AscentConfig {
            max_iterations: 50,
            ..kinematic_cfg(&map, 9)
        };
        let a = multistart_ascent(&spec, &map, 8, &cfg).unwrap();
        let b = multistart_ascent(&spec, &map, 8, &cfg).unwrap();
        assert_eq!(a, b);
        for (k, run) in a.iter().enumerate() {
            assert_eq!(run.index, k);
            assert_eq!(
                run.initial_params,
                standard_normal_start(9, k, map.n_params())
            );
        }
    }

    #[test]
    fn rejects_empty_batches_and_bad_config() {
        let map = KinematicMap::new(DensityMatrix::maximally_mixed(2), 2).unwrap();
        let spec = ObjectiveSpec::type_one(pauli('x'));
        assert!(multistart_ascent(&spec, &map, 0, &AscentConfig::default()).is_err());
        let bad = AscentConfig {
            step_size: -1.0,
            ..AscentConfig::default()
        };
        assert!(multistart_ascent(&spec, &map, 1, &bad).is_err());
    }

    #[test]
    fn failing_evaluations_are_recorded_per_run() {
        struct Broken;
        impl Landscape for Broken {
            fn n_params(&self) -> usize {
                1
            }
            fn value(&self, _: &[f64]) -> Result<f64> {
                Err(LabError::EvaluationFailure("integrator gave up".into()))
            }
            fn gradient(&self, _: &[f64]) -> Result<(Vec<f64>, bool)> {
                Ok((vec![1.0], false))
            }
        }
        let runs =
            multistart_with(&Broken, 3, &AscentConfig::default(), &|_, n| vec![0.0; n]).unwrap();
        assert!(runs.iter().all(|r| !r.converged && r.error.is_some()));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn backtracking_never_decreases_the_objective(seed in any::<u64>(), n in 2usize..4) {
            let mut r = rng::stream(seed, 0);
            let map = KinematicMap::new(random_density(&mut r, n), n).unwrap();
            let spec = ObjectiveSpec::type_two(
                crate::quantum::Observable::random(&mut r, n), 0.5, EntropyFamily::VonNeumann).unwrap();
            let objective = ControlledObjective::new(&spec, &map).unwrap();
            let cfg = AscentConfig { max_iterations: 60, step_size: 4.0, seed, ..AscentConfig::default() };
            let run = ascend(&objective, standard_normal_start(seed, 0, map.n_params()), &cfg, 0);
            for w in run.trajectory.windows(2) {
                prop_assert!(w[1] >= w[0] - 1e-12);
            }
        }
    }
}
