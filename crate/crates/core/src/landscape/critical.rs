//! Second-order classification of terminal points.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::ascent::{AscentConfig, Landscape};
use super::probes::oracle_optimum;
use crate::channels::{jacobian, ControlMap};
use crate::error::{LabError, Result};
use crate::linalg::{row_space, symmetric_eigenvalues};
use crate::objectives::{ControlledObjective, ObjectiveSpec};
use crate::rng;
use crate::tolerances::TOLERANCES;

/// Outer difference step for the Hessian (gradients are differenced again).
const HESSIAN_STEP: f64 = 1e-4;

/// Offset of the second Jacobian sample. At degenerate points (e.g. a pure
/// output state) the Jacobian loses directions that still move the state at
/// second order; a nearby generic point recovers them.
const NEIGHBOUR_OFFSET: f64 = 1e-3;

pub const DEFAULT_VALUE_TOL: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Classification {
    GlobalMax,
    Saddle,
    TrapCandidate,
    MinimumOrOther,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CriticalPointReport {
    pub gradient_norm: f64,
    /// Ascending eigenvalues of the Hessian restricted to state-changing directions.
    pub hessian_spectrum: Vec<f64>,
    /// Withheld (`None`) when the point is not critical.
    pub classification: Option<Classification>,
    pub objective_value: f64,
    pub oracle_value: f64,
    pub oracle_gap: f64,
    /// ε_H actually used for the sign test.
    pub sign_threshold: f64,
    /// Rank of the control-to-state Jacobian at the point.
    pub jacobian_rank: usize,
}

impl CriticalPointReport {
    /// The report if the point was critical, `NotCritical` otherwise.
    pub fn require_critical(&self) -> Result<&Self> {
        match self.classification {
            Some(_) => Ok(self),
            None => Err(LabError::NotCritical {
                gradient_norm: self.gradient_norm,
            }),
        }
    }
}

/// Sign test on a projected Hessian spectrum.
pub fn classify_spectrum(
    spectrum: &[f64],
    oracle_gap: f64,
    value_tol: f64,
) -> (Classification, f64) {
    let scale = spectrum.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let eps = (TOLERANCES.hessian_sign * scale).max(TOLERANCES.hessian_sign_floor);
    let up = spectrum.iter().any(|&x| x > eps);
    let down = spectrum.iter().any(|&x| x < -eps);
    let class = match (up, down) {
        (false, _) if oracle_gap <= value_tol => Classification::GlobalMax,
        (false, _) => Classification::TrapCandidate,
        (true, true) => Classification::Saddle,
        (true, false) => Classification::MinimumOrOther,
    };
    (class, eps)
}

/// Classifies `params` against the closed-form oracle of `spec`.
pub fn classify_critical_point(
    spec: &ObjectiveSpec,
    map: &dyn ControlMap,
    params: &[f64],
    cfg: &AscentConfig,
    value_tol: f64,
) -> Result<CriticalPointReport> {
    let oracle = oracle_optimum(spec)?.value;
    classify_against(spec, map, params, cfg, oracle, value_tol)
}

/// As [`classify_critical_point`] with a caller-supplied optimum, e.g. the
/// best value of a constrained family.
pub fn classify_against(
    spec: &ObjectiveSpec,
    map: &dyn ControlMap,
    params: &[f64],
    cfg: &AscentConfig,
    oracle_value: f64,
    value_tol: f64,
) -> Result<CriticalPointReport> {
    let objective = ControlledObjective::new(spec, map)?;
    let value = objective.value(params)?;
    let (g, _) = Landscape::gradient(&objective, params)?;
    let gradient_norm = g.iter().map(|x| x * x).sum::<f64>().sqrt();
    let jac = jacobian(map, params, TOLERANCES.fd_step)?;
    let basis = row_space(&jac, TOLERANCES.rank_cutoff);
    let rank = basis.ncols();
    let oracle_gap = oracle_value - value;

    let mut report = CriticalPointReport {
        gradient_norm,
        hessian_spectrum: Vec::new(),
        classification: None,
        objective_value: value,
        oracle_value,
        oracle_gap,
        sign_threshold: f64::NAN,
        jacobian_rank: rank,
    };
    if gradient_norm > cfg.gradient_tolerance {
        return Ok(report);
    }

    let directions = state_directions(map, params, &basis)?;
    report.hessian_spectrum = projected_hessian(&objective, params, &directions)?;
    let (class, eps) = classify_spectrum(&report.hessian_spectrum, oracle_gap, value_tol);
    report.classification = Some(class);
    report.sign_threshold = eps;
    Ok(report)
}

/// Orthonormal span of the Jacobian row spaces at `params` and at a fixed
/// pseudo-random neighbour.
fn state_directions(
    map: &dyn ControlMap,
    params: &[f64],
    here: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let mut r = rng::stream(0, rng::streams::HESSIAN_PROBE);
    let mut offset: Vec<f64> = (0..params.len())
        .map(|_| r.sample(StandardNormal))
        .collect();
    let len = offset.iter().map(|x| x * x).sum::<f64>().sqrt();
    let near: Vec<f64> = params
        .iter()
        .zip(offset.iter_mut())
        .map(|(p, o)| p + NEIGHBOUR_OFFSET * *o / len)
        .collect();
    let there = row_space(
        &jacobian(map, &near, TOLERANCES.fd_step)?,
        TOLERANCES.rank_cutoff,
    );
    let stacked = DMatrix::from_fn(params.len(), here.ncols() + there.ncols(), |i, j| {
        if j < here.ncols() {
            here[(i, j)]
        } else {
            there[(i, j - here.ncols())]
        }
    });
    // Column space of the stack = row space of its transpose.
    Ok(row_space(&stacked.transpose(), TOLERANCES.rank_cutoff))
}

/// Eigenvalues of Wᵀ H W, with H·w taken as a central difference of the
/// gradient along each orthonormal column w of W.
fn projected_hessian(
    landscape: &dyn Landscape,
    params: &[f64],
    w: &DMatrix<f64>,
) -> Result<Vec<f64>> {
    let k = w.ncols();
    if k == 0 {
        return Ok(Vec::new());
    }
    let n = params.len();
    let mut hw = DMatrix::zeros(n, k);
    let mut probe = vec![0.0; n];
    for j in 0..k {
        let col = w.column(j);
        let shifted = |sign: f64, probe: &mut Vec<f64>| -> Result<Vec<f64>> {
            for i in 0..n {
                probe[i] = params[i] + sign * HESSIAN_STEP * col[i];
            }
            landscape.gradient(probe).map(|(g, _)| g)
        };
        let plus = shifted(1.0, &mut probe)?;
        let minus = shifted(-1.0, &mut probe)?;
        for i in 0..n {
            hw[(i, j)] = (plus[i] - minus[i]) / (2.0 * HESSIAN_STEP);
        }
    }
    let mut h = w.transpose() * hw;
    h = (&h + h.transpose()) * 0.5;
    Ok(symmetric_eigenvalues(&h))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::KinematicMap;
    use crate::landscape::fixtures::BlochFamily;
    use crate::linalg::CMatrix;
    use crate::quantum::{pauli, random_density, Observable};
    use std::f64::consts::PI;

    #[test]
    fn top_eigenprojector_channel_is_a_global_max() {
        let mut r = rng::stream(21, 0);
        let n = 3;
        let o = Observable::random(&mut r, n);
        let sd = o.spectrum();
        let psi = sd.eigenvectors.column(n - 1).into_owned();
        // K_i = |ψ⟩⟨i| stacked into an nr × n isometry with r = n.
        let mut v = CMatrix::zeros(n * n, n);
        for i in 0..n {
            for a in 0..n {
                v[(i * n + a, i)] = psi[a];
            }
        }
        let map = KinematicMap::new(random_density(&mut r, n), n).unwrap();
        let params = map.params_for_isometry(&v).unwrap();
        let spec = ObjectiveSpec::type_one(o);
        let report = classify_critical_point(
            &spec,
            &map,
            &params,
            &AscentConfig::default(),
            DEFAULT_VALUE_TOL,
        )
        .unwrap();
        assert_eq!(
            report.classification,
            Some(Classification::GlobalMax),
            "{report:?}"
        );
        assert!(report.oracle_gap.abs() <= 1e-8);
    }

    #[test]
    fn bloch_family_at_pi_is_a_trap_candidate() {
        let spec = ObjectiveSpec::type_one(pauli('z'));
        let report = classify_against(
            &spec,
            &BlochFamily,
            &[PI],
            &AscentConfig::default(),
            0.9,
            DEFAULT_VALUE_TOL,
        )
        .unwrap();
        assert_eq!(report.classification, Some(Classification::TrapCandidate));
        assert!((report.objective_value + 0.3).abs() < 1e-12);
        assert!((report.oracle_gap - 1.2).abs() < 1e-12);
        // r_z'' = −0.6 cos θ − 1.2 cos 2θ, halved by the Bloch embedding of σ_z.
        assert_eq!(report.hessian_spectrum.len(), 1);
        assert!((report.hessian_spectrum[0] + 0.6).abs() < 1e-5);
    }

    #[test]
    fn bloch_family_at_two_thirds_pi_is_a_minimum() {
        let spec = ObjectiveSpec::type_one(pauli('z'));
        let report = classify_against(
            &spec,
            &BlochFamily,
            &[2.0 * PI / 3.0],
            &AscentConfig::default(),
            0.9,
            1e-5,
        )
        .unwrap();
        assert_eq!(report.classification, Some(Classification::MinimumOrOther));
    }

    #[test]
    fn identity_observable_is_flat_and_globally_optimal() {
        let mut r = rng::stream(22, 0);
        let map = KinematicMap::new(random_density(&mut r, 2), 4).unwrap();
        let spec = ObjectiveSpec::type_one(Observable::diagonal(&[1.0, 1.0]));
        let params = crate::landscape::standard_normal_start(22, 0, map.n_params());
        let report = classify_critical_point(
            &spec,
            &map,
            &params,
            &AscentConfig::default(),
            DEFAULT_VALUE_TOL,
        )
        .unwrap();
        assert!(report.gradient_norm < 1e-12);
        assert!((report.objective_value - 1.0).abs() < 1e-12);
        assert!(report.oracle_gap.abs() < 1e-12);
        assert_eq!(report.classification, Some(Classification::GlobalMax));
    }

    #[test]
    fn non_critical_points_withhold_the_classification() {
        let spec = ObjectiveSpec::type_one(pauli('z'));
        let report = classify_against(
            &spec,
            &BlochFamily,
            &[1.0],
            &AscentConfig::default(),
            0.9,
            1e-5,
        )
        .unwrap();
        assert_eq!(report.classification, None);
        assert!(matches!(
            report.require_critical(),
            Err(LabError::NotCritical { .. })
        ));
    }

    #[test]
    fn spectrum_rules() {
        assert_eq!(
            classify_spectrum(&[-1.0, -0.5], 0.0, 1e-5).0,
            Classification::GlobalMax
        );
        assert_eq!(
            classify_spectrum(&[-1.0, -0.5], 0.1, 1e-5).0,
            Classification::TrapCandidate
        );
        assert_eq!(
            classify_spectrum(&[-1.0, 0.5], 0.1, 1e-5).0,
            Classification::Saddle
        );
        assert_eq!(
            classify_spectrum(&[0.0, 0.5], 0.1, 1e-5).0,
            Classification::MinimumOrOther
        );
        assert_eq!(
            classify_spectrum(&[], 0.0, 1e-5).0,
            Classification::GlobalMax
        );
        // Tiny positive curvature below the relative threshold still counts as flat.
        assert_eq!(
            classify_spectrum(&[-1.0, 1e-8], 0.0, 1e-5).0,
            Classification::GlobalMax
        );
    }
}
