use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use super::ControlMap;
use crate::error::{LabError, Result};
use crate::linalg::numerical_rank;
use crate::rng;
use crate::tolerances::TOLERANCES;

/// Central-difference Jacobian of the state coordinates (rows) with
/// respect to the controls (columns).
pub fn jacobian(map: &dyn ControlMap, point: &[f64], h: f64) -> Result<DMatrix<f64>> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(LabError::InvalidParameter(format!(
            "difference step must be positive (got {h})"
        )));
    }
    if point.len() != map.n_params() {
        return Err(LabError::DimensionMismatch {
            expected: map.n_params(),
            found: point.len(),
        });
    }
    let eval = |p: &[f64]| {
        map.state(p)
            .map(|s| s.coordinates())
            .map_err(|e| LabError::EvaluationFailure(e.to_string()))
    };
    let rows = eval(point)?.len();
    let mut jac = DMatrix::zeros(rows, point.len());
    let mut probe = point.to_vec();
    for k in 0..point.len() {
        probe[k] = point[k] + h;
        let plus = eval(&probe)?;
        probe[k] = point[k] - h;
        let minus = eval(&probe)?;
        probe[k] = point[k];
        for (i, (a, b)) in plus.iter().zip(&minus).enumerate() {
            jac[(i, k)] = (a - b) / (2.0 * h);
        }
    }
    Ok(jac)
}

/// Numerical rank of the control-to-state Jacobian; full rank (n² − 1 or
/// m − 1) means the map is locally surjective at `point`.
pub fn jacobian_rank(map: &dyn ControlMap, point: &[f64], h: f64) -> Result<usize> {
    Ok(numerical_rank(
        &jacobian(map, point, h)?,
        TOLERANCES.rank_cutoff,
    ))
}

/// Ranks at `points` standard-normal control vectors drawn from the
/// rank-point stream of `seed`.
pub fn rank_survey(map: &dyn ControlMap, points: usize, seed: u64, h: f64) -> Result<Vec<usize>> {
    let mut r = rng::stream(seed, rng::streams::RANK_POINTS);
    (0..points)
        .map(|_| {
            let u: Vec<f64> = (0..map.n_params())
                .map(|_| r.sample(StandardNormal))
                .collect();
            jacobian_rank(map, &u, h)
        })
        .collect()
}
