//! Column-stochastic matrices: the classical kinematic control picture.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::ControlMap;
use crate::classical::{Distribution, PhaseSpace};
use crate::error::{LabError, Result};
use crate::state::{Regime, State, StateGradient};
use crate::tolerances::TOLERANCES;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StochasticMap {
    matrix: DMatrix<f64>,
}

impl StochasticMap {
    pub fn new(mut matrix: DMatrix<f64>) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() || matrix.nrows() == 0 {
            return Err(LabError::NotSquare {
                rows: matrix.nrows(),
                cols: matrix.ncols(),
            });
        }
        for x in matrix.iter_mut() {
            if !x.is_finite() || *x < -TOLERANCES.weight_clamp {
                return Err(LabError::InvalidParameter(format!(
                    "stochastic entry {x} is negative or non-finite"
                )));
            }
            *x = x.max(0.0);
        }
        for (j, col) in matrix.column_iter().enumerate() {
            let s = col.sum();
            if (s - 1.0).abs() > TOLERANCES.column_sum {
                return Err(LabError::InvalidParameter(format!(
                    "column {j} sums to {s}"
                )));
            }
        }
        Ok(Self { matrix })
    }

    pub fn cells(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }
}

/// Softmax over each column of the row-major m×m matrix `raw`.
pub fn stochastic_from_params(raw: &[f64], cells: usize) -> Result<StochasticMap> {
    if raw.len() != cells * cells {
        return Err(LabError::DimensionMismatch {
            expected: cells * cells,
            found: raw.len(),
        });
    }
    if raw.iter().any(|x| !x.is_finite()) {
        return Err(LabError::NonFinite("stochastic parameters"));
    }
    Ok(StochasticMap {
        matrix: softmax_columns(raw, cells),
    })
}

fn softmax_columns(raw: &[f64], m: usize) -> DMatrix<f64> {
    let mut out = DMatrix::from_row_slice(m, m, raw);
    for mut col in out.column_iter_mut() {
        let hi = col.max();
        col.apply(|x| *x = (*x - hi).exp());
        let z = col.sum();
        col.unscale_mut(z);
    }
    out
}

pub fn apply_stochastic(map: &StochasticMap, d: &Distribution) -> Result<Distribution> {
    if map.cells() != d.weights().len() {
        return Err(LabError::SpaceMismatch);
    }
    let w = nalgebra::DVector::from_column_slice(d.weights());
    let out = &map.matrix * w;
    Distribution::new(d.space().clone(), out.iter().cloned().collect())
}

/// u ↦ M(u)·p from a fixed initial distribution.
#[derive(Debug, Clone)]
pub struct StochasticControl {
    initial: Distribution,
}

impl StochasticControl {
    pub fn new(initial: Distribution) -> Self {
        Self { initial }
    }

    pub fn uniform(cells: usize) -> Result<Self> {
        Ok(Self::new(Distribution::uniform(PhaseSpace::new(cells)?)))
    }

    pub fn cells(&self) -> usize {
        self.initial.weights().len()
    }

    pub fn initial(&self) -> &Distribution {
        &self.initial
    }
}

impl ControlMap for StochasticControl {
    fn regime(&self) -> Regime {
        Regime::Classical
    }

    fn n_params(&self) -> usize {
        self.cells() * self.cells()
    }

    fn state(&self, params: &[f64]) -> Result<State> {
        let map = stochastic_from_params(params, self.cells())?;
        Ok(State::Classical(apply_stochastic(&map, &self.initial)?))
    }

    fn pullback(&self, params: &[f64], gradient: &StateGradient) -> Option<Result<Vec<f64>>> {
        let StateGradient::Classical(g) = gradient else {
            return Some(Err(LabError::RegimeMismatch));
        };
        let m = self.cells();
        if g.len() != m {
            return Some(Err(LabError::DimensionMismatch {
                expected: m,
                found: g.len(),
            }));
        }
        Some(stochastic_from_params(params, m).map(|map| {
            let w = self.initial.weights();
            let s = map.matrix();
            // ∂/∂raw[l, j] of Σ_k g_k M_kj p_j = p_j M_lj (g_l − Σ_k g_k M_kj)
            let mut out = vec![0.0; m * m];
            for j in 0..m {
                let mean: f64 = (0..m).map(|k| g[k] * s[(k, j)]).sum();
                for l in 0..m {
                    out[l * m + j] = w[j] * s[(l, j)] * (g[l] - mean);
                }
            }
            out
        }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use rand::Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn zero_raw_gives_uniform_columns() {
        let map = stochastic_from_params(&[0.0; 9], 3).unwrap();
        assert!(map.matrix().iter().all(|x| (x - 1.0 / 3.0).abs() < 1e-15));
    }

    #[test]
    fn saturated_column() {
        // raw column 0 = (+20, −20)
        let map = stochastic_from_params(&[20.0, 0.0, -20.0, 0.0], 2).unwrap();
        assert!((map.matrix()[(0, 0)] - 1.0).abs() < 1e-9);
        assert!(map.matrix()[(1, 0)] < 1e-9);
    }

    #[test]
    fn random_raw_columns_are_normalized() {
        let mut r = rng::stream(31, 0);
        for _ in 0..1000 {
            let m = r.random_range(1..=8);
            let raw: Vec<f64> = (0..m * m)
                .map(|_| 3.0 * r.sample::<f64, _>(StandardNormal))
                .collect();
            let map = stochastic_from_params(&raw, m).unwrap();
            for col in map.matrix().column_iter() {
                assert!((col.sum() - 1.0).abs() <= 1e-12);
                assert!(col.iter().all(|&x| x >= 0.0));
            }
        }
    }

    #[test]
    fn apply_examples() {
        let space = PhaseSpace::new(3).unwrap();
        let mut r = rng::stream(32, 0);
        let d = Distribution::random(&mut r, space.clone());
        let id = StochasticMap::new(DMatrix::identity(3, 3)).unwrap();
        assert_eq!(apply_stochastic(&id, &d).unwrap(), d);

        let w = [0.2, 0.5, 0.3];
        let rank_one = StochasticMap::new(DMatrix::from_fn(3, 3, |i, _| w[i])).unwrap();
        let out = apply_stochastic(&rank_one, &d).unwrap();
        assert!(out
            .weights()
            .iter()
            .zip(w)
            .all(|(a, b)| (a - b).abs() < 1e-15));

        for _ in 0..200 {
            let raw: Vec<f64> = (0..9).map(|_| r.sample::<f64, _>(StandardNormal)).collect();
            let map = stochastic_from_params(&raw, 3).unwrap();
            let out = apply_stochastic(&map, &Distribution::random(&mut r, space.clone())).unwrap();
            assert!((out.weights().iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        }

        let wrong = Distribution::uniform(PhaseSpace::new(2).unwrap());
        assert_eq!(apply_stochastic(&id, &wrong), Err(LabError::SpaceMismatch));
    }

    #[test]
    fn invalid_stochastic_matrices_are_rejected() {
        assert!(StochasticMap::new(DMatrix::from_element(2, 2, 0.6)).is_err());
        assert!(StochasticMap::new(DMatrix::from_row_slice(2, 2, &[1.1, 0.0, -0.1, 1.0])).is_err());
    }

    #[test]
    fn analytic_pullback_matches_central_differences() {
        let mut r = rng::stream(33, 0);
        let space = PhaseSpace::new(4).unwrap();
        let ctl = StochasticControl::new(Distribution::random(&mut r, space));
        let g: Vec<f64> = (0..4).map(|_| r.sample::<f64, _>(StandardNormal)).collect();
        let params: Vec<f64> = (0..16)
            .map(|_| r.sample::<f64, _>(StandardNormal))
            .collect();
        let analytic = ctl
            .pullback(&params, &StateGradient::Classical(g.clone()))
            .unwrap()
            .unwrap();
        let f = |p: &[f64]| -> f64 {
            let s = ctl.state(p).unwrap();
            s.as_classical()
                .unwrap()
                .weights()
                .iter()
                .zip(&g)
                .map(|(a, b)| a * b)
                .sum()
        };
        let h = 1e-6;
        for k in 0..16 {
            let mut plus = params.clone();
            let mut minus = params.clone();
            plus[k] += h;
            minus[k] -= h;
            let fd = (f(&plus) - f(&minus)) / (2.0 * h);
            assert!((fd - analytic[k]).abs() < 1e-8, "k={k}");
        }
    }
}
