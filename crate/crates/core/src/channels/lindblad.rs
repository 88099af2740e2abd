//! Markovian master-equation propagation under piecewise-constant fields:
//!
//! dρ/dt = −i[H₀ + Σ_k u_k(t) H_k, ρ] + Σ_j γ_j (L_j ρ L_j† − ½{L_j†L_j, ρ}).
//!
//! States are vectorized row-major, so on each interval the generator is a
//! constant n²×n² superoperator and one classical RK4 step is the matrix
//! polynomial I + X + X²/2 + X³/6 + X⁴/24 with X = h·𝓛.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::ControlMap;
use crate::error::{LabError, Result};
use crate::linalg::{self, c, matrix_serde, CMatrix, I, ONE};
use crate::quantum::{DensityMatrix, HermitianOperand, Observable};
use crate::state::{Regime, State};
use crate::tolerances::TOLERANCES;

/// Steps per unit of ‖𝓛‖·Δt used as the starting resolution.
const STEPS_PER_GENERATOR_UNIT: f64 = 128.0;
const MAX_STEPS_PER_INTERVAL: usize = 1 << 24;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dissipator {
    #[serde(with = "matrix_serde")]
    pub operator: CMatrix,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LindbladModel {
    drift: Observable,
    controls: Vec<Observable>,
    dissipators: Vec<Dissipator>,
}

impl LindbladModel {
    pub fn new(
        drift: Observable,
        controls: Vec<Observable>,
        dissipators: Vec<Dissipator>,
    ) -> Result<Self> {
        let n = drift.dim();
        for h in &controls {
            if h.dim() != n {
                return Err(LabError::DimensionMismatch {
                    expected: n,
                    found: h.dim(),
                });
            }
        }
        for d in &dissipators {
            if d.operator.nrows() != n || d.operator.ncols() != n {
                return Err(LabError::DimensionMismatch {
                    expected: n,
                    found: d.operator.nrows(),
                });
            }
            linalg::ensure_finite(&d.operator, "dissipator")?;
            if !(d.rate.is_finite() && d.rate >= 0.0) {
                return Err(LabError::InvalidParameter(format!(
                    "dissipation rate {} must be >= 0",
                    d.rate
                )));
            }
        }
        Ok(Self {
            drift,
            controls,
            dissipators,
        })
    }

    pub fn dim(&self) -> usize {
        self.drift.dim()
    }

    pub fn n_controls(&self) -> usize {
        self.controls.len()
    }

    /// Superoperator of the generator for fixed control amplitudes.
    pub fn generator(&self, amplitudes: &[f64]) -> CMatrix {
        let n = self.dim();
        let id = CMatrix::identity(n, n);
        let mut h = self.drift.matrix().clone();
        for (hk, &u) in self.controls.iter().zip(amplitudes) {
            h += hk.matrix().scale(u);
        }
        let mut gen = (sandwich(&h, &id) - sandwich(&id, &h)) * (-I);
        for d in self.dissipators.iter().filter(|d| d.rate > 0.0) {
            let l = &d.operator;
            let ldl = l.adjoint() * l;
            let term =
                sandwich(l, &l.adjoint()) - (sandwich(&ldl, &id) + sandwich(&id, &ldl)).scale(0.5);
            gen += term.scale(d.rate);
        }
        gen
    }
}

/// Superoperator of ρ ↦ AρB on row-major vec(ρ).
fn sandwich(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let n = a.nrows();
    CMatrix::from_fn(n * n, n * n, |row, col| {
        let (i, j) = (row / n, row % n);
        let (k, l) = (col / n, col % n);
        a[(i, k)] * b[(l, j)]
    })
}

/// Piecewise-constant field: `values[step][channel]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlField {
    t0: f64,
    t1: f64,
    values: Vec<Vec<f64>>,
}

impl ControlField {
    pub fn new(t0: f64, t1: f64, values: Vec<Vec<f64>>) -> Result<Self> {
        if !(t0.is_finite() && t1.is_finite() && t1 > t0) {
            return Err(LabError::InvalidParameter(format!(
                "need t_end > t_start (got {t0}, {t1})"
            )));
        }
        let channels = values.first().map(|r| r.len()).ok_or_else(|| {
            LabError::InvalidParameter("a control field needs at least one step".into())
        })?;
        if values.iter().any(|r| r.len() != channels) {
            return Err(LabError::InvalidParameter(
                "every step must list the same number of channels".into(),
            ));
        }
        if values.iter().flatten().any(|x| !x.is_finite()) {
            return Err(LabError::NonFinite("control field"));
        }
        Ok(Self { t0, t1, values })
    }

    /// `params` is the row-major steps×channels amplitude matrix.
    pub fn from_params(t0: f64, t1: f64, steps: usize, params: &[f64]) -> Result<Self> {
        if steps == 0 || params.len() % steps != 0 {
            return Err(LabError::InvalidParameter(format!(
                "{} amplitudes do not fill {steps} steps",
                params.len()
            )));
        }
        let k = params.len() / steps;
        let values = if k == 0 {
            vec![Vec::new(); steps]
        } else {
            params.chunks(k).map(|r| r.to_vec()).collect()
        };
        Self::new(t0, t1, values)
    }

    pub fn zero(t0: f64, t1: f64, steps: usize, channels: usize) -> Result<Self> {
        Self::new(t0, t1, vec![vec![0.0; channels]; steps])
    }

    pub fn steps(&self) -> usize {
        self.values.len()
    }

    pub fn channels(&self) -> usize {
        self.values[0].len()
    }

    pub fn duration(&self) -> f64 {
        self.t1 - self.t0
    }

    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }
}

/// Final state plus integrator diagnostics.
#[derive(Debug, Clone)]
pub struct Propagation {
    pub state: DensityMatrix,
    pub steps_per_interval: Vec<usize>,
    pub max_trace_drift: f64,
}

pub fn propagate_lindblad(
    model: &LindbladModel,
    field: &ControlField,
    rho_i: &DensityMatrix,
) -> Result<DensityMatrix> {
    propagate_lindblad_traced(model, field, rho_i).map(|p| p.state)
}

pub fn propagate_lindblad_traced(
    model: &LindbladModel,
    field: &ControlField,
    rho_i: &DensityMatrix,
) -> Result<Propagation> {
    let n = model.dim();
    if rho_i.dim() != n {
        return Err(LabError::DimensionMismatch {
            expected: n,
            found: rho_i.dim(),
        });
    }
    if field.channels() != model.n_controls() {
        return Err(LabError::DimensionMismatch {
            expected: model.n_controls(),
            found: field.channels(),
        });
    }
    let dt = field.duration() / field.steps() as f64;
    let m = rho_i.matrix();
    let mut v = DVector::from_iterator(n * n, (0..n * n).map(|idx| m[(idx / n, idx % n)]));
    let mut steps_per_interval = Vec::with_capacity(field.steps());
    let mut max_drift = 0.0f64;

    for amplitudes in field.values() {
        let gen = model.generator(amplitudes);
        let norm = gen
            .row_iter()
            .map(|r| r.iter().map(|z| z.norm()).sum::<f64>())
            .fold(0.0, f64::max);
        let mut steps = ((STEPS_PER_GENERATOR_UNIT * norm * dt).ceil() as usize)
            .max(1)
            .next_power_of_two();
        let (mut coarse, drift) = integrate_interval(&gen, &v, dt, steps, n)?;
        max_drift = max_drift.max(drift);
        loop {
            if steps * 2 > MAX_STEPS_PER_INTERVAL {
                return Err(LabError::IntegrationFailure(format!(
                    "step refinement reached the minimum step {:e}",
                    dt / steps as f64
                )));
            }
            let (fine, drift) = integrate_interval(&gen, &v, dt, steps * 2, n)?;
            max_drift = max_drift.max(drift);
            steps *= 2;
            let change = coarse
                .iter()
                .zip(fine.iter())
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max);
            coarse = fine;
            if change <= TOLERANCES.integrator_refinement {
                break;
            }
        }
        v = coarse;
        steps_per_interval.push(steps);
    }

    let out = CMatrix::from_fn(n, n, |i, j| v[i * n + j]);
    let state = DensityMatrix::project(&out, TOLERANCES.integrator_drift).map_err(|e| {
        LabError::IntegrationFailure(format!("final state drifted outside the state space: {e}"))
    })?;
    Ok(Propagation {
        state,
        steps_per_interval,
        max_trace_drift: max_drift,
    })
}

/// `steps` RK4 steps of size dt/steps; checks the trace after every step.
fn integrate_interval(
    gen: &CMatrix,
    v0: &DVector<Complex64>,
    dt: f64,
    steps: usize,
    n: usize,
) -> Result<(DVector<Complex64>, f64)> {
    let x = gen * c(dt / steps as f64, 0.0);
    let dim = x.nrows();
    let id = DMatrix::<Complex64>::identity(dim, dim);
    // I + X(I + X/2(I + X/3(I + X/4)))
    let mut step = id.clone();
    for k in [4.0, 3.0, 2.0, 1.0] {
        step = &id + &x * step * c(1.0 / k, 0.0);
    }
    let mut v = v0.clone();
    let mut drift = 0.0f64;
    for _ in 0..steps {
        v = &step * v;
        let tr: Complex64 = (0..n).map(|i| v[i * n + i]).sum();
        let d = (tr - ONE).norm();
        drift = drift.max(d);
        if d > TOLERANCES.integrator_drift {
            return Err(LabError::IntegrationFailure(format!(
                "trace drift {d:e} exceeds tolerance"
            )));
        }
    }
    Ok((v, drift))
}

/// Dynamic control map: the field amplitudes are the controls.
#[derive(Debug, Clone)]
pub struct LindbladControl {
    model: LindbladModel,
    t0: f64,
    t1: f64,
    steps: usize,
    initial: DensityMatrix,
}

impl LindbladControl {
    pub fn new(
        model: LindbladModel,
        t0: f64,
        t1: f64,
        steps: usize,
        initial: DensityMatrix,
    ) -> Result<Self> {
        if initial.dim() != model.dim() {
            return Err(LabError::DimensionMismatch {
                expected: model.dim(),
                found: initial.dim(),
            });
        }
        ControlField::zero(t0, t1, steps.max(1), model.n_controls())?;
        if steps == 0 {
            return Err(LabError::InvalidParameter(
                "a control field needs at least one step".into(),
            ));
        }
        Ok(Self {
            model,
            t0,
            t1,
            steps,
            initial,
        })
    }

    pub fn model(&self) -> &LindbladModel {
        &self.model
    }

    pub fn field(&self, params: &[f64]) -> Result<ControlField> {
        if params.len() != self.n_params() {
            return Err(LabError::DimensionMismatch {
                expected: self.n_params(),
                found: params.len(),
            });
        }
        ControlField::from_params(self.t0, self.t1, self.steps, params)
    }
}

impl ControlMap for LindbladControl {
    fn regime(&self) -> Regime {
        Regime::Quantum
    }

    fn n_params(&self) -> usize {
        self.steps * self.model.n_controls()
    }

    fn state(&self, params: &[f64]) -> Result<State> {
        let field = if self.model.n_controls() == 0 {
            ControlField::zero(self.t0, self.t1, self.steps, 0)?
        } else {
            self.field(params)?
        };
        Ok(State::Quantum(propagate_lindblad(
            &self.model,
            &field,
            &self.initial,
        )?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{from_rows, max_abs_diff, ZERO};
    use crate::quantum::{pauli, random_density};
    use crate::rng;

    fn lowering() -> CMatrix {
        // σ₋ = |0⟩⟨1| with |1⟩ the excited level
        from_rows(&[&[ZERO, ONE], &[ZERO, ZERO]])
    }

    #[test]
    fn frozen_dynamics_leave_state_unchanged() {
        let mut r = rng::stream(41, 0);
        let rho = random_density(&mut r, 3);
        let model = LindbladModel::new(Observable::diagonal(&[0.0; 3]), vec![], vec![]).unwrap();
        let field = ControlField::zero(0.0, 2.0, 3, 0).unwrap();
        let out = propagate_lindblad(&model, &field, &rho).unwrap();
        assert!(max_abs_diff(out.matrix(), rho.matrix()) < 1e-14);
    }

    #[test]
    fn energy_eigenstate_is_stationary_under_commuting_fields() {
        let model = LindbladModel::new(pauli('z'), vec![pauli('z')], vec![]).unwrap();
        let field = ControlField::new(0.0, 1.5, vec![vec![0.3], vec![-2.0], vec![1.1]]).unwrap();
        let rho = DensityMatrix::diagonal(&[1.0, 0.0]).unwrap();
        let out = propagate_lindblad(&model, &field, &rho).unwrap();
        assert!(max_abs_diff(out.matrix(), rho.matrix()) < 1e-13);
    }

    #[test]
    fn amplitude_damping_matches_exponential_decay() {
        let model = LindbladModel::new(
            Observable::diagonal(&[0.0, 0.0]),
            vec![],
            vec![Dissipator {
                operator: lowering(),
                rate: 1.0,
            }],
        )
        .unwrap();
        let field = ControlField::zero(0.0, 1.0, 1, 0).unwrap();
        let excited = DensityMatrix::diagonal(&[0.0, 1.0]).unwrap();
        let p = propagate_lindblad_traced(&model, &field, &excited).unwrap();
        let oracle = (-1.0f64).exp();
        assert!((oracle - 0.367879).abs() < 1e-6);
        assert!((p.state.matrix()[(1, 1)].re - oracle).abs() <= 1e-7);
        assert!(p.max_trace_drift <= 1e-8);
    }

    #[test]
    fn dephasing_decays_coherence_at_twice_the_rate() {
        // L = σ_z, γ = 1: |ρ01| = ½ e^{−2t}; phase −2∫(1 + u) dt
        let model = LindbladModel::new(
            pauli('z'),
            vec![pauli('z')],
            vec![Dissipator {
                operator: pauli('z').matrix().clone(),
                rate: 1.0,
            }],
        )
        .unwrap();
        let field = ControlField::new(0.0, 1.0, vec![vec![-1.0], vec![-1.0]]).unwrap();
        let out = propagate_lindblad(&model, &field, &crate::quantum::plus_state()).unwrap();
        assert!((out.matrix()[(0, 1)].re - 0.5 * (-2.0f64).exp()).abs() < 1e-9);
        assert!(out.matrix()[(0, 1)].im.abs() < 1e-9);
    }

    #[test]
    fn sandwich_superoperator_matches_matrix_products() {
        let mut r = rng::stream(42, 0);
        let a = linalg::random_complex_gaussian(&mut r, 3, 3);
        let b = linalg::random_complex_gaussian(&mut r, 3, 3);
        let x = linalg::random_complex_gaussian(&mut r, 3, 3);
        let v = DVector::from_iterator(9, (0..9).map(|k| x[(k / 3, k % 3)]));
        let sv = sandwich(&a, &b) * v;
        let direct = &a * &x * &b;
        for k in 0..9 {
            assert!((sv[k] - direct[(k / 3, k % 3)]).norm() < 1e-12);
        }
    }

    #[test]
    fn invalid_models_and_fields_are_rejected() {
        let bad_rate = Dissipator {
            operator: lowering(),
            rate: -1.0,
        };
        assert!(LindbladModel::new(pauli('z'), vec![], vec![bad_rate]).is_err());
        assert!(LindbladModel::new(
            pauli('z'),
            vec![Observable::diagonal(&[1.0, 2.0, 3.0])],
            vec![]
        )
        .is_err());
        assert!(ControlField::new(1.0, 1.0, vec![vec![0.0]]).is_err());
        assert!(ControlField::new(0.0, 1.0, vec![]).is_err());
        assert!(ControlField::new(0.0, 1.0, vec![vec![0.0], vec![0.0, 1.0]]).is_err());
    }

    #[test]
    fn control_field_json_shape() {
        let f = ControlField::new(0.0, 1.0, vec![vec![0.5]]).unwrap();
        assert_eq!(
            serde_json::to_string(&f).unwrap(),
            r#"{"t0":0.0,"t1":1.0,"values":[[0.5]]}"#
        );
    }
}
