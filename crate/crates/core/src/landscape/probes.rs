//! Ground-truth optima, the trap-free verdict and the concavity probe.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::ascent::OptimizationRun;
use crate::classical::{gibbs_distribution, Distribution, RandomFunction};
use crate::entropy::EntropyFamily;
use crate::error::{LabError, Result};
use crate::linalg::CMatrix;
use crate::objectives::{evaluate, ObjectiveKind, ObjectiveObservable, ObjectiveSpec};
use crate::quantum::{gibbs_state, random_density, DensityMatrix, Observable};
use crate::rng;
use crate::state::State;

/// Relative gap under which two top eigenvalues count as degenerate.
const DEGENERACY_GAP: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct OracleOptimum {
    pub value: f64,
    pub argmax_state: State,
    /// The maximizer is not unique; any endpoint with matching value is optimal.
    pub degenerate: bool,
}

/// Closed-form global maximum over the full state space.
pub fn oracle_optimum(spec: &ObjectiveSpec) -> Result<OracleOptimum> {
    match (&spec.observable, spec.kind) {
        (ObjectiveObservable::Quantum(o), ObjectiveKind::TypeOne) => {
            let sd = o.spectrum();
            let n = sd.dim();
            let top = sd.max();
            let degenerate =
                n > 1 && top - sd.eigenvalues[n - 2] <= DEGENERACY_GAP * top.abs().max(1.0);
            let v = sd.eigenvectors.column(n - 1);
            let psi: Vec<_> = v.iter().cloned().collect();
            Ok(OracleOptimum {
                value: top,
                argmax_state: DensityMatrix::pure(&psi)?.into(),
                degenerate,
            })
        }
        (ObjectiveObservable::Classical(f), ObjectiveKind::TypeOne) => {
            let values = f.values();
            let top = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let cell = values
                .iter()
                .position(|&v| v == top)
                .expect("nonempty phase space");
            let degenerate = values.iter().filter(|&&v| v == top).count() > 1;
            let d = Distribution::point_mass(f.space().clone(), cell)?;
            Ok(OracleOptimum {
                value: top,
                argmax_state: d.into(),
                degenerate,
            })
        }
        (
            obs,
            ObjectiveKind::TypeTwo {
                temperature,
                entropy,
            },
        ) => {
            let state: State = match (obs, entropy) {
                (ObjectiveObservable::Quantum(o), e) if e.is_logarithmic() => {
                    gibbs_state(o, temperature)?.into()
                }
                (ObjectiveObservable::Classical(f), e) if e.is_logarithmic() => {
                    gibbs_distribution(f, temperature)?.into()
                }
                (ObjectiveObservable::Quantum(o), EntropyFamily::Tsallis { q }) => {
                    tsallis_state(o, temperature, q)?.into()
                }
                (ObjectiveObservable::Classical(f), EntropyFamily::Tsallis { q }) => {
                    let p = tsallis_weights(f.values(), temperature, q);
                    Distribution::new(f.space().clone(), p)?.into()
                }
                _ => unreachable!("entropy families are logarithmic or Tsallis"),
            };
            let value = evaluate(spec, &state)?;
            Ok(OracleOptimum {
                value,
                argmax_state: state,
                degenerate: false,
            })
        }
    }
}

/// Maximizer of −Σ p_i v_i + T·S_q(p) over the simplex. Stationarity gives
/// p_i(μ) = [(q − 1)(−v_i − μ)/(T q)]^{1/(q−1)} (clamped at zero for q > 1);
/// μ is fixed by Σ p_i = 1 through bisection, p being decreasing in μ.
fn tsallis_weights(values: &[f64], temperature: f64, q: f64) -> Vec<f64> {
    let weights_at = |mu: f64| -> Vec<f64> {
        values
            .iter()
            .map(|&v| {
                let base = (q - 1.0) * (-v - mu) / (temperature * q);
                if base <= 0.0 {
                    if q > 1.0 {
                        0.0
                    } else {
                        f64::INFINITY
                    }
                } else {
                    base.powf(1.0 / (q - 1.0))
                }
            })
            .collect()
    };
    let total = |mu: f64| weights_at(mu).iter().sum::<f64>();
    let v_min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let v_max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    // q > 1: p_i > 0 needs μ < −v_i; q < 1: needs μ > −v_i for every i.
    let (mut lo, mut hi) = if q > 1.0 {
        (-v_max - 1.0, -v_min)
    } else {
        (-v_min, -v_min + 1.0)
    };
    while total(lo) < 1.0 {
        lo -= (hi - lo).max(1.0);
    }
    while total(hi) > 1.0 {
        hi += (hi - lo).max(1.0);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if total(mid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let p = weights_at(0.5 * (lo + hi));
    let s: f64 = p.iter().sum();
    p.into_iter().map(|x| x / s).collect()
}

fn tsallis_state(o: &Observable, temperature: f64, q: f64) -> Result<DensityMatrix> {
    let sd = o.spectrum();
    let p = tsallis_weights(sd.eigenvalues.as_slice(), temperature, q);
    let mut v: CMatrix = sd.eigenvectors.clone();
    for (j, w) in p.iter().enumerate() {
        v.column_mut(j).scale_mut(w.sqrt());
    }
    DensityMatrix::project(&(&v * v.adjoint()), 1e-10)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TrapFreeVerdict {
    pub n_runs: usize,
    pub n_converged: usize,
    pub n_reached_oracle: usize,
    /// Largest oracle − finalObjective over converged runs.
    pub worst_gap: f64,
    pub trap_free: bool,
    /// Set when no run converged, so no verdict could be drawn.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

pub fn verify_trap_free(
    runs: &[OptimizationRun],
    oracle_value: f64,
    value_tol: f64,
) -> TrapFreeVerdict {
    let converged: Vec<&OptimizationRun> = runs.iter().filter(|r| r.converged).collect();
    let gaps: Vec<f64> = converged
        .iter()
        .map(|r| oracle_value - r.final_objective)
        .collect();
    let worst_gap = gaps.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let n_reached_oracle = gaps.iter().filter(|&&g| g <= value_tol).count();
    let note = if runs.is_empty() {
        Some("no runs supplied".to_string())
    } else if converged.is_empty() {
        Some("no run converged; trap-freeness cannot be assessed".to_string())
    } else {
        None
    };
    TrapFreeVerdict {
        n_runs: runs.len(),
        n_converged: converged.len(),
        n_reached_oracle,
        worst_gap: if converged.is_empty() {
            f64::NAN
        } else {
            worst_gap
        },
        trap_free: !converged.is_empty() && n_reached_oracle == converged.len(),
        note,
    }
}

/// Random state of the spec's regime and dimension: Hilbert–Schmidt for
/// density matrices, flat Dirichlet for distributions.
pub fn random_state<R: Rng + ?Sized>(rng: &mut R, spec: &ObjectiveSpec) -> State {
    match &spec.observable {
        ObjectiveObservable::Quantum(o) => random_density(rng, o.matrix().nrows()).into(),
        ObjectiveObservable::Classical(f) => Distribution::random(rng, f.space().clone()).into(),
    }
}

pub fn mix(s0: &State, s1: &State, lambda: f64) -> Result<State> {
    match (s0, s1) {
        (State::Quantum(a), State::Quantum(b)) => {
            Ok(crate::quantum::convex_combine_q(a, b, lambda)?.into())
        }
        (State::Classical(a), State::Classical(b)) => {
            Ok(crate::classical::convex_combine_c(a, b, lambda)?.into())
        }
        _ => Err(LabError::RegimeMismatch),
    }
}

/// J(s_λ) − (1 − λ)J(s₀) − λJ(s₁): zero for linear, ≥ 0 for concave J.
pub fn mixing_margin(spec: &ObjectiveSpec, s0: &State, s1: &State, lambda: f64) -> Result<f64> {
    let mixed = evaluate(spec, &mix(s0, s1, lambda)?)?;
    let (j0, j1) = (evaluate(spec, s0)?, evaluate(spec, s1)?);
    if lambda == 0.0 {
        return Ok(mixed - j0);
    }
    if lambda == 1.0 {
        return Ok(mixed - j1);
    }
    Ok(mixed - (1.0 - lambda) * j0 - lambda * j1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ConcavityReport {
    pub n_samples: usize,
    /// max |margin| (type one: linearity).
    pub max_abs_violation: f64,
    /// min margin (type two: concavity).
    pub min_margin: f64,
    pub linear: bool,
    pub passed: bool,
}

pub fn concavity_probe(
    spec: &ObjectiveSpec,
    n_samples: usize,
    seed: u64,
) -> Result<ConcavityReport> {
    if n_samples == 0 {
        return Err(LabError::InvalidParameter(
            "nSamples must be at least 1".into(),
        ));
    }
    let mut r = rng::stream(seed, rng::streams::CONCAVITY);
    let mut max_abs = 0.0f64;
    let mut min_margin = f64::INFINITY;
    for _ in 0..n_samples {
        let s0 = random_state(&mut r, spec);
        let s1 = random_state(&mut r, spec);
        let lambda: f64 = r.random_range(0.0..=1.0);
        let m = mixing_margin(spec, &s0, &s1, lambda)?;
        max_abs = max_abs.max(m.abs());
        min_margin = min_margin.min(m);
    }
    let linear = spec.is_linear();
    let tol = crate::tolerances::TOLERANCES;
    let passed = if linear {
        max_abs <= 1e-10
    } else {
        min_margin >= -tol.property_slack
    };
    Ok(ConcavityReport {
        n_samples,
        max_abs_violation: max_abs,
        min_margin,
        linear,
        passed,
    })
}

/// Random observable matching an existing spec's regime and size.
pub fn random_observable_like<R: Rng + ?Sized>(
    rng: &mut R,
    spec: &ObjectiveSpec,
) -> Result<ObjectiveObservable> {
    Ok(match &spec.observable {
        ObjectiveObservable::Quantum(o) => Observable::random(rng, o.matrix().nrows()).into(),
        ObjectiveObservable::Classical(f) => {
            let v = (0..f.values().len())
                .map(|_| rng.sample(rand_distr::StandardNormal))
                .collect();
            RandomFunction::new(f.space().clone(), v)?.into()
        }
    })
}
