//! Straight segments inside level sets of linear objectives.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::probes::{mix, random_state};
use crate::classical::Distribution;
use crate::error::{LabError, Result};
use crate::objectives::{evaluate, ObjectiveObservable, ObjectiveSpec};
use crate::quantum::DensityMatrix;
use crate::state::State;

/// |J(s₀) − J(s₁)| allowed for a pair to count as one level.
pub const SAME_LEVEL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct LevelSetPath {
    pub states: Vec<State>,
    pub objective_values: Vec<f64>,
    pub max_deviation: f64,
}

/// States (1 − λ)s₀ + λs₁ at `steps` evenly spaced λ ∈ [0, 1].
pub fn level_set_path(
    spec: &ObjectiveSpec,
    s0: &State,
    s1: &State,
    steps: usize,
) -> Result<LevelSetPath> {
    if !spec.is_linear() {
        return Err(LabError::NotLinearObjective);
    }
    if steps == 0 {
        return Err(LabError::InvalidParameter(
            "steps must be at least 1".into(),
        ));
    }
    let (j0, j1) = (evaluate(spec, s0)?, evaluate(spec, s1)?);
    let gap = (j0 - j1).abs();
    if gap > SAME_LEVEL_TOL {
        return Err(LabError::NotSameLevel { gap });
    }
    let mut states = Vec::with_capacity(steps);
    let mut objective_values = Vec::with_capacity(steps);
    let mut max_deviation = 0.0f64;
    for k in 0..steps {
        let lambda = if steps == 1 {
            0.0
        } else {
            k as f64 / (steps - 1) as f64
        };
        let s = mix(s0, s1, lambda)?;
        let j = evaluate(spec, &s)?;
        max_deviation = max_deviation.max((j - j0).abs());
        states.push(s);
        objective_values.push(j);
    }
    Ok(LevelSetPath {
        states,
        objective_values,
        max_deviation,
    })
}

fn center(spec: &ObjectiveSpec) -> State {
    match &spec.observable {
        ObjectiveObservable::Quantum(o) => {
            DensityMatrix::maximally_mixed(o.matrix().nrows()).into()
        }
        ObjectiveObservable::Classical(f) => Distribution::uniform(f.space().clone()).into(),
    }
}

/// Two random states on one level set of a linear objective. The state
/// farther from the level of the maximally mixed point is pulled toward it
/// until both share a value; pairs straddling that level are redrawn.
pub fn same_level_pair<R: Rng + ?Sized>(
    rng: &mut R,
    spec: &ObjectiveSpec,
) -> Result<(State, State)> {
    if !spec.is_linear() {
        return Err(LabError::NotLinearObjective);
    }
    let mid = center(spec);
    let c = evaluate(spec, &mid)?;
    for _ in 0..1000 {
        let a = random_state(rng, spec);
        let b = random_state(rng, spec);
        let (ja, jb) = (evaluate(spec, &a)? - c, evaluate(spec, &b)? - c);
        if ja * jb <= 0.0 && !(ja == 0.0 && jb == 0.0) {
            continue;
        }
        let (near, far, jn, jf) = if ja.abs() <= jb.abs() {
            (a, b, ja, jb)
        } else {
            (b, a, jb, ja)
        };
        // J((1 − μ)far + μ·mid) − c = (1 − μ)·jf.
        let mu = if jf == 0.0 { 0.0 } else { 1.0 - jn / jf };
        let moved = mix(&far, &mid, mu)?;
        return Ok((near, moved));
    }
    Err(LabError::InvalidParameter(
        "could not draw a same-level pair".into(),
    ))
}
