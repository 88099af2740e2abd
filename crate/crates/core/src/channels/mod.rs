//! Control-to-state maps in the kinematic picture (Kraus maps, stochastic
//! matrices) and the dynamic picture (Lindblad propagation), plus the
//! local-surjectivity rank check.

mod jacobian;
mod kraus;
mod lindblad;
mod stochastic;

pub use jacobian::{jacobian, jacobian_rank, rank_survey};
pub use kraus::{
    apply_kraus, compose, kraus_from_params, orthonormalize, KinematicMap, KinematicParams,
    KrausMap,
};
pub use lindblad::{
    propagate_lindblad, propagate_lindblad_traced, ControlField, Dissipator, LindbladControl,
    LindbladModel, Propagation,
};
pub use stochastic::{apply_stochastic, stochastic_from_params, StochasticControl, StochasticMap};

use crate::error::Result;
use crate::state::{Regime, State, StateGradient};

/// A parameterized control-to-state map ξ: u → ρ_f.
pub trait ControlMap: Send + Sync {
    fn regime(&self) -> Regime;

    fn n_params(&self) -> usize;

    fn state(&self, params: &[f64]) -> Result<State>;

    /// Analytic chain rule: ∂/∂u of ⟨Γ, ξ(u)⟩ for a fixed state gradient Γ.
    /// `None` when the map has no closed form; callers then difference.
    fn pullback(&self, _params: &[f64], _gradient: &StateGradient) -> Option<Result<Vec<f64>>> {
        None
    }
}

/// Ignores its controls.
#[derive(Debug, Clone)]
pub struct FrozenMap {
    pub state: State,
    pub n_params: usize,
}

impl ControlMap for FrozenMap {
    fn regime(&self) -> Regime {
        self.state.regime()
    }

    fn n_params(&self) -> usize {
        self.n_params
    }

    fn state(&self, _params: &[f64]) -> Result<State> {
        Ok(self.state.clone())
    }

    fn pullback(&self, _params: &[f64], _gradient: &StateGradient) -> Option<Result<Vec<f64>>> {
        Some(Ok(vec![0.0; self.n_params]))
    }
}
