//! Regime-tagged states and state-space gradients.

use serde::{Deserialize, Serialize};

use crate::classical::Distribution;
use crate::linalg::{self, CMatrix};
use crate::quantum::{DensityMatrix, HermitianOperand};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Regime {
    Quantum,
    Classical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum State {
    Quantum(DensityMatrix),
    Classical(Distribution),
}

/// Gradient of an objective with respect to the state: a Hermitian matrix Γ
/// with dJ = Tr[Γ dρ], or a vector g with dJ = Σ g_i dp_i.
#[derive(Debug, Clone, PartialEq)]
pub enum StateGradient {
    Quantum(CMatrix),
    Classical(Vec<f64>),
}

impl State {
    pub fn regime(&self) -> Regime {
        match self {
            Self::Quantum(_) => Regime::Quantum,
            Self::Classical(_) => Regime::Classical,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Quantum(r) => r.dim(),
            Self::Classical(d) => d.weights().len(),
        }
    }

    /// Independent real coordinates of the state: Tr[ρ G_a] over the
    /// orthonormal traceless Hermitian basis (n² − 1 values), or the first
    /// m − 1 weights.
    pub fn coordinates(&self) -> Vec<f64> {
        match self {
            Self::Quantum(r) => linalg::traceless_hermitian_basis(r.dim())
                .iter()
                .map(|g| linalg::trace(&(g * r.matrix())).re)
                .collect(),
            Self::Classical(d) => {
                let w = d.weights();
                w[..w.len() - 1].to_vec()
            }
        }
    }

    pub fn as_quantum(&self) -> Option<&DensityMatrix> {
        match self {
            Self::Quantum(r) => Some(r),
            Self::Classical(_) => None,
        }
    }

    pub fn as_classical(&self) -> Option<&Distribution> {
        match self {
            Self::Classical(d) => Some(d),
            Self::Quantum(_) => None,
        }
    }
}

impl From<DensityMatrix> for State {
    fn from(r: DensityMatrix) -> Self {
        Self::Quantum(r)
    }
}

impl From<Distribution> for State {
    fn from(d: Distribution) -> Self {
        Self::Classical(d)
    }
}

impl StateGradient {
    /// Component along the state tangent space (traceless part, or the
    /// zero-sum part of a vector). Zero at interior first-order optima.
    pub fn tangential(&self) -> Self {
        match self {
            Self::Quantum(g) => Self::Quantum(linalg::traceless_part(g)),
            Self::Classical(g) => {
                let mean = g.iter().sum::<f64>() / g.len() as f64;
                Self::Classical(g.iter().map(|x| x - mean).collect())
            }
        }
    }

    pub fn max_abs(&self) -> f64 {
        match self {
            Self::Quantum(g) => g.iter().map(|z| z.norm()).fold(0.0, f64::max),
            Self::Classical(g) => g.iter().map(|x| x.abs()).fold(0.0, f64::max),
        }
    }

    /// Directional derivative along a state displacement of the same regime.
    pub fn directional(&self, direction: &StateGradient) -> Option<f64> {
        match (self, direction) {
            (Self::Quantum(g), Self::Quantum(d)) => {
                Some(g.iter().zip(d.iter()).map(|(a, b)| (a.conj() * b).re).sum())
            }
            (Self::Classical(g), Self::Classical(d)) => {
                Some(g.iter().zip(d).map(|(a, b)| a * b).sum())
            }
            _ => None,
        }
    }
}
