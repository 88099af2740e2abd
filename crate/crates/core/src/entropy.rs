//! Concave entropy families evaluated on a spectrum or a weight vector.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::tolerances::TOLERANCES;

/// Entropy family tag. `VonNeumann` and `Shannon` share the formula
/// −Σ p ln p; they differ only in which regime names them.
///
/// Wire form: `"vonNeumann"`, `"shannon"`, or `"tsallis(q)"`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum EntropyFamily {
    VonNeumann,
    Shannon,
    Tsallis { q: f64 },
}

impl EntropyFamily {
    /// Tsallis entropy with index `q`; concave only for q > 0.
    pub fn tsallis(q: f64) -> Result<Self> {
        if !(q.is_finite() && q > 0.0) || q == 1.0 {
            return Err(LabError::InvalidParameter(format!(
                "Tsallis index must be finite, positive and different from 1 (got {q})"
            )));
        }
        Ok(Self::Tsallis { q })
    }

    /// Entropy of a probability vector. Entries in [−floor, 0) are clamped
    /// to zero; anything more negative is an invalid state.
    pub fn evaluate(&self, weights: &[f64]) -> Result<f64> {
        let mut clamped = Vec::with_capacity(weights.len());
        for &w in weights {
            if !w.is_finite() || w < -TOLERANCES.positivity {
                return Err(LabError::InvalidState(format!("weight {w} is negative")));
            }
            clamped.push(w.max(0.0));
        }
        let s = match *self {
            Self::VonNeumann | Self::Shannon => -clamped
                .iter()
                .filter(|&&p| p > 0.0)
                .map(|&p| p * p.ln())
                .sum::<f64>(),
            Self::Tsallis { q } => {
                let power: f64 = clamped
                    .iter()
                    .filter(|&&p| p > 0.0)
                    .map(|&p| p.powf(q))
                    .sum();
                (1.0 - power) / (q - 1.0)
            }
        };
        Ok(s)
    }

    /// d S / d p_i, used for type-two gradients. Requires p_i > 0 for the
    /// logarithmic families.
    pub fn derivative(&self, p: f64) -> f64 {
        match *self {
            Self::VonNeumann | Self::Shannon => -(p.ln() + 1.0),
            Self::Tsallis { q } => -q * p.powf(q - 1.0) / (q - 1.0),
        }
    }

    pub fn is_logarithmic(&self) -> bool {
        matches!(self, Self::VonNeumann | Self::Shannon)
    }
}

impl fmt::Display for EntropyFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::VonNeumann => f.write_str("vonNeumann"),
            Self::Shannon => f.write_str("shannon"),
            Self::Tsallis { q } => write!(f, "tsallis({q})"),
        }
    }
}

impl FromStr for EntropyFamily {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "vonNeumann" => Ok(Self::VonNeumann),
            "shannon" => Ok(Self::Shannon),
            other => {
                let q = other
                    .strip_prefix("tsallis(")
                    .and_then(|rest| rest.strip_suffix(')'))
                    .and_then(|q| q.trim().parse::<f64>().ok())
                    .ok_or_else(|| {
                        LabError::InvalidParameter(format!(
                            "unknown entropy family {other:?}; expected vonNeumann, shannon or tsallis(q)"
                        ))
                    })?;
                Self::tsallis(q)
            }
        }
    }
}

impl TryFrom<String> for EntropyFamily {
    type Error = LabError;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<EntropyFamily> for String {
    fn from(e: EntropyFamily) -> Self {
        e.to_string()
    }
}
