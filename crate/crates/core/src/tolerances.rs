//! Numerical thresholds shared by every module.
//!
//! All validity checks and property slacks read from [`TOLERANCES`] so a
//! single record governs reproducibility of the whole test suite.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Tolerances {
    /// Max |A − A†| accepted for Hermitian matrices.
    pub hermitian: f64,
    /// Smallest eigenvalue accepted for a positive semidefinite state.
    pub positivity: f64,
    /// Max |Tr ρ − 1| for density matrices.
    pub trace: f64,
    /// Max |Σ p − 1| for classical distributions.
    pub normalization: f64,
    /// Negative weights above this are clamped to zero.
    pub weight_clamp: f64,
    /// Max |Σ K†K − I| for Kraus maps.
    pub trace_preservation: f64,
    /// Max |column sum − 1| for stochastic maps.
    pub column_sum: f64,
    /// Slack for concavity and bound certificates.
    pub property_slack: f64,
    /// Imaginary residue above which an inner product is rejected.
    pub non_real: f64,
    /// Eigenvalue floor below which type-two gradients regularize the state.
    pub entropy_floor: f64,
    /// Trace drift allowed along a Lindblad trajectory.
    pub integrator_drift: f64,
    /// Max change of the final state when the integrator step is halved.
    pub integrator_refinement: f64,
    /// Relative singular-value cutoff for numerical rank.
    pub rank_cutoff: f64,
    /// Central finite-difference step.
    pub fd_step: f64,
    /// Relative Hessian sign threshold.
    pub hessian_sign: f64,
    /// Absolute floor for the Hessian sign threshold on flat landscapes.
    pub hessian_sign_floor: f64,
}

pub const TOLERANCES: Tolerances = Tolerances {
    hermitian: 1e-10,
    positivity: 1e-10,
    trace: 1e-10,
    normalization: 1e-10,
    weight_clamp: 1e-12,
    trace_preservation: 1e-9,
    column_sum: 1e-10,
    property_slack: 1e-9,
    non_real: 1e-8,
    entropy_floor: 1e-9,
    integrator_drift: 1e-8,
    integrator_refinement: 1e-9,
    rank_cutoff: 1e-7,
    fd_step: 1e-5,
    hessian_sign: 1e-6,
    hessian_sign_floor: 1e-9,
};

impl Default for Tolerances {
    fn default() -> Self {
        TOLERANCES
    }
}
