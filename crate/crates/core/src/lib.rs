//! Control-landscape laboratory.
//!
//! Classical distributions and quantum density matrices form convex state
//! spaces; linear (type-one) and concave free-energy (type-two) objectives
//! over them have no suboptimal maxima. This crate builds those state
//! spaces, the kinematic and dynamic maps that steer them, and probes that
//! check trap-freeness numerically and show how traps appear once controls
//! are constrained or the system is uncontrollable.

pub mod channels;
pub mod classical;
pub mod entropy;
pub mod error;
pub mod landscape;
pub mod linalg;
pub mod objectives;
pub mod quantum;
pub mod rng;
pub mod state;
pub mod tolerances;

pub use error::{LabError, Result};

/// Crate version recorded in experiment reports.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub use state::{Regime, State, StateGradient};
