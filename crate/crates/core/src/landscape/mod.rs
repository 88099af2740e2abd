//! Multistart ascent, critical-point classification and the landscape
//! probes: trap-freeness, level sets, concavity and the two trap fixtures.

mod ascent;
mod critical;
mod fixtures;
mod level_set;
mod probes;

pub use ascent::{
    ascend, multistart_ascent, multistart_with, standard_normal_start, AscentConfig, Landscape,
    OptimizationRun,
};
pub use critical::{
    classify_against, classify_critical_point, classify_spectrum, Classification,
    CriticalPointReport, DEFAULT_VALUE_TOL,
};
pub use fixtures::*;
pub use level_set::{level_set_path, same_level_pair, LevelSetPath, SAME_LEVEL_TOL};
pub use probes::{
    concavity_probe, mix, mixing_margin, oracle_optimum, random_observable_like, random_state,
    verify_trap_free, ConcavityReport, OracleOptimum, TrapFreeVerdict,
};
