//! Radar electronic counter-countermeasures as a principal-agent problem.
//!
//! The radar observes the jammer's power only through a noisy channel and
//! chooses a pulse-power schedule (a contract) that steers the jammer to a
//! power level of the radar's choosing. Tracking quality enters both players'
//! utilities through the steady-state Kalman covariance, which in turn depends
//! on the SNR the contract produces; [`sim`] closes that loop.

pub mod cli;
pub mod config;
pub mod error;
pub mod model;
pub mod optimizer;
pub mod pap;
pub mod presets;
pub mod riccati;
pub mod sim;

pub use error::{EccmError, Result};
pub use model::{
    expected_snr, jammer_best_response, jammer_utility, radar_utility, weighted_covariance,
    CovarianceSummary, EccmStrategy, JammingChannel, JammingGrid, LogStrategy, PapInstance,
    UtilityParams,
};
pub use pap::{
    build_ic_constraints, check_jammer_concavity, check_structure, check_tail_convexity, check_tp2,
    solve_affine, solve_fixed_j, solve_pap, solve_relaxed, verify_kkt, PapSolution, SolveMode,
    StructureReport,
};
pub use riccati::{
    max_eigenvalue, monte_carlo_covariance, solve_are_barrage, solve_are_deception, AreSolution,
    DeceptionModel, KinematicsModel, TrackingModel,
};
pub use sim::{
    compare_jamming, run_mismatch, run_simulation, SimulationConfig, SimulationRecord,
    SimulationTrace,
};
