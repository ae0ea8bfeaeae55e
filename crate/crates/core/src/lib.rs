//! Timing-based persuasion over binary Markov sources.
//!
//! A sender observes binary sources and chooses how often to report each one
//! depending on its current state; a receiver either follows the reports or
//! falls back to its prior. The sender wants the receiver's estimate to read
//! 1 as often as possible under a total sampling-rate budget.
//!
//! * [`model`]: closed-form occupancy, utilities and the IC threshold.
//! * [`single_source`]: exact one-source equilibrium.
//! * [`multi_source`]: active-set search with water-filling on a dual level.
//! * [`oracle`]: brute-force grid maximizer for cross-checking.
//! * [`simulate`]: Monte-Carlo engines for the joint chain.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod model;
pub mod multi_source;
pub mod oracle;
pub mod simulate;
pub mod single_source;

pub use error::{Error, Result};
pub use model::{
    best_response, c_min, joint_stationary, prior_distribution, receiver_default_utility,
    receiver_utility, sender_utility_partials, sender_utility_term, BestResponse,
    ProblemInstance, RatePolicy, SourceParams, SourceRates, StationaryDistribution,
};
pub use multi_source::{
    bisect_theta, solve_active_set, solve_multi, water_fill_s, ActiveSet, CandidateSolution,
    WaterFillConstants,
};
pub use oracle::{grid_oracle, GridSpec, OracleSolution};
pub use simulate::{simulate_joint, simulate_physical, SimulationResult};
pub use single_source::{solve_single, EquilibriumOutcome};
