//! Two-strain SIR epidemics on scale-free degree classes under impulsive
//! treatment, with first-order optimality diagnostics and schedule
//! optimizers.
//!
//! The state of each simulated degree class `k` is the fraction of
//! susceptible, strain-1 infected, strain-2 infected and recovered nodes.
//! Treatment acts as instantaneous jumps moving infected mass to `R`.

// `!(x >= 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cost;
pub mod dynamics;
pub mod error;
pub mod netmodel;
pub mod optimality;
pub mod problem;
pub mod scenario;
pub mod threshold;

pub use cost::{total_cost, CostBreakdown, CostModel, TreatmentCostAt};
pub use dynamics::{
    integrate, DegreeClassState, EpidemicParams, Impulse, ImpulseSchedule, ImpulseSemantics, Strain, ThetaMode,
    Trajectory,
};
pub use error::{Error, Result};
pub use netmodel::{build_power_law_model, Infectivity, NetworkModel};
pub use optimality::{
    optimize_intensities, optimize_times, AdjointOptions, Classification, OptimalityReport, OptimizerOutcome,
    OptimizerSettings,
};
pub use problem::{Evaluation, Problem};
pub use threshold::{threshold_schedule, ThresholdRule};
