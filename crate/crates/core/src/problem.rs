//! A fully specified control problem: network, epidemic, costs, initial
//! condition and discretization.

use serde::{Deserialize, Serialize};

use crate::cost::{self, CostBreakdown, CostModel};
use crate::dynamics::{integrate, integrate_raw, DegreeClassState, EpidemicParams, ImpulseSchedule, Trajectory};
use crate::error::{Error, Result};
use crate::netmodel::NetworkModel;
use crate::optimality::{integrate_adjoint, AdjointOptions, AdjointTrajectory};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Problem {
    pub model: NetworkModel,
    pub params: EpidemicParams,
    pub costs: CostModel,
    /// Simulated degree classes, ascending.
    pub classes: Vec<u32>,
    pub initial: Vec<DegreeClassState>,
    pub horizon: f64,
    pub step: f64,
    pub adjoint: AdjointOptions,
}

/// Forward trajectory, its cost and the matching adjoint.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub trajectory: Trajectory,
    pub cost: CostBreakdown,
    pub adjoint: AdjointTrajectory,
}

impl Problem {
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.costs.validate()?;
        if self.classes.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("classes must be strictly ascending".into()));
        }
        Ok(())
    }

    pub fn simulate(&self, schedule: &ImpulseSchedule) -> Result<Trajectory> {
        integrate(
            &self.initial,
            &self.classes,
            &self.params,
            schedule,
            &self.model,
            self.horizon,
            self.step,
        )
    }

    /// Forward pass from arbitrary (possibly off-simplex) initial states.
    pub fn simulate_from(&self, initial: &[DegreeClassState], schedule: &ImpulseSchedule) -> Result<Trajectory> {
        integrate_raw(
            initial,
            &self.classes,
            &self.params,
            schedule,
            &self.model,
            self.horizon,
            self.step,
        )
    }

    /// Total cost of `schedule`.
    pub fn objective(&self, schedule: &ImpulseSchedule) -> Result<f64> {
        Ok(cost::breakdown(&self.simulate(schedule)?, &self.costs).total)
    }

    pub fn evaluate(&self, schedule: &ImpulseSchedule) -> Result<Evaluation> {
        let trajectory = self.simulate(schedule)?;
        let cost = cost::total_cost(&trajectory, schedule, &self.costs)?;
        let adjoint = integrate_adjoint(&trajectory, &self.params, &self.costs, &self.model, self.adjoint)?;
        Ok(Evaluation {
            trajectory,
            cost,
            adjoint,
        })
    }

    /// Same problem with a shorter horizon.
    pub fn truncated(&self, horizon: f64) -> Self {
        Self {
            horizon,
            ..self.clone()
        }
    }
}
