use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{
    delta_closed_form, hamiltonian_h0, impulse_hamiltonian_slope, impulse_hamiltonian_slopes, variational_violation, AdjointState,
    AdjointTrajectory, JumpSide,
};
use crate::cost::CostModel;
use crate::dynamics::{DegreeClassState, EpidemicParams, Field, ImpulseSchedule, NodeKind, Strain, Trajectory};
use crate::error::{Error, Result};
use crate::netmodel::NetworkModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    InteriorStationary,
    /// At the lower edge of its admissible window with `H⁰` increasing
    /// across the jump (moving earlier would lower the cost).
    BoundaryStart,
    /// At the upper edge with `H⁰` decreasing across the jump.
    BoundaryEnd,
    Violated,
}

impl Classification {
    pub fn as_str(self) -> &'static str {
        match self {
            Classification::InteriorStationary => "interior_stationary",
            Classification::BoundaryStart => "boundary_start",
            Classification::BoundaryEnd => "boundary_end",
            Classification::Violated => "violated",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EventReport {
    pub strain: Strain,
    pub k: u32,
    pub tau: f64,
    pub c: f64,
    pub applied: f64,
    pub delta_value: f64,
    /// System Hamiltonian change across this jump.
    pub h0_jump: f64,
    /// System Hamiltonian just before the jump.
    pub h0_pre: f64,
    /// `|h0_jump| / (1 + |h0_pre|)`.
    pub stationarity_residual: f64,
    pub variational_residual: f64,
    /// `|delta_value − h0_jump|`.
    pub cross_check_residual: f64,
    pub window: (f64, f64),
    pub classification: Classification,
}

/// Largest benefit of an impulse that was not taken, per lane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoJumpResidual {
    pub strain: Strain,
    pub k: u32,
    pub max_residual: f64,
    pub at_time: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct OptimalityReport {
    pub events: Vec<EventReport>,
    pub no_jump: Vec<NoJumpResidual>,
}

impl OptimalityReport {
    pub const CSV_HEADER: &'static str = "strain,k,tau,c,delta_value,h0_jump,variational_residual,classification,cross_check_residual,stationarity_residual";

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for e in &self.events {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{}",
                e.strain,
                e.k,
                e.tau,
                e.c,
                e.delta_value,
                e.h0_jump,
                e.variational_residual,
                e.classification.as_str(),
                e.cross_check_residual,
                e.stationarity_residual
            );
        }
        out
    }

    pub fn count(&self, class: Classification) -> usize {
        self.events.iter().filter(|e| e.classification == class).count()
    }
}

/// Classification thresholds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct ClassifyTolerances {
    pub stationarity: f64,
    /// An event within this distance of a window edge counts as on it.
    pub edge: f64,
}

pub(crate) fn classify(h0: f64, h0_pre: f64, tau: f64, window: (f64, f64), tol: ClassifyTolerances) -> Classification {
    if h0.abs() <= tol.stationarity * (1.0 + h0_pre.abs()) {
        Classification::InteriorStationary
    } else if tau - window.0 <= tol.edge && h0 > 0.0 {
        Classification::BoundaryStart
    } else if window.1 - tau <= tol.edge && h0 < 0.0 {
        Classification::BoundaryEnd
    } else {
        Classification::Violated
    }
}

fn system_h0(
    states: &[DegreeClassState],
    adjoints: &[AdjointState],
    classes: &[u32],
    field: &Field,
    params: &EpidemicParams,
    costs: &CostModel,
) -> f64 {
    let theta = field.thetas_of(states);
    states
        .iter()
        .zip(adjoints)
        .zip(classes)
        .map(|((x, l), &k)| hamiltonian_h0(x, l, k, params, costs, theta[0], theta[1]))
        .sum()
}

/// Evaluates every optimality quantity for the impulses of `schedule`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn build_report_with(
    traj: &Trajectory,
    adjoint: &AdjointTrajectory,
    schedule: &ImpulseSchedule,
    params: &EpidemicParams,
    costs: &CostModel,
    model: &NetworkModel,
    horizon: f64,
    tol: ClassifyTolerances,
) -> Result<OptimalityReport> {
    let field = Field::new(model, params, &traj.classes)?;
    let mut events = Vec::with_capacity(traj.jumps.len());

    let mut states: Vec<DegreeClassState> = Vec::new();
    let mut lams: Vec<AdjointState> = Vec::new();
    let mut current_node = usize::MAX;
    for (r, rec) in traj.jumps.iter().enumerate() {
        if rec.node != current_node {
            current_node = rec.node;
            states = traj.states[rec.node - 1].clone();
            lams = adjoint.nodes[rec.node - 1].clone();
        }
        let (lam_before, lam_after) = adjoint.jumps[r];
        let theta_pre = field.thetas_of(&states);
        let h_pre = system_h0(&states, &lams, &traj.classes, &field, params, costs);
        states[rec.class] = rec.post;
        lams[rec.class] = lam_after;
        let theta_post = field.thetas_of(&states);
        let h_post = system_h0(&states, &lams, &traj.classes, &field, params, costs);

        let pre = JumpSide { state: rec.pre, adjoint: lam_before, theta: theta_pre };
        let post = JumpSide { state: rec.post, adjoint: lam_after, theta: theta_post };
        let delta_value = delta_closed_form(&pre, &post, rec.strain, rec.applied, rec.k, params, costs, model);

        let idx = schedule
            .events
            .iter()
            .position(|e| e.strain == rec.strain && e.k == rec.k && e.tau == rec.time)
            .ok_or_else(|| Error::Consistency(format!("jump at τ = {} not in schedule", rec.time)))?;
        let ev = schedule.events[idx];
        let window = schedule.admissible_window(idx, horizon);
        let (left, right) =
            impulse_hamiltonian_slopes(&lam_after, &rec.pre, rec.strain, rec.nominal, rec.k, costs, traj.semantics);
        let h0 = h_post - h_pre;
        events.push(EventReport {
            strain: rec.strain,
            k: rec.k,
            tau: rec.time,
            c: rec.nominal,
            applied: rec.applied,
            delta_value,
            h0_jump: h0,
            h0_pre: h_pre,
            stationarity_residual: h0.abs() / (1.0 + h_pre.abs()),
            variational_residual: variational_violation(left, right, rec.nominal, ev.u_bar),
            cross_check_residual: (delta_value - h0).abs(),
            window,
            classification: classify(h0, h_pre, rec.time, window, tol),
        });
    }

    let mut no_jump = Vec::new();
    for (j, &k) in traj.classes.iter().enumerate() {
        for strain in Strain::BOTH {
            let cap = schedule
                .events
                .iter()
                .filter(|e| e.strain == strain && e.k == k)
                .map(|e| e.u_bar)
                .fold(f64::NAN, f64::max);
            if cap.is_nan() {
                continue;
            }
            let mut worst = NoJumpResidual { strain, k, max_residual: 0.0, at_time: 0.0 };
            for n in 0..traj.len() {
                if traj.kinds[n] != NodeKind::Regular {
                    continue;
                }
                let g = impulse_hamiltonian_slope(
                    &adjoint.nodes[n][j],
                    &traj.states[n][j],
                    strain,
                    0.0,
                    k,
                    costs,
                    traj.semantics,
                );
                let v = g.max(0.0) * cap;
                if v > worst.max_residual {
                    worst.max_residual = v;
                    worst.at_time = traj.times[n];
                }
            }
            no_jump.push(worst);
        }
    }

    Ok(OptimalityReport { events, no_jump })
}

/// Report with the default stationarity tolerance `1e-4` and an edge
/// tolerance of one and a half integration steps.
pub fn build_report(
    problem: &crate::problem::Problem,
    schedule: &ImpulseSchedule,
    traj: &Trajectory,
    adjoint: &AdjointTrajectory,
) -> Result<OptimalityReport> {
    build_report_with(
        traj,
        adjoint,
        schedule,
        &problem.params,
        &problem.costs,
        &problem.model,
        problem.horizon,
        ClassifyTolerances { stationarity: 1e-4, edge: 1.5 * problem.step },
    )
}
