//! Aggregated cost of a controlled trajectory.
//!
//! Running cost per class is `a1·k·I1 + a2·k·I2 − g·R`, integrated over
//! `[0, T]`; every impulse adds `b_i·k·c·I_i` evaluated at the right limit of
//! the jump (or the left limit, see [`TreatmentCostAt`]). Classes are summed
//! without weighting by their prevalence.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::dynamics::{DegreeClassState, ImpulseSchedule, JumpRecord, Strain, Trajectory};
use crate::error::{Error, Result};

/// Which side of the jump the treatment cost reads the infected level from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TreatmentCostAt {
    #[default]
    PostJump,
    PreJump,
}

/// Linear cost slopes, each per unit degree.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostModel {
    pub a1: f64,
    pub a2: f64,
    pub b1: f64,
    pub b2: f64,
    pub g_coeff: f64,
    #[serde(default)]
    pub treatment_at: TreatmentCostAt,
}

impl CostModel {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("a1", self.a1), ("a2", self.a2), ("b1", self.b1), ("b2", self.b2)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} must be nonnegative, got {v}")));
            }
        }
        if !(self.g_coeff >= 0.0 && self.g_coeff.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "g_coeff must be nonnegative, got {}",
                self.g_coeff
            )));
        }
        Ok(())
    }

    pub fn a(&self, strain: Strain) -> f64 {
        match strain {
            Strain::One => self.a1,
            Strain::Two => self.a2,
        }
    }

    pub fn b(&self, strain: Strain) -> f64 {
        match strain {
            Strain::One => self.b1,
            Strain::Two => self.b2,
        }
    }

    /// Same model with every slope scaled by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            a1: self.a1 * factor,
            a2: self.a2 * factor,
            b1: self.b1 * factor,
            b2: self.b2 * factor,
            g_coeff: self.g_coeff * factor,
            treatment_at: self.treatment_at,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub running_infection_1: f64,
    pub running_infection_2: f64,
    /// Integrated benefit of recovered nodes; enters the total with a minus.
    pub recovery_benefit: f64,
    pub impulse_cost_1: f64,
    pub impulse_cost_2: f64,
    pub total: f64,
}

impl CostBreakdown {
    fn finish(mut self) -> Self {
        self.total = self.running_infection_1 + self.running_infection_2 - self.recovery_benefit
            + self.impulse_cost_1
            + self.impulse_cost_2;
        self
    }

    pub const CSV_HEADER: &'static str =
        "running_infection_1,running_infection_2,recovery_benefit,impulse_cost_1,impulse_cost_2,total";

    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.running_infection_1,
            self.running_infection_2,
            self.recovery_benefit,
            self.impulse_cost_1,
            self.impulse_cost_2,
            self.total
        )
    }
}

/// Instantaneous cost `f¹ + f² − g` of one class.
pub fn running_cost_rate(state: &DegreeClassState, k: u32, costs: &CostModel) -> f64 {
    let k = k as f64;
    costs.a1 * k * state.i1 + costs.a2 * k * state.i2 - costs.g_coeff * state.r
}

/// Treatment cost `b_i·k·c·I_i` with `I_i` read from `state`.
pub fn impulse_cost(
    state: &DegreeClassState,
    strain: Strain,
    c: f64,
    k: u32,
    costs: &CostModel,
) -> Result<f64> {
    if !(c >= 0.0) {
        return Err(Error::Domain(format!("impulse intensity must be nonnegative, got {c}")));
    }
    Ok(costs.b(strain) * k as f64 * c * state.infected(strain))
}

/// Treatment cost of a recorded jump under the model's convention.
pub fn jump_cost(rec: &JumpRecord, costs: &CostModel) -> f64 {
    let at = match costs.treatment_at {
        TreatmentCostAt::PostJump => &rec.post,
        TreatmentCostAt::PreJump => &rec.pre,
    };
    costs.b(rec.strain) * rec.k as f64 * rec.nominal * at.infected(rec.strain)
}

/// Full cost functional of a trajectory produced from `schedule`.
///
/// The running part uses the trapezoidal rule on the stored grid; because the
/// left and right limits at every impulse time are adjacent nodes at the same
/// time, no panel straddles a jump.
pub fn total_cost(traj: &Trajectory, schedule: &ImpulseSchedule, costs: &CostModel) -> Result<CostBreakdown> {
    check_consistency(traj, schedule)?;
    Ok(breakdown(traj, costs))
}

pub(crate) fn breakdown(traj: &Trajectory, costs: &CostModel) -> CostBreakdown {
    let mut out = CostBreakdown::default();
    for n in 1..traj.len() {
        let dt = traj.times[n] - traj.times[n - 1];
        if dt == 0.0 {
            continue;
        }
        for (j, &k) in traj.classes.iter().enumerate() {
            let kf = k as f64;
            let (a, b) = (&traj.states[n - 1][j], &traj.states[n][j]);
            let half = 0.5 * dt;
            out.running_infection_1 += half * costs.a1 * kf * (a.i1 + b.i1);
            out.running_infection_2 += half * costs.a2 * kf * (a.i2 + b.i2);
            out.recovery_benefit += half * costs.g_coeff * (a.r + b.r);
        }
    }
    for rec in &traj.jumps {
        let h = jump_cost(rec, costs);
        match rec.strain {
            Strain::One => out.impulse_cost_1 += h,
            Strain::Two => out.impulse_cost_2 += h,
        }
    }
    out.finish()
}

fn check_consistency(traj: &Trajectory, schedule: &ImpulseSchedule) -> Result<()> {
    if traj.jumps.len() != schedule.len() {
        return Err(Error::Consistency(format!(
            "trajectory applied {} impulses, schedule lists {}",
            traj.jumps.len(),
            schedule.len()
        )));
    }
    if traj.semantics != schedule.semantics {
        return Err(Error::Consistency("impulse semantics differ".into()));
    }
    let mut recorded: Vec<(u64, u32, Strain, u64)> = traj
        .jumps
        .iter()
        .map(|r| (r.time.to_bits(), r.k, r.strain, r.nominal.to_bits()))
        .collect();
    let mut listed: Vec<(u64, u32, Strain, u64)> = schedule
        .events
        .iter()
        .map(|e| (e.tau.to_bits(), e.k, e.strain, e.c.to_bits()))
        .collect();
    recorded.sort();
    listed.sort();
    if recorded != listed {
        return Err(Error::Consistency(
            "trajectory impulses do not match the schedule".into(),
        ));
    }
    Ok(())
}

/// Cumulative cost at every grid node; impulse costs are booked at the
/// right-limit node of their time.
pub fn cumulative_cost_series(traj: &Trajectory, costs: &CostModel) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(traj.len());
    let mut acc = 0.0;
    let mut cursor = 0;
    for n in 0..traj.len() {
        if n > 0 {
            let dt = traj.times[n] - traj.times[n - 1];
            for (j, &k) in traj.classes.iter().enumerate() {
                acc += 0.5
                    * dt
                    * (running_cost_rate(&traj.states[n - 1][j], k, costs)
                        + running_cost_rate(&traj.states[n][j], k, costs));
            }
        }
        while cursor < traj.jumps.len() && traj.jumps[cursor].node == n {
            acc += jump_cost(&traj.jumps[cursor], costs);
            cursor += 1;
        }
        out.push((traj.times[n], acc));
    }
    out
}

pub fn cumulative_cost_csv(series: &[(f64, f64)]) -> String {
    let mut out = String::from("time,cumulative_J\n");
    for (t, j) in series {
        let _ = writeln!(out, "{t},{j}");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{integrate, EpidemicParams, Impulse, ImpulseSemantics, ThetaMode};
    use crate::netmodel::{build_power_law_model, Infectivity};
    use approx::assert_relative_eq;

    fn case1_costs() -> CostModel {
        CostModel { a1: 2.0, a2: 3.0, b1: 3.0, b2: 4.0, g_coeff: 0.1, treatment_at: TreatmentCostAt::PostJump }
    }

    fn params() -> EpidemicParams {
        EpidemicParams {
            delta1: 0.3,
            delta2: 0.4,
            sigma1: 0.02,
            sigma2: 0.03,
            theta_mode: ThetaMode::Summation,
            infectivity: Infectivity::DegreeProportional,
        }
    }

    #[test]
    fn running_rate_values() {
        let c = case1_costs();
        assert_eq!(running_cost_rate(&DegreeClassState { s: 1.0, ..Default::default() }, 4, &c), 0.0);
        let st = DegreeClassState { s: 0.4, i1: 0.3, i2: 0.2, r: 0.0 };
        assert_relative_eq!(running_cost_rate(&st, 4, &c), 4.8, epsilon = 1e-14);
        let rec = DegreeClassState::new(0.0, 0.0, 0.0, 1.0).unwrap();
        assert_relative_eq!(running_cost_rate(&rec, 4, &c), -0.1, epsilon = 1e-15);
    }

    #[test]
    fn impulse_cost_values() {
        let c = case1_costs();
        let post = DegreeClassState::new(0.4, 0.2, 0.2, 0.2).unwrap();
        assert_eq!(impulse_cost(&post, Strain::One, 0.0, 4, &c).unwrap(), 0.0);
        assert_relative_eq!(impulse_cost(&post, Strain::One, 0.1, 4, &c).unwrap(), 0.24, epsilon = 1e-15);
        let cleared = DegreeClassState::new(0.4, 0.0, 0.2, 0.4).unwrap();
        assert_eq!(impulse_cost(&cleared, Strain::One, 0.7, 4, &c).unwrap(), 0.0);
        assert!(impulse_cost(&post, Strain::Two, -1.0, 4, &c).is_err());
    }

    #[test]
    fn zero_infection_costs_nothing() {
        let model = build_power_law_model(4, 4).unwrap();
        let st = DegreeClassState::new(1.0, 0.0, 0.0, 0.0).unwrap();
        let sched = ImpulseSchedule::empty();
        let traj = integrate(&[st], &[4], &params(), &sched, &model, 10.0, 0.1).unwrap();
        let costs = CostModel { g_coeff: 0.0, ..case1_costs() };
        assert_eq!(total_cost(&traj, &sched, &costs).unwrap().total, 0.0);
    }

    #[test]
    fn doubling_running_slopes_doubles_cost() {
        let model = build_power_law_model(4, 4).unwrap();
        let st = DegreeClassState::new(0.4, 0.3, 0.2, 0.1).unwrap();
        let sched = ImpulseSchedule::empty();
        let traj = integrate(&[st], &[4], &params(), &sched, &model, 10.0, 0.05).unwrap();
        let base = CostModel { g_coeff: 0.0, ..case1_costs() };
        let double = CostModel { a1: 4.0, a2: 6.0, ..base };
        let j1 = total_cost(&traj, &sched, &base).unwrap().total;
        let j2 = total_cost(&traj, &sched, &double).unwrap().total;
        assert_relative_eq!(j2, 2.0 * j1, max_relative = 1e-14);
    }

    #[test]
    fn breakdown_with_impulses_and_cumulative_series() {
        let model = build_power_law_model(4, 4).unwrap();
        let st = DegreeClassState::new(0.4, 0.3, 0.2, 0.1).unwrap();
        let sched = ImpulseSchedule::new(
            ImpulseSemantics::Absolute,
            vec![
                Impulse { strain: Strain::One, k: 4, tau: 2.0, c: 0.1, u_bar: 0.2 },
                Impulse { strain: Strain::Two, k: 4, tau: 3.3, c: 0.05, u_bar: 0.2 },
            ],
        );
        let traj = integrate(&[st], &[4], &params(), &sched, &model, 6.0, 0.01).unwrap();
        let costs = case1_costs();
        let b = total_cost(&traj, &sched, &costs).unwrap();
        let sum = b.running_infection_1 + b.running_infection_2 - b.recovery_benefit
            + b.impulse_cost_1
            + b.impulse_cost_2;
        assert!((b.total - sum).abs() < 1e-10);
        let expect1 = 3.0 * 4.0 * 0.1 * traj.jumps[0].post.i1;
        assert_relative_eq!(b.impulse_cost_1, expect1, max_relative = 1e-14);
        let series = cumulative_cost_series(&traj, &costs);
        assert_relative_eq!(series.last().unwrap().1, b.total, max_relative = 1e-12);

        let pre = CostModel { treatment_at: TreatmentCostAt::PreJump, ..costs };
        let bp = total_cost(&traj, &sched, &pre).unwrap();
        assert!(bp.impulse_cost_1 > b.impulse_cost_1);
    }

    #[test]
    fn mismatched_schedule_is_rejected() {
        let model = build_power_law_model(4, 4).unwrap();
        let st = DegreeClassState::new(0.4, 0.3, 0.2, 0.1).unwrap();
        let sched = ImpulseSchedule::new(
            ImpulseSemantics::Absolute,
            vec![Impulse { strain: Strain::One, k: 4, tau: 2.0, c: 0.1, u_bar: 0.2 }],
        );
        let traj = integrate(&[st], &[4], &params(), &sched, &model, 6.0, 0.01).unwrap();
        assert!(matches!(
            total_cost(&traj, &ImpulseSchedule::empty(), &case1_costs()),
            Err(Error::Consistency(_))
        ));
    }

    #[test]
    fn quadrature_converges_under_step_halving() {
        let model = build_power_law_model(4, 4).unwrap();
        let st = DegreeClassState::new(0.4, 0.3, 0.2, 0.1).unwrap();
        let sched = ImpulseSchedule::empty();
        let j = |h: f64| {
            let traj = integrate(&[st], &[4], &params(), &sched, &model, 20.0, h).unwrap();
            total_cost(&traj, &sched, &case1_costs()).unwrap().total
        };
        let (a, b) = (j(0.01), j(0.005));
        assert!(((a - b) / b).abs() < 1e-4);
    }
}
