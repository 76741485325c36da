//! Feedback schedules: inspect the epidemic periodically and treat every
//! lane whose infected fraction is above a trigger level.

use serde::{Deserialize, Serialize};

use crate::dynamics::{Impulse, ImpulseSchedule, ImpulseSemantics, Strain};
use crate::error::{validation, Result};
use crate::problem::Problem;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdRule {
    /// Trigger level per strain; an impulse is scheduled when `I > level`.
    pub level: [f64; 2],
    /// Spacing of inspection times `n · check_period`, `n ≥ 1`.
    pub check_period: f64,
    pub intensity: [f64; 2],
    pub cap: [f64; 2],
    pub semantics: ImpulseSemantics,
}

impl ThresholdRule {
    pub fn validate(&self) -> Result<()> {
        if !(self.check_period > 0.0 && self.check_period.is_finite()) {
            return Err(validation("check_period", "must be positive"));
        }
        for i in 0..2 {
            if !(self.level[i] >= 0.0) {
                return Err(validation("level", "must be non-negative"));
            }
            if !(self.intensity[i] >= 0.0 && self.intensity[i] <= self.cap[i]) {
                return Err(validation("intensity", "must lie in [0, cap]"));
            }
        }
        Ok(())
    }
}

/// Builds the schedule produced by applying `rule` while simulating
/// `problem` forward. Each inspection sees the state that results from all
/// earlier impulses.
pub fn threshold_schedule(problem: &Problem, rule: &ThresholdRule) -> Result<ImpulseSchedule> {
    rule.validate()?;
    let mut schedule = ImpulseSchedule::new(rule.semantics, Vec::new());
    let mut n = 1u64;
    loop {
        let t = n as f64 * rule.check_period;
        if t >= problem.horizon - 0.5 * problem.step {
            break;
        }
        let traj = problem.truncated(t).simulate(&schedule)?;
        let last = traj.final_states();
        for (j, &k) in problem.classes.iter().enumerate() {
            for strain in Strain::BOTH {
                let i = strain.index();
                if rule.intensity[i] > 0.0 && last[j].infected(strain) > rule.level[i] {
                    schedule.events.push(Impulse {
                        strain,
                        k,
                        tau: t,
                        c: rule.intensity[i],
                        u_bar: rule.cap[i],
                    });
                }
            }
        }
        n += 1;
    }
    schedule.sort();
    Ok(schedule)
}
