//! Coordinate-wise solvers for the two fixed-one-optimize-other subproblems.

use serde::{Deserialize, Serialize};

use super::report::{build_report_with, ClassifyTolerances};
use super::{integrate_adjoint, OptimalityReport};
use crate::dynamics::{ImpulseSchedule, ImpulseSemantics};
use crate::error::Result;
use crate::problem::Problem;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerSettings {
    pub tol_tau: f64,
    pub tol_c: f64,
    /// Relative tolerance on `H⁰(τ⁺) − H⁰(τ⁻)`.
    pub tol_stationarity: f64,
    pub max_sweeps: usize,
    /// Uniform probes per coordinate before local refinement.
    pub scan_points: usize,
    /// Minimum spacing kept between an event and its window edges; `None`
    /// uses the integration step.
    pub min_gap: Option<f64>,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        Self {
            tol_tau: 1e-3,
            tol_c: 1e-4,
            tol_stationarity: 1e-4,
            max_sweeps: 50,
            scan_points: 8,
            min_gap: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct OptimizerOutcome {
    pub schedule: ImpulseSchedule,
    pub report: OptimalityReport,
    pub j_before: f64,
    pub j_after: f64,
    pub sweeps: usize,
    pub converged: bool,
}

fn tolerances(problem: &Problem, settings: &OptimizerSettings) -> ClassifyTolerances {
    let gap = settings.min_gap.unwrap_or(problem.step);
    ClassifyTolerances {
        stationarity: settings.tol_stationarity,
        edge: gap + settings.tol_tau,
    }
}

fn report_for(problem: &Problem, schedule: &ImpulseSchedule, settings: &OptimizerSettings) -> Result<OptimalityReport> {
    let traj = problem.simulate(schedule)?;
    let adjoint = integrate_adjoint(&traj, &problem.params, &problem.costs, &problem.model, problem.adjoint)?;
    build_report_with(
        &traj,
        &adjoint,
        schedule,
        &problem.params,
        &problem.costs,
        &problem.model,
        problem.horizon,
        tolerances(problem, settings),
    )
}

/// Hamiltonian jump of event `idx`, i.e. the sensitivity `dJ/dτ`.
fn event_h0(problem: &Problem, schedule: &ImpulseSchedule, idx: usize, settings: &OptimizerSettings) -> Result<f64> {
    let ev = schedule.events[idx];
    let report = report_for(problem, schedule, settings)?;
    Ok(report
        .events
        .iter()
        .find(|e| e.strain == ev.strain && e.k == ev.k && e.tau == ev.tau)
        .map_or(0.0, |e| e.h0_jump))
}

fn linspace(a: f64, b: f64, n: usize) -> impl Iterator<Item = f64> {
    let n = n.max(1);
    (0..=n).map(move |i| if i == n { b } else { a + (b - a) * i as f64 / n as f64 })
}

/// Moves impulse times with intensities held fixed.
///
/// For each event in turn the Hamiltonian jump is probed on a uniform grid
/// over the event's admissible window; every sign change from negative to
/// positive brackets a local minimum of `J` and is refined by bisection.
/// The bracketed roots, the window edges whose sign says the cost decreases
/// towards them, and the current time are compared by `J`, and the best is
/// kept. Sweeps repeat until no event moves by more than `tol_tau`.
pub fn optimize_times(
    problem: &Problem,
    schedule: &ImpulseSchedule,
    settings: &OptimizerSettings,
) -> Result<OptimizerOutcome> {
    let mut sched = schedule.clone();
    sched.validate(problem.horizon)?;
    let j_before = problem.objective(&sched)?;
    let gap = settings.min_gap.unwrap_or(problem.step);
    let mut sweeps = 0;
    let mut converged = sched.events.iter().all(|e| e.c == 0.0);

    while !converged && sweeps < settings.max_sweeps {
        sweeps += 1;
        let mut max_move: f64 = 0.0;
        for idx in 0..sched.events.len() {
            if sched.events[idx].c == 0.0 {
                continue;
            }
            let (lo, hi) = sched.admissible_window(idx, problem.horizon);
            let (a, b) = (lo + gap, hi - gap);
            if a >= b {
                continue;
            }
            let old = sched.events[idx].tau;
            let mut trial = sched.clone();
            let mut g_at = |tau: f64| -> Result<f64> {
                trial.events[idx].tau = tau;
                event_h0(problem, &trial, idx, settings)
            };

            let mut probes: Vec<f64> = linspace(a, b, settings.scan_points).collect();
            if old > a && old < b {
                probes.push(old);
            }
            probes.sort_by(f64::total_cmp);
            probes.dedup();
            let mut values = Vec::with_capacity(probes.len());
            for &t in &probes {
                values.push(g_at(t)?);
            }

            let mut candidates = vec![old.clamp(a, b)];
            if values[0] > 0.0 {
                candidates.push(a);
            }
            if *values.last().unwrap() < 0.0 {
                candidates.push(b);
            }
            for w in 0..probes.len() - 1 {
                if values[w] < 0.0 && values[w + 1] > 0.0 {
                    let (mut l, mut r) = (probes[w], probes[w + 1]);
                    while r - l > 0.125 * settings.tol_tau {
                        let m = 0.5 * (l + r);
                        if g_at(m)? < 0.0 {
                            l = m;
                        } else {
                            r = m;
                        }
                    }
                    candidates.push(0.5 * (l + r));
                }
            }

            let mut best = (f64::INFINITY, old);
            for &t in &candidates {
                let mut s = sched.clone();
                s.events[idx].tau = t;
                let j = problem.objective(&s)?;
                if j < best.0 {
                    best = (j, t);
                }
            }
            sched.events[idx].tau = best.1;
            max_move = max_move.max((best.1 - old).abs());
        }
        converged = max_move < settings.tol_tau;
    }

    sched.sort();
    let report = report_for(problem, &sched, settings)?;
    let j_after = problem.objective(&sched)?;
    Ok(OptimizerOutcome {
        schedule: sched,
        report,
        j_before,
        j_after,
        sweeps,
        converged,
    })
}

const INV_PHI: f64 = 0.618_033_988_749_894_8;

fn golden_section<F: FnMut(f64) -> Result<f64>>(mut f: F, mut a: f64, mut b: f64, tol: f64) -> Result<(f64, f64)> {
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = f(x1)?;
    let mut f2 = f(x2)?;
    while b - a > tol {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = f(x1)?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = f(x2)?;
        }
    }
    Ok(if f1 <= f2 { (x1, f1) } else { (x2, f2) })
}

/// Chooses impulse intensities in `[0, u_bar]` with times held fixed, by
/// projected coordinate descent on `J`: each coordinate gets a coarse scan
/// followed by golden-section search around the best probe. Under absolute
/// semantics the clamp point `c = I(τ⁻)` is also tried, since `J` is not
/// differentiable there.
pub fn optimize_intensities(
    problem: &Problem,
    schedule: &ImpulseSchedule,
    settings: &OptimizerSettings,
) -> Result<OptimizerOutcome> {
    let mut sched = schedule.clone();
    sched.validate(problem.horizon)?;
    let j_before = problem.objective(&sched)?;
    let mut sweeps = 0;
    let mut converged = sched.events.is_empty();
    let scan = settings.scan_points.max(2);

    while !converged && sweeps < settings.max_sweeps {
        sweeps += 1;
        let mut max_change: f64 = 0.0;
        for idx in 0..sched.events.len() {
            let cap = sched.events[idx].u_bar;
            if cap <= 0.0 {
                continue;
            }
            let old = sched.events[idx].c;
            let mut trial = sched.clone();
            let mut j_at = |c: f64| -> Result<f64> {
                trial.events[idx].c = c;
                problem.objective(&trial)
            };
            let probes: Vec<f64> = linspace(0.0, cap, scan).chain(std::iter::once(old)).collect();
            let mut values = Vec::with_capacity(probes.len());
            for &c in &probes {
                values.push(j_at(c)?);
            }
            let (bi, _) = values
                .iter()
                .enumerate()
                .fold((0, f64::INFINITY), |acc, (i, &v)| if v < acc.1 { (i, v) } else { acc });
            let mut best = (values[bi], probes[bi]);
            if bi < scan + 1 {
                let step = cap / scan as f64;
                let lo = (probes[bi] - step).max(0.0);
                let hi = (probes[bi] + step).min(cap);
                let (c, j) = golden_section(&mut j_at, lo, hi, settings.tol_c)?;
                if j < best.0 {
                    best = (j, c);
                }
            }
            if sched.semantics == ImpulseSemantics::Absolute {
                // J has a kink where the impulse starts to clear the class
                let ev = sched.events[idx];
                let traj = problem.simulate(&sched)?;
                if let Some(rec) = traj
                    .jumps
                    .iter()
                    .find(|r| r.strain == ev.strain && r.k == ev.k && r.time == ev.tau)
                {
                    let limit = rec.pre.infected(ev.strain).min(cap);
                    let j = j_at(limit)?;
                    if j <= best.0 {
                        best = (j, limit);
                    }
                }
            }
            sched.events[idx].c = best.1;
            max_change = max_change.max((best.1 - old).abs());
        }
        converged = max_change < settings.tol_c;
    }

    let report = report_for(problem, &sched, settings)?;
    let j_after = problem.objective(&sched)?;
    Ok(OptimizerOutcome {
        schedule: sched,
        report,
        j_before,
        j_after,
        sweeps,
        converged,
    })
}
