//! Scenario commands.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use impulse_sir::cost::{cumulative_cost_csv, cumulative_cost_series, CostBreakdown};
use impulse_sir::scenario::{load_scenario, preset, write_scenario, ScenarioConfig, ScheduleSource};
use impulse_sir::{optimize_intensities, optimize_times, ImpulseSchedule, Problem, Strain, ThetaMode};

use crate::{Failure, RunArgs, ThetaArg};

#[derive(Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Simulate,
    Evaluate,
    OptimizeTimes,
    OptimizeIntensities,
}

impl Mode {
    fn name(self) -> &'static str {
        match self {
            Mode::Simulate => "simulate",
            Mode::Evaluate => "evaluate",
            Mode::OptimizeTimes => "optimize-times",
            Mode::OptimizeIntensities => "optimize-intensities",
        }
    }
}

fn load(args: &RunArgs) -> Result<ScenarioConfig, Failure> {
    let mut cfg = match (&args.config, &args.preset) {
        (Some(path), _) => load_scenario(path)
            .map_err(|e| Failure::Io(format!("cannot read {}: {e}", path.display())))?
            .map_err(|e| Failure::Invalid(format!("{}: {e}", path.display())))?,
        (None, Some(name)) => preset(name)?,
        (None, None) => return Err(Failure::Invalid("one of --config or --preset is required".into())),
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &args.out {
        cfg.run.output_dir = out.to_string_lossy().into_owned();
    }
    match args.theta_mode {
        Some(ThetaArg::Closed) => cfg.network.theta_mode = ThetaMode::ClosedForm,
        Some(ThetaArg::Summation) => {
            cfg.network.theta_mode = ThetaMode::Summation;
            let model = cfg.network_model()?;
            cfg.run.classes = model.degrees().collect();
            cfg.initial.per_class.retain(|c| cfg.run.classes.contains(&c.k));
        }
        None => {}
    }
    cfg.validate()?;
    Ok(cfg)
}

struct Output {
    dir: PathBuf,
    prefix: String,
    written: Vec<PathBuf>,
}

impl Output {
    fn new(dir: &Path, scenario: &str, mode: Mode) -> Result<Self, Failure> {
        fs::create_dir_all(dir).map_err(|e| Failure::Io(format!("cannot create {}: {e}", dir.display())))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            prefix: format!("{scenario}_{}", mode.name()),
            written: Vec::new(),
        })
    }

    fn write(&mut self, suffix: &str, contents: &str) -> Result<(), Failure> {
        let path = self.dir.join(format!("{}_{suffix}", self.prefix));
        fs::write(&path, contents).map_err(|e| Failure::Io(format!("cannot write {}: {e}", path.display())))?;
        self.written.push(path);
        Ok(())
    }
}

fn print_counts(problem: &Problem, schedule: &ImpulseSchedule) {
    for &k in &problem.classes {
        let (p1, p2) = (schedule.count(Strain::One, k), schedule.count(Strain::Two, k));
        if p1 + p2 > 0 || problem.classes.len() == 1 {
            println!("k = {k}: p1 = {p1}, p2 = {p2}");
        }
    }
}

fn schedule_csv(schedule: &ImpulseSchedule) -> String {
    let mut out = String::from("strain,k,tau,c,u_bar\n");
    for e in &schedule.events {
        let _ = writeln!(out, "{},{},{},{},{}", e.strain, e.k, e.tau, e.c, e.u_bar);
    }
    out
}

pub fn execute(mode: Mode, args: &RunArgs) -> Result<(), Failure> {
    let cfg = load(args)?;
    let problem = cfg.to_problem()?;
    let schedule = cfg.resolve_schedule(&problem)?;
    let mut out = Output::new(Path::new(&cfg.run.output_dir), &cfg.name, mode)?;
    let mut converged = true;

    match mode {
        Mode::Simulate => {
            let traj = problem.simulate(&schedule)?;
            let series = cumulative_cost_series(&traj, &problem.costs);
            out.write("trajectory.csv", &traj.to_csv())?;
            out.write("cost.csv", &cumulative_cost_csv(&series))?;
            println!("{} {}: J = {}", cfg.name, mode.name(), series.last().map_or(0.0, |s| s.1));
            print_counts(&problem, &schedule);
        }
        Mode::Evaluate => {
            let ev = problem.evaluate(&schedule)?;
            let report = impulse_sir::optimality::build_report(&problem, &schedule, &ev.trajectory, &ev.adjoint)?;
            out.write(
                "breakdown.csv",
                &format!("{}\n{}\n", CostBreakdown::CSV_HEADER, ev.cost.to_csv_row()),
            )?;
            out.write("report.csv", &report.to_csv())?;
            println!("{} {}: J = {}", cfg.name, mode.name(), ev.cost.total);
            println!(
                "running 1 = {}, running 2 = {}, recovery benefit = {}, impulses 1 = {}, impulses 2 = {}",
                ev.cost.running_infection_1,
                ev.cost.running_infection_2,
                ev.cost.recovery_benefit,
                ev.cost.impulse_cost_1,
                ev.cost.impulse_cost_2
            );
            print_counts(&problem, &schedule);
        }
        Mode::OptimizeTimes | Mode::OptimizeIntensities => {
            let result = if mode == Mode::OptimizeTimes {
                optimize_times(&problem, &schedule, &cfg.optimizer)?
            } else {
                optimize_intensities(&problem, &schedule, &cfg.optimizer)?
            };
            converged = result.converged;
            let mut optimized = cfg.clone();
            optimized.schedule.source = ScheduleSource::Explicit;
            optimized.schedule.semantics = result.schedule.semantics;
            optimized.schedule.events = result.schedule.events.clone();
            out.write("schedule.csv", &schedule_csv(&result.schedule))?;
            out.write("report.csv", &result.report.to_csv())?;
            out.write(
                "summary.csv",
                &format!(
                    "j_before,j_after,sweeps,converged\n{},{},{},{}\n",
                    result.j_before, result.j_after, result.sweeps, result.converged
                ),
            )?;
            out.write("scenario.toml", &write_scenario(&optimized)?)?;
            println!(
                "{} {}: J before = {}, J after = {}, sweeps = {}",
                cfg.name,
                mode.name(),
                result.j_before,
                result.j_after,
                result.sweeps
            );
            print_counts(&problem, &result.schedule);
        }
    }
    for path in &out.written {
        println!("wrote {}", path.display());
    }
    if converged {
        Ok(())
    } else {
        Err(Failure::Numeric(format!(
            "optimizer did not converge within {} sweeps; partial results written",
            cfg.optimizer.max_sweeps
        )))
    }
}
