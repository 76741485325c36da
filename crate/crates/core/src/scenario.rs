//! Scenario files: a TOML document with one table per concern.
//!
//! ```toml
//! name = "demo"
//! seed = 0
//!
//! [run]            # horizon = 100, step = 0.01, output_dir = "out"
//! classes = [4]
//!
//! [initial]        # r defaults to 1 - s - i1 - i2
//! s = 0.4
//! i1 = 0.3
//! i2 = 0.2
//!
//! [epidemic]
//! delta1 = 0.075
//! delta2 = 0.1
//! sigma1 = 0.0005
//! sigma2 = 0.0003
//!
//! [costs]          # treatment_at = "post-jump"
//! a1 = 2.0
//! a2 = 3.0
//! b1 = 3.0
//! b2 = 4.0
//! g_coeff = 0.1
//!
//! [network]        # m = 4, k_max = 100, theta_mode = "closed-form"
//!
//! [schedule]       # source = "explicit", semantics = "absolute"
//! events = [{ strain = 1, k = 4, tau = 5.0, c = 0.1, u_bar = 0.5 }]
//! ```
//!
//! `[optimizer]` and `[adjoint]` are optional. Unknown keys are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cost::CostModel;
use crate::dynamics::{DegreeClassState, EpidemicParams, Impulse, ImpulseSchedule, ImpulseSemantics, ThetaMode};
use crate::error::{validation, Error, Result};
use crate::netmodel::{build_power_law_model, generate_ba_degree_sequence, Infectivity, NetworkModel};
use crate::optimality::{AdjointOptions, OptimizerSettings};
use crate::problem::Problem;
use crate::threshold::{threshold_schedule, ThresholdRule};

const CASE1: &str = include_str!("../presets/case1.toml");
const CASE2: &str = include_str!("../presets/case2.toml");
const CASE3: &str = include_str!("../presets/case3.toml");

/// Names accepted by [`preset`].
pub const PRESETS: [&str; 3] = ["case1", "case2", "case3"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    pub run: RunSection,
    pub initial: InitialSection,
    pub epidemic: EpidemicSection,
    pub costs: CostModel,
    #[serde(default)]
    pub network: NetworkSection,
    #[serde(default)]
    pub schedule: ScheduleSection,
    #[serde(default)]
    pub optimizer: OptimizerSettings,
    #[serde(default)]
    pub adjoint: AdjointOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    #[serde(default = "default_step")]
    pub step: f64,
    pub classes: Vec<u32>,
    #[serde(default = "default_output_dir")]
    pub output_dir: String,
}

fn default_horizon() -> f64 {
    100.0
}

fn default_step() -> f64 {
    0.01
}

fn default_output_dir() -> String {
    "out".into()
}

/// Initial compartments shared by every class, with optional per-class
/// overrides. An omitted `r` closes the simplex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    pub s: f64,
    pub i1: f64,
    pub i2: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub per_class: Vec<ClassInitial>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassInitial {
    pub k: u32,
    pub s: f64,
    pub i1: f64,
    pub i2: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
}

fn closed_state(s: f64, i1: f64, i2: f64, r: Option<f64>) -> DegreeClassState {
    DegreeClassState {
        s,
        i1,
        i2,
        r: r.unwrap_or(1.0 - s - i1 - i2),
    }
}

impl InitialSection {
    pub fn state_for(&self, k: u32) -> DegreeClassState {
        match self.per_class.iter().find(|c| c.k == k) {
            Some(c) => closed_state(c.s, c.i1, c.i2, c.r),
            None => closed_state(self.s, self.i1, self.i2, self.r),
        }
    }
}

/// Per-unit-degree rates; the model multiplies each by `k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpidemicSection {
    pub delta1: f64,
    pub delta2: f64,
    pub sigma1: f64,
    pub sigma2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NetworkSource {
    /// `P(k) ∝ k⁻³` on `[m, k_max]`.
    #[default]
    PowerLaw,
    /// Empirical histogram of a grown network, truncated to `[m, k_max]`.
    Generated,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSection {
    #[serde(default = "default_m")]
    pub m: u32,
    #[serde(default = "default_k_max")]
    pub k_max: u32,
    #[serde(default)]
    pub theta_mode: ThetaMode,
    #[serde(default)]
    pub infectivity: Infectivity,
    #[serde(default)]
    pub source: NetworkSource,
    /// Size of the generated network.
    #[serde(default = "default_n_nodes")]
    pub n_nodes: usize,
}

fn default_m() -> u32 {
    4
}

fn default_k_max() -> u32 {
    100
}

fn default_n_nodes() -> usize {
    10_000
}

impl Default for NetworkSection {
    fn default() -> Self {
        Self {
            m: default_m(),
            k_max: default_k_max(),
            theta_mode: ThetaMode::default(),
            infectivity: Infectivity::default(),
            source: NetworkSource::default(),
            n_nodes: default_n_nodes(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScheduleSource {
    #[default]
    Explicit,
    Threshold,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSection {
    #[serde(default)]
    pub source: ScheduleSource,
    #[serde(default)]
    pub semantics: ImpulseSemantics,
    /// Threshold trigger: inspection spacing.
    #[serde(default = "default_check_period")]
    pub check_period: f64,
    /// Threshold trigger: prevalence that triggers an impulse, per strain.
    #[serde(default = "default_level")]
    pub level: [f64; 2],
    /// Threshold trigger: intensity of generated impulses, per strain.
    #[serde(default = "default_intensity")]
    pub intensity: [f64; 2],
    /// Upper bound `ū` for generated impulses, per strain.
    #[serde(default = "default_cap")]
    pub cap: [f64; 2],
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub events: Vec<Impulse>,
}

fn default_check_period() -> f64 {
    2.0
}

fn default_level() -> [f64; 2] {
    [0.005, 0.005]
}

fn default_intensity() -> [f64; 2] {
    [0.1, 0.08]
}

fn default_cap() -> [f64; 2] {
    [0.5, 0.5]
}

impl Default for ScheduleSection {
    fn default() -> Self {
        Self {
            source: ScheduleSource::default(),
            semantics: ImpulseSemantics::default(),
            check_period: default_check_period(),
            level: default_level(),
            intensity: default_intensity(),
            cap: default_cap(),
            events: Vec::new(),
        }
    }
}

impl ScheduleSection {
    pub fn rule(&self) -> ThresholdRule {
        ThresholdRule {
            level: self.level,
            check_period: self.check_period,
            intensity: self.intensity,
            cap: self.cap,
            semantics: self.semantics,
        }
    }
}

fn field_error(field: &str, e: Error) -> Error {
    match e {
        Error::Validation { .. } => e,
        other => validation(field, other.to_string()),
    }
}

impl ScenarioConfig {
    pub fn params(&self) -> EpidemicParams {
        EpidemicParams {
            delta1: self.epidemic.delta1,
            delta2: self.epidemic.delta2,
            sigma1: self.epidemic.sigma1,
            sigma2: self.epidemic.sigma2,
            theta_mode: self.network.theta_mode,
            infectivity: self.network.infectivity,
        }
    }

    pub fn network_model(&self) -> Result<NetworkModel> {
        let net = &self.network;
        match net.source {
            NetworkSource::PowerLaw => build_power_law_model(net.m, net.k_max),
            NetworkSource::Generated => {
                let seq = generate_ba_degree_sequence(net.n_nodes, net.m as usize, net.m as usize, self.seed)?;
                let hist = seq.histogram();
                let weights: Vec<f64> = (net.m..=net.k_max)
                    .map(|k| hist.get(k as usize).copied().unwrap_or(0) as f64)
                    .collect();
                NetworkModel::from_weights(net.m, net.m, &weights, 1.0)
            }
        }
    }

    /// Checks every constraint a run relies on, naming the offending field.
    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() || !self.name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
            return Err(validation("name", "must be non-empty and use only [A-Za-z0-9_-]"));
        }
        let run = &self.run;
        if !(run.horizon > 0.0 && run.horizon.is_finite()) {
            return Err(validation("run.horizon", "must be positive and finite"));
        }
        if !(run.step > 0.0 && run.step <= run.horizon) {
            return Err(validation("run.step", "must lie in (0, horizon]"));
        }
        if run.classes.is_empty() {
            return Err(validation("run.classes", "must list at least one degree"));
        }
        if run.classes.windows(2).any(|w| w[0] >= w[1]) {
            return Err(validation("run.classes", "must be strictly ascending"));
        }
        if self.network.source == NetworkSource::Generated && self.network.n_nodes < self.network.m as usize {
            return Err(validation("network.n_nodes", "must be at least m"));
        }
        let model = self.network_model().map_err(|e| field_error("network", e))?;
        if let Some(k) = run.classes.iter().find(|&&k| !model.contains(k)) {
            return Err(validation(
                "run.classes",
                format!("degree {k} outside [{}, {}]", model.k_min, model.k_max),
            ));
        }
        if self.network.theta_mode == ThetaMode::Summation && !run.classes.iter().copied().eq(model.degrees()) {
            return Err(validation(
                "run.classes",
                "summation mode needs every degree of the support simulated",
            ));
        }
        for c in &self.initial.per_class {
            if !run.classes.contains(&c.k) {
                return Err(validation("initial.per_class", format!("degree {} is not simulated", c.k)));
            }
        }
        for &k in &run.classes {
            self.initial.state_for(k).validate().map_err(|e| field_error("initial", e))?;
        }
        self.params().validate().map_err(|e| field_error("epidemic", e))?;
        self.costs.validate().map_err(|e| field_error("costs", e))?;
        match self.schedule.source {
            ScheduleSource::Explicit => {
                for e in &self.schedule.events {
                    if !run.classes.contains(&e.k) {
                        return Err(validation("schedule.events", format!("degree {} is not simulated", e.k)));
                    }
                }
                self.explicit_schedule()
                    .validate(run.horizon)
                    .map_err(|e| field_error("schedule.events", e))?;
            }
            ScheduleSource::Threshold => self.schedule.rule().validate().map_err(|e| field_error("schedule", e))?,
        }
        let opt = &self.optimizer;
        if !(opt.tol_tau > 0.0 && opt.tol_c > 0.0 && opt.tol_stationarity > 0.0) {
            return Err(validation("optimizer", "tolerances must be positive"));
        }
        if opt.max_sweeps == 0 || opt.scan_points == 0 {
            return Err(validation("optimizer", "max_sweeps and scan_points must be positive"));
        }
        Ok(())
    }

    fn explicit_schedule(&self) -> ImpulseSchedule {
        ImpulseSchedule::new(self.schedule.semantics, self.schedule.events.clone())
    }

    pub fn to_problem(&self) -> Result<Problem> {
        self.validate()?;
        let problem = Problem {
            model: self.network_model()?,
            params: self.params(),
            costs: self.costs,
            classes: self.run.classes.clone(),
            initial: self.run.classes.iter().map(|&k| self.initial.state_for(k)).collect(),
            horizon: self.run.horizon,
            step: self.run.step,
            adjoint: self.adjoint,
        };
        problem.validate()?;
        Ok(problem)
    }

    /// The explicit event list, or the threshold-generated one.
    pub fn resolve_schedule(&self, problem: &Problem) -> Result<ImpulseSchedule> {
        match self.schedule.source {
            ScheduleSource::Explicit => Ok(self.explicit_schedule()),
            ScheduleSource::Threshold => threshold_schedule(problem, &self.schedule.rule()),
        }
    }
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].bytes().filter(|&b| b == b'\n').count() + 1
}

/// Parses and validates a scenario document.
pub fn parse_scenario(text: &str) -> Result<ScenarioConfig> {
    let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| Error::Parse {
        line: e.span().map_or(1, |s| line_of(text, s.start)),
        message: e.message().trim().to_string(),
    })?;
    cfg.validate()?;
    Ok(cfg)
}

/// Reads a scenario file; I/O failures come back as `std::io::Error` so
/// callers can tell them apart from content errors.
pub fn load_scenario(path: &Path) -> std::result::Result<Result<ScenarioConfig>, std::io::Error> {
    let text = std::fs::read_to_string(path)?;
    Ok(parse_scenario(&text))
}

pub fn write_scenario(cfg: &ScenarioConfig) -> Result<String> {
    toml::to_string(cfg).map_err(|e| Error::Config(e.to_string()))
}

/// Bundled scenario by name.
pub fn preset(name: &str) -> Result<ScenarioConfig> {
    let text = match name {
        "case1" => CASE1,
        "case2" => CASE2,
        "case3" => CASE3,
        other => {
            return Err(validation(
                "preset",
                format!("unknown preset `{other}`, expected one of {}", PRESETS.join(", ")),
            ))
        }
    };
    parse_scenario(text)
}

/// Source text of a bundled scenario.
pub fn preset_text(name: &str) -> Option<&'static str> {
    match name {
        "case1" => Some(CASE1),
        "case2" => Some(CASE2),
        "case3" => Some(CASE3),
        _ => None,
    }
}
