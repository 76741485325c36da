//! Hybrid two-strain SIR flow on degree classes.
//!
//! Between impulse times every degree class follows the mean-field SIR flow
//! ([`flow_rhs`]); at an impulse time the selected infected compartment is
//! moved to the recovered compartment instantaneously ([`apply_impulse`]).
//! [`integrate`] stitches the two together with a fixed-step RK4 scheme whose
//! last step in each segment is shortened to land exactly on the next
//! impulse time.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::netmodel::{theta_closed_form, theta_weights, Infectivity, NetworkModel};

/// Conservation tolerance used when validating user-supplied states.
pub const SIMPLEX_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Strain {
    One,
    Two,
}

impl Strain {
    pub const BOTH: [Strain; 2] = [Strain::One, Strain::Two];

    pub fn index(self) -> usize {
        match self {
            Strain::One => 0,
            Strain::Two => 1,
        }
    }

    pub fn number(self) -> u8 {
        self.index() as u8 + 1
    }
}

impl TryFrom<u8> for Strain {
    type Error = String;

    fn try_from(v: u8) -> std::result::Result<Self, Self::Error> {
        match v {
            1 => Ok(Strain::One),
            2 => Ok(Strain::Two),
            other => Err(format!("strain must be 1 or 2, got {other}")),
        }
    }
}

impl From<Strain> for u8 {
    fn from(s: Strain) -> u8 {
        s.number()
    }
}

impl std::fmt::Display for Strain {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.number())
    }
}

/// Compartment fractions of one degree class.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DegreeClassState {
    pub s: f64,
    pub i1: f64,
    pub i2: f64,
    pub r: f64,
}

impl DegreeClassState {
    /// Validated constructor: components in `[0, 1]` summing to one.
    pub fn new(s: f64, i1: f64, i2: f64, r: f64) -> Result<Self> {
        let state = Self { s, i1, i2, r };
        state.validate()?;
        Ok(state)
    }

    pub fn validate(&self) -> Result<()> {
        let parts = [("s", self.s), ("i1", self.i1), ("i2", self.i2), ("r", self.r)];
        for (name, v) in parts {
            if !v.is_finite() || !(-SIMPLEX_TOL..=1.0 + SIMPLEX_TOL).contains(&v) {
                return Err(Error::Domain(format!("compartment {name} = {v} outside [0, 1]")));
            }
        }
        let err = (self.total() - 1.0).abs();
        if err > SIMPLEX_TOL {
            return Err(Error::Domain(format!(
                "compartments sum to {} (off by {err:e})",
                self.total()
            )));
        }
        Ok(())
    }

    pub fn total(&self) -> f64 {
        self.s + self.i1 + self.i2 + self.r
    }

    pub fn infected(&self, strain: Strain) -> f64 {
        match strain {
            Strain::One => self.i1,
            Strain::Two => self.i2,
        }
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.s, self.i1, self.i2, self.r]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Self {
            s: a[0],
            i1: a[1],
            i2: a[2],
            r: a[3],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ThetaMode {
    /// Time-independent `e^{-1/(mλ)}/(mλ)`.
    #[default]
    ClosedForm,
    /// State-dependent neighbour sum, rebuilt from every class at each stage.
    Summation,
}

/// Per-strain spreading and recovery coefficients, each per unit degree:
/// a class of degree `k` spreads at `delta·k` and recovers at `sigma·k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpidemicParams {
    pub delta1: f64,
    pub delta2: f64,
    pub sigma1: f64,
    pub sigma2: f64,
    #[serde(default)]
    pub theta_mode: ThetaMode,
    #[serde(default)]
    pub infectivity: Infectivity,
}

impl EpidemicParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("delta1", self.delta1),
            ("delta2", self.delta2),
            ("sigma1", self.sigma1),
            ("sigma2", self.sigma2),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    pub fn delta(&self, strain: Strain) -> f64 {
        match strain {
            Strain::One => self.delta1,
            Strain::Two => self.delta2,
        }
    }

    pub fn sigma(&self, strain: Strain) -> f64 {
        match strain {
            Strain::One => self.sigma1,
            Strain::Two => self.sigma2,
        }
    }

    /// Effective spreading rate `δ_{ik}/σ^i_k`; the degree cancels.
    pub fn effective_rate(&self, strain: Strain) -> f64 {
        self.delta(strain) / self.sigma(strain)
    }
}

/// Right-hand side of the flow for one class of degree `k`.
pub fn flow_rhs(
    state: &DegreeClassState,
    k: u32,
    params: &EpidemicParams,
    theta1: f64,
    theta2: f64,
) -> [f64; 4] {
    flow_rhs_array(state.to_array(), k as f64, params, [theta1, theta2])
}

pub(crate) fn flow_rhs_array(x: [f64; 4], k: f64, p: &EpidemicParams, theta: [f64; 2]) -> [f64; 4] {
    let [s, i1, i2, _] = x;
    let inf1 = p.delta1 * k * s * i1 * theta[0];
    let inf2 = p.delta2 * k * s * i2 * theta[1];
    let rec1 = p.sigma1 * k * i1;
    let rec2 = p.sigma2 * k * i2;
    [-inf1 - inf2, inf1 - rec1, inf2 - rec2, rec1 + rec2]
}

/// Infection field for a set of simulated classes.
#[derive(Debug, Clone, PartialEq)]
pub enum Field {
    Constant([f64; 2]),
    /// `Θ_i = Σ_j w_i[j] I_i[j]` with `j` running over the simulated classes.
    Summation([Vec<f64>; 2]),
}

impl Field {
    /// Builds the field for `classes`; summation mode requires the classes to
    /// cover the model support exactly, in ascending order.
    pub fn new(model: &NetworkModel, params: &EpidemicParams, classes: &[u32]) -> Result<Self> {
        match params.theta_mode {
            ThetaMode::ClosedForm => Ok(Field::Constant([
                theta_closed_form(params.effective_rate(Strain::One), model.m)?,
                theta_closed_form(params.effective_rate(Strain::Two), model.m)?,
            ])),
            ThetaMode::Summation => {
                if !classes.iter().copied().eq(model.degrees()) {
                    return Err(Error::Config(format!(
                        "summation mode needs every degree of [{}, {}] simulated",
                        model.k_min, model.k_max
                    )));
                }
                Ok(Field::Summation([
                    theta_weights(model, params.delta1, params.infectivity),
                    theta_weights(model, params.delta2, params.infectivity),
                ]))
            }
        }
    }

    pub fn thetas(&self, x: &[[f64; 4]]) -> [f64; 2] {
        match self {
            Field::Constant(t) => *t,
            Field::Summation([w1, w2]) => {
                let mut t = [0.0; 2];
                for ((a, b), xi) in w1.iter().zip(w2).zip(x) {
                    t[0] += a * xi[1];
                    t[1] += b * xi[2];
                }
                t
            }
        }
    }

    pub fn thetas_of(&self, states: &[DegreeClassState]) -> [f64; 2] {
        let x: Vec<[f64; 4]> = states.iter().map(|s| s.to_array()).collect();
        self.thetas(&x)
    }

    /// `∂Θ_i/∂I_i` of class `j`; zero for the constant field.
    pub fn weight(&self, strain: Strain, j: usize) -> f64 {
        match self {
            Field::Constant(_) => 0.0,
            Field::Summation(w) => w[strain.index()][j],
        }
    }

    pub fn is_state_dependent(&self) -> bool {
        matches!(self, Field::Summation(_))
    }
}

/// How an impulse intensity translates into the removed infected fraction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ImpulseSemantics {
    /// Remove `min(c, I)` of the class population.
    #[default]
    Absolute,
    /// Remove the fraction `c` of the currently infected, `c·I`.
    Proportional,
}

/// One scheduled treatment impulse.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Impulse {
    pub strain: Strain,
    pub k: u32,
    pub tau: f64,
    pub c: f64,
    pub u_bar: f64,
}

/// Impulses for every (strain, class) lane.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ImpulseSchedule {
    #[serde(default)]
    pub semantics: ImpulseSemantics,
    #[serde(default)]
    pub events: Vec<Impulse>,
}

impl ImpulseSchedule {
    pub fn new(semantics: ImpulseSemantics, mut events: Vec<Impulse>) -> Self {
        sort_events(&mut events);
        Self { semantics, events }
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn count(&self, strain: Strain, k: u32) -> usize {
        self.events
            .iter()
            .filter(|e| e.strain == strain && e.k == k)
            .count()
    }

    /// Indices of the events sharing the lane of event `idx`, in time order.
    pub fn lane_of(&self, idx: usize) -> Vec<usize> {
        let e = self.events[idx];
        let mut lane: Vec<usize> = (0..self.events.len())
            .filter(|&j| self.events[j].strain == e.strain && self.events[j].k == e.k)
            .collect();
        lane.sort_by(|&a, &b| self.events[a].tau.total_cmp(&self.events[b].tau));
        lane
    }

    /// Open interval available to event `idx` without reordering its lane.
    pub fn admissible_window(&self, idx: usize, horizon: f64) -> (f64, f64) {
        let lane = self.lane_of(idx);
        let pos = lane.iter().position(|&j| j == idx).expect("event in own lane");
        let lo = if pos == 0 { 0.0 } else { self.events[lane[pos - 1]].tau };
        let hi = lane
            .get(pos + 1)
            .map_or(horizon, |&j| self.events[j].tau);
        (lo, hi)
    }

    /// Checks intensity bounds, lane ordering and that every time lies in
    /// `(0, horizon)`.
    pub fn validate(&self, horizon: f64) -> Result<()> {
        for e in &self.events {
            if !(e.tau > 0.0 && e.tau < horizon) {
                return Err(Error::Config(format!(
                    "impulse time {} outside (0, {horizon})",
                    e.tau
                )));
            }
            if !(e.c >= 0.0) || !(e.u_bar >= 0.0) {
                return Err(Error::Domain(format!("negative intensity or cap at τ = {}", e.tau)));
            }
            if e.c > e.u_bar {
                return Err(Error::Domain(format!(
                    "intensity {} exceeds cap {} at τ = {}",
                    e.c, e.u_bar, e.tau
                )));
            }
        }
        for idx in 0..self.events.len() {
            let lane = self.lane_of(idx);
            for w in lane.windows(2) {
                if !(self.events[w[0]].tau < self.events[w[1]].tau) {
                    return Err(Error::Config(format!(
                        "impulse times for strain {} class {} are not strictly increasing",
                        self.events[idx].strain, self.events[idx].k
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn sort(&mut self) {
        sort_events(&mut self.events);
    }
}

fn sort_events(events: &mut [Impulse]) {
    events.sort_by(|a, b| {
        a.tau
            .total_cmp(&b.tau)
            .then(a.k.cmp(&b.k))
            .then(a.strain.cmp(&b.strain))
    });
}

/// Result of applying one impulse to a class.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpOutcome {
    pub state: DegreeClassState,
    /// Fraction actually moved from infected to recovered.
    pub applied: f64,
}

/// Fraction removed by an impulse of intensity `c` from infected level
/// `infected`.
pub fn removed_fraction(infected: f64, c: f64, semantics: ImpulseSemantics) -> f64 {
    let infected = infected.max(0.0);
    match semantics {
        ImpulseSemantics::Absolute => c.min(infected),
        ImpulseSemantics::Proportional => c.min(1.0) * infected,
    }
}

/// `∂I(τ⁺)/∂I(τ)` of the jump map.
pub fn jump_slope(infected: f64, c: f64, semantics: ImpulseSemantics) -> f64 {
    match semantics {
        ImpulseSemantics::Absolute if c >= infected => 0.0,
        ImpulseSemantics::Absolute => 1.0,
        ImpulseSemantics::Proportional => 1.0 - c.min(1.0),
    }
}

/// Absolute-intensity jump: moves `min(c, I_i)` from `I_i` to `R`.
pub fn apply_impulse(state: &DegreeClassState, strain: Strain, c: f64) -> Result<DegreeClassState> {
    apply_impulse_with(state, strain, c, ImpulseSemantics::Absolute).map(|o| o.state)
}

pub fn apply_impulse_with(
    state: &DegreeClassState,
    strain: Strain,
    c: f64,
    semantics: ImpulseSemantics,
) -> Result<JumpOutcome> {
    if !(c >= 0.0) {
        return Err(Error::Domain(format!("impulse intensity must be nonnegative, got {c}")));
    }
    let nu = removed_fraction(state.infected(strain), c, semantics);
    let mut next = *state;
    match strain {
        Strain::One => next.i1 -= nu,
        Strain::Two => next.i2 -= nu,
    }
    next.r += nu;
    Ok(JumpOutcome {
        state: next,
        applied: nu,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeKind {
    Regular,
    /// Left limit at an impulse time.
    PreJump,
    /// Right limit at an impulse time.
    PostJump,
}

/// One applied impulse as it happened during integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpRecord {
    pub time: f64,
    /// Grid index of the right-limit node at this time.
    pub node: usize,
    pub strain: Strain,
    pub class: usize,
    pub k: u32,
    pub nominal: f64,
    pub applied: f64,
    pub pre: DegreeClassState,
    pub post: DegreeClassState,
}

/// Forward solution on the integration grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub classes: Vec<u32>,
    pub times: Vec<f64>,
    pub kinds: Vec<NodeKind>,
    /// `states[node][class]`.
    pub states: Vec<Vec<DegreeClassState>>,
    /// In application order: time, then class, then strain.
    pub jumps: Vec<JumpRecord>,
    pub semantics: ImpulseSemantics,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_states(&self) -> &[DegreeClassState] {
        self.states.last().map_or(&[], |v| v.as_slice())
    }

    /// Largest `|S + I1 + I2 + R − 1|` over all nodes and classes.
    pub fn max_conservation_error(&self) -> f64 {
        self.states
            .iter()
            .flatten()
            .map(|s| (s.total() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    pub fn class_index(&self, k: u32) -> Option<usize> {
        self.classes.iter().position(|&c| c == k)
    }

    /// Trajectory CSV: one row per (node, class); right-limit rows carry
    /// `jump_flag = 1`, the strain code (1, 2, or 3 for both) and the total
    /// fraction removed.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("time,k,S,I1,I2,R,jump_flag,strain,applied_intensity\n");
        let mut cursor = 0;
        for (n, (t, row)) in self.times.iter().zip(&self.states).enumerate() {
            let post = self.kinds[n] == NodeKind::PostJump;
            for (j, st) in row.iter().enumerate() {
                let (mut code, mut applied) = (0u8, 0.0);
                if post {
                    while cursor < self.jumps.len() && self.jumps[cursor].node < n {
                        cursor += 1;
                    }
                    for rec in self.jumps[cursor..].iter().take_while(|r| r.node == n) {
                        if rec.class == j {
                            code |= rec.strain.number();
                            applied += rec.applied;
                        }
                    }
                }
                let _ = writeln!(
                    out,
                    "{t},{},{},{},{},{},{},{code},{applied}",
                    self.classes[j],
                    st.s,
                    st.i1,
                    st.i2,
                    st.r,
                    u8::from(post)
                );
            }
        }
        out
    }
}

/// Integrates the hybrid system with validation of every input.
pub fn integrate(
    initial: &[DegreeClassState],
    classes: &[u32],
    params: &EpidemicParams,
    schedule: &ImpulseSchedule,
    model: &NetworkModel,
    horizon: f64,
    step: f64,
) -> Result<Trajectory> {
    for s in initial {
        s.validate()?;
    }
    integrate_raw(initial, classes, params, schedule, model, horizon, step)
}

/// Same as [`integrate`] but without the simplex check on the initial
/// states, so that off-simplex perturbations can be used for sensitivity
/// studies.
pub fn integrate_raw(
    initial: &[DegreeClassState],
    classes: &[u32],
    params: &EpidemicParams,
    schedule: &ImpulseSchedule,
    model: &NetworkModel,
    horizon: f64,
    step: f64,
) -> Result<Trajectory> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::Config(format!("step must be positive, got {step}")));
    }
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::Config(format!("horizon must be positive, got {horizon}")));
    }
    if initial.len() != classes.len() {
        return Err(Error::Config(format!(
            "{} initial states for {} classes",
            initial.len(),
            classes.len()
        )));
    }
    if classes.is_empty() {
        return Err(Error::Config("no degree classes to simulate".into()));
    }
    if let Some(k) = classes.iter().find(|&&k| !model.contains(k)) {
        return Err(Error::Config(format!(
            "class {k} outside support [{}, {}]",
            model.k_min, model.k_max
        )));
    }
    params.validate()?;
    schedule.validate(horizon)?;
    if let Some(e) = schedule.events.iter().find(|e| !classes.contains(&e.k)) {
        return Err(Error::Config(format!("impulse targets unsimulated class {}", e.k)));
    }

    let field = Field::new(model, params, classes)?;
    let kf: Vec<f64> = classes.iter().map(|&k| k as f64).collect();

    let mut events: Vec<(usize, Impulse)> = schedule
        .events
        .iter()
        .map(|e| (classes.iter().position(|&k| k == e.k).unwrap(), *e))
        .collect();
    events.sort_by(|a, b| {
        a.1.tau
            .total_cmp(&b.1.tau)
            .then(a.0.cmp(&b.0))
            .then(a.1.strain.cmp(&b.1.strain))
    });

    let mut traj = Trajectory {
        classes: classes.to_vec(),
        times: vec![0.0],
        kinds: vec![NodeKind::Regular],
        states: vec![initial.to_vec()],
        jumps: Vec::with_capacity(events.len()),
        semantics: schedule.semantics,
    };
    let mut x: Vec<[f64; 4]> = initial.iter().map(|s| s.to_array()).collect();
    let mut t = 0.0;
    let mut next_event = 0;

    loop {
        let target = events.get(next_event).map_or(horizon, |e| e.1.tau);
        advance(&mut x, &mut t, target, step, &kf, params, &field, &mut traj);
        if next_event >= events.len() {
            break;
        }
        // the last stored node is the left limit at `target`
        *traj.kinds.last_mut().unwrap() = NodeKind::PreJump;
        let post_node = traj.times.len();
        while let Some(&(j, e)) = events.get(next_event).filter(|e| e.1.tau == target) {
            let pre = DegreeClassState::from_array(x[j]);
            let out = apply_impulse_with(&pre, e.strain, e.c, schedule.semantics)?;
            x[j] = out.state.to_array();
            traj.jumps.push(JumpRecord {
                time: target,
                node: post_node,
                strain: e.strain,
                class: j,
                k: e.k,
                nominal: e.c,
                applied: out.applied,
                pre,
                post: out.state,
            });
            next_event += 1;
        }
        push_node(&mut traj, target, NodeKind::PostJump, &x);
    }
    Ok(traj)
}

fn push_node(traj: &mut Trajectory, t: f64, kind: NodeKind, x: &[[f64; 4]]) {
    traj.times.push(t);
    traj.kinds.push(kind);
    traj.states
        .push(x.iter().map(|a| DegreeClassState::from_array(*a)).collect());
}

/// Number of RK4 steps covering `[start, end]` with nominal step `h`.
pub(crate) fn step_count(start: f64, end: f64, h: f64) -> usize {
    (((end - start) / h) - 1e-9).ceil().max(1.0) as usize
}

#[allow(clippy::too_many_arguments)]
fn advance(
    x: &mut [[f64; 4]],
    t: &mut f64,
    end: f64,
    h: f64,
    kf: &[f64],
    params: &EpidemicParams,
    field: &Field,
    traj: &mut Trajectory,
) {
    let start = *t;
    if end <= start {
        return;
    }
    let n = step_count(start, end, h);
    for i in 0..n {
        let t_next = if i + 1 == n { end } else { start + (i + 1) as f64 * h };
        rk4_step(x, t_next - *t, kf, params, field);
        *t = t_next;
        push_node(traj, t_next, NodeKind::Regular, x);
    }
}

pub(crate) fn system_rhs(
    x: &[[f64; 4]],
    kf: &[f64],
    params: &EpidemicParams,
    field: &Field,
    out: &mut [[f64; 4]],
) {
    let theta = field.thetas(x);
    for ((o, xi), k) in out.iter_mut().zip(x).zip(kf) {
        *o = flow_rhs_array(*xi, *k, params, theta);
    }
}

fn rk4_step(x: &mut [[f64; 4]], h: f64, kf: &[f64], params: &EpidemicParams, field: &Field) {
    let n = x.len();
    let mut k1 = vec![[0.0; 4]; n];
    let mut k2 = vec![[0.0; 4]; n];
    let mut k3 = vec![[0.0; 4]; n];
    let mut k4 = vec![[0.0; 4]; n];
    let mut tmp = vec![[0.0; 4]; n];
    let shifted = |tmp: &mut Vec<[f64; 4]>, base: &[[f64; 4]], d: &[[f64; 4]], a: f64| {
        for ((t, b), dd) in tmp.iter_mut().zip(base).zip(d) {
            for c in 0..4 {
                t[c] = b[c] + a * dd[c];
            }
        }
    };
    system_rhs(x, kf, params, field, &mut k1);
    shifted(&mut tmp, x, &k1, 0.5 * h);
    system_rhs(&tmp, kf, params, field, &mut k2);
    shifted(&mut tmp, x, &k2, 0.5 * h);
    system_rhs(&tmp, kf, params, field, &mut k3);
    shifted(&mut tmp, x, &k3, h);
    system_rhs(&tmp, kf, params, field, &mut k4);
    for i in 0..n {
        for c in 0..4 {
            x[i][c] += h / 6.0 * (k1[i][c] + 2.0 * k2[i][c] + 2.0 * k3[i][c] + k4[i][c]);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netmodel::build_power_law_model;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn case1_params(theta_mode: ThetaMode) -> EpidemicParams {
        EpidemicParams {
            delta1: 0.075,
            delta2: 0.1,
            sigma1: 0.0005,
            sigma2: 0.0003,
            theta_mode,
            infectivity: Infectivity::DegreeProportional,
        }
    }

    fn case1_state() -> DegreeClassState {
        DegreeClassState::new(0.4, 0.3, 0.2, 0.1).unwrap()
    }

    #[test]
    fn disease_free_rhs_vanishes() {
        let st = DegreeClassState::new(0.7, 0.0, 0.0, 0.3).unwrap();
        assert_eq!(flow_rhs(&st, 4, &case1_params(ThetaMode::ClosedForm), 0.2, 0.3), [0.0; 4]);
    }

    #[test]
    fn case1_rhs_term_by_term() {
        let st = case1_state();
        let (t1, t2) = (0.0016638912024182313, 0.3 * 0.2);
        let d = flow_rhs(&st, 4, &case1_params(ThetaMode::ClosedForm), t1, t2);
        // direct expansion with δ1k = 0.3, δ2k = 0.4, σ1k = 0.002, σ2k = 0.0012
        let inf1 = 0.3 * 0.4 * 0.3 * t1;
        let inf2 = 0.4 * 0.4 * 0.2 * t2;
        assert_relative_eq!(d[0], -inf1 - inf2, max_relative = 1e-14);
        assert_relative_eq!(d[1], inf1 - 0.002 * 0.3, max_relative = 1e-14);
        assert_relative_eq!(d[2], inf2 - 0.0012 * 0.2, max_relative = 1e-14);
        assert_relative_eq!(d[3], 0.002 * 0.3 + 0.0012 * 0.2, max_relative = 1e-14);
        assert!(d.iter().sum::<f64>().abs() < 1e-17);
    }

    #[test]
    fn impulse_identity_and_subtraction() {
        let st = case1_state();
        assert_eq!(apply_impulse(&st, Strain::One, 0.0).unwrap(), st);
        let after = apply_impulse(&st, Strain::One, 0.1).unwrap();
        assert_relative_eq!(after.i1, 0.2, epsilon = 1e-15);
        assert_relative_eq!(after.r, 0.2, epsilon = 1e-15);
        assert_eq!(after.s.to_bits(), st.s.to_bits());
        assert_eq!(after.i2.to_bits(), st.i2.to_bits());
    }

    #[test]
    fn impulse_clamps_at_available_infection() {
        let st = DegreeClassState::new(0.45, 0.05, 0.2, 0.3).unwrap();
        let out = apply_impulse_with(&st, Strain::One, 0.1, ImpulseSemantics::Absolute).unwrap();
        assert_eq!(out.state.i1, 0.0);
        assert_relative_eq!(out.state.r, 0.35, epsilon = 1e-15);
        assert_relative_eq!(out.applied, 0.05, epsilon = 1e-15);
        assert!(out.state.to_array().iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn impulse_rejects_negative_intensity() {
        assert!(matches!(
            apply_impulse(&case1_state(), Strain::Two, -0.01),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn proportional_impulse_scales_infection() {
        let out = apply_impulse_with(&case1_state(), Strain::Two, 0.08, ImpulseSemantics::Proportional)
            .unwrap();
        assert_relative_eq!(out.state.i2, 0.2 * 0.92, epsilon = 1e-15);
        assert_relative_eq!(out.applied, 0.016, epsilon = 1e-15);
    }

    #[test]
    fn equilibrium_without_infection() {
        let model = build_power_law_model(4, 4).unwrap();
        let st = DegreeClassState::new(0.6, 0.0, 0.0, 0.4).unwrap();
        for mode in [ThetaMode::ClosedForm, ThetaMode::Summation] {
            let traj = integrate(
                &[st],
                &[4],
                &case1_params(mode),
                &ImpulseSchedule::empty(),
                &model,
                5.0,
                0.1,
            )
            .unwrap();
            assert!(traj.states.iter().all(|row| row[0] == st));
        }
    }

    #[test]
    fn strain_two_absent_reduces_to_single_strain() {
        let model = build_power_law_model(4, 4).unwrap();
        let params = EpidemicParams {
            delta1: 0.5,
            sigma1: 0.05,
            ..case1_params(ThetaMode::Summation)
        };
        let st = DegreeClassState::new(0.9, 0.1, 0.0, 0.0).unwrap();
        let traj =
            integrate(&[st], &[4], &params, &ImpulseSchedule::empty(), &model, 10.0, 0.01).unwrap();

        // independent single-strain RK4 on (S, I); one class gives Θ = δ I
        let f = |s: f64, i: f64| {
            let inf = 0.5 * 4.0 * s * i * (0.5 * i);
            (-inf, inf - 0.05 * 4.0 * i)
        };
        let (mut s, mut i) = (0.9, 0.1);
        let h = 0.01;
        for _ in 0..1000 {
            let (a1, b1) = f(s, i);
            let (a2, b2) = f(s + 0.5 * h * a1, i + 0.5 * h * b1);
            let (a3, b3) = f(s + 0.5 * h * a2, i + 0.5 * h * b2);
            let (a4, b4) = f(s + h * a3, i + h * b3);
            s += h / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4);
            i += h / 6.0 * (b1 + 2.0 * b2 + 2.0 * b3 + b4);
        }
        let end = traj.final_states()[0];
        assert_relative_eq!(end.i1, i, max_relative = 1e-10);
        assert_relative_eq!(end.s, s, max_relative = 1e-10);
        assert_eq!(end.i2, 0.0);
    }

    #[test]
    fn jumps_are_recorded_as_left_right_pairs() {
        let model = build_power_law_model(4, 4).unwrap();
        let schedule = ImpulseSchedule::new(
            ImpulseSemantics::Absolute,
            vec![
                Impulse { strain: Strain::One, k: 4, tau: 1.005, c: 0.1, u_bar: 0.2 },
                Impulse { strain: Strain::Two, k: 4, tau: 1.005, c: 0.05, u_bar: 0.2 },
                Impulse { strain: Strain::One, k: 4, tau: 2.5, c: 0.1, u_bar: 0.2 },
            ],
        );
        let traj = integrate(
            &[case1_state()],
            &[4],
            &case1_params(ThetaMode::ClosedForm),
            &schedule,
            &model,
            4.0,
            0.01,
        )
        .unwrap();
        let pre: Vec<usize> = (0..traj.len()).filter(|&n| traj.kinds[n] == NodeKind::PreJump).collect();
        assert_eq!(pre.len(), 2);
        for &n in &pre {
            assert_eq!(traj.kinds[n + 1], NodeKind::PostJump);
            assert_eq!(traj.times[n], traj.times[n + 1]);
        }
        assert_eq!(traj.times[pre[0]], 1.005);
        assert_eq!(traj.jumps.len(), 3);
        // strain 1 first at the coincident time
        assert_eq!(traj.jumps[0].strain, Strain::One);
        assert_eq!(traj.jumps[1].pre, traj.jumps[0].post);
        assert!(traj.max_conservation_error() < 1e-12);
        let after = traj.states[pre[0] + 1][0];
        let before = traj.states[pre[0]][0];
        assert_relative_eq!(before.i1 - after.i1, 0.1, epsilon = 1e-14);
        assert_relative_eq!(after.r - before.r, 0.15, epsilon = 1e-14);
        assert_eq!(*traj.times.last().unwrap(), 4.0);
    }

    #[test]
    fn configuration_errors() {
        let model = build_power_law_model(4, 4).unwrap();
        let p = case1_params(ThetaMode::ClosedForm);
        let st = [case1_state()];
        let empty = ImpulseSchedule::empty();
        assert!(integrate(&st, &[4], &p, &empty, &model, 1.0, 0.0).is_err());
        let unordered = ImpulseSchedule {
            semantics: ImpulseSemantics::Absolute,
            events: vec![
                Impulse { strain: Strain::One, k: 4, tau: 0.6, c: 0.1, u_bar: 0.2 },
                Impulse { strain: Strain::One, k: 4, tau: 0.6, c: 0.1, u_bar: 0.2 },
            ],
        };
        assert!(matches!(
            integrate(&st, &[4], &p, &unordered, &model, 1.0, 0.01),
            Err(Error::Config(_))
        ));
        let late = ImpulseSchedule::new(
            ImpulseSemantics::Absolute,
            vec![Impulse { strain: Strain::One, k: 4, tau: 1.0, c: 0.1, u_bar: 0.2 }],
        );
        assert!(integrate(&st, &[4], &p, &late, &model, 1.0, 0.01).is_err());
        let wide = build_power_law_model(4, 6).unwrap();
        let sum = case1_params(ThetaMode::Summation);
        assert!(integrate(&st, &[4], &sum, &empty, &wide, 1.0, 0.01).is_err());
    }

    #[test]
    fn csv_flags_right_limits() {
        let model = build_power_law_model(4, 4).unwrap();
        let schedule = ImpulseSchedule::new(
            ImpulseSemantics::Absolute,
            vec![Impulse { strain: Strain::Two, k: 4, tau: 0.5, c: 0.05, u_bar: 0.1 }],
        );
        let traj = integrate(&[case1_state()], &[4], &case1_params(ThetaMode::ClosedForm), &schedule, &model, 1.0, 0.25)
            .unwrap();
        let csv = traj.to_csv();
        let flagged: Vec<&str> = csv.lines().filter(|l| l.contains(",1,2,")).collect();
        assert_eq!(flagged.len(), 1);
        assert!(flagged[0].starts_with("0.5,4,"));
        assert_eq!(csv.lines().count(), 1 + traj.len());
    }

    proptest! {
        #[test]
        fn rhs_conserves_mass(
            a in 0.0f64..1.0, b in 0.0f64..1.0, c in 0.0f64..1.0,
            k in 1u32..50, t1 in 0.0f64..2.0, t2 in 0.0f64..2.0,
        ) {
            let total = a + b + c + 1.0;
            let st = DegreeClassState { s: a / total, i1: b / total, i2: c / total, r: 1.0 / total };
            let d = flow_rhs(&st, k, &case1_params(ThetaMode::ClosedForm), t1, t2);
            prop_assert!(d.iter().sum::<f64>().abs() < 1e-15);
        }

        #[test]
        fn no_impulse_recovered_is_monotone(i1 in 0.0f64..0.5, i2 in 0.0f64..0.4) {
            let model = build_power_law_model(3, 3).unwrap();
            let st = DegreeClassState { s: 1.0 - i1 - i2, i1, i2, r: 0.0 };
            let p = EpidemicParams { delta1: 0.4, delta2: 0.3, sigma1: 0.05, sigma2: 0.08, ..case1_params(ThetaMode::Summation) };
            let traj = integrate(&[st], &[3], &p, &ImpulseSchedule::empty(), &model, 10.0, 0.05).unwrap();
            for w in traj.states.windows(2) {
                prop_assert!(w[1][0].r >= w[0][0].r);
            }
        }
    }
}
