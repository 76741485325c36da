//! Maximum-principle machinery for the impulsive problem.
//!
//! Sign conventions: the flow Hamiltonian is `H⁰ = −L + λ·ẋ` with running
//! cost `L = f¹ + f² − g`, the costate obeys `λ̇ = −∂H⁰/∂x` backwards from
//! `λ(T) = 0`, and therefore `λ(t) = −∂J/∂x(t)`. With that convention the
//! Hamiltonian jump `H⁰(τ⁺) − H⁰(τ⁻)` across an impulse equals `dJ/dτ`, and
//! `∂H^c/∂c = −dJ/dc`.

mod optimize;
mod report;

pub use optimize::{optimize_intensities, optimize_times, OptimizerOutcome, OptimizerSettings};
pub use report::{
    build_report, Classification, EventReport, NoJumpResidual, OptimalityReport,
};

use serde::{Deserialize, Serialize};

use crate::cost::{CostModel, TreatmentCostAt};
use crate::dynamics::{
    flow_rhs_array, jump_slope, removed_fraction, system_rhs, DegreeClassState, EpidemicParams, Field,
    ImpulseSemantics, JumpRecord, NodeKind, Strain, Trajectory,
};
use crate::error::{Error, Result};
use crate::netmodel::{theta_weights, NetworkModel};

/// Costate of one degree class.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AdjointState {
    pub lam_s: f64,
    pub lam_i1: f64,
    pub lam_i2: f64,
    pub lam_r: f64,
}

impl AdjointState {
    pub fn lam_i(&self, strain: Strain) -> f64 {
        match strain {
            Strain::One => self.lam_i1,
            Strain::Two => self.lam_i2,
        }
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.lam_s, self.lam_i1, self.lam_i2, self.lam_r]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Self {
            lam_s: a[0],
            lam_i1: a[1],
            lam_i2: a[2],
            lam_r: a[3],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }
}

/// Which dependence of Θ on the infected fractions the adjoint keeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Coupling {
    /// Only a class's own contribution to Θ.
    SelfOnly,
    /// Every class's contribution; exact gradient of `J` in summation mode.
    #[default]
    Full,
}

/// How the costate crosses an impulse.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AdjointJump {
    /// `λ(τ⁺) = λ(τ⁻)`.
    Continuous,
    /// `λ(τ⁻) = Dφᵀ λ(τ⁺) − ∇h`, with `φ` the jump map and `h` the treatment
    /// cost; reduces to continuity when the jump is a pure shift and `h`
    /// does not depend on the state.
    #[default]
    CostConsistent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdjointOptions {
    #[serde(default)]
    pub coupling: Coupling,
    #[serde(default)]
    pub jump: AdjointJump,
}

/// Flow Hamiltonian of one class.
pub fn hamiltonian_h0(
    state: &DegreeClassState,
    adjoint: &AdjointState,
    k: u32,
    params: &EpidemicParams,
    costs: &CostModel,
    theta1: f64,
    theta2: f64,
) -> f64 {
    let kf = k as f64;
    let x = state.to_array();
    let lam = adjoint.to_array();
    let running = costs.a1 * kf * x[1] + costs.a2 * kf * x[2] - costs.g_coeff * x[3];
    let rhs = flow_rhs_array(x, kf, params, [theta1, theta2]);
    lam.iter().zip(&rhs).map(|(l, f)| l * f).sum::<f64>() - running
}

/// Costate derivative of one class, `−∂H⁰/∂x`.
///
/// In summation mode Θ grows with the class's own infected fraction, which
/// adds the `δ_{ik} S_k I_k ∂Θ_i/∂I_k` terms; the closed-form field is state
/// independent and they vanish.
#[allow(clippy::too_many_arguments)]
pub fn adjoint_rhs(
    state: &DegreeClassState,
    adjoint: &AdjointState,
    k: u32,
    params: &EpidemicParams,
    costs: &CostModel,
    model: &NetworkModel,
    theta1: f64,
    theta2: f64,
) -> [f64; 4] {
    let dtheta = match params.theta_mode {
        crate::dynamics::ThetaMode::ClosedForm => [0.0; 2],
        crate::dynamics::ThetaMode::Summation => {
            let j = model.index_of(k);
            let w = |delta| j.map_or(0.0, |j| theta_weights(model, delta, params.infectivity)[j]);
            [w(params.delta1), w(params.delta2)]
        }
    };
    adjoint_rhs_with(
        state.to_array(),
        adjoint.to_array(),
        k as f64,
        params,
        costs,
        [theta1, theta2],
        dtheta,
    )
}

fn adjoint_rhs_with(
    x: [f64; 4],
    lam: [f64; 4],
    k: f64,
    p: &EpidemicParams,
    c: &CostModel,
    theta: [f64; 2],
    dtheta: [f64; 2],
) -> [f64; 4] {
    let [s, i1, i2, _] = x;
    let [ls, li1, li2, lr] = lam;
    let (d1, d2) = (p.delta1 * k, p.delta2 * k);
    let (s1, s2) = (p.sigma1 * k, p.sigma2 * k);
    [
        (ls - li1) * d1 * i1 * theta[0] + (ls - li2) * d2 * i2 * theta[1],
        c.a1 * k + (ls - li1) * (d1 * s * theta[0] + d1 * s * i1 * dtheta[0]) + (li1 - lr) * s1,
        c.a2 * k + (ls - li2) * (d2 * s * theta[1] + d2 * s * i2 * dtheta[1]) + (li2 - lr) * s2,
        -c.g_coeff,
    ]
}

/// Costate along a forward trajectory, on the same grid.
#[derive(Debug, Clone, PartialEq)]
pub struct AdjointTrajectory {
    /// `nodes[node][class]`.
    pub nodes: Vec<Vec<AdjointState>>,
    /// Costate of the affected class just before and just after each
    /// recorded jump, aligned with `Trajectory::jumps`.
    pub jumps: Vec<(AdjointState, AdjointState)>,
}

impl AdjointTrajectory {
    pub fn initial(&self) -> &[AdjointState] {
        self.nodes.first().map_or(&[], |v| v.as_slice())
    }
}

struct AdjointSystem<'a> {
    kf: Vec<f64>,
    params: &'a EpidemicParams,
    costs: &'a CostModel,
    field: Field,
    coupling: Coupling,
}

impl AdjointSystem<'_> {
    fn rhs(&self, x: &[[f64; 4]], lam: &[[f64; 4]], out: &mut [[f64; 4]]) {
        let theta = self.field.thetas(x);
        for (j, o) in out.iter_mut().enumerate() {
            let dtheta = [self.field.weight(Strain::One, j), self.field.weight(Strain::Two, j)];
            *o = adjoint_rhs_with(x[j], lam[j], self.kf[j], self.params, self.costs, theta, dtheta);
        }
        if self.coupling == Coupling::Full && self.field.is_state_dependent() {
            let pressure = |j: usize, strain: Strain| {
                let i = 1 + strain.index();
                (lam[j][0] - lam[j][i]) * self.params.delta(strain) * self.kf[j] * x[j][0] * x[j][i]
            };
            for strain in Strain::BOTH {
                let total: f64 = (0..x.len()).map(|j| pressure(j, strain)).sum();
                for (j, o) in out.iter_mut().enumerate() {
                    let others = total - pressure(j, strain);
                    o[1 + strain.index()] += self.field.weight(strain, j) * others;
                }
            }
        }
    }
}

/// Costate just before a jump from the costate just after it.
pub fn adjoint_before_jump(
    after: &AdjointState,
    rec: &JumpRecord,
    semantics: ImpulseSemantics,
    costs: &CostModel,
    mode: AdjointJump,
) -> AdjointState {
    if mode == AdjointJump::Continuous {
        return *after;
    }
    let infected = rec.pre.infected(rec.strain);
    let slope = jump_slope(infected, rec.nominal, semantics);
    let bkc = costs.b(rec.strain) * rec.k as f64 * rec.nominal;
    let dh = match costs.treatment_at {
        TreatmentCostAt::PostJump => bkc * slope,
        TreatmentCostAt::PreJump => bkc,
    };
    let mut before = *after;
    let lam_i = slope * after.lam_i(rec.strain) + (1.0 - slope) * after.lam_r - dh;
    match rec.strain {
        Strain::One => before.lam_i1 = lam_i,
        Strain::Two => before.lam_i2 = lam_i,
    }
    before
}

/// Integrates the costate backwards from `λ(T) = 0`.
///
/// Each grid interval is one RK4 step. Forward states inside an interval come
/// from cubic Hermite interpolation of the stored node values and their flow
/// derivatives, which keeps the backward sweep fourth-order accurate.
pub fn integrate_adjoint(
    traj: &Trajectory,
    params: &EpidemicParams,
    costs: &CostModel,
    model: &NetworkModel,
    options: AdjointOptions,
) -> Result<AdjointTrajectory> {
    let n_nodes = traj.len();
    if n_nodes == 0 || traj.states.iter().any(|row| row.len() != traj.classes.len()) {
        return Err(Error::Consistency("trajectory grid is empty or ragged".into()));
    }
    let sys = AdjointSystem {
        kf: traj.classes.iter().map(|&k| k as f64).collect(),
        params,
        costs,
        field: Field::new(model, params, &traj.classes)?,
        coupling: options.coupling,
    };
    let nc = traj.classes.len();
    let xs: Vec<Vec<[f64; 4]>> = traj
        .states
        .iter()
        .map(|row| row.iter().map(|s| s.to_array()).collect())
        .collect();
    let mut dx = vec![vec![[0.0; 4]; nc]; n_nodes];
    for (x, d) in xs.iter().zip(dx.iter_mut()) {
        system_rhs(x, &sys.kf, params, &sys.field, d);
    }

    let mut nodes = vec![vec![[0.0f64; 4]; nc]; n_nodes];
    let mut jump_adj = vec![(AdjointState::default(), AdjointState::default()); traj.jumps.len()];
    let mut mid = vec![[0.0; 4]; nc];
    let (mut k1, mut k2, mut k3, mut k4) = (
        vec![[0.0; 4]; nc],
        vec![[0.0; 4]; nc],
        vec![[0.0; 4]; nc],
        vec![[0.0; 4]; nc],
    );
    let mut tmp = vec![[0.0; 4]; nc];

    for n in (1..n_nodes).rev() {
        let lam = nodes[n].clone();
        if traj.kinds[n] == NodeKind::PostJump && traj.kinds[n - 1] == NodeKind::PreJump {
            let mut cur = lam;
            for (r, rec) in traj.jumps.iter().enumerate().rev().filter(|(_, r)| r.node == n) {
                let after = AdjointState::from_array(cur[rec.class]);
                let before = adjoint_before_jump(&after, rec, traj.semantics, costs, options.jump);
                cur[rec.class] = before.to_array();
                jump_adj[r] = (before, after);
            }
            nodes[n - 1] = cur;
            continue;
        }
        let h = traj.times[n - 1] - traj.times[n];
        if h == 0.0 {
            nodes[n - 1] = lam;
            continue;
        }
        // Hermite midpoint on [t_{n-1}, t_n]
        let span = -h;
        for j in 0..nc {
            for c in 0..4 {
                mid[j][c] = 0.5 * (xs[n - 1][j][c] + xs[n][j][c])
                    + 0.125 * span * (dx[n - 1][j][c] - dx[n][j][c]);
            }
        }
        let shift = |tmp: &mut Vec<[f64; 4]>, d: &[[f64; 4]], a: f64| {
            for ((t, b), dd) in tmp.iter_mut().zip(&lam).zip(d) {
                for c in 0..4 {
                    t[c] = b[c] + a * dd[c];
                }
            }
        };
        sys.rhs(&xs[n], &lam, &mut k1);
        shift(&mut tmp, &k1, 0.5 * h);
        sys.rhs(&mid, &tmp, &mut k2);
        shift(&mut tmp, &k2, 0.5 * h);
        sys.rhs(&mid, &tmp, &mut k3);
        shift(&mut tmp, &k3, h);
        sys.rhs(&xs[n - 1], &tmp, &mut k4);
        for j in 0..nc {
            for c in 0..4 {
                nodes[n - 1][j][c] =
                    lam[j][c] + h / 6.0 * (k1[j][c] + 2.0 * k2[j][c] + 2.0 * k3[j][c] + k4[j][c]);
            }
        }
    }

    Ok(AdjointTrajectory {
        nodes: nodes
            .into_iter()
            .map(|row| row.into_iter().map(AdjointState::from_array).collect())
            .collect(),
        jumps: jump_adj,
    })
}

/// Impulse Hamiltonian `H^c = −h + (λ_R − λ_{I_i}) ν` for an impulse of
/// intensity `c` applied to `pre_state`, priced with the costate after the
/// jump.
#[allow(clippy::too_many_arguments)]
pub fn impulse_hamiltonian(
    adjoint_post: &AdjointState,
    pre_state: &DegreeClassState,
    strain: Strain,
    c: f64,
    k: u32,
    costs: &CostModel,
    semantics: ImpulseSemantics,
) -> Result<f64> {
    if !(c >= 0.0) {
        return Err(Error::Domain(format!("impulse intensity must be nonnegative, got {c}")));
    }
    let infected = pre_state.infected(strain);
    let nu = removed_fraction(infected, c, semantics);
    let at = match costs.treatment_at {
        TreatmentCostAt::PostJump => infected - nu,
        TreatmentCostAt::PreJump => infected,
    };
    let h = costs.b(strain) * k as f64 * c * at;
    Ok(-h + (adjoint_post.lam_r - adjoint_post.lam_i(strain)) * nu)
}

/// `∂H^c/∂c` at intensity `c`, holding the pre-jump state and post-jump
/// costate fixed. At the absolute-semantics clamp `c = I` this is the
/// derivative from the right.
pub fn impulse_hamiltonian_slope(
    adjoint_post: &AdjointState,
    pre_state: &DegreeClassState,
    strain: Strain,
    c: f64,
    k: u32,
    costs: &CostModel,
    semantics: ImpulseSemantics,
) -> f64 {
    impulse_hamiltonian_slopes(adjoint_post, pre_state, strain, c, k, costs, semantics).1
}

/// Left and right derivatives of `H^c` in `c`; they differ only at the
/// absolute-semantics clamp.
pub fn impulse_hamiltonian_slopes(
    adjoint_post: &AdjointState,
    pre_state: &DegreeClassState,
    strain: Strain,
    c: f64,
    k: u32,
    costs: &CostModel,
    semantics: ImpulseSemantics,
) -> (f64, f64) {
    let infected = pre_state.infected(strain).max(0.0);
    let nu = removed_fraction(infected, c, semantics);
    let bk = costs.b(strain) * k as f64;
    let slope = |dnu: f64| {
        let dh = match costs.treatment_at {
            TreatmentCostAt::PostJump => bk * ((infected - nu) - c * dnu),
            TreatmentCostAt::PreJump => bk * infected,
        };
        -dh + (adjoint_post.lam_r - adjoint_post.lam_i(strain)) * dnu
    };
    match semantics {
        ImpulseSemantics::Absolute => {
            let left = if c <= infected { 1.0 } else { 0.0 };
            let right = if c < infected { 1.0 } else { 0.0 };
            (slope(left), slope(right))
        }
        ImpulseSemantics::Proportional => {
            let g = slope(infected);
            (g, g)
        }
    }
}

/// Worst violation of the variational inequality for the intensity choice
/// `c` over admissible `ν ∈ [0, u_bar]`; zero when `c` is a first-order
/// maximizer of `H^c` on the interval.
#[allow(clippy::too_many_arguments)]
pub fn check_variational_condition(
    adjoint_post: &AdjointState,
    pre_state: &DegreeClassState,
    strain: Strain,
    c: f64,
    u_bar: f64,
    k: u32,
    costs: &CostModel,
    semantics: ImpulseSemantics,
) -> Result<f64> {
    if !(0.0..=u_bar).contains(&c) {
        return Err(Error::Domain(format!("intensity {c} outside [0, {u_bar}]")));
    }
    let (left, right) = impulse_hamiltonian_slopes(adjoint_post, pre_state, strain, c, k, costs, semantics);
    Ok(variational_violation(left, right, c, u_bar))
}

/// Gain available by moving up (`right > 0`) or down (`left < 0`) from `c`.
pub(crate) fn variational_violation(left: f64, right: f64, c: f64, u_bar: f64) -> f64 {
    right.max(0.0) * (u_bar - c) + (-left).max(0.0) * c
}

/// State, costate and field on one side of a jump.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpSide {
    pub state: DegreeClassState,
    pub adjoint: AdjointState,
    pub theta: [f64; 2],
}

/// `H⁰(τ⁺) − H⁰(τ⁻)` for one class.
pub fn h0_jump(pre: &JumpSide, post: &JumpSide, k: u32, params: &EpidemicParams, costs: &CostModel) -> f64 {
    let h = |side: &JumpSide| {
        hamiltonian_h0(&side.state, &side.adjoint, k, params, costs, side.theta[0], side.theta[1])
    };
    h(post) - h(pre)
}

/// Closed-form interior-time quantity Δ_i for one impulse, as a sum of its
/// three printed lines; `c` is the removed fraction.
#[allow(clippy::too_many_arguments)]
pub fn delta_closed_form(
    pre: &JumpSide,
    post: &JumpSide,
    strain: Strain,
    c: f64,
    k: u32,
    params: &EpidemicParams,
    costs: &CostModel,
    model: &NetworkModel,
) -> f64 {
    let kf = k as f64;
    let i = strain.index();
    let a = costs.a(strain) * kf;
    let g = costs.g_coeff;
    let delta_k = params.delta(strain) * kf;
    let sigma_k = params.sigma(strain) * kf;
    let p_over_mean = model.pk(k) / model.mean_degree();
    let (i_pre, i_post) = (pre.state.infected(strain), post.state.infected(strain));

    let cost_terms = a * i_pre - a * i_post - g * pre.state.r + g * post.state.r + c * (g + a);
    let recovery = 2.0 * sigma_k * c * (post.adjoint.lam_r - post.adjoint.lam_i(strain));
    let infection = delta_k
        * pre.state.s
        * c
        * (pre.adjoint.lam_s - pre.adjoint.lam_i(strain))
        * (2.0 * post.theta[i] + delta_k * p_over_mean * (1.0 + i_pre - c));
    cost_terms + recovery + infection
}
