//! Browser bindings: a preset run with adjustable treatment, the closed-form
//! infection field, and a generated degree histogram. Every export returns a
//! JSON string; the plain functions behind them are usable natively.

use impulse_sir::dynamics::NodeKind;
use impulse_sir::netmodel::{fit_tail_exponent, generate_ba_degree_sequence, theta_closed_form};
use impulse_sir::scenario::preset;
use impulse_sir::{cost, Strain};
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

/// Upper bound on regular grid points sent to the page; jump nodes are
/// always kept.
const MAX_POINTS: usize = 1500;

/// Runs a bundled preset with the threshold rule's treatment intensities
/// replaced by `c1`, `c2`.
pub fn preset_run(name: &str, c1: f64, c2: f64) -> impulse_sir::Result<Value> {
    let mut cfg = preset(name)?;
    cfg.schedule.intensity = [c1, c2];
    cfg.schedule.cap = [c1.max(cfg.schedule.cap[0]), c2.max(cfg.schedule.cap[1])];
    let problem = cfg.to_problem()?;
    let schedule = cfg.resolve_schedule(&problem)?;
    let traj = problem.simulate(&schedule)?;
    let series = cost::cumulative_cost_series(&traj, &problem.costs);

    let stride = traj.len().div_ceil(MAX_POINTS).max(1);
    let keep: Vec<usize> = (0..traj.len())
        .filter(|&n| traj.kinds[n] != NodeKind::Regular || n % stride == 0 || n + 1 == traj.len())
        .collect();
    let pick = |f: &dyn Fn(usize) -> f64| keep.iter().map(|&n| f(n)).collect::<Vec<f64>>();
    // presets simulate a single class
    let k = traj.classes[0];
    Ok(json!({
        "k": k,
        "t": pick(&|n| traj.times[n]),
        "s": pick(&|n| traj.states[n][0].s),
        "i1": pick(&|n| traj.states[n][0].i1),
        "i2": pick(&|n| traj.states[n][0].i2),
        "r": pick(&|n| traj.states[n][0].r),
        "cost": pick(&|n| series[n].1),
        "j": series.last().map_or(0.0, |s| s.1),
        "p1": schedule.count(Strain::One, k),
        "p2": schedule.count(Strain::Two, k),
    }))
}

/// Closed-form field at `n` log-spaced effective rates in `[lo, hi]`.
pub fn theta_values(m: u32, lo: f64, hi: f64, n: usize) -> impulse_sir::Result<Value> {
    let n = n.max(2);
    let (a, b) = (lo.ln(), hi.ln());
    let mut lambda = Vec::with_capacity(n);
    let mut theta = Vec::with_capacity(n);
    for i in 0..n {
        let l = (a + (b - a) * i as f64 / (n - 1) as f64).exp();
        lambda.push(l);
        theta.push(theta_closed_form(l, m)?);
    }
    Ok(json!({ "lambda": lambda, "theta": theta }))
}

/// Degree histogram of a generated graph with `m0 = m` and its fitted tail
/// slope.
pub fn degree_histogram(n_nodes: usize, m: usize, seed: u64) -> impulse_sir::Result<Value> {
    let seq = generate_ba_degree_sequence(n_nodes, m, m, seed)?;
    let hist = seq.histogram();
    let (degrees, counts): (Vec<usize>, Vec<u64>) =
        hist.iter().enumerate().filter(|(_, &c)| c > 0).map(|(k, &c)| (k, c)).unzip();
    let slope = fit_tail_exponent(&seq, m as u32, 5).ok();
    Ok(json!({ "degree": degrees, "count": counts, "slope": slope }))
}

fn to_js(v: impulse_sir::Result<Value>) -> Result<String, JsValue> {
    v.map(|v| v.to_string()).map_err(|e| JsValue::from_str(&e.to_string()))
}

#[wasm_bindgen]
pub fn simulate_preset(name: &str, c1: f64, c2: f64) -> Result<String, JsValue> {
    to_js(preset_run(name, c1, c2))
}

#[wasm_bindgen]
pub fn theta_curve(m: u32, lo: f64, hi: f64, n: usize) -> Result<String, JsValue> {
    to_js(theta_values(m, lo, hi, n))
}

#[wasm_bindgen]
pub fn ba_histogram(n_nodes: usize, m: usize, seed: u32) -> Result<String, JsValue> {
    to_js(degree_histogram(n_nodes, m, u64::from(seed)))
}
