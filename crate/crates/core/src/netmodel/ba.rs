//! Barabási–Albert growth with preferential attachment.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Final degree of every node of a generated graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DegreeSequence {
    pub degrees: Vec<u32>,
}

impl DegreeSequence {
    pub fn n_nodes(&self) -> usize {
        self.degrees.len()
    }

    pub fn degree_sum(&self) -> u64 {
        self.degrees.iter().map(|&d| d as u64).sum()
    }

    pub fn max_degree(&self) -> u32 {
        self.degrees.iter().copied().max().unwrap_or(0)
    }

    /// Node count per degree, indexed by degree.
    pub fn histogram(&self) -> Vec<u64> {
        let mut counts = vec![0u64; self.max_degree() as usize + 1];
        for &d in &self.degrees {
            counts[d as usize] += 1;
        }
        counts
    }

    /// Single-column text export, one degree per line.
    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity(self.degrees.len() * 3);
        for d in &self.degrees {
            out.push_str(&d.to_string());
            out.push('\n');
        }
        out
    }
}

/// Grows a graph from `m0` disconnected seed nodes to `n_nodes`, attaching
/// each new node to `m` distinct existing nodes with probability
/// proportional to their degree.
///
/// While every existing node still has degree zero (the first growth step)
/// the targets are drawn uniformly. Sampling uses the repeated-endpoint list,
/// so a node of degree `d` appears `d` times; duplicate targets within one
/// step are rejected and redrawn.
pub fn generate_ba_degree_sequence(
    n_nodes: usize,
    m0: usize,
    m: usize,
    seed: u64,
) -> Result<DegreeSequence> {
    if m == 0 || m0 == 0 {
        return Err(Error::InvalidParameter("m and m0 must be positive".into()));
    }
    if m > m0 {
        return Err(Error::InvalidParameter(format!(
            "m = {m} exceeds the seed size m0 = {m0}"
        )));
    }
    if n_nodes < m0 {
        return Err(Error::InvalidParameter(format!(
            "n_nodes = {n_nodes} is smaller than m0 = {m0}"
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut degrees = vec![0u32; n_nodes];
    let mut endpoints: Vec<u32> = Vec::with_capacity(2 * m * (n_nodes - m0));
    let mut targets: Vec<u32> = Vec::with_capacity(m);

    for new in m0..n_nodes {
        targets.clear();
        while targets.len() < m {
            let t = if endpoints.is_empty() {
                rng.gen_range(0..new) as u32
            } else {
                endpoints[rng.gen_range(0..endpoints.len())]
            };
            if !targets.contains(&t) {
                targets.push(t);
            }
        }
        for &t in &targets {
            degrees[t as usize] += 1;
            endpoints.push(t);
            endpoints.push(new as u32);
        }
        degrees[new] = m as u32;
    }

    Ok(DegreeSequence { degrees })
}

/// Least-squares slope of the log-binned degree density for `k ≥ k_min`.
///
/// Bins are geometric with ratio `2^(1/4)` over integer degrees; the density
/// of a bin is its node count divided by the number of integers it covers.
/// Bins holding fewer than `min_count` nodes are dropped so the sparse
/// finite-size cutoff does not dominate the fit.
pub fn fit_tail_exponent(seq: &DegreeSequence, k_min: u32, min_count: u64) -> Result<f64> {
    if k_min == 0 {
        return Err(Error::InvalidParameter("k_min must be positive".into()));
    }
    let hist = seq.histogram();
    let ratio = 2f64.powf(0.25);
    let mut points = Vec::new();
    let mut lo = k_min as f64;
    let k_top = hist.len() as f64;
    while lo < k_top {
        let hi = lo * ratio;
        let first = lo.ceil() as usize;
        let last = (hi.ceil() as usize).saturating_sub(1).max(first);
        let width = (last - first + 1) as f64;
        let count: u64 = (first..=last).filter_map(|k| hist.get(k)).sum();
        if count >= min_count {
            let centre = ((first as f64) * (last as f64)).sqrt();
            points.push((centre.ln(), (count as f64 / width).ln()));
        }
        lo = (last + 1) as f64;
    }
    if points.len() < 3 {
        return Err(Error::InvalidParameter(
            "too few populated degree bins for a tail fit".into(),
        ));
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Ok(sxy / sxx)
}
