//! Degree-class statistics of a scale-free network.
//!
//! A [`NetworkModel`] stores a truncated degree distribution `P(k)` on an
//! integer support `[k_min, k_max]` together with its mean degree. The
//! infection field felt by a susceptible node is available both as the
//! neighbour summation over infected degree classes ([`theta_summation`]) and
//! as the closed form in the effective spreading rate
//! ([`theta_closed_form`]).
//!
//! The Barabási–Albert generator in [`ba`] produces empirical degree
//! sequences that can be compared against the `k^-3` model.

pub mod ba;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use ba::{fit_tail_exponent, generate_ba_degree_sequence, DegreeSequence};

/// How the per-degree infectivity enters the neighbour sum for Θ.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Infectivity {
    /// Infectivity of the neighbour grows with its degree: `δ_i · k'`.
    #[default]
    DegreeProportional,
    /// Constant infectivity `δ_i` for every neighbour class.
    Constant,
}

/// Truncated degree distribution with cached mean degree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkModel {
    /// Links attached by each new node in the growth process.
    pub m: u32,
    pub k_min: u32,
    pub k_max: u32,
    /// Probability mass of degree `k_min + i` at index `i`.
    pk: Vec<f64>,
    mean_degree: f64,
    /// Exponent parameter of `P(k) = C^-1 k^(-2-γ)`; the BA model has γ = 1.
    pub gamma: f64,
}

impl NetworkModel {
    /// Builds a model from nonnegative (not necessarily normalized) weights on
    /// `[k_min, k_min + weights.len() - 1]`.
    pub fn from_weights(m: u32, k_min: u32, weights: &[f64], gamma: f64) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidParameter("m must be at least 1".into()));
        }
        if k_min == 0 {
            return Err(Error::InvalidSupport("degrees must be positive".into()));
        }
        if weights.is_empty() {
            return Err(Error::InvalidSupport("empty degree support".into()));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidSupport(
                "degree weights must be finite and nonnegative".into(),
            ));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::InvalidSupport("degree weights sum to zero".into()));
        }
        let pk: Vec<f64> = weights.iter().map(|w| w / total).collect();
        let mean_degree = pk
            .iter()
            .enumerate()
            .map(|(i, p)| (k_min as f64 + i as f64) * p)
            .sum();
        Ok(Self {
            m,
            k_min,
            k_max: k_min + weights.len() as u32 - 1,
            pk,
            mean_degree,
            gamma,
        })
    }

    /// Degrees in the support, ascending.
    pub fn degrees(&self) -> impl DoubleEndedIterator<Item = u32> + '_ {
        self.k_min..=self.k_max
    }

    pub fn support_len(&self) -> usize {
        self.pk.len()
    }

    pub fn contains(&self, k: u32) -> bool {
        (self.k_min..=self.k_max).contains(&k)
    }

    /// Position of degree `k` in the support.
    pub fn index_of(&self, k: u32) -> Option<usize> {
        self.contains(k).then(|| (k - self.k_min) as usize)
    }

    /// Normalized mass `P(k)`; zero outside the support.
    pub fn pk(&self, k: u32) -> f64 {
        self.index_of(k).map_or(0.0, |i| self.pk[i])
    }

    pub fn masses(&self) -> &[f64] {
        &self.pk
    }

    /// `⟨k⟩ = Σ k P(k)` over the truncated support.
    pub fn mean_degree(&self) -> f64 {
        self.mean_degree
    }

    /// Mean degree of the untruncated growth model, `2m`.
    pub fn ideal_mean_degree(&self) -> f64 {
        2.0 * self.m as f64
    }
}

/// Unnormalized continuum connectivity `2 m² / k³` of the BA network.
pub fn ideal_power_law_mass(m: u32, k: u32) -> f64 {
    let m = m as f64;
    let k = k as f64;
    2.0 * m * m / (k * k * k)
}

/// Power-law model `P(k) ∝ 2m² k⁻³` on `[m, k_max]`, renormalized over the
/// truncated support.
pub fn build_power_law_model(m: u32, k_max: u32) -> Result<NetworkModel> {
    if m == 0 {
        return Err(Error::InvalidParameter("m must be at least 1".into()));
    }
    if k_max < m {
        return Err(Error::InvalidSupport(format!(
            "k_max = {k_max} lies below k_min = m = {m}"
        )));
    }
    let weights: Vec<f64> = (m..=k_max).map(|k| ideal_power_law_mass(m, k)).collect();
    NetworkModel::from_weights(m, m, &weights, 1.0)
}

/// `P(k') k' / ⟨k⟩`: probability that an edge end leads to a node of degree
/// `k'` in an uncorrelated network.
pub fn conditional_degree_prob(model: &NetworkModel, k_prime: u32) -> Result<f64> {
    let i = model.index_of(k_prime).ok_or_else(|| {
        Error::Domain(format!(
            "degree {k_prime} outside support [{}, {}]",
            model.k_min, model.k_max
        ))
    })?;
    Ok(k_prime as f64 * model.pk[i] / model.mean_degree)
}

/// Coefficients `w_{k'}` such that `Θ = Σ_{k'} w_{k'} I_{k'}`.
///
/// Θ is linear in the infected fractions, so the integrator and the adjoint
/// both work off these weights; `w_{k'}` is also `∂Θ/∂I_{k'}`.
pub fn theta_weights(model: &NetworkModel, delta_coeff: f64, infectivity: Infectivity) -> Vec<f64> {
    model
        .degrees()
        .zip(model.masses())
        .map(|(k, p)| {
            let kf = k as f64;
            let cond = kf * p / model.mean_degree;
            let infect = match infectivity {
                Infectivity::DegreeProportional => delta_coeff * kf,
                Infectivity::Constant => delta_coeff,
            };
            infect * cond / kf
        })
        .collect()
}

/// Neighbour-sum field `Σ_{k'} δ_{ik'} P(k'|k) I_{k'} / k'`.
///
/// `infected[j]` is the infected fraction of degree `k_min + j`.
pub fn theta_summation(
    model: &NetworkModel,
    infected: &[f64],
    delta_coeff: f64,
    infectivity: Infectivity,
) -> Result<f64> {
    if infected.len() != model.support_len() {
        return Err(Error::Domain(format!(
            "infected map has {} entries, support has {}",
            infected.len(),
            model.support_len()
        )));
    }
    if let Some((j, x)) = infected
        .iter()
        .enumerate()
        .find(|(_, x)| !(0.0..=1.0).contains(*x))
    {
        return Err(Error::Domain(format!(
            "infected fraction {x} at degree {} outside [0, 1]",
            model.k_min + j as u32
        )));
    }
    Ok(theta_weights(model, delta_coeff, infectivity)
        .iter()
        .zip(infected)
        .map(|(w, x)| w * x)
        .sum())
}

/// Closed-form field `e^{-1/(mλ)} / (mλ)` for effective spreading rate `λ`.
pub fn theta_closed_form(lambda_eff: f64, m: u32) -> Result<f64> {
    if !(lambda_eff > 0.0) || !lambda_eff.is_finite() {
        return Err(Error::Domain(format!(
            "effective spreading rate must be positive, got {lambda_eff}"
        )));
    }
    if m == 0 {
        return Err(Error::InvalidParameter("m must be at least 1".into()));
    }
    let x = m as f64 * lambda_eff;
    Ok((-1.0 / x).exp() / x)
}
