use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::distributions::{dirichlet_sample_into, flat_dirichlet_into, DirichletParams, RngStream};
use crate::error::{Error, Result};
use crate::risk::RiskSpec;

use super::argmax_first;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyKind {
    /// Multinomial Thompson sampling with a Dirichlet posterior per arm.
    Mts,
    /// Non-parametric Thompson sampling over the reward history.
    Npts,
    /// Always pulls an optimal arm.
    Oracle,
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Mts => "mts",
            Self::Npts => "npts",
            Self::Oracle => "oracle",
        })
    }
}

impl FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "mts" => Ok(Self::Mts),
            "npts" => Ok(Self::Npts),
            "oracle" => Ok(Self::Oracle),
            other => Err(Error::config(
                "policy",
                format!("unknown policy `{other}`, expected mts or npts"),
            )),
        }
    }
}

/// Dirichlet posterior state over a shared alphabet.
#[derive(Debug, Clone)]
pub struct MtsState {
    support: Vec<f64>,
    alpha: Vec<DirichletParams>,
    pulls: Vec<u64>,
    sample: Vec<f64>,
    indices: Vec<f64>,
}

impl MtsState {
    pub fn new(support: &[f64], arms: usize) -> Self {
        Self {
            support: support.to_vec(),
            alpha: vec![DirichletParams::uniform(support.len()); arms],
            pulls: vec![0; arms],
            sample: Vec::with_capacity(support.len()),
            indices: vec![0.0; arms],
        }
    }

    pub fn arms(&self) -> usize {
        self.alpha.len()
    }

    pub fn support(&self) -> &[f64] {
        &self.support
    }

    pub fn alpha(&self, arm: usize) -> &DirichletParams {
        &self.alpha[arm]
    }

    pub fn pulls(&self) -> &[u64] {
        &self.pulls
    }

    /// Per-symbol observation counts `α_k − 1`.
    pub fn symbol_counts(&self, arm: usize) -> Vec<u64> {
        self.alpha[arm].alpha().iter().map(|a| a - 1).collect()
    }

    /// Round `t ≥ 1`: arm `t − 1` during the first `K` rounds, then the
    /// argmax of the risks of one posterior draw per arm.
    pub fn select(&mut self, t: usize, spec: &RiskSpec, rng: &mut RngStream) -> usize {
        let k = self.arms();
        if (1..=k).contains(&t) {
            return t - 1;
        }
        for arm in 0..k {
            dirichlet_sample_into(self.alpha[arm].alpha(), rng, &mut self.sample);
            self.indices[arm] = spec.eval_weighted(&self.support, &self.sample);
        }
        argmax_first(&self.indices)
    }

    pub fn update(&mut self, arm: usize, reward: f64) -> Result<()> {
        let j = self
            .support
            .binary_search_by(|s| s.total_cmp(&reward))
            .map_err(|_| Error::RewardNotInSupport(reward))?;
        self.alpha[arm].increment(j);
        self.pulls[arm] += 1;
        Ok(())
    }
}

/// Reward histories, each starting from the optimistic value 1.
#[derive(Debug, Clone)]
pub struct NptsState {
    history: Vec<Vec<f64>>,
    sorted: Vec<Vec<f64>>,
    weights: Vec<f64>,
    indices: Vec<f64>,
}

impl NptsState {
    pub fn new(arms: usize) -> Self {
        Self {
            history: vec![vec![1.0]; arms],
            sorted: vec![vec![1.0]; arms],
            weights: Vec::new(),
            indices: vec![0.0; arms],
        }
    }

    pub fn arms(&self) -> usize {
        self.history.len()
    }

    /// Rewards of `arm` in arrival order, seed value first.
    pub fn history(&self, arm: usize) -> &[f64] {
        &self.history[arm]
    }

    pub fn n(&self, arm: usize) -> usize {
        self.history[arm].len()
    }

    /// Argmax over arms of `ρ(Σ_i L_i δ_{S_k[i]})` with `L ~ Dir(1, …, 1)`.
    pub fn select(&mut self, spec: &RiskSpec, rng: &mut RngStream) -> usize {
        for arm in 0..self.arms() {
            let values = &self.sorted[arm];
            flat_dirichlet_into(values.len(), rng, &mut self.weights);
            self.indices[arm] = spec.eval_weighted(values, &self.weights);
        }
        argmax_first(&self.indices)
    }

    pub fn update(&mut self, arm: usize, reward: f64) -> Result<()> {
        if !(0.0..=1.0).contains(&reward) {
            return Err(Error::RewardOutOfRange(reward));
        }
        self.history[arm].push(reward);
        let sorted = &mut self.sorted[arm];
        let at = sorted.partition_point(|&x| x <= reward);
        sorted.insert(at, reward);
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub(crate) enum PolicyState {
    Mts(MtsState),
    Npts(NptsState),
    Oracle(usize),
}

impl PolicyState {
    pub(crate) fn select(&mut self, t: usize, spec: &RiskSpec, rng: &mut RngStream) -> usize {
        match self {
            Self::Mts(s) => s.select(t, spec, rng),
            Self::Npts(s) => s.select(spec, rng),
            Self::Oracle(k) => *k,
        }
    }

    pub(crate) fn update(&mut self, arm: usize, reward: f64) -> Result<()> {
        match self {
            Self::Mts(s) => s.update(arm, reward),
            Self::Npts(s) => s.update(arm, reward),
            Self::Oracle(_) => Ok(()),
        }
    }
}
