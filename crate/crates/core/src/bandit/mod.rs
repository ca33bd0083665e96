//! Risk-averse multi-armed bandits: environment, Thompson-sampling policies
//! and pseudo-regret accounting.

mod instance;
mod policy;

pub use instance::{beta_quantile_grid, ArmModel, BanditInstance, DEFAULT_RESOLUTION};
pub use policy::{MtsState, NptsState, PolicyKind};

use rand_distr::Distribution;
use rayon::prelude::*;
use serde::Serialize;

use crate::distributions::{categorical_sample, FiniteSupport, RngStream};
use crate::error::{Error, Result};
use crate::kinf::{kinf_solve, serialize_extended, KinfOptions};
use policy::PolicyState;

/// Index of the largest value, the lowest index among ties.
pub fn argmax_first(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

enum Sampler {
    Categorical { support: Vec<f64>, probs: Vec<f64> },
    Beta(rand_distr::Beta<f64>),
}

impl Sampler {
    fn new(arm: &ArmModel) -> Result<Self> {
        Ok(match arm {
            ArmModel::Multinomial { support, probs } => Self::Categorical {
                support: support.clone(),
                probs: probs.clone(),
            },
            ArmModel::Beta { a, b } => Self::Beta(crate::distributions::beta_distribution(*a, *b)?),
        })
    }

    fn draw(&self, rng: &mut RngStream) -> f64 {
        match self {
            Self::Categorical { support, probs } => support[categorical_sample(probs, rng)],
            Self::Beta(d) => d.sample(rng),
        }
    }
}

/// One run of a policy.
#[derive(Debug, Clone, PartialEq)]
pub struct Episode {
    /// Cumulative pseudo-regret after rounds `1..=n`.
    pub regret: Vec<f64>,
    /// Arm pulled at each round.
    pub actions: Vec<usize>,
    /// Final pull count per arm.
    pub pulls: Vec<u64>,
}

fn initial_state(instance: &BanditInstance, policy: PolicyKind) -> Result<PolicyState> {
    Ok(match policy {
        PolicyKind::Mts => {
            let support = instance.shared_support().ok_or_else(|| {
                Error::IncompatiblePolicy(
                    "mts needs multinomial arms on one shared support; use npts for continuous arms".into(),
                )
            })?;
            PolicyState::Mts(MtsState::new(support, instance.len()))
        }
        PolicyKind::Npts => PolicyState::Npts(NptsState::new(instance.len())),
        PolicyKind::Oracle => PolicyState::Oracle(instance.optimal_arm()),
    })
}

/// Rewards come from stream 0 of `seed`, policy randomness from stream 1.
pub fn run_episode(instance: &BanditInstance, policy: PolicyKind, horizon: usize, seed: u64) -> Result<Episode> {
    let mut state = initial_state(instance, policy)?;
    let samplers = instance.arms().iter().map(Sampler::new).collect::<Result<Vec<_>>>()?;
    let mut env_rng = RngStream::with_stream(seed, 0);
    let mut policy_rng = RngStream::with_stream(seed, 1);
    let spec = instance.spec();
    let gaps = instance.gaps();

    let mut regret = Vec::with_capacity(horizon);
    let mut actions = Vec::with_capacity(horizon);
    let mut pulls = vec![0u64; instance.len()];
    let mut total = 0.0;
    for t in 1..=horizon {
        let arm = state.select(t, spec, &mut policy_rng);
        let reward = samplers[arm].draw(&mut env_rng);
        state.update(arm, reward)?;
        total += gaps[arm];
        regret.push(total);
        actions.push(arm);
        pulls[arm] += 1;
    }
    Ok(Episode { regret, actions, pulls })
}

/// Replicated runs and their per-round aggregate.
#[derive(Debug, Clone, PartialEq)]
pub struct RegretTrace {
    pub policy: PolicyKind,
    pub base_seed: u64,
    /// Cumulative regret path of each replication.
    pub paths: Vec<Vec<f64>>,
    pub mean: Vec<f64>,
    /// Population standard deviation across replications.
    pub std: Vec<f64>,
    pub final_pulls: Vec<Vec<u64>>,
}

impl RegretTrace {
    pub fn horizon(&self) -> usize {
        self.mean.len()
    }

    pub fn reps(&self) -> usize {
        self.paths.len()
    }

    pub fn final_mean(&self) -> f64 {
        self.mean.last().copied().unwrap_or(0.0)
    }

    pub fn final_std(&self) -> f64 {
        self.std.last().copied().unwrap_or(0.0)
    }
}

/// Replication `i` uses seed `base_seed + i`.
pub fn run_replications(
    instance: &BanditInstance,
    policy: PolicyKind,
    horizon: usize,
    reps: usize,
    base_seed: u64,
) -> Result<RegretTrace> {
    if reps == 0 {
        return Err(Error::InvalidParameter {
            name: "reps",
            value: 0.0,
            reason: "need at least one replication",
        });
    }
    initial_state(instance, policy)?;
    let episodes = (0..reps)
        .into_par_iter()
        .map(|i| run_episode(instance, policy, horizon, base_seed.wrapping_add(i as u64)))
        .collect::<Result<Vec<_>>>()?;

    let r = reps as f64;
    let mut mean = vec![0.0; horizon];
    let mut std = vec![0.0; horizon];
    for ep in &episodes {
        for (m, x) in mean.iter_mut().zip(&ep.regret) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= r);
    for ep in &episodes {
        for ((s, x), m) in std.iter_mut().zip(&ep.regret).zip(&mean) {
            *s += (x - m) * (x - m);
        }
    }
    std.iter_mut().for_each(|s| *s = (*s / r).sqrt());

    let final_pulls = episodes.iter().map(|e| e.pulls.clone()).collect();
    let paths = episodes.into_iter().map(|e| e.regret).collect();
    Ok(RegretTrace {
        policy,
        base_seed,
        paths,
        mean,
        std,
        final_pulls,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ArmBound {
    pub arm: usize,
    pub gap: f64,
    #[serde(serialize_with = "serialize_extended")]
    pub kinf: f64,
}

/// `ℓ(n) = coefficient · log n` with `coefficient = Σ_{Δ_k > 0} Δ_k / K_inf(ν_k, r*)`.
#[derive(Debug, Clone, Serialize)]
pub struct LowerBound {
    pub reference_risk: f64,
    pub arms: Vec<ArmBound>,
    pub coefficient: f64,
    /// Quantile-grid size used for continuous arms.
    pub resolution: usize,
    pub warnings: Vec<String>,
}

impl LowerBound {
    pub fn at(&self, n: usize) -> f64 {
        if n == 0 {
            return 0.0;
        }
        self.coefficient * (n as f64).ln()
    }
}

/// Law over which `K_inf` is taken for one arm. Continuous arms get a
/// quantile grid widened by the endpoints 0 and 1 at zero mass, so the
/// alternative may move mass to the edges of the reward range.
pub fn kinf_law(arm: &ArmModel, resolution: usize) -> Result<FiniteSupport> {
    let law = arm.discretize(resolution)?;
    if !arm.is_continuous() {
        return Ok(law);
    }
    let mut support = law.support().to_vec();
    let mut probs = law.probs().to_vec();
    if support[0] > 0.0 {
        support.insert(0, 0.0);
        probs.insert(0, 0.0);
    }
    if *support.last().unwrap() < 1.0 {
        support.push(1.0);
        probs.push(0.0);
    }
    FiniteSupport::new(support, probs)
}

pub fn lower_bound(instance: &BanditInstance, resolution: usize, opts: &KinfOptions) -> Result<LowerBound> {
    let r_star = instance.optimal_risk();
    let mut arms = Vec::new();
    let mut warnings = Vec::new();
    let mut coefficient = 0.0;
    for (k, (arm, &gap)) in instance.arms().iter().zip(instance.gaps()).enumerate() {
        if gap <= 0.0 {
            arms.push(ArmBound { arm: k, gap, kinf: 0.0 });
            continue;
        }
        let law = kinf_law(arm, resolution)?;
        let kinf = kinf_solve(&law, r_star, instance.spec(), opts)?.value;
        if kinf.is_infinite() {
            warnings.push(format!("arm {k}: K_inf is infinite, contributes 0 to the lower bound"));
        } else if kinf > 0.0 {
            coefficient += gap / kinf;
        } else {
            warnings.push(format!("arm {k}: K_inf is 0 despite a positive gap, contributes 0"));
        }
        arms.push(ArmBound { arm: k, gap, kinf });
    }
    Ok(LowerBound {
        reference_risk: r_star,
        arms,
        coefficient,
        resolution,
        warnings,
    })
}

pub fn lower_bound_curve(
    instance: &BanditInstance,
    n_grid: &[usize],
    resolution: usize,
    opts: &KinfOptions,
) -> Result<Vec<(usize, f64)>> {
    let lb = lower_bound(instance, resolution, opts)?;
    Ok(n_grid.iter().map(|&n| (n, lb.at(n))).collect())
}
