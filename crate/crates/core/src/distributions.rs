//! Finite-support probability measures and the samplers built on them.
//!
//! A [`FiniteSupport`] is the measure `Σ p_i δ_{s_i}` on a strictly
//! increasing alphabet `s_0 < … < s_M` inside `[0, 1]`. Probability vectors
//! are plain `&[f64]` slices; they are validated (and renormalized against
//! float drift) whenever a [`FiniteSupport`] is built from them.
//!
//! All randomness goes through [`RngStream`], a seeded ChaCha8 generator
//! (`rand_chacha::ChaCha8Rng::seed_from_u64`). The seed plus stream id fully
//! determine the sample sequence, so replays with the same seed are
//! bit-identical for a given build.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Gamma};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Drift in `Σ p` that is silently renormalized away.
pub const RENORMALIZE_TOL: f64 = 1e-9;

/// A probability measure on a finite, strictly increasing alphabet in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiniteSupport {
    support: Vec<f64>,
    probs: Vec<f64>,
}

impl FiniteSupport {
    pub fn new(support: Vec<f64>, probs: Vec<f64>) -> Result<Self> {
        if support.is_empty() {
            return Err(Error::InvalidDistribution("empty support".into()));
        }
        if support.len() != probs.len() {
            return Err(Error::LengthMismatch {
                left: support.len(),
                right: probs.len(),
            });
        }
        for (i, &s) in support.iter().enumerate() {
            if !(0.0..=1.0).contains(&s) {
                return Err(Error::InvalidDistribution(format!(
                    "support point s_{i} = {s} outside [0, 1]"
                )));
            }
            if i > 0 && s <= support[i - 1] {
                return Err(Error::InvalidDistribution(format!(
                    "support not strictly increasing at index {i}"
                )));
            }
        }
        let probs = normalize_probs(probs)?;
        Ok(Self { support, probs })
    }

    pub fn dirac(c: f64) -> Result<Self> {
        Self::new(vec![c], vec![1.0])
    }

    /// Bernoulli measure on `{0, 1}` with success probability `p`.
    pub fn bernoulli(p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidParameter {
                name: "p",
                value: p,
                reason: "Bernoulli parameter must lie in [0, 1]",
            });
        }
        Self::new(vec![0.0, 1.0], vec![1.0 - p, p])
    }

    pub fn support(&self) -> &[f64] {
        &self.support
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Alphabet size `M + 1`.
    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    /// The simplex dimension `M`.
    pub fn dim(&self) -> usize {
        self.support.len() - 1
    }

    /// Same alphabet, different weights.
    pub fn with_probs(&self, probs: Vec<f64>) -> Result<Self> {
        Self::new(self.support.clone(), probs)
    }

    /// Right-continuous CDF `F(t) = Σ_{s_i ≤ t} p_i`.
    pub fn cdf(&self, t: f64) -> f64 {
        let k = self.support.partition_point(|&s| s <= t);
        self.probs[..k].iter().sum::<f64>().min(1.0)
    }

    pub fn mean(&self) -> f64 {
        self.support.iter().zip(&self.probs).map(|(s, p)| s * p).sum()
    }
}

/// Validates a probability vector and renormalizes it when `|Σp − 1|` is
/// within [`RENORMALIZE_TOL`].
pub fn normalize_probs(mut probs: Vec<f64>) -> Result<Vec<f64>> {
    if probs.is_empty() {
        return Err(Error::InvalidDistribution("empty probability vector".into()));
    }
    for (i, &p) in probs.iter().enumerate() {
        if !p.is_finite() || p < 0.0 {
            return Err(Error::InvalidDistribution(format!(
                "probability p_{i} = {p} is not a nonnegative finite number"
            )));
        }
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > RENORMALIZE_TOL {
        return Err(Error::InvalidDistribution(format!(
            "probabilities sum to {total}, not 1"
        )));
    }
    for p in &mut probs {
        *p /= total;
    }
    Ok(probs)
}

/// Integer Dirichlet concentration vector; every component is at least 1.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DirichletParams {
    alpha: Vec<u64>,
    n: u64,
}

impl DirichletParams {
    pub fn new(alpha: Vec<u64>) -> Result<Self> {
        if alpha.is_empty() {
            return Err(Error::InvalidDistribution("empty Dirichlet parameter".into()));
        }
        if let Some(i) = alpha.iter().position(|&a| a == 0) {
            return Err(Error::InvalidParameter {
                name: "alpha",
                value: 0.0,
                reason: if i == 0 {
                    "Dirichlet parameters must be >= 1 (alpha_0 = 0)"
                } else {
                    "Dirichlet parameters must be >= 1"
                },
            });
        }
        let n = alpha.iter().sum();
        Ok(Self { alpha, n })
    }

    /// `Dir(1, …, 1)` on `len` atoms, the uniform distribution on the simplex.
    pub fn uniform(len: usize) -> Self {
        Self {
            alpha: vec![1; len],
            n: len as u64,
        }
    }

    pub fn alpha(&self) -> &[u64] {
        &self.alpha
    }

    /// Cached `Σ α_i`.
    pub fn total(&self) -> u64 {
        self.n
    }

    pub fn len(&self) -> usize {
        self.alpha.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alpha.is_empty()
    }

    pub fn increment(&mut self, i: usize) {
        self.alpha[i] += 1;
        self.n += 1;
    }

    /// The mean `α / n`.
    pub fn mean(&self) -> Vec<f64> {
        let n = self.n as f64;
        self.alpha.iter().map(|&a| a as f64 / n).collect()
    }
}

/// Seeded, single-owner random stream.
///
/// Backed by ChaCha8 with the 64-bit seed expanded by `seed_from_u64`; the
/// `stream` id selects an independent ChaCha stream for the same seed.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    inner: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self::with_stream(seed, 0)
    }

    pub fn with_stream(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        Self { seed, inner }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Uniform draw in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        rand::Rng::random::<f64>(self)
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

/// Draws `L ~ Dir(α)` via normalized independent `Gamma(α_i, 1)` variates.
pub fn dirichlet_sample(params: &DirichletParams, rng: &mut RngStream) -> Vec<f64> {
    let mut out = Vec::with_capacity(params.len());
    dirichlet_sample_into(params.alpha(), rng, &mut out);
    out
}

pub(crate) fn dirichlet_sample_into(alpha: &[u64], rng: &mut RngStream, out: &mut Vec<f64>) {
    out.clear();
    if alpha.len() == 1 {
        out.push(1.0);
        return;
    }
    let mut total = 0.0;
    for &a in alpha {
        let x: f64 = if a == 1 {
            Exp1.sample(rng)
        } else {
            // shape >= 1 and scale 1 are always valid
            Gamma::new(a as f64, 1.0).unwrap().sample(rng)
        };
        total += x;
        out.push(x);
    }
    for x in out.iter_mut() {
        *x /= total;
    }
}

/// Fills `out` with a `Dir(1, …, 1)` draw of length `len`.
pub(crate) fn flat_dirichlet_into(len: usize, rng: &mut RngStream, out: &mut Vec<f64>) {
    out.clear();
    if len == 1 {
        out.push(1.0);
        return;
    }
    let mut total = 0.0;
    for _ in 0..len {
        let x: f64 = Exp1.sample(rng);
        total += x;
        out.push(x);
    }
    let inv = 1.0 / total;
    for x in out.iter_mut() {
        *x *= inv;
    }
}

/// Categorical draw: index `i` with probability `probs[i]`.
pub fn categorical_sample(probs: &[f64], rng: &mut RngStream) -> usize {
    let u = rng.uniform();
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    // u landed in the rounding gap at the top; take the last charged atom
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(probs.len() - 1)
}

pub fn beta_sample(a: f64, b: f64, rng: &mut RngStream) -> Result<f64> {
    Ok(beta_distribution(a, b)?.sample(rng))
}

pub(crate) fn beta_distribution(a: f64, b: f64) -> Result<rand_distr::Beta<f64>> {
    if !(a > 0.0 && a.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "a",
            value: a,
            reason: "Beta shape must be positive",
        });
    }
    if !(b > 0.0 && b.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "b",
            value: b,
            reason: "Beta shape must be positive",
        });
    }
    rand_distr::Beta::new(a, b).map_err(|_| Error::InvalidParameter {
        name: "a",
        value: a,
        reason: "Beta shape must be positive",
    })
}

/// The empirical measure `(1/n) Σ δ_{x_i}` with equal points merged.
pub fn empirical_from_samples(xs: &[f64]) -> Result<FiniteSupport> {
    if xs.is_empty() {
        return Err(Error::InvalidDistribution("empty sample list".into()));
    }
    if let Some(&x) = xs.iter().find(|x| !(0.0..=1.0).contains(*x)) {
        return Err(Error::RewardOutOfRange(x));
    }
    let mut sorted = xs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let w = 1.0 / xs.len() as f64;
    let mut support: Vec<f64> = Vec::new();
    let mut counts: Vec<usize> = Vec::new();
    for x in sorted {
        match support.last() {
            Some(&last) if last == x => *counts.last_mut().unwrap() += 1,
            _ => {
                support.push(x);
                counts.push(1);
            }
        }
    }
    let probs = counts.into_iter().map(|c| c as f64 * w).collect();
    FiniteSupport::new(support, probs)
}

/// `Σ p_i log(p_i / q_i)` with `0 log(0/q) = 0`; `+∞` when `p_i > 0 = q_i`.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::LengthMismatch {
            left: p.len(),
            right: q.len(),
        });
    }
    Ok(kl_unchecked(p, q))
}

pub(crate) fn kl_unchecked(p: &[f64], q: &[f64]) -> f64 {
    let mut total = 0.0;
    for (&pi, &qi) in p.iter().zip(q) {
        if pi > 0.0 {
            if qi <= 0.0 {
                return f64::INFINITY;
            }
            total += pi * (pi / qi).ln();
        }
    }
    total.max(0.0)
}

/// Kolmogorov–Smirnov distance `sup_t |F_a(t) − F_b(t)|`.
///
/// Both CDFs are step functions that only jump at support points, so the
/// supremum is attained on the union of the two alphabets.
pub fn d_infty(a: &FiniteSupport, b: &FiniteSupport) -> f64 {
    let (sa, pa) = (a.support(), a.probs());
    let (sb, pb) = (b.support(), b.probs());
    let (mut i, mut j) = (0, 0);
    let (mut fa, mut fb) = (0.0_f64, 0.0_f64);
    let mut best = 0.0_f64;
    while i < sa.len() || j < sb.len() {
        let t = match (sa.get(i), sb.get(j)) {
            (Some(&x), Some(&y)) => x.min(y),
            (Some(&x), None) => x,
            (None, Some(&y)) => y,
            (None, None) => unreachable!(),
        };
        while i < sa.len() && sa[i] == t {
            fa += pa[i];
            i += 1;
        }
        while j < sb.len() && sb[j] == t {
            fb += pb[j];
            j += 1;
        }
        best = best.max((fa - fb).abs());
    }
    best
}

/// `ℓ_∞` distance between probability vectors.
pub fn d_infty_vec(p: &[f64], q: &[f64]) -> f64 {
    p.iter().zip(q).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}

/// Checks `d_∞(p,q) ≤ 2 D_∞(D_S(p), D_S(q)) ≤ 2M d_∞(p,q)` (with 1e-12 slack).
pub fn embedding_metric_sandwich_check(p: &[f64], q: &[f64], support: &[f64]) -> Result<bool> {
    let a = FiniteSupport::new(support.to_vec(), p.to_vec())?;
    let b = FiniteSupport::new(support.to_vec(), q.to_vec())?;
    let small = d_infty_vec(a.probs(), b.probs());
    let mid = 2.0 * d_infty(&a, &b);
    let big = 2.0 * a.dim() as f64 * small;
    const SLACK: f64 = 1e-12;
    Ok(small <= mid + SLACK && mid <= big + SLACK)
}
