//! Posterior tail bounds for Dirichlet weights and their Monte Carlo check.
//!
//! For `L ~ Dir(α)` with `n = Σ α_i` and `p = α / n`,
//!
//! ```text
//! P(ρ(D_S(L)) ≥ r) ≤ C₁ n^{M/2} exp(−n K_inf(D_S(p), r)),  C₁ = e^{1/12} / (Γ(M+1) (2π)^{M/2})
//! P(ρ(D_S(L)) ≥ r) ≥ C₂ n^{−(M+1)/2} exp(−n K_inf(D_S(p), r)),  C₂ = √(2π) (M/2.13)^{M/2}
//! ```
//!
//! the second for dominant `ρ` and large `n`. The upper bound is also offered
//! for the event `ρ ≤ r` with the matching lower-tail `K_inf`.

use rayon::prelude::*;
use serde::Serialize;
use statrs::function::gamma::ln_gamma;

use crate::distributions::{dirichlet_sample_into, DirichletParams, FiniteSupport, RngStream};
use crate::error::{Error, Result};
use crate::kinf::{for_each_grid_point, kinf_solve, kinf_solve_below, serialize_extended, KinfOptions};
use crate::risk::RiskSpec;

/// Two-sided 95% normal quantile.
pub const Z_95: f64 = 1.959964;

/// Smallest `n` at which the asymptotic lower bound is asserted.
pub const LOWER_BOUND_MIN_N: u64 = 50;

pub const MIN_MC_SAMPLES: usize = 10_000;

const MC_CHUNK: usize = 4096;

/// Default mesh for [`dominance_grid_check`].
pub const DOMINANCE_RESOLUTION: usize = 200;

const DOMINANCE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// The event `ρ(L) ≥ r`.
    AtLeast,
    /// The event `ρ(L) ≤ r`.
    AtMost,
}

pub fn c1(m: usize) -> f64 {
    let m = m as f64;
    (1.0 / 12.0 - ln_gamma(m + 1.0) - 0.5 * m * (2.0 * std::f64::consts::PI).ln()).exp()
}

pub fn c2(m: usize) -> f64 {
    let m = m as f64;
    (2.0 * std::f64::consts::PI).sqrt() * (m / 2.13).powf(0.5 * m)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailBound {
    pub value: f64,
    #[serde(serialize_with = "serialize_extended")]
    pub kinf: f64,
}

fn posterior_mean(params: &DirichletParams, support: &[f64]) -> Result<FiniteSupport> {
    if params.len() != support.len() {
        return Err(Error::LengthMismatch {
            left: params.len(),
            right: support.len(),
        });
    }
    FiniteSupport::new(support.to_vec(), params.mean())
}

fn kinf_value(result: Result<crate::kinf::KinfResult>) -> Result<f64> {
    result.map(|r| r.value)
}

/// `C₁ n^{M/2} exp(−n K_inf)` for the event in `direction`.
pub fn tail_upper_bound(
    params: &DirichletParams,
    support: &[f64],
    r: f64,
    spec: &RiskSpec,
    direction: Direction,
    opts: &KinfOptions,
) -> Result<TailBound> {
    if !spec.is_continuous() {
        return Err(Error::Discontinuous(spec.to_string()));
    }
    let p = posterior_mean(params, support)?;
    let kinf = match direction {
        Direction::AtLeast => kinf_value(kinf_solve(&p, r, spec, opts))?,
        Direction::AtMost => kinf_value(kinf_solve_below(&p, r, spec, opts))?,
    };
    let (n, m) = (params.total() as f64, p.dim() as f64);
    let value = (c1(p.dim()).ln() + 0.5 * m * n.ln() - n * kinf).exp();
    Ok(TailBound { value, kinf })
}

/// `C₂ n^{−(M+1)/2} exp(−n K_inf)` for the event `ρ ≥ r`.
pub fn tail_lower_bound(
    params: &DirichletParams,
    support: &[f64],
    r: f64,
    spec: &RiskSpec,
    opts: &KinfOptions,
) -> Result<TailBound> {
    if !spec.is_dominant() {
        return Err(Error::NotDominant(spec.to_string()));
    }
    let p = posterior_mean(params, support)?;
    let kinf = kinf_value(kinf_solve(&p, r, spec, opts))?;
    let (n, m) = (params.total() as f64, p.dim() as f64);
    let value = (c2(p.dim()).ln() - 0.5 * (m + 1.0) * n.ln() - n * kinf).exp();
    Ok(TailBound { value, kinf })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    pub estimate: f64,
    /// Wilson 95% half-width.
    pub ci_halfwidth: f64,
    pub samples: usize,
}

/// Wilson score interval `(center, half-width)` for `k` successes in `n` trials.
pub fn wilson_interval(k: usize, n: usize, z: f64) -> (f64, f64) {
    let n = n as f64;
    let p = k as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    (center, half)
}

/// Fraction of `L ~ Dir(α)` draws whose risk lands in the tail. Draws come in
/// fixed chunks, each on its own substream of `seed`, so the result does not
/// depend on the thread count.
pub fn mc_tail_probability(
    params: &DirichletParams,
    support: &[f64],
    r: f64,
    spec: &RiskSpec,
    direction: Direction,
    n_samples: usize,
    seed: u64,
) -> Result<McEstimate> {
    if n_samples < MIN_MC_SAMPLES {
        return Err(Error::InvalidParameter {
            name: "n_samples",
            value: n_samples as f64,
            reason: "Monte Carlo needs at least 10^4 samples",
        });
    }
    posterior_mean(params, support)?;
    let chunks = n_samples.div_ceil(MC_CHUNK);
    let hits: usize = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = RngStream::with_stream(seed, c as u64);
            let mut w = Vec::with_capacity(support.len());
            let count = MC_CHUNK.min(n_samples - c * MC_CHUNK);
            (0..count)
                .filter(|_| {
                    dirichlet_sample_into(params.alpha(), &mut rng, &mut w);
                    let v = spec.eval_weighted(support, &w);
                    match direction {
                        Direction::AtLeast => v >= r,
                        Direction::AtMost => v <= r,
                    }
                })
                .count()
        })
        .collect::<Vec<_>>()
        .into_iter()
        .sum();
    let (_, half) = wilson_interval(hits, n_samples, Z_95);
    Ok(McEstimate {
        estimate: hits as f64 / n_samples as f64,
        ci_halfwidth: half,
        samples: n_samples,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Consistent,
    UpperViolated,
    LowerViolated,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailBoundReport {
    pub n: u64,
    #[serde(rename = "M")]
    pub m: usize,
    pub r: f64,
    pub direction: Direction,
    #[serde(serialize_with = "serialize_extended")]
    pub kinf_value: f64,
    pub upper_bound: f64,
    /// Absent for non-dominant functionals and the `ρ ≤ r` event.
    pub lower_bound: Option<f64>,
    /// Whether `n` is large enough for the lower bound to count in the verdict.
    pub lower_asserted: bool,
    pub mc_estimate: f64,
    pub ci_halfwidth: f64,
    pub verdict: Verdict,
}

/// Bounds and Monte Carlo estimate side by side. The upper bound is violated
/// when `mc > upper + 2·CI`, the lower one when `mc < lower − 2·CI` and
/// `n ≥ 50`.
#[allow(clippy::too_many_arguments)]
pub fn tail_bound_report(
    params: &DirichletParams,
    support: &[f64],
    r: f64,
    spec: &RiskSpec,
    direction: Direction,
    n_samples: usize,
    seed: u64,
    opts: &KinfOptions,
) -> Result<TailBoundReport> {
    let upper = tail_upper_bound(params, support, r, spec, direction, opts)?;
    let lower = if direction == Direction::AtLeast && spec.is_dominant() {
        Some(tail_lower_bound(params, support, r, spec, opts)?.value)
    } else {
        None
    };
    let mc = mc_tail_probability(params, support, r, spec, direction, n_samples, seed)?;
    let lower_asserted = lower.is_some() && params.total() >= LOWER_BOUND_MIN_N;
    let slack = 2.0 * mc.ci_halfwidth;
    let verdict = if mc.estimate > upper.value + slack {
        Verdict::UpperViolated
    } else if lower_asserted && mc.estimate < lower.unwrap_or(0.0) - slack {
        Verdict::LowerViolated
    } else {
        Verdict::Consistent
    };
    Ok(TailBoundReport {
        n: params.total(),
        m: support.len() - 1,
        r,
        direction,
        kinf_value: upper.kinf,
        upper_bound: upper.value,
        lower_bound: lower,
        lower_asserted,
        mc_estimate: mc.estimate,
        ci_halfwidth: mc.ci_halfwidth,
        verdict,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DominanceResult {
    pub holds: bool,
    pub witness: Option<Vec<usize>>,
}

impl DominanceResult {
    pub fn witness_size(&self) -> Option<usize> {
        self.witness.as_ref().map(Vec::len)
    }
}

fn check_dominance_inputs(support: &[f64], p: &[f64], resolution: usize) -> Result<()> {
    const MAX_DIM: usize = 3;
    if support.len() != p.len() {
        return Err(Error::LengthMismatch {
            left: support.len(),
            right: p.len(),
        });
    }
    if support.len() > MAX_DIM + 1 {
        return Err(Error::AlphabetTooLarge {
            m: support.len() - 1,
            max: MAX_DIM,
        });
    }
    if resolution == 0 {
        return Err(Error::InvalidParameter {
            name: "resolution",
            value: 0.0,
            reason: "grid resolution must be positive",
        });
    }
    Ok(())
}

/// Whether `ρ(q) ≥ ρ(p) − tol` on every grid point of
/// `T(I) = {q ∈ Δ^M : q_i ≤ p_i on I, q_i ≥ p_i off I}`.
pub fn dominance_holds_for(
    spec: &RiskSpec,
    support: &[f64],
    p: &[f64],
    subset: &[usize],
    resolution: usize,
) -> Result<bool> {
    check_dominance_inputs(support, p, resolution)?;
    FiniteSupport::new(support.to_vec(), p.to_vec())?;
    let in_set: Vec<bool> = (0..p.len()).map(|i| subset.contains(&i)).collect();
    let base = spec.eval_weighted(support, p);
    let mut holds = true;
    for_each_grid_point(p.len(), resolution, |q| {
        if !holds {
            return;
        }
        let inside = q
            .iter()
            .zip(p)
            .zip(&in_set)
            .all(|((&qi, &pi), &below)| if below { qi <= pi } else { qi >= pi });
        if inside && spec.eval_weighted(support, q) < base - DOMINANCE_TOL {
            holds = false;
        }
    });
    Ok(holds)
}

/// Searches nonempty proper subsets `I ⊂ {0, …, M}` by decreasing size, then
/// lexicographically, and returns the first one on which dominance holds.
pub fn dominance_grid_check(spec: &RiskSpec, support: &[f64], p: &[f64], resolution: usize) -> Result<DominanceResult> {
    check_dominance_inputs(support, p, resolution)?;
    let n = p.len();
    let mut subsets: Vec<Vec<usize>> = (1..(1u32 << n) - 1)
        .map(|mask| (0..n).filter(|&i| mask & (1 << i) != 0).collect())
        .collect();
    subsets.sort_by(|a, b| b.len().cmp(&a.len()).then_with(|| a.cmp(b)));
    for subset in subsets {
        if dominance_holds_for(spec, support, p, &subset, resolution)? {
            return Ok(DominanceResult {
                holds: true,
                witness: Some(subset),
            });
        }
    }
    Ok(DominanceResult {
        holds: false,
        witness: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn constants_for_small_m() {
        let two_pi = 2.0 * std::f64::consts::PI;
        assert_abs_diff_eq!(c1(1), (1.0f64 / 12.0).exp() / two_pi.sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(c1(2), (1.0f64 / 12.0).exp() / (2.0 * two_pi), epsilon = 1e-12);
        assert_abs_diff_eq!(c2(1), two_pi.sqrt() / 2.13f64.sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(c2(2), two_pi.sqrt() * (2.0 / 2.13), epsilon = 1e-12);
    }

    #[test]
    fn zero_kinf_gives_polynomial_factors() {
        let params = DirichletParams::new(vec![3, 3]).unwrap();
        let opts = KinfOptions::default();
        let up = tail_upper_bound(
            &params,
            &[0.0, 1.0],
            0.2,
            &RiskSpec::expectation(),
            Direction::AtLeast,
            &opts,
        )
        .unwrap();
        assert_eq!(up.kinf, 0.0);
        assert_abs_diff_eq!(up.value, c1(1) * 6f64.sqrt(), epsilon = 1e-12);
        let lo = tail_lower_bound(&params, &[0.0, 1.0], 0.2, &RiskSpec::expectation(), &opts).unwrap();
        assert_abs_diff_eq!(lo.value, c2(1) / 6.0, epsilon = 1e-12);
    }

    #[test]
    fn flags_are_enforced() {
        let params = DirichletParams::new(vec![3, 3]).unwrap();
        let opts = KinfOptions::default();
        let var: RiskSpec = "var(0.5)".parse().unwrap();
        assert!(matches!(
            tail_upper_bound(&params, &[0.0, 1.0], 0.5, &var, Direction::AtLeast, &opts),
            Err(Error::Discontinuous(_))
        ));
        let sharpe: RiskSpec = "sharpe(0.1)".parse().unwrap();
        assert!(matches!(
            tail_lower_bound(&params, &[0.0, 1.0], 0.5, &sharpe, &opts),
            Err(Error::NotDominant(_))
        ));
    }

    #[test]
    fn mc_extremes_and_symmetry() {
        let params = DirichletParams::new(vec![3, 3]).unwrap();
        let s = [0.0, 1.0];
        let mean = RiskSpec::expectation();
        let all = mc_tail_probability(&params, &s, -0.1, &mean, Direction::AtLeast, 10_000, 1).unwrap();
        assert_eq!(all.estimate, 1.0);
        let none = mc_tail_probability(&params, &s, 1.1, &mean, Direction::AtLeast, 10_000, 1).unwrap();
        assert_eq!(none.estimate, 0.0);
        let half = mc_tail_probability(&params, &s, 0.5, &mean, Direction::AtLeast, 100_000, 1).unwrap();
        assert!((half.estimate - 0.5).abs() <= 2.0 * half.ci_halfwidth);
        assert!(mc_tail_probability(&params, &s, 0.5, &mean, Direction::AtLeast, 100, 1).is_err());
    }

    #[test]
    fn wilson_matches_hand_computation() {
        let (center, half) = wilson_interval(0, 100, Z_95);
        let z2 = Z_95 * Z_95;
        assert_abs_diff_eq!(center, (z2 / 200.0) / (1.0 + z2 / 100.0), epsilon = 1e-15);
        assert_abs_diff_eq!(center, half, epsilon = 1e-15);
    }

    #[test]
    fn expectation_dominance_on_one_simplex() {
        let res = dominance_grid_check(&RiskSpec::expectation(), &[0.0, 1.0], &[0.4, 0.6], 200).unwrap();
        assert_eq!(res.witness, Some(vec![0]));
        assert!(!dominance_holds_for(&RiskSpec::expectation(), &[0.0, 1.0], &[0.4, 0.6], &[1], 200).unwrap());
    }

    #[test]
    fn dominance_rejects_large_alphabets() {
        let s = [0.0, 0.25, 0.5, 0.75, 1.0];
        assert!(matches!(
            dominance_grid_check(&RiskSpec::expectation(), &s, &[0.2; 5], 50),
            Err(Error::AlphabetTooLarge { .. })
        ));
    }
}
