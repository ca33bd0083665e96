use std::fmt;

use crate::error::{Error, Result};

/// Regularizer for the Sharpe/Sortino denominators when none is given.
pub const DEFAULT_EPS_SIGMA: f64 = 1e-6;

/// Empirical distribution performance measures: risk functionals written as
/// a function `U` of the law through its moments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EdpmSpec {
    /// `E[X]`
    Mean,
    /// `E[X²]`
    SecondMoment,
    /// `−E[(X − r)² 1{X ≤ r}]`
    BelowTargetSemiVariance { target: f64 },
    /// `−(1/θ) log E[exp(−θX)]`
    EntropicRisk { theta: f64 },
    /// `−Var[X]`
    NegativeVariance,
    /// `γ E[X] − Var[X]`
    MeanVariance { gamma: f64 },
    /// `(E[X] − r) / sqrt(ε + Var[X])`
    Sharpe { target: f64, eps: f64 },
    /// `(E[X] − r) / sqrt(ε + TSV_r[X])`
    Sortino { target: f64, eps: f64 },
}

impl EdpmSpec {
    pub fn entropic(theta: f64) -> Result<Self> {
        if !(theta > 0.0 && theta.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "theta",
                value: theta,
                reason: "entropic risk needs theta > 0",
            });
        }
        Ok(Self::EntropicRisk { theta })
    }

    pub fn mean_variance(gamma: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "gamma",
                value: gamma,
                reason: "mean-variance needs gamma > 0",
            });
        }
        Ok(Self::MeanVariance { gamma })
    }

    pub fn below_target_semi_variance(target: f64) -> Result<Self> {
        check_target(target)?;
        Ok(Self::BelowTargetSemiVariance { target })
    }

    pub fn sharpe(target: f64, eps: f64) -> Result<Self> {
        check_target(target)?;
        check_eps(eps)?;
        Ok(Self::Sharpe { target, eps })
    }

    pub fn sortino(target: f64, eps: f64) -> Result<Self> {
        check_target(target)?;
        check_eps(eps)?;
        Ok(Self::Sortino { target, eps })
    }

    /// Convexity of `q ↦ U(D_S(q))` on the simplex.
    pub fn is_convex(&self) -> bool {
        !matches!(self, Self::Sharpe { .. } | Self::Sortino { .. })
    }

    /// Linear in the probability vector (an expectation of a fixed function).
    pub fn is_linear(&self) -> bool {
        matches!(
            self,
            Self::Mean | Self::SecondMoment | Self::BelowTargetSemiVariance { .. }
        )
    }

    pub fn eval(&self, values: &[f64], weights: &[f64]) -> f64 {
        match *self {
            Self::Mean => mean(values, weights),
            Self::SecondMoment => expect(values, weights, |s| s * s),
            Self::BelowTargetSemiVariance { target } => -tsv(values, weights, target),
            Self::EntropicRisk { theta } => entropic(values, weights, theta),
            Self::NegativeVariance => -variance(values, weights),
            Self::MeanVariance { gamma } => gamma * mean(values, weights) - variance(values, weights),
            Self::Sharpe { target, eps } => (mean(values, weights) - target) / (eps + variance(values, weights)).sqrt(),
            Self::Sortino { target, eps } => {
                (mean(values, weights) - target) / (eps + tsv(values, weights, target)).sqrt()
            }
        }
    }

    /// Gradient with respect to the weights as free coordinates.
    pub fn gradient(&self, values: &[f64], weights: &[f64], out: &mut [f64]) {
        let m = mean(values, weights);
        let dvar = |s: f64| s * s - 2.0 * m * s;
        match *self {
            Self::Mean => fill(out, values, |s| s),
            Self::SecondMoment => fill(out, values, |s| s * s),
            Self::BelowTargetSemiVariance { target } => fill(out, values, |s| -shortfall_sq(s, target)),
            Self::EntropicRisk { theta } => {
                let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
                let z: f64 = expect(values, weights, |s| (-theta * (s - lo)).exp());
                fill(out, values, |s| -(-theta * (s - lo)).exp() / (theta * z));
            }
            Self::NegativeVariance => fill(out, values, |s| -dvar(s)),
            Self::MeanVariance { gamma } => fill(out, values, |s| gamma * s - dvar(s)),
            Self::Sharpe { target, eps } => {
                let d = (eps + variance(values, weights)).sqrt();
                let num = m - target;
                fill(out, values, |s| s / d - num * dvar(s) / (2.0 * d * d * d));
            }
            Self::Sortino { target, eps } => {
                let d = (eps + tsv(values, weights, target)).sqrt();
                let num = m - target;
                fill(out, values, |s| {
                    s / d - num * shortfall_sq(s, target) / (2.0 * d * d * d)
                });
            }
        }
    }
}

fn check_target(target: f64) -> Result<()> {
    if !target.is_finite() {
        return Err(Error::InvalidParameter {
            name: "r",
            value: target,
            reason: "target must be finite",
        });
    }
    Ok(())
}

fn check_eps(eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "eps_sigma",
            value: eps,
            reason: "denominator regularizer must be > 0",
        });
    }
    Ok(())
}

fn fill(out: &mut [f64], values: &[f64], f: impl Fn(f64) -> f64) {
    for (o, &s) in out.iter_mut().zip(values) {
        *o = f(s);
    }
}

fn expect(values: &[f64], weights: &[f64], f: impl Fn(f64) -> f64) -> f64 {
    values.iter().zip(weights).map(|(&s, &w)| w * f(s)).sum()
}

pub(crate) fn mean(values: &[f64], weights: &[f64]) -> f64 {
    expect(values, weights, |s| s)
}

/// `E[X²] − E[X]²`, clamped at zero.
pub(crate) fn variance(values: &[f64], weights: &[f64]) -> f64 {
    let m = mean(values, weights);
    (expect(values, weights, |s| s * s) - m * m).max(0.0)
}

fn shortfall_sq(s: f64, target: f64) -> f64 {
    if s <= target {
        (s - target) * (s - target)
    } else {
        0.0
    }
}

fn tsv(values: &[f64], weights: &[f64], target: f64) -> f64 {
    expect(values, weights, |s| shortfall_sq(s, target))
}

fn entropic(values: &[f64], weights: &[f64], theta: f64) -> f64 {
    // shift by the smallest charged value so exp never overflows
    let lo = values
        .iter()
        .zip(weights)
        .filter(|(_, &w)| w > 0.0)
        .map(|(&s, _)| s)
        .fold(f64::INFINITY, f64::min);
    let z = expect(values, weights, |s| (-theta * (s - lo)).exp());
    lo - z.ln() / theta
}

impl fmt::Display for EdpmSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Mean => write!(f, "ave()"),
            Self::SecondMoment => write!(f, "e2()"),
            Self::BelowTargetSemiVariance { target } => write!(f, "tsv({target})"),
            Self::EntropicRisk { theta } => write!(f, "ent({theta})"),
            Self::NegativeVariance => write!(f, "nvar()"),
            Self::MeanVariance { gamma } => write!(f, "mv({gamma})"),
            Self::Sharpe { target, eps } => write!(f, "sharpe({target}, {eps})"),
            Self::Sortino { target, eps } => write!(f, "sortino({target}, {eps})"),
        }
    }
}
