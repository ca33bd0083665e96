//! Risk functionals on finite-support measures.
//!
//! Higher is better throughout: the learner prefers the arm with the largest
//! risk value. Distorted functionals are evaluated exactly through the
//! discrete tail-sum
//!
//! ```text
//! ρ_g(D_S(p)) = Σ_j g(Σ_{i≥j} p_i) (s_j − s_{j−1}),   s_{−1} = 0,
//! ```
//!
//! which is the integral `∫ g(1 − F(t)) dt` for a step CDF. With this
//! orientation `cvar(α)` is the mean of the best `1 − α` fraction of
//! outcomes (`g(x) = min{x/(1−α), 1}`).
//!
//! A [`RiskSpec`] is a finite linear combination of distortions and EDPMs
//! (plus an optional constant), usually built from the expression language
//! in [`expr`]:
//!
//! ```text
//! expr := term (('+' | '-') term)*
//! term := number | [number '*'] name '(' [number (',' number)*] ')'
//! ```

mod distortion;
mod edpm;
pub mod expr;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub use distortion::{tail_sum, tail_sum_gradient, DistortionFunction};
pub use edpm::{EdpmSpec, DEFAULT_EPS_SIGMA};
pub use expr::parse_risk_expr;

use crate::distributions::FiniteSupport;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RiskBase {
    Distortion(DistortionFunction),
    Edpm(EdpmSpec),
}

impl RiskBase {
    pub fn eval(&self, values: &[f64], weights: &[f64]) -> f64 {
        match self {
            RiskBase::Distortion(g) => tail_sum(g, values, weights),
            RiskBase::Edpm(u) => u.eval(values, weights),
        }
    }

    pub fn gradient(&self, values: &[f64], weights: &[f64], out: &mut [f64]) {
        match self {
            RiskBase::Distortion(g) => tail_sum_gradient(g, values, weights, out),
            RiskBase::Edpm(u) => u.gradient(values, weights, out),
        }
    }

    pub fn is_continuous(&self) -> bool {
        match self {
            RiskBase::Distortion(g) => g.is_continuous(),
            RiskBase::Edpm(_) => true,
        }
    }

    /// Continuous distortions and convex EDPMs are dominant.
    pub fn is_dominant(&self) -> bool {
        match self {
            RiskBase::Distortion(g) => g.is_continuous(),
            RiskBase::Edpm(u) => u.is_convex(),
        }
    }

    fn is_concave(&self) -> bool {
        match self {
            RiskBase::Distortion(g) => g.is_concave(),
            RiskBase::Edpm(u) => u.is_linear(),
        }
    }

    fn is_convex(&self) -> bool {
        match self {
            RiskBase::Distortion(g) => *g == DistortionFunction::Expectation,
            RiskBase::Edpm(u) => u.is_convex(),
        }
    }
}

impl fmt::Display for RiskBase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RiskBase::Distortion(g) => g.fmt(f),
            RiskBase::Edpm(u) => u.fmt(f),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiskTerm {
    pub coef: f64,
    pub base: RiskBase,
}

/// `offset + Σ λ_i ρ_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct RiskSpec {
    terms: Vec<RiskTerm>,
    offset: f64,
}

impl RiskSpec {
    pub fn new(terms: Vec<RiskTerm>) -> Result<Self> {
        Self::with_offset(terms, 0.0)
    }

    pub fn with_offset(terms: Vec<RiskTerm>, offset: f64) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::InvalidDistribution("risk spec needs at least one term".into()));
        }
        if let Some(t) = terms.iter().find(|t| !t.coef.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "coefficient",
                value: t.coef,
                reason: "coefficients must be finite",
            });
        }
        if !offset.is_finite() {
            return Err(Error::InvalidParameter {
                name: "offset",
                value: offset,
                reason: "constant term must be finite",
            });
        }
        Ok(Self { terms, offset })
    }

    pub fn single(base: RiskBase) -> Self {
        Self {
            terms: vec![RiskTerm { coef: 1.0, base }],
            offset: 0.0,
        }
    }

    pub fn distortion(g: DistortionFunction) -> Self {
        Self::single(RiskBase::Distortion(g))
    }

    pub fn edpm(u: EdpmSpec) -> Self {
        Self::single(RiskBase::Edpm(u))
    }

    pub fn expectation() -> Self {
        Self::distortion(DistortionFunction::Expectation)
    }

    pub fn terms(&self) -> &[RiskTerm] {
        &self.terms
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    /// `a·ρ + b`.
    pub fn affine(&self, a: f64, b: f64) -> Result<Self> {
        let terms = self
            .terms
            .iter()
            .map(|t| RiskTerm {
                coef: a * t.coef,
                base: t.base,
            })
            .collect();
        Self::with_offset(terms, a * self.offset + b)
    }

    /// `−ρ`, used for the `ρ ≤ r` orientation of the tail bounds.
    pub fn negated(&self) -> Self {
        Self {
            terms: self
                .terms
                .iter()
                .map(|t| RiskTerm {
                    coef: -t.coef,
                    base: t.base,
                })
                .collect(),
            offset: -self.offset,
        }
    }

    /// Every component is continuous.
    pub fn is_continuous(&self) -> bool {
        self.terms.iter().all(|t| t.base.is_continuous())
    }

    /// Every component is a nonnegative multiple of a dominant functional.
    pub fn is_dominant(&self) -> bool {
        self.terms.iter().all(|t| t.coef >= 0.0 && t.base.is_dominant())
    }

    /// `q ↦ ρ(D_S(q))` is concave on the simplex for every alphabet.
    pub fn is_concave(&self) -> bool {
        self.terms
            .iter()
            .all(|t| (t.coef >= 0.0 && t.base.is_concave()) || (t.coef <= 0.0 && t.base.is_convex()))
    }

    /// `q ↦ ρ(D_S(q))` is convex on the simplex, so its maximum sits at a vertex.
    pub fn is_convex(&self) -> bool {
        self.terms
            .iter()
            .all(|t| (t.coef >= 0.0 && t.base.is_convex()) || (t.coef <= 0.0 && t.base.is_concave()))
    }

    /// Evaluates on non-decreasing `values` (repeats allowed) with weights
    /// summing to one. This is the hot path for posterior samples.
    pub fn eval_weighted(&self, values: &[f64], weights: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|t| t.coef * t.base.eval(values, weights))
            .sum::<f64>()
            + self.offset
    }

    pub fn eval(&self, dist: &FiniteSupport) -> f64 {
        self.eval_weighted(dist.support(), dist.probs())
    }

    /// Value and gradient with respect to the weights (free coordinates).
    pub fn value_and_gradient(&self, values: &[f64], weights: &[f64], grad: &mut [f64]) -> f64 {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut scratch = vec![0.0; values.len()];
        let mut value = self.offset;
        for t in &self.terms {
            value += t.coef * t.base.eval(values, weights);
            t.base.gradient(values, weights, &mut scratch);
            for (g, s) in grad.iter_mut().zip(&scratch) {
                *g += t.coef * s;
            }
        }
        value
    }

    /// Value at the Dirac mass `δ_s`.
    pub fn eval_dirac(&self, s: f64) -> f64 {
        self.eval_weighted(&[s], &[1.0])
    }
}

impl fmt::Display for RiskSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, t) in self.terms.iter().enumerate() {
            if i > 0 {
                write!(f, " + ")?;
            }
            if t.coef == 1.0 {
                write!(f, "{}", t.base)?;
            } else {
                write!(f, "{}*{}", t.coef, t.base)?;
            }
        }
        if self.offset != 0.0 {
            write!(f, " + {}", self.offset)?;
        }
        Ok(())
    }
}

impl FromStr for RiskSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        parse_risk_expr(s)
    }
}

impl Serialize for RiskSpec {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for RiskSpec {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}

/// Distorted risk `ρ_g(D_S(p))` via the tail-sum formula.
pub fn distorted_risk(dist: &FiniteSupport, g: &DistortionFunction) -> f64 {
    tail_sum(g, dist.support(), dist.probs())
}

pub fn edpm_eval(dist: &FiniteSupport, u: &EdpmSpec) -> f64 {
    u.eval(dist.support(), dist.probs())
}

pub fn risk_eval(dist: &FiniteSupport, spec: &RiskSpec) -> f64 {
    spec.eval(dist)
}

/// Value-at-risk through the indicator distortion `1{x ≥ 1 − α}`.
pub fn var_risk(dist: &FiniteSupport, alpha: f64) -> Result<f64> {
    Ok(distorted_risk(dist, &DistortionFunction::var(alpha)?))
}
