use std::fmt;

use crate::error::{Error, Result};

/// Smallest argument used when a distortion derivative blows up at 0.
const DERIVATIVE_FLOOR: f64 = 1e-12;

/// Points in the monotonicity grid check.
const GRID_POINTS: usize = 1000;

/// A distortion `g: [0,1] → [0,1]`, non-decreasing with `g(0) = 0` and
/// `g(1) = 1`. The distorted risk of `X` is `∫ g(1 − F_X(t)) dt`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DistortionFunction {
    /// `g(x) = x`.
    Expectation,
    /// `g(x) = min{x / (1 − α), 1}`, the mean of the upper `1 − α` tail.
    Cvar { alpha: f64 },
    /// `g(x) = x^p`.
    PropHazard { p: f64 },
    /// `g(x) = x^q (1 − q log x)`.
    Lookback { q: f64 },
    /// `g(x) = 1{x ≥ 1 − α}`; discontinuous.
    Var { alpha: f64 },
}

impl DistortionFunction {
    pub fn cvar(alpha: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&alpha) {
            return Err(Error::InvalidParameter {
                name: "alpha",
                value: alpha,
                reason: "CVaR level must lie in [0, 1)",
            });
        }
        Self::Cvar { alpha }.validated()
    }

    pub fn prop_hazard(p: f64) -> Result<Self> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::InvalidParameter {
                name: "p",
                value: p,
                reason: "proportional hazard exponent must lie in (0, 1)",
            });
        }
        Self::PropHazard { p }.validated()
    }

    pub fn lookback(q: f64) -> Result<Self> {
        if !(q > 0.0 && q < 1.0) {
            return Err(Error::InvalidParameter {
                name: "q",
                value: q,
                reason: "lookback exponent must lie in (0, 1)",
            });
        }
        Self::Lookback { q }.validated()
    }

    pub fn var(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::InvalidParameter {
                name: "alpha",
                value: alpha,
                reason: "VaR level must lie in (0, 1)",
            });
        }
        Self::Var { alpha }.validated()
    }

    /// Checks `g(0) = 0`, `g(1) = 1` and monotonicity on a 1000-step grid.
    fn validated(self) -> Result<Self> {
        let bad = |reason| Error::InvalidParameter {
            name: "distortion",
            value: f64::NAN,
            reason,
        };
        if self.eval(0.0).abs() > 1e-12 {
            return Err(bad("g(0) must be 0"));
        }
        if (self.eval(1.0) - 1.0).abs() > 1e-12 {
            return Err(bad("g(1) must be 1"));
        }
        let mut prev = 0.0;
        for k in 0..=GRID_POINTS {
            let v = self.eval(k as f64 / GRID_POINTS as f64);
            if !(0.0..=1.0 + 1e-12).contains(&v) || v < prev - 1e-12 {
                return Err(bad("g must be a non-decreasing map into [0, 1]"));
            }
            prev = v;
        }
        Ok(self)
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        if x >= 1.0 {
            return 1.0;
        }
        match *self {
            Self::Expectation => x,
            Self::Cvar { alpha } => (x / (1.0 - alpha)).min(1.0),
            Self::PropHazard { p } => x.powf(p),
            Self::Lookback { q } => x.powf(q) * (1.0 - q * x.ln()),
            Self::Var { alpha } => {
                if x >= 1.0 - alpha {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// A (one-sided where needed) derivative of `g` on `(0, 1]`.
    pub fn derivative(&self, x: f64) -> f64 {
        let x = x.clamp(DERIVATIVE_FLOOR, 1.0);
        match *self {
            Self::Expectation => 1.0,
            Self::Cvar { alpha } => {
                if x < 1.0 - alpha {
                    1.0 / (1.0 - alpha)
                } else {
                    0.0
                }
            }
            Self::PropHazard { p } => p * x.powf(p - 1.0),
            Self::Lookback { q } => -q * q * x.powf(q - 1.0) * x.ln(),
            Self::Var { .. } => 0.0,
        }
    }

    pub fn is_continuous(&self) -> bool {
        !matches!(self, Self::Var { .. })
    }

    /// Concave `g` makes `q ↦ ρ_g(D_S(q))` concave on the simplex.
    pub fn is_concave(&self) -> bool {
        self.is_continuous()
    }
}

impl fmt::Display for DistortionFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Expectation => write!(f, "mean()"),
            Self::Cvar { alpha } => write!(f, "cvar({alpha})"),
            Self::PropHazard { p } => write!(f, "prop({p})"),
            Self::Lookback { q } => write!(f, "lb({q})"),
            Self::Var { alpha } => write!(f, "var({alpha})"),
        }
    }
}

/// `Σ_j g(Σ_{i≥j} w_i) (s_j − s_{j−1})` with `s_{−1} = 0`.
///
/// `values` must be non-decreasing (repeats allowed) and `weights` must sum
/// to one; the top tail is accumulated first so small tails stay accurate.
pub fn tail_sum(g: &DistortionFunction, values: &[f64], weights: &[f64]) -> f64 {
    let mut tail = 0.0;
    let mut acc = 0.0;
    for j in (1..values.len()).rev() {
        tail += weights[j];
        let ds = values[j] - values[j - 1];
        if ds != 0.0 {
            acc += g.eval(tail.min(1.0)) * ds;
        }
    }
    // T_0 = 1 and g(1) = 1
    acc + values[0]
}

/// Gradient of [`tail_sum`] with respect to the weights, treating them as
/// free coordinates: `∂/∂w_i = Σ_{j≤i} g'(T_j) Δs_j`.
pub fn tail_sum_gradient(g: &DistortionFunction, values: &[f64], weights: &[f64], out: &mut [f64]) {
    let n = values.len();
    // tails[j] = T_j, filled from the top
    let mut tail = 0.0;
    let mut slopes = vec![0.0; n];
    for j in (1..n).rev() {
        tail += weights[j];
        slopes[j] = g.derivative(tail.min(1.0)) * (values[j] - values[j - 1]);
    }
    slopes[0] = g.derivative(1.0) * values[0];
    let mut running = 0.0;
    for i in 0..n {
        running += slopes[i];
        out[i] = running;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn parameter_ranges() {
        assert!(DistortionFunction::cvar(1.5).is_err());
        assert!(DistortionFunction::cvar(1.0).is_err());
        assert!(DistortionFunction::cvar(0.0).is_ok());
        assert!(DistortionFunction::prop_hazard(1.0).is_err());
        assert!(DistortionFunction::lookback(0.0).is_err());
        assert!(DistortionFunction::var(0.0).is_err());
    }

    #[test]
    fn endpoints_and_continuity_flags() {
        for g in [
            DistortionFunction::Expectation,
            DistortionFunction::cvar(0.3).unwrap(),
            DistortionFunction::prop_hazard(0.7).unwrap(),
            DistortionFunction::lookback(0.6).unwrap(),
            DistortionFunction::var(0.5).unwrap(),
        ] {
            assert_eq!(g.eval(0.0), 0.0);
            assert_eq!(g.eval(1.0), 1.0);
        }
        assert!(!DistortionFunction::var(0.5).unwrap().is_continuous());
        assert!(DistortionFunction::lookback(0.6).unwrap().is_continuous());
    }

    #[test]
    fn derivative_matches_finite_differences() {
        for g in [
            DistortionFunction::Expectation,
            DistortionFunction::cvar(0.3).unwrap(),
            DistortionFunction::prop_hazard(0.7).unwrap(),
            DistortionFunction::lookback(0.6).unwrap(),
        ] {
            for &x in &[0.1, 0.33, 0.5, 0.9] {
                let h = 1e-6;
                let fd = (g.eval(x + h) - g.eval(x - h)) / (2.0 * h);
                assert_abs_diff_eq!(g.derivative(x), fd, epsilon = 1e-5);
            }
        }
    }
}
