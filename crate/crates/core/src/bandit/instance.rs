use serde::Serialize;
use statrs::function::beta::beta_reg;

use crate::distributions::FiniteSupport;
use crate::error::{Error, Result};
use crate::risk::RiskSpec;

/// Quantile-grid resolution used for the risk of continuous arms.
pub const DEFAULT_RESOLUTION: usize = 2001;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ArmModel {
    Multinomial { support: Vec<f64>, probs: Vec<f64> },
    Beta { a: f64, b: f64 },
}

impl ArmModel {
    pub fn bernoulli(p: f64) -> Result<Self> {
        let law = FiniteSupport::bernoulli(p)?;
        Ok(Self::from(law))
    }

    pub fn multinomial(support: Vec<f64>, probs: Vec<f64>) -> Result<Self> {
        Ok(Self::from(FiniteSupport::new(support, probs)?))
    }

    pub fn beta(a: f64, b: f64) -> Result<Self> {
        crate::distributions::beta_distribution(a, b)?;
        Ok(Self::Beta { a, b })
    }

    pub fn is_continuous(&self) -> bool {
        matches!(self, Self::Beta { .. })
    }

    /// The finite law used for risk computations: the arm itself when it is
    /// multinomial, an equal-mass quantile grid of `resolution` points otherwise.
    pub fn discretize(&self, resolution: usize) -> Result<FiniteSupport> {
        match self {
            Self::Multinomial { support, probs } => FiniteSupport::new(support.clone(), probs.clone()),
            Self::Beta { a, b } => beta_quantile_grid(*a, *b, resolution),
        }
    }
}

impl From<FiniteSupport> for ArmModel {
    fn from(law: FiniteSupport) -> Self {
        Self::Multinomial {
            support: law.support().to_vec(),
            probs: law.probs().to_vec(),
        }
    }
}

/// Beta(a, b) quantiles at `(i + 0.5) / resolution`, each carrying mass
/// `1 / resolution`. Quantiles that coincide in floating point are merged.
pub fn beta_quantile_grid(a: f64, b: f64, resolution: usize) -> Result<FiniteSupport> {
    crate::distributions::beta_distribution(a, b)?;
    if resolution == 0 {
        return Err(Error::InvalidParameter {
            name: "resolution",
            value: 0.0,
            reason: "need at least one grid point",
        });
    }
    let mass = 1.0 / resolution as f64;
    let mut support: Vec<f64> = Vec::with_capacity(resolution);
    let mut probs: Vec<f64> = Vec::with_capacity(resolution);
    for i in 0..resolution {
        let x = beta_quantile(a, b, (i as f64 + 0.5) * mass);
        match support.last() {
            Some(&last) if x <= last => *probs.last_mut().unwrap() += mass,
            _ => {
                support.push(x);
                probs.push(mass);
            }
        }
    }
    FiniteSupport::new(support, probs)
}

fn beta_quantile(a: f64, b: f64, u: f64) -> f64 {
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if beta_reg(a, b, mid) < u {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Arms, risk functional and the derived per-arm risks and gaps.
#[derive(Debug, Clone)]
pub struct BanditInstance {
    arms: Vec<ArmModel>,
    laws: Vec<FiniteSupport>,
    spec: RiskSpec,
    resolution: usize,
    true_risks: Vec<f64>,
    gaps: Vec<f64>,
    optimal_arm: usize,
}

impl BanditInstance {
    pub fn new(arms: Vec<ArmModel>, spec: RiskSpec, resolution: usize) -> Result<Self> {
        if arms.len() < 2 {
            return Err(Error::InvalidParameter {
                name: "K",
                value: arms.len() as f64,
                reason: "a bandit needs at least two arms",
            });
        }
        let laws = arms
            .iter()
            .map(|arm| arm.discretize(resolution))
            .collect::<Result<Vec<_>>>()?;
        let true_risks: Vec<f64> = laws.iter().map(|law| spec.eval(law)).collect();
        if let Some(k) = true_risks.iter().position(|r| !r.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "risk",
                value: true_risks[k],
                reason: "risk of an arm is not finite",
            });
        }
        let optimal_arm = super::argmax_first(&true_risks);
        let best = true_risks[optimal_arm];
        let gaps = true_risks.iter().map(|&r| best - r).collect();
        Ok(Self {
            arms,
            laws,
            spec,
            resolution,
            true_risks,
            gaps,
            optimal_arm,
        })
    }

    /// Same arms under another risk functional.
    pub fn with_spec(&self, spec: RiskSpec) -> Result<Self> {
        Self::new(self.arms.clone(), spec, self.resolution)
    }

    pub fn len(&self) -> usize {
        self.arms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.arms.is_empty()
    }

    pub fn arms(&self) -> &[ArmModel] {
        &self.arms
    }

    /// Finite laws on which the true risks were computed.
    pub fn laws(&self) -> &[FiniteSupport] {
        &self.laws
    }

    pub fn spec(&self) -> &RiskSpec {
        &self.spec
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn true_risks(&self) -> &[f64] {
        &self.true_risks
    }

    pub fn gaps(&self) -> &[f64] {
        &self.gaps
    }

    pub fn optimal_arm(&self) -> usize {
        self.optimal_arm
    }

    pub fn optimal_risk(&self) -> f64 {
        self.true_risks[self.optimal_arm]
    }

    pub fn has_continuous_arms(&self) -> bool {
        self.arms.iter().any(ArmModel::is_continuous)
    }

    /// The common alphabet when every arm is multinomial on the same support.
    pub fn shared_support(&self) -> Option<&[f64]> {
        let mut support: Option<&[f64]> = None;
        for arm in &self.arms {
            match arm {
                ArmModel::Beta { .. } => return None,
                ArmModel::Multinomial { support: s, .. } => match support {
                    None => support = Some(s),
                    Some(prev) if prev != s.as_slice() => return None,
                    Some(_) => {}
                },
            }
        }
        support
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn bernoulli_gaps() {
        let arms = vec![ArmModel::bernoulli(0.9).unwrap(), ArmModel::bernoulli(0.1).unwrap()];
        let inst = BanditInstance::new(arms, RiskSpec::expectation(), DEFAULT_RESOLUTION).unwrap();
        assert_eq!(inst.optimal_arm(), 0);
        assert_abs_diff_eq!(inst.gaps()[1], 0.8, epsilon = 1e-15);
        assert_eq!(inst.gaps()[0], 0.0);
        assert_eq!(inst.shared_support(), Some(&[0.0, 1.0][..]));
        assert!(!inst.has_continuous_arms());
    }

    #[test]
    fn needs_two_arms() {
        let arms = vec![ArmModel::bernoulli(0.5).unwrap()];
        assert!(BanditInstance::new(arms, RiskSpec::expectation(), 10).is_err());
    }

    #[test]
    fn beta_grid_mean_and_quantiles() {
        let grid = beta_quantile_grid(3.0, 1.0, DEFAULT_RESOLUTION).unwrap();
        assert_eq!(grid.len(), DEFAULT_RESOLUTION);
        // F(x) = x^3 for Beta(3, 1)
        let u: f64 = 0.5 / DEFAULT_RESOLUTION as f64;
        assert_abs_diff_eq!(grid.support()[0], u.cbrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(grid.mean(), 0.75, epsilon = 1e-5);
        let sym = beta_quantile_grid(3.0, 3.0, 1001).unwrap();
        assert_abs_diff_eq!(sym.support()[500], 0.5, epsilon = 1e-12);
    }

    #[test]
    fn mixed_supports_are_not_shared() {
        let arms = vec![
            ArmModel::bernoulli(0.4).unwrap(),
            ArmModel::multinomial(vec![0.0, 0.5, 1.0], vec![0.2, 0.3, 0.5]).unwrap(),
        ];
        let inst = BanditInstance::new(arms, RiskSpec::expectation(), 10).unwrap();
        assert_eq!(inst.shared_support(), None);
        let arms = vec![ArmModel::bernoulli(0.4).unwrap(), ArmModel::beta(1.0, 3.0).unwrap()];
        let inst = BanditInstance::new(arms, RiskSpec::expectation(), 101).unwrap();
        assert!(inst.has_continuous_arms());
        assert_eq!(inst.resolution(), 101);
    }
}
