#![allow(dead_code)]

use rand::Rng;

use riskbandit::distributions::{FiniteSupport, RngStream};
use riskbandit::risk::RiskSpec;

/// Binary relative entropy `kl(p, q)`.
pub fn binary_kl(p: f64, q: f64) -> f64 {
    let term = |a: f64, b: f64| if a == 0.0 { 0.0 } else { a * (a / b).ln() };
    term(p, q) + term(1.0 - p, 1.0 - q)
}

fn kl(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .map(|(&a, &b)| {
            if a == 0.0 {
                0.0
            } else if b == 0.0 {
                f64::INFINITY
            } else {
                a * (a / b).ln()
            }
        })
        .sum()
}

/// Smallest `KL(μ, q)` over grid points `q ∈ Δ^M` with coordinates in
/// `{0, 1/N, …, 1}` and `ρ(q) ≥ r`. Supports `M ≤ 2`.
pub fn grid_kinf(mu: &FiniteSupport, r: f64, spec: &RiskSpec, n: usize) -> f64 {
    let s = mu.support();
    let p = mu.probs();
    let nf = n as f64;
    let mut best = f64::INFINITY;
    let mut visit = |q: &[f64]| {
        if spec.eval_weighted(s, q) >= r {
            best = best.min(kl(p, q));
        }
    };
    match p.len() {
        1 => visit(&[1.0]),
        2 => {
            for i in 0..=n {
                let a = i as f64 / nf;
                visit(&[1.0 - a, a]);
            }
        }
        3 => {
            for i in 0..=n {
                for j in 0..=n - i {
                    let (a, b) = (i as f64 / nf, j as f64 / nf);
                    visit(&[a, b, ((n - i - j) as f64) / nf]);
                }
            }
        }
        m => panic!("grid oracle supports at most three atoms, got {m}"),
    }
    best
}

/// Expectation `K_inf` through its one-dimensional dual
/// `max_{0 ≤ λ ≤ 1/(s_max − r)} Σ μ_i ln(1 − λ (s_i − r))`, maximized by
/// golden-section search on the concave objective.
pub fn mean_kinf_dual(mu: &FiniteSupport, r: f64) -> f64 {
    let s = mu.support();
    let p = mu.probs();
    let smax = s[s.len() - 1];
    let f = |l: f64| -> f64 { s.iter().zip(p).map(|(&x, &w)| w * (1.0 - l * (x - r)).ln()).sum() };
    let (mut a, mut b) = (0.0, 1.0 / (smax - r));
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..200 {
        let c = b - phi * (b - a);
        let d = a + phi * (b - a);
        if f(c) < f(d) {
            a = c;
        } else {
            b = d;
        }
    }
    let mid = 0.5 * (a + b);
    f(mid).max(f(b * (1.0 - 1e-15)))
}

/// Upper-tail CVaR through `q_α + E[(X − q_α)_+] / (1 − α)` with the lower
/// `α`-quantile found by sorting.
pub fn cvar_quantile_form(values: &[f64], weights: &[f64], alpha: f64) -> f64 {
    let mut atoms: Vec<(f64, f64)> = values.iter().copied().zip(weights.iter().copied()).collect();
    atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut acc = 0.0;
    let mut q = atoms[atoms.len() - 1].0;
    for &(s, w) in &atoms {
        acc += w;
        if acc >= alpha - 1e-15 {
            q = s;
            break;
        }
    }
    let excess: f64 = atoms.iter().map(|&(s, w)| w * (s - q).max(0.0)).sum();
    q + excess / (1.0 - alpha)
}

pub fn random_simplex(len: usize, rng: &mut RngStream) -> Vec<f64> {
    let raw: Vec<f64> = (0..len).map(|_| -rng.random::<f64>().max(1e-300).ln()).collect();
    let s: f64 = raw.iter().sum();
    raw.iter().map(|x| x / s).collect()
}

/// Sorted distinct points of `[0, 1]`.
pub fn random_support(len: usize, rng: &mut RngStream) -> Vec<f64> {
    loop {
        let mut s: Vec<f64> = (0..len)
            .map(|_| (rng.random::<f64>() * 1000.0).round() / 1000.0)
            .collect();
        s.sort_by(f64::total_cmp);
        if s.windows(2).all(|w| w[1] - w[0] >= 0.05) {
            return s;
        }
    }
}

/// A random `K_inf` problem on at most three atoms: `μ` bounded away from the
/// faces, and a level reached by moving a fraction `u ∈ [0.05, 0.6]` of the way
/// toward the Dirac at the top atom.
pub fn random_kinf_instance(spec: &RiskSpec, rng: &mut RngStream) -> (FiniteSupport, f64) {
    let len = if rng.random::<bool>() { 2 } else { 3 };
    let support = random_support(len, rng);
    let d = random_simplex(len, rng);
    let mu: Vec<f64> = d.iter().map(|x| 0.85 * x + 0.15 / len as f64).collect();
    let u = 0.05 + 0.55 * rng.random::<f64>();
    let mut target: Vec<f64> = mu.iter().map(|x| (1.0 - u) * x).collect();
    target[len - 1] += u;
    let r = spec.eval_weighted(&support, &target);
    (FiniteSupport::new(support, mu).unwrap(), r)
}
