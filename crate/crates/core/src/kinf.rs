//! `K_inf(μ, r) = inf { KL(μ, q) : q ∈ Δ^M, ρ(D_S(q)) ≥ r }`.
//!
//! Every solver below works on the same inner problem, minimizing
//! `KL(μ, q) + h(q)` over the simplex. Each step linearizes `h` and solves
//! `min_q KL(μ, q) + ⟨∇h, q⟩` exactly (a one-dimensional root find in the
//! normalizing multiplier), then backtracks along the segment towards that
//! point. The drop in the linearized objective bounds the suboptimality when
//! `h` is convex and is used as the stopping gap.
//!
//! * `M = 1`: exact search along the segment `q = (1 − x, x)`.
//! * concave `ρ`: bisection on the multiplier `λ` of `min KL − λρ`; the two
//!   bracketing solutions give a certified interval for the value.
//! * otherwise: augmented Lagrangian from 16 starts, best feasible kept.

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Serialize, Serializer};

use crate::distributions::{flat_dirichlet_into, kl_unchecked, FiniteSupport, RngStream};
use crate::error::{Error, Result};
use crate::risk::{DistortionFunction, RiskBase, RiskSpec};

/// Constraint slack: `q` counts as feasible when `ρ(q) ≥ r − FEASIBILITY_SLACK`.
pub const FEASIBILITY_SLACK: f64 = 1e-9;

/// `ρ(q*) ≥ r − BINDING_TOL` marks the constraint as active.
pub const BINDING_TOL: f64 = 1e-6;

/// Lower clip for coordinates charged by `μ`.
const Q_FLOOR: f64 = 1e-12;

const LAMBDA_CAP: f64 = 1e14;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KinfOptions {
    pub tol_abs: f64,
    pub tol_rel: f64,
    /// Inner iterations per subproblem.
    pub max_iter: usize,
    /// Bisection steps or augmented-Lagrangian rounds.
    pub max_outer: usize,
    pub starts: usize,
    pub seed: u64,
    /// Grid used to locate the first feasible point on each side when `M = 1`.
    pub path_grid: usize,
}

impl Default for KinfOptions {
    fn default() -> Self {
        Self {
            tol_abs: 1e-8,
            tol_rel: 1e-6,
            max_iter: 20_000,
            max_outer: 200,
            starts: 16,
            seed: 0x6b69_6e66,
            path_grid: 4096,
        }
    }
}

impl KinfOptions {
    fn tol(&self, value: f64) -> f64 {
        self.tol_abs.max(self.tol_rel * value.abs())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum KinfMethod {
    /// `ρ(μ) ≥ r`.
    Trivial,
    /// `r` above every attainable risk.
    Infeasible,
    Path,
    Multiplier,
    AugmentedLagrangian,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolverTrace {
    pub method: KinfMethod,
    pub iterations: usize,
    /// Final stationarity gap of the inner problem.
    pub final_gap: f64,
    pub starts: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KinfResult {
    #[serde(serialize_with = "serialize_extended")]
    pub value: f64,
    pub argmin: Option<Vec<f64>>,
    pub binding: bool,
    pub trace: SolverTrace,
}

impl KinfResult {
    pub fn is_infinite(&self) -> bool {
        self.value.is_infinite()
    }
}

/// Writes infinities as the strings `"inf"` / `"-inf"`.
pub fn serialize_extended<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_infinite() {
        s.serialize_str(if *v > 0.0 { "inf" } else { "-inf" })
    } else {
        s.serialize_f64(*v)
    }
}

struct Problem<'a> {
    mu: &'a [f64],
    support: &'a [f64],
    spec: &'a RiskSpec,
    r: f64,
}

impl Problem<'_> {
    fn rho(&self, q: &[f64]) -> f64 {
        self.spec.eval_weighted(self.support, q)
    }

    fn kl(&self, q: &[f64]) -> f64 {
        kl_unchecked(self.mu, q)
    }
}

#[derive(Debug, Clone)]
struct Candidate {
    q: Vec<f64>,
    value: f64,
    iterations: usize,
    gap: f64,
    converged: bool,
}

pub fn kinf_solve(mu: &FiniteSupport, r: f64, spec: &RiskSpec, opts: &KinfOptions) -> Result<KinfResult> {
    if !r.is_finite() {
        return Err(Error::InvalidParameter {
            name: "r",
            value: r,
            reason: "risk level must be finite",
        });
    }
    let p = Problem {
        mu: mu.probs(),
        support: mu.support(),
        spec,
        r,
    };
    if p.rho(p.mu) >= r - FEASIBILITY_SLACK {
        return Ok(KinfResult {
            value: 0.0,
            argmin: Some(p.mu.to_vec()),
            binding: false,
            trace: trace(KinfMethod::Trivial, 0, 0.0, 0),
        });
    }
    let (rho_max, q_max) = risk_max(p.support, spec);
    if r > rho_max + FEASIBILITY_SLACK {
        return Ok(infeasible(0));
    }

    let (cand, method, starts) = if p.mu.len() == 2 {
        (solve_path(&p, opts), KinfMethod::Path, 1)
    } else if spec.is_concave() {
        match solve_multiplier(&p, opts)? {
            Some(c) => (c, KinfMethod::Multiplier, 1),
            None => return Ok(infeasible(0)),
        }
    } else {
        let c = solve_multistart(&p, &q_max, opts);
        (c, KinfMethod::AugmentedLagrangian, opts.starts.max(1))
    };

    if cand.value.is_infinite() {
        return Ok(infeasible(cand.iterations));
    }
    if !cand.converged {
        return Err(Error::SolverBudget {
            best_value: cand.value,
            iterations: cand.iterations,
        });
    }
    let rho = p.rho(&cand.q);
    Ok(KinfResult {
        value: cand.value,
        binding: rho <= r + BINDING_TOL,
        argmin: Some(cand.q),
        trace: trace(method, cand.iterations, cand.gap, starts),
    })
}

/// `inf { KL(μ, q) : ρ(q) ≤ r }`, the lower-tail counterpart.
pub fn kinf_solve_below(mu: &FiniteSupport, r: f64, spec: &RiskSpec, opts: &KinfOptions) -> Result<KinfResult> {
    kinf_solve(mu, -r, &spec.negated(), opts)
}

fn trace(method: KinfMethod, iterations: usize, final_gap: f64, starts: usize) -> SolverTrace {
    SolverTrace {
        method,
        iterations,
        final_gap,
        starts,
    }
}

fn infeasible(iterations: usize) -> KinfResult {
    KinfResult {
        value: f64::INFINITY,
        argmin: None,
        binding: false,
        trace: trace(KinfMethod::Infeasible, iterations, 0.0, 0),
    }
}

/// Largest risk over the simplex and a maximizer. Exact for convex specs
/// (the maximum sits at a vertex); otherwise vertices plus mirror ascent.
pub fn risk_max(support: &[f64], spec: &RiskSpec) -> (f64, Vec<f64>) {
    let n = support.len();
    let mut best = (f64::NEG_INFINITY, vec![0.0; n]);
    for (i, &s) in support.iter().enumerate() {
        let v = spec.eval_dirac(s);
        if v > best.0 {
            let mut e = vec![0.0; n];
            e[i] = 1.0;
            best = (v, e);
        }
    }
    if spec.is_convex() || n == 1 {
        return best;
    }
    let uniform = vec![1.0 / n as f64; n];
    let towards_best: Vec<f64> = best.1.iter().map(|&e| 0.5 * e + 0.5 / n as f64).collect();
    for start in [uniform, towards_best] {
        let (v, q) = mirror_ascent(support, spec, start, 2000);
        if v > best.0 {
            best = (v, q);
        }
    }
    best
}

fn mirror_ascent(support: &[f64], spec: &RiskSpec, mut q: Vec<f64>, iters: usize) -> (f64, Vec<f64>) {
    let n = q.len();
    let mut grad = vec![0.0; n];
    let mut trial = vec![0.0; n];
    let mut trial_grad = vec![0.0; n];
    let mut value = spec.value_and_gradient(support, &q, &mut grad);
    let mut eta = 1.0;
    for _ in 0..iters {
        let mut accepted = false;
        while eta > 1e-12 {
            let top = grad.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut z = 0.0;
            for i in 0..n {
                trial[i] = q[i] * (eta * (grad[i] - top)).exp();
                z += trial[i];
            }
            trial.iter_mut().for_each(|t| *t /= z);
            let v = spec.value_and_gradient(support, &trial, &mut trial_grad);
            if v > value {
                std::mem::swap(&mut q, &mut trial);
                std::mem::swap(&mut grad, &mut trial_grad);
                let gain = v - value;
                value = v;
                eta *= 2.0;
                accepted = gain > 1e-15;
                break;
            }
            eta *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    (value, q)
}

/// `argmin −Σ μ_i log q_i + ⟨g, q⟩` over `{q ≥ 0, Σ q = mass}`.
///
/// Charged coordinates take `μ_i / (ν + g_i)`; uncharged ones stay at zero
/// unless the cheapest of them binds the multiplier, in which case it takes
/// the leftover mass.
fn kl_linear_argmin(mu: &[f64], g: &[f64], mass: f64, out: &mut [f64]) {
    let charge: f64 = mu.iter().sum();
    let mut nu_lo = f64::NEG_INFINITY;
    let mut free: Option<(usize, f64)> = None;
    for (i, (&m, &gi)) in mu.iter().zip(g).enumerate() {
        if m > 0.0 {
            nu_lo = nu_lo.max(-gi);
        } else if free.is_none_or(|(_, best)| gi < best) {
            free = Some((i, gi));
        }
    }
    if charge <= 0.0 {
        out.iter_mut().for_each(|o| *o = 0.0);
        if let Some((j, _)) = free {
            out[j] = mass;
        }
        return;
    }
    let total = |nu: f64| -> (f64, f64) {
        let mut s = 0.0;
        let mut ds = 0.0;
        for (&m, &gi) in mu.iter().zip(g) {
            if m > 0.0 {
                let d = nu + gi;
                s += m / d;
                ds -= m / (d * d);
            }
        }
        (s, ds)
    };
    let mut a = nu_lo;
    if let Some((j, gz)) = free {
        if -gz > nu_lo {
            let (s, _) = total(-gz);
            if s <= mass {
                for (i, o) in out.iter_mut().enumerate() {
                    *o = if mu[i] > 0.0 { mu[i] / (g[i] - gz) } else { 0.0 };
                }
                out[j] = mass - s;
                return;
            }
            a = -gz;
        }
    }
    // the mass is convex and decreasing in ν on (a, ∞); it drops below
    // `mass` by ν = nu_lo + charge / mass
    let mut b = nu_lo.max(a) + charge / mass;
    let mut nu = b;
    for _ in 0..200 {
        let (s, ds) = total(nu);
        if s > mass {
            a = nu;
        } else {
            b = nu;
        }
        if (s - mass).abs() <= 1e-15 * mass || b - a <= 1e-16 * nu.abs().max(1.0) {
            break;
        }
        let step = nu - (s - mass) / ds;
        nu = if step > a && step < b { step } else { 0.5 * (a + b) };
    }
    let mut sum = 0.0;
    for (i, o) in out.iter_mut().enumerate() {
        *o = if mu[i] > 0.0 {
            (mu[i] / (nu + g[i])).max(Q_FLOOR * mass)
        } else {
            0.0
        };
        sum += *o;
    }
    out.iter_mut().for_each(|o| *o *= mass / sum);
}

/// A term `κ·max(0, T_j(q) − τ)` with `T_j(q) = Σ_{i≥j} q_i`, kept exact in
/// the step model.
#[derive(Debug, Clone, Copy)]
struct Kink {
    j: usize,
    tau: f64,
    kappa: f64,
}

impl Kink {
    fn eval(&self, q: &[f64]) -> f64 {
        self.kappa * (tail(q, self.j) - self.tau).max(0.0)
    }
}

fn tail(q: &[f64], j: usize) -> f64 {
    q[j..].iter().sum()
}

/// `argmin KL(μ, q) + ⟨g, q⟩ + kink(q)` over the simplex.
fn model_argmin(mu: &[f64], g: &[f64], kink: Option<Kink>, out: &mut [f64], scratch: &mut [f64]) {
    kl_linear_argmin(mu, g, 1.0, out);
    let Some(k) = kink else { return };
    if tail(out, k.j) <= k.tau {
        return;
    }
    scratch.copy_from_slice(g);
    scratch[k.j..].iter_mut().for_each(|x| *x += k.kappa);
    kl_linear_argmin(mu, scratch, 1.0, out);
    if tail(out, k.j) >= k.tau {
        return;
    }
    // optimum on the kink: the two blocks carry fixed masses
    let (head, rest) = out.split_at_mut(k.j);
    kl_linear_argmin(&mu[..k.j], &g[..k.j], 1.0 - k.tau, head);
    kl_linear_argmin(&mu[k.j..], &g[k.j..], k.tau, rest);
}

struct InnerStats {
    iterations: usize,
    gap: f64,
    converged: bool,
}

/// Minimizes `F(q) = KL(μ, q) + φ(ρ(q))` from `q`, where `phi` returns
/// `(φ(ρ), φ'(ρ))`.
///
/// The step model keeps `KL` exact, linearizes `ρ` and, when `φ' < 0`,
/// represents the CVaR corner nearest to the iterate exactly. For concave
/// `ρ` and affine `φ` the model minorizes `F`, so the returned gap bounds
/// `F(q) − min F`.
fn minimize_composite<P>(p: &Problem, q: &mut Vec<f64>, phi: P, max_iter: usize, gap_tol: f64) -> InnerStats
where
    P: Fn(f64) -> (f64, f64),
{
    let n = q.len();
    let mut rho_grad = vec![0.0; n];
    let mut g = vec![0.0; n];
    let mut target = vec![0.0; n];
    let mut scratch = vec![0.0; n];
    let mut trial = vec![0.0; n];
    let mut rho = p.spec.value_and_gradient(p.support, q, &mut rho_grad);
    let mut f = p.kl(q) + phi(rho).0;
    let mut gap = f64::INFINITY;
    for it in 0..max_iter {
        let slope = phi(rho).1;
        let kink = if slope < 0.0 {
            nearest_corner(p, q, &mut rho_grad)
        } else {
            None
        };
        let kink = kink.map(|(k, w)| Kink { kappa: -slope * w, ..k });
        for i in 0..n {
            g[i] = slope * rho_grad[i];
        }
        model_argmin(p.mu, &g, kink, &mut target, &mut scratch);
        let model = |x: &[f64]| p.kl(x) + dot(&g, x) + kink.map_or(0.0, |k| k.eval(x));
        gap = model(q) - model(&target);
        if gap.is_nan() || gap <= gap_tol {
            return InnerStats {
                iterations: it,
                gap: gap.max(0.0),
                converged: true,
            };
        }
        let mut t = 1.0;
        loop {
            for i in 0..n {
                trial[i] = q[i] + t * (target[i] - q[i]);
            }
            let rho_t = p.rho(&trial);
            let ft = p.kl(&trial) + phi(rho_t).0;
            if ft <= f - 1e-4 * t * gap {
                std::mem::swap(q, &mut trial);
                f = ft;
                rho = p.spec.value_and_gradient(p.support, q, &mut rho_grad);
                break;
            }
            t *= 0.5;
            if t < 1e-18 {
                return InnerStats {
                    iterations: it,
                    gap,
                    converged: gap <= 1e3 * gap_tol,
                };
            }
        }
    }
    InnerStats {
        iterations: max_iter,
        gap,
        converged: false,
    }
}

/// The CVaR corner `T_j = 1 − α` closest to `q` over all positively weighted
/// CVaR terms. Adjusts `rho_grad` to the slope below the corner and returns
/// the corner with its weight `λ Δs_j / (1 − α)`.
fn nearest_corner(p: &Problem, q: &[f64], rho_grad: &mut [f64]) -> Option<(Kink, f64)> {
    let n = q.len();
    let mut tails = vec![0.0; n];
    let mut acc = 0.0;
    for j in (0..n).rev() {
        acc += q[j];
        tails[j] = acc;
    }
    let mut best: Option<(f64, Kink, f64)> = None;
    for term in p.spec.terms() {
        let RiskBase::Distortion(DistortionFunction::Cvar { alpha }) = term.base else {
            continue;
        };
        if term.coef <= 0.0 || alpha <= 0.0 {
            continue;
        }
        let tau = 1.0 - alpha;
        for (j, &tail) in tails.iter().enumerate().take(n).skip(1) {
            let ds = p.support[j] - p.support[j - 1];
            let dist = (tail - tau).abs();
            if best.as_ref().is_none_or(|b| dist < b.0) {
                let w = term.coef * ds / tau;
                best = Some((dist, Kink { j, tau, kappa: 0.0 }, w));
            }
        }
    }
    let (_, kink, w) = best?;
    if tails[kink.j] >= kink.tau {
        // the gradient used the flat side of the corner
        rho_grad[kink.j..].iter_mut().for_each(|x| *x += w);
    }
    Some((kink, w))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

const INNER_GAP: f64 = 1e-13;

/// Two-point alphabet: `KL` is convex along `x = q_1` with its minimum at
/// `μ_1`, so the optimum is the first feasible point on one of the two sides.
fn solve_path(p: &Problem, opts: &KinfOptions) -> Candidate {
    let m1 = p.mu[1];
    let rho_at = |x: f64| p.rho(&[1.0 - x, x]);
    let kl_at = |x: f64| p.kl(&[1.0 - x, x]);
    let steps = opts.path_grid.max(16);
    let mut best = f64::INFINITY;
    let mut best_x = m1;
    for end in [1.0, 0.0] {
        let mut prev = m1;
        for k in 1..=steps {
            let x = m1 + (end - m1) * k as f64 / steps as f64;
            if rho_at(x) >= p.r {
                let (mut lo, mut hi) = (prev, x);
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if mid == lo || mid == hi {
                        break;
                    }
                    if rho_at(mid) >= p.r {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                let v = kl_at(hi);
                if v < best {
                    best = v;
                    best_x = hi;
                }
                break;
            }
            prev = x;
        }
    }
    Candidate {
        q: vec![1.0 - best_x, best_x],
        value: best,
        iterations: steps,
        gap: 0.0,
        converged: true,
    }
}

/// Concave `ρ`: `λ ↦ ρ(q_λ)` is non-decreasing for `q_λ = argmin KL − λρ`.
/// An infeasible `q_lo` lower-bounds the value by weak duality and a feasible
/// `q_hi` upper-bounds it.
fn solve_multiplier(p: &Problem, opts: &KinfOptions) -> Result<Option<Candidate>> {
    let mut iterations = 0;
    let mut last_gap = 0.0;
    let mut inner_ok = true;
    let mut solve = |lambda: f64, q: &mut Vec<f64>| {
        let stats = minimize_composite(p, q, |rho| (-lambda * rho, -lambda), opts.max_iter, INNER_GAP);
        iterations += stats.iterations;
        last_gap = stats.gap;
        inner_ok &= stats.converged;
    };

    let mut lo = (0.0, p.mu.to_vec());
    let mut hi_lambda = 1.0;
    let mut q = p.mu.to_vec();
    loop {
        solve(hi_lambda, &mut q);
        if p.rho(&q) >= p.r {
            break;
        }
        lo = (hi_lambda, q.clone());
        hi_lambda *= 4.0;
        if hi_lambda > LAMBDA_CAP {
            return Ok(None);
        }
    }
    let mut hi = (hi_lambda, q.clone());
    let mut kl_lo = p.kl(&lo.1);
    let mut kl_hi = p.kl(&hi.1);
    let mut converged = false;
    for _ in 0..opts.max_outer {
        if kl_hi - kl_lo <= 0.5 * opts.tol(kl_hi) {
            converged = true;
            break;
        }
        let lambda = if lo.0 > 0.0 && hi.0 / lo.0 > 4.0 {
            (lo.0 * hi.0).sqrt()
        } else {
            0.5 * (lo.0 + hi.0)
        };
        if lambda <= lo.0 || lambda >= hi.0 {
            converged = true;
            break;
        }
        let mut q = hi.1.clone();
        solve(lambda, &mut q);
        if p.rho(&q) >= p.r {
            kl_hi = p.kl(&q);
            hi = (lambda, q);
        } else {
            kl_lo = p.kl(&q);
            lo = (lambda, q);
        }
    }
    // tighten along the bracketing segment
    let point = segment_crossing(p, &lo.1, &hi.1);
    let value = p.kl(&point).min(kl_hi);
    let q = if p.kl(&point) <= kl_hi { point } else { hi.1 };
    Ok(Some(Candidate {
        q,
        value,
        iterations,
        gap: last_gap,
        converged: converged && inner_ok,
    }))
}

/// Smallest `t` with `ρ((1 − t) a + t b) ≥ r`, given `ρ(b) ≥ r`.
fn segment_crossing(p: &Problem, a: &[f64], b: &[f64]) -> Vec<f64> {
    let mix = |t: f64| -> Vec<f64> { a.iter().zip(b).map(|(x, y)| (1.0 - t) * x + t * y).collect() };
    if p.rho(a) >= p.r {
        return a.to_vec();
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if p.rho(&mix(mid)) >= p.r {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    mix(hi)
}

fn starting_points(p: &Problem, opts: &KinfOptions) -> Vec<Vec<f64>> {
    let n = p.mu.len();
    let total = opts.starts.max(1);
    let uniform = 1.0 / n as f64;
    let mut starts = vec![p.mu.iter().map(|&m| 0.9 * m + 0.1 * uniform).collect::<Vec<_>>()];
    // vertices from the top of the alphabet down, smoothed into the interior
    for i in (0..n).rev() {
        if starts.len() >= total.min(n + 1) {
            break;
        }
        let mut v: Vec<f64> = (0..n).map(|_| 0.1 * uniform).collect();
        v[i] += 0.9;
        starts.push(v);
    }
    let mut rng = RngStream::new(opts.seed);
    let mut buf = Vec::new();
    while starts.len() < total {
        flat_dirichlet_into(n, &mut rng, &mut buf);
        starts.push(buf.iter().map(|&x| 0.99 * x + 0.01 * uniform).collect());
    }
    starts
}

/// Every start is first run at loose tolerance; the few best distinct
/// candidates are then polished to full precision.
fn solve_multistart(p: &Problem, q_max: &[f64], opts: &KinfOptions) -> Candidate {
    let loose: Vec<Candidate> = starting_points(p, opts)
        .into_par_iter()
        .map(|start| {
            let q = first_crossing(p, p.mu, &start, 64).unwrap_or_else(|| segment_crossing(p, &start, q_max));
            augmented_loop(p, q, q_max, opts, &Precision::LOOSE)
        })
        .collect();
    let mut iterations: usize = loose.iter().map(|c| c.iterations).sum();
    let mut order: Vec<&Candidate> = loose.iter().collect();
    order.sort_by(|a, b| candidate_cmp(a, b));
    let mut picked: Vec<&Candidate> = Vec::new();
    for c in order {
        if picked.len() == POLISH_COUNT {
            break;
        }
        let distinct = picked
            .iter()
            .all(|d| c.q.iter().zip(&d.q).any(|(x, y)| (x - y).abs() > POLISH_DISTINCT));
        if distinct {
            picked.push(c);
        }
    }
    let polished: Vec<Candidate> = picked
        .into_par_iter()
        .map(|c| augmented_loop(p, c.q.clone(), q_max, opts, &Precision::FULL))
        .collect();
    iterations += polished.iter().map(|c| c.iterations).sum::<usize>();
    let any_converged = polished.iter().any(|c| c.converged);
    let mut best = polished
        .into_iter()
        .filter(|c| c.converged || !any_converged)
        .min_by(candidate_cmp)
        .expect("at least one start");
    best.iterations = iterations;
    best
}

const POLISH_COUNT: usize = 3;
const POLISH_DISTINCT: f64 = 1e-4;

fn candidate_cmp(a: &Candidate, b: &Candidate) -> Ordering {
    a.value
        .partial_cmp(&b.value)
        .unwrap_or(Ordering::Equal)
        .then_with(|| lex_cmp(&a.q, &b.q))
}

fn lex_cmp(a: &[f64], b: &[f64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.partial_cmp(y) {
            Some(Ordering::Equal) | None => continue,
            Some(o) => return o,
        }
    }
    Ordering::Equal
}

/// First point of the segment `a → b` with `ρ ≥ r`, scanning before bisecting
/// so that the crossing nearest to `a` is found. `None` when `b` is infeasible.
fn first_crossing(p: &Problem, a: &[f64], b: &[f64], steps: usize) -> Option<Vec<f64>> {
    let mix = |t: f64| -> Vec<f64> { a.iter().zip(b).map(|(x, y)| (1.0 - t) * x + t * y).collect() };
    let mut prev = 0.0;
    for k in 1..=steps {
        let t = k as f64 / steps as f64;
        if p.rho(&mix(t)) >= p.r {
            let (mut lo, mut hi) = (prev, t);
            for _ in 0..100 {
                let mid = 0.5 * (lo + hi);
                if p.rho(&mix(mid)) >= p.r {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            return Some(mix(hi));
        }
        prev = t;
    }
    None
}

/// Least-squares multiplier for `∇KL = λ∇ρ + ν1` at `q`.
fn multiplier_estimate(p: &Problem, q: &[f64]) -> f64 {
    let n = q.len();
    let mut grad = vec![0.0; n];
    p.spec.value_and_gradient(p.support, q, &mut grad);
    let a: Vec<f64> =
        p.mu.iter()
            .zip(q)
            .map(|(&m, &x)| if m > 0.0 { -m / x } else { 0.0 })
            .collect();
    let center = |v: &[f64]| -> Vec<f64> {
        let m = v.iter().sum::<f64>() / n as f64;
        v.iter().map(|x| x - m).collect()
    };
    let (a, b) = (center(&a), center(&grad));
    let bb = dot(&b, &b);
    if bb > 0.0 {
        (dot(&a, &b) / bb).max(0.0)
    } else {
        0.0
    }
}

struct Precision {
    inner_gap: f64,
    feasibility: f64,
    /// Bound on `λ·|ρ − r|` in units of `tol_abs`.
    complementarity: f64,
    iter_scale: usize,
}

impl Precision {
    const LOOSE: Self = Self {
        inner_gap: 1e-9,
        feasibility: 1e-7,
        complementarity: 100.0,
        iter_scale: 10,
    };
    const FULL: Self = Self {
        inner_gap: 1e-11,
        feasibility: FEASIBILITY_SLACK,
        complementarity: 1.0,
        iter_scale: 1,
    };
}

fn augmented_loop(p: &Problem, mut q: Vec<f64>, q_max: &[f64], opts: &KinfOptions, prec: &Precision) -> Candidate {
    let mut lambda = multiplier_estimate(p, &q);
    let mut c: f64 = 100.0;
    let mut prev_violation = f64::INFINITY;
    let mut iterations = 0;
    let mut gap = 0.0;
    let mut converged = false;
    let max_iter = (opts.max_iter / prec.iter_scale).max(100);
    for _ in 0..opts.max_outer {
        let stats = minimize_composite(
            p,
            &mut q,
            |rho| {
                let m = (lambda - c * (rho - p.r)).max(0.0);
                ((m * m - lambda * lambda) / (2.0 * c), -m)
            },
            max_iter,
            prec.inner_gap,
        );
        iterations += stats.iterations;
        gap = stats.gap;
        let rho = p.rho(&q);
        let violation = (p.r - rho).max(0.0);
        // KL error is about λ·|ρ − r| at a stationary point
        let complementary = lambda * (rho - p.r).abs() <= prec.complementarity * opts.tol_abs;
        if stats.converged && violation <= prec.feasibility && complementary {
            converged = true;
            break;
        }
        lambda = (lambda - c * (rho - p.r)).max(0.0);
        if violation > 0.25 * prev_violation && violation > prec.feasibility {
            c = (c * 10.0).min(1e6);
        }
        prev_violation = violation;
    }
    if p.rho(&q) < p.r {
        // the remaining slack is closed exactly, at a KL cost of about λ·slack
        q = segment_crossing(p, &q, q_max);
    }
    Candidate {
        value: p.kl(&q),
        q,
        iterations,
        gap,
        converged,
    }
}

/// Brute-force minimum of `KL(μ, q)` over the grid `q ∈ Δ^M ∩ (ℤ/resolution)^{M+1}`
/// subject to `ρ(q) ≥ r`. An upper bound on `K_inf` that converges for
/// continuous `ρ` as the mesh shrinks.
pub fn kinf_grid_oracle(mu: &FiniteSupport, r: f64, spec: &RiskSpec, resolution: usize) -> Result<f64> {
    const MAX_DIM: usize = 3;
    if mu.dim() > MAX_DIM {
        return Err(Error::AlphabetTooLarge {
            m: mu.dim(),
            max: MAX_DIM,
        });
    }
    if resolution < 100 {
        return Err(Error::InvalidParameter {
            name: "resolution",
            value: resolution as f64,
            reason: "grid resolution must be at least 100",
        });
    }
    let mut best = f64::INFINITY;
    for_each_grid_point(mu.len(), resolution, |q| {
        if spec.eval_weighted(mu.support(), q) >= r {
            best = best.min(kl_unchecked(mu.probs(), q));
        }
    });
    Ok(best)
}

/// Calls `f` on every `q ∈ Δ^{n−1}` with coordinates in `{0, 1/res, …, 1}`.
pub(crate) fn for_each_grid_point(n: usize, res: usize, mut f: impl FnMut(&[f64])) {
    fn rec(counts: &mut Vec<usize>, q: &mut Vec<f64>, k: usize, left: usize, res: usize, f: &mut dyn FnMut(&[f64])) {
        let n = counts.len();
        if k == n - 1 {
            counts[k] = left;
            q[k] = left as f64 / res as f64;
            f(q);
            return;
        }
        for c in 0..=left {
            counts[k] = c;
            q[k] = c as f64 / res as f64;
            rec(counts, q, k + 1, left - c, res, f);
        }
    }
    let mut counts = vec![0; n];
    let mut q = vec![0.0; n];
    rec(&mut counts, &mut q, 0, res, res, &mut f);
}

/// `K_inf(μ, r)` along an ascending grid of levels. Budget failures report
/// the best value found.
pub fn kinf_monotonicity_scan(
    mu: &FiniteSupport,
    spec: &RiskSpec,
    r_grid: &[f64],
    opts: &KinfOptions,
) -> Vec<(f64, f64)> {
    r_grid
        .iter()
        .map(|&r| {
            let v = match kinf_solve(mu, r, spec, opts) {
                Ok(res) => res.value,
                Err(Error::SolverBudget { best_value, .. }) => best_value,
                Err(_) => f64::NAN,
            };
            (r, v)
        })
        .collect()
}
