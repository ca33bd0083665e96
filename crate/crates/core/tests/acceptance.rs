//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any FAIL.

mod common;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use rand::Rng;

use common::{binary_kl, cvar_quantile_form, grid_kinf, random_kinf_instance, random_simplex, random_support};
use riskbandit::bandit::{run_replications, BanditInstance, PolicyKind};
use riskbandit::bounds::{c1, c2, dominance_grid_check, tail_bound_report, Direction, DOMINANCE_RESOLUTION};
use riskbandit::distributions::{DirichletParams, FiniteSupport, RngStream};
use riskbandit::experiments::{run_experiment, ExperimentConfig, TRACE_FILE};
use riskbandit::kinf::{kinf_solve, KinfOptions};
use riskbandit::risk::{distorted_risk, parse_risk_expr, risk_eval, DistortionFunction};

type Check = Box<dyn Fn() -> Outcome>;

struct Outcome {
    pass: bool,
    detail: String,
}

fn config(name: &str) -> ExperimentConfig {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name);
    ExperimentConfig::from_file(&path).expect("acceptance config")
}

/// Mean regret at n = 5000 inside `band`, at least 0.8 ℓ(5000), and, when
/// given, wall clock below `budget` seconds.
fn beta_instance(name: &str, band: (f64, f64), budget: Option<f64>) -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config(name);
    cfg.out = dir.path().to_path_buf();
    let start = Instant::now();
    let out = run_experiment(&cfg).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let n = out.trace.horizon();
    let regret = out.trace.final_mean();
    let ell = out.meta.lower_bound.at(n);
    let in_band = band.0 <= regret && regret <= band.1;
    let above_ell = regret >= 0.8 * ell;
    let fast = budget.is_none_or(|b| secs <= b);
    Outcome {
        pass: in_band && above_ell && fast,
        detail: format!(
            "mean regret(n={n}) = {regret:.3} (std {:.3}), band [{}, {}] {}; l(n) = {ell:.3}, regret >= 0.8 l(n) {}; {secs:.1}s{}",
            out.trace.final_std(),
            band.0,
            band.1,
            ok(in_band),
            ok(above_ell),
            budget.map_or(String::new(), |b| format!(" (budget {b}s) {}", ok(fast))),
        ),
    }
}

fn ok(b: bool) -> &'static str {
    if b {
        "ok"
    } else {
        "MISSED"
    }
}

fn criterion_3() -> Outcome {
    let cfg = config("bernoulli_mts.toml");
    let start = Instant::now();
    let inst = BanditInstance::new(cfg.arms.clone(), cfg.risk_spec().unwrap(), cfg.resolution).unwrap();
    let trace = run_replications(&inst, PolicyKind::Mts, cfg.horizon, cfg.reps, cfg.seed).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let kinf = kinf_solve(
        &FiniteSupport::bernoulli(0.1).unwrap(),
        0.9,
        inst.spec(),
        &KinfOptions::default(),
    )
    .unwrap()
    .value;
    let kl = binary_kl(0.1, 0.9);
    let n = cfg.horizon;
    let rate = trace.final_mean() / (n as f64).ln();
    let ratio = rate / (0.8 / kinf);
    let kinf_ok = (kinf - kl).abs() <= 1e-6;
    let ratio_ok = (0.5..=2.0).contains(&ratio);
    Outcome {
        pass: kinf_ok && ratio_ok && secs <= 30.0,
        detail: format!(
            "regret/ln n = {rate:.4}, ratio to gap/K_inf = {ratio:.3} {}; K_inf = {kinf:.10} vs kl = {kl:.10} {}; {secs:.2}s",
            ok(ratio_ok),
            ok(kinf_ok)
        ),
    }
}

fn criterion_4() -> Outcome {
    let opts = KinfOptions::default();
    let mut rng = RngStream::new(4);
    let mut worst: f64 = 0.0;
    let mut zero_ok = true;
    for (i, text) in ["mean()", "cvar(0.5)", "prop(0.7)", "mv(0.5)"]
        .iter()
        .cycle()
        .take(100)
        .enumerate()
    {
        let spec = parse_risk_expr(text).unwrap();
        let (mu, r) = random_kinf_instance(&spec, &mut rng);
        let got = kinf_solve(&mu, r, &spec, &opts).unwrap().value;
        let oracle = grid_kinf(&mu, r, &spec, 400);
        worst = worst.max((got - oracle).abs());
        let below = spec.eval(&mu) - 0.1 * rng.random::<f64>();
        for level in [spec.eval(&mu), below] {
            if kinf_solve(&mu, level, &spec, &opts).unwrap().value != 0.0 {
                zero_ok = false;
                eprintln!("instance {i}: nonzero K_inf at a level met by the arm");
            }
        }
    }
    let mean = parse_risk_expr("mean()").unwrap();
    let mut bern_worst: f64 = 0.0;
    for _ in 0..50 {
        let p = 0.02 + 0.9 * rng.random::<f64>();
        let r = p + (0.999 - p) * (0.01 + 0.98 * rng.random::<f64>());
        let got = kinf_solve(&FiniteSupport::bernoulli(p).unwrap(), r, &mean, &opts)
            .unwrap()
            .value;
        bern_worst = bern_worst.max((got - binary_kl(p, r)).abs());
    }
    Outcome {
        pass: worst <= 5e-3 && zero_ok && bern_worst <= 1e-6,
        detail: format!(
            "max |solve - grid oracle| = {worst:.2e} (tol 5e-3); zero checks {}; max Bernoulli |K_inf - kl| = {bern_worst:.2e} (tol 1e-6)",
            ok(zero_ok)
        ),
    }
}

fn criterion_5() -> Outcome {
    let opts = KinfOptions::default();
    let mut pass = true;
    let mut parts = Vec::new();
    for text in ["mean()", "cvar(0.5)"] {
        let spec = parse_risk_expr(text).unwrap();
        for n in [50u64, 100] {
            let alpha = vec![n * 7 / 10, n * 3 / 10];
            let params = DirichletParams::new(alpha).unwrap();
            let support = [0.0, 1.0];
            let r = spec.eval_weighted(&support, &params.mean()) + 0.15;
            let rep = tail_bound_report(&params, &support, r, &spec, Direction::AtLeast, 100_000, n, &opts).unwrap();
            let slack = 2.0 * rep.ci_halfwidth;
            let lower = rep.lower_bound.unwrap_or(f64::NAN);
            let good = rep.mc_estimate <= rep.upper_bound + slack && rep.mc_estimate >= lower - slack;
            pass &= good;
            parts.push(format!(
                "{text} n={n}: {lower:.3e} <= {:.3e} <= {:.3e} {}",
                rep.mc_estimate,
                rep.upper_bound,
                ok(good)
            ));
        }
    }
    let tau = 2.0 * std::f64::consts::PI;
    let c1_closed = (1.0f64 / 12.0).exp() / tau.sqrt();
    let c2_closed = tau.sqrt() * (1.0f64 / 2.13).sqrt();
    let consts = (c1(1) - c1_closed).abs() <= 1e-12 && (c2(1) - c2_closed).abs() <= 1e-12;
    pass &= consts;
    parts.push(format!("C1(1) = {:.9}, C2(1) = {:.9} {}", c1(1), c2(1), ok(consts)));
    Outcome {
        pass,
        detail: parts.join("; "),
    }
}

fn criterion_6() -> Outcome {
    let mut rng = RngStream::new(6);
    let mut failures = Vec::new();
    let mut checked = 0;
    for text in ["mean()", "cvar(0.5)", "cvar(0.9)", "prop(0.7)", "lb(0.6)"] {
        let spec = parse_risk_expr(text).unwrap();
        for len in [2usize, 3] {
            let expect: Vec<usize> = (0..len - 1).collect();
            for _ in 0..50 {
                let support = random_support(len, &mut rng);
                let p = random_simplex(len, &mut rng);
                let res = dominance_grid_check(&spec, &support, &p, DOMINANCE_RESOLUTION).unwrap();
                checked += 1;
                if res.witness.as_ref() != Some(&expect) {
                    failures.push(format!("{text} p={p:?}: {:?}", res.witness));
                }
            }
        }
    }
    Outcome {
        pass: failures.is_empty(),
        detail: format!(
            "{} of {checked} (spec, p) pairs with witness {{0..M-1}}{}",
            checked - failures.len(),
            failures.first().map_or(String::new(), |f| format!("; first miss {f}"))
        ),
    }
}

fn criterion_7() -> Outcome {
    let mut rng = RngStream::new(7);
    let (mut id_err, mut cvar_err): (f64, f64) = (0.0, 0.0);
    let mut exact = true;
    let parts = [
        parse_risk_expr("mv(0.5)").unwrap(),
        parse_risk_expr("cvar(0.95)").unwrap(),
        parse_risk_expr("prop(0.7)").unwrap(),
        parse_risk_expr("lb(0.6)").unwrap(),
    ];
    for _ in 0..200 {
        let len = 1 + (rng.random::<u32>() % 8) as usize;
        let support = random_support_loose(len, &mut rng);
        let probs = random_simplex(len, &mut rng);
        let law = FiniteSupport::new(support.clone(), probs.clone()).unwrap();
        let direct: f64 = support.iter().zip(&probs).map(|(s, p)| s * p).sum();
        id_err = id_err.max((distorted_risk(&law, &DistortionFunction::Expectation) - direct).abs());
        let alpha = 0.99 * rng.random::<f64>();
        let g = DistortionFunction::cvar(alpha).unwrap();
        cvar_err = cvar_err.max((distorted_risk(&law, &g) - cvar_quantile_form(&support, &probs, alpha)).abs());

        let (a, b, c) = (
            rng.random::<f64>() * 4.0 - 2.0,
            rng.random::<f64>() * 4.0 - 2.0,
            rng.random::<f64>(),
        );
        let combo = parse_risk_expr(&format!("{a}*mv(0.5) + {b}*cvar(0.95) + {c}")).unwrap();
        let sum = a * risk_eval(&law, &parts[0]) + b * risk_eval(&law, &parts[1]) + c;
        exact &= risk_eval(&law, &combo) == sum;
        let combo2 = parse_risk_expr(&format!("{a}*prop(0.7) + {b}*lb(0.6)")).unwrap();
        exact &= risk_eval(&law, &combo2) == a * risk_eval(&law, &parts[2]) + b * risk_eval(&law, &parts[3]);
    }
    Outcome {
        pass: id_err <= 1e-12 && cvar_err <= 1e-10 && exact,
        detail: format!(
            "g = id max error {id_err:.1e} (tol 1e-12); CVaR vs quantile form max error {cvar_err:.1e} (tol 1e-10); linear combinations exact {}",
            ok(exact)
        ),
    }
}

fn random_support_loose(len: usize, rng: &mut RngStream) -> Vec<f64> {
    if len == 1 {
        return vec![rng.random::<f64>()];
    }
    random_support(len, rng)
}

fn criterion_8() -> Outcome {
    let run = || {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = config("bernoulli_mts.toml");
        cfg.out = dir.path().to_path_buf();
        run_experiment(&cfg).unwrap();
        std::fs::read(dir.path().join(TRACE_FILE)).unwrap()
    };
    let (a, b) = (run(), run());
    Outcome {
        pass: a == b,
        detail: format!("{} and {} bytes, identical {}", a.len(), b.len(), ok(a == b)),
    }
}

fn main() -> ExitCode {
    let criteria: Vec<(&str, Check)> = vec![
        (
            "1 rho1 NPTS regret",
            Box::new(|| beta_instance("beta3_rho1.toml", (2.6, 4.9), Some(300.0))),
        ),
        (
            "2 rho2 NPTS regret",
            Box::new(|| beta_instance("beta3_rho2.toml", (4.2, 7.7), None)),
        ),
        ("3 MTS logarithmic rate", Box::new(criterion_3)),
        ("4 K_inf oracle agreement", Box::new(criterion_4)),
        ("5 tail-bound sandwich", Box::new(criterion_5)),
        ("6 dominance witness", Box::new(criterion_6)),
        ("7 risk evaluation oracles", Box::new(criterion_7)),
        ("8 trace determinism", Box::new(criterion_8)),
    ];
    let mut failed = 0;
    for (name, check) in &criteria {
        let outcome = check();
        println!(
            "{} criterion {name}: {}",
            if outcome.pass { "PASS" } else { "FAIL" },
            outcome.detail
        );
        if !outcome.pass {
            failed += 1;
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
