//! Experiment configs, replicated runs and their on-disk results.
//!
//! A config is a TOML file:
//!
//! ```toml
//! risk = "mv(0.5) + cvar(0.95)"
//! policy = "npts"
//! horizon = 5000
//! reps = 50
//! seed = 0
//! resolution = 2001
//! out = "out/rho1"
//!
//! [[arm]]
//! dist = "beta"
//! a = 1.0
//! b = 3.0
//!
//! [[arm]]
//! dist = "bernoulli"
//! p = 0.9
//!
//! [[arm]]
//! dist = "multinomial"
//! support = [0.0, 0.5, 1.0]
//! probs = [0.2, 0.3, 0.5]
//! ```
//!
//! A top-level `support` array is shared by multinomial arms that omit their own.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use toml::Spanned;

use crate::bandit::DEFAULT_RESOLUTION;
use crate::bandit::{lower_bound, run_replications, ArmModel, BanditInstance, LowerBound, PolicyKind, RegretTrace};
use crate::error::{Error, Result};
use crate::kinf::KinfOptions;
use crate::risk::{parse_risk_expr, RiskSpec};

pub const CSV_DIGITS: usize = 9;
pub const TRACE_FILE: &str = "trace.csv";
pub const META_FILE: &str = "meta.json";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub arms: Vec<ArmModel>,
    pub risk: String,
    pub policy: PolicyKind,
    pub horizon: usize,
    pub reps: usize,
    pub seed: u64,
    pub resolution: usize,
    pub out: PathBuf,
    pub allow_discontinuous: bool,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    risk: Spanned<String>,
    policy: Option<Spanned<String>>,
    horizon: Spanned<i64>,
    reps: Option<Spanned<i64>>,
    seed: Option<Spanned<i64>>,
    resolution: Option<Spanned<i64>>,
    out: Option<String>,
    support: Option<Spanned<Vec<f64>>>,
    allow_discontinuous: Option<bool>,
    #[serde(default)]
    arm: Vec<Spanned<RawArm>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawArm {
    dist: String,
    p: Option<f64>,
    probs: Option<Vec<f64>>,
    support: Option<Vec<f64>>,
    a: Option<f64>,
    b: Option<f64>,
}

struct Locator<'a> {
    text: &'a str,
}

impl Locator<'_> {
    fn line(&self, offset: usize) -> usize {
        self.text[..offset.min(self.text.len())].matches('\n').count() + 1
    }

    fn at<T>(&self, field: &str, spanned: &Spanned<T>) -> String {
        format!("line {}, field `{field}`", self.line(spanned.span().start))
    }

    fn err<T>(&self, field: &str, spanned: &Spanned<T>, msg: impl Into<String>) -> Error {
        Error::config(self.at(field, spanned), msg)
    }

    fn count(&self, field: &str, value: &Spanned<i64>, min: i64) -> Result<u64> {
        let v = *value.get_ref();
        if v < min {
            return Err(self.err(field, value, format!("must be at least {min}, got {v}")));
        }
        Ok(v as u64)
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let loc = Locator { text };
        let raw: RawConfig = toml::from_str(text).map_err(|e| {
            let where_ = match e.span() {
                Some(span) => format!("line {}", loc.line(span.start)),
                None => "config".to_string(),
            };
            Error::config(where_, e.message().trim())
        })?;

        let policy = match &raw.policy {
            Some(p) => p.get_ref().parse::<PolicyKind>().map_err(|_| {
                loc.err(
                    "policy",
                    p,
                    format!("unknown policy `{}`, expected mts or npts", p.get_ref()),
                )
            })?,
            None => PolicyKind::Npts,
        };
        let horizon = loc.count("horizon", &raw.horizon, 1)? as usize;
        let reps = match &raw.reps {
            Some(r) => loc.count("reps", r, 1)? as usize,
            None => 1,
        };
        let seed = match &raw.seed {
            Some(s) => loc.count("seed", s, 0)?,
            None => 0,
        };
        let resolution = match &raw.resolution {
            Some(r) => loc.count("resolution", r, 1)? as usize,
            None => DEFAULT_RESOLUTION,
        };
        parse_risk_expr(raw.risk.get_ref()).map_err(|e| loc.err("risk", &raw.risk, e.to_string()))?;

        let mut arms = Vec::with_capacity(raw.arm.len());
        for (i, spanned) in raw.arm.iter().enumerate() {
            let arm = spanned.get_ref();
            let field = |name: &str| format!("arm[{i}].{name}");
            let need = |v: Option<f64>, name: &str| {
                v.ok_or_else(|| loc.err(&field(name), spanned, format!("`{}` arms need `{name}`", arm.dist)))
            };
            let built = match arm.dist.to_ascii_lowercase().as_str() {
                "bernoulli" | "bern" => ArmModel::bernoulli(need(arm.p, "p")?),
                "beta" => ArmModel::beta(need(arm.a, "a")?, need(arm.b, "b")?),
                "multinomial" | "cat" => {
                    let probs = arm
                        .probs
                        .clone()
                        .ok_or_else(|| loc.err(&field("probs"), spanned, "multinomial arms need `probs`"))?;
                    let support = arm
                        .support
                        .clone()
                        .or_else(|| raw.support.as_ref().map(|s| s.get_ref().clone()))
                        .ok_or_else(|| loc.err(&field("support"), spanned, "no arm or top-level `support`"))?;
                    ArmModel::multinomial(support, probs)
                }
                other => {
                    return Err(loc.err(
                        &field("dist"),
                        spanned,
                        format!("unknown distribution `{other}`, expected bernoulli, multinomial or beta"),
                    ))
                }
            };
            arms.push(built.map_err(|e| loc.err(&format!("arm[{i}]"), spanned, e.to_string()))?);
        }

        let config = Self {
            arms,
            risk: raw.risk.into_inner(),
            policy,
            horizon,
            reps,
            seed,
            resolution,
            out: PathBuf::from(raw.out.unwrap_or_else(|| "out".into())),
            allow_discontinuous: raw.allow_discontinuous.unwrap_or(false),
        };
        config.validate()?;
        Ok(config)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config { location, msg } => Error::config(format!("{}: {location}", path.display()), msg),
            other => other,
        })
    }

    pub fn risk_spec(&self) -> Result<RiskSpec> {
        parse_risk_expr(&self.risk).map_err(|e| Error::config("risk", e.to_string()))
    }

    /// Checks the cross-field constraints; rerun after command-line overrides.
    pub fn validate(&self) -> Result<()> {
        let k = self.arms.len();
        if k < 2 {
            return Err(Error::config(
                "arm",
                format!("need at least two [[arm]] sections, got {k}"),
            ));
        }
        if self.horizon < k {
            return Err(Error::config(
                "horizon",
                format!("horizon {} is shorter than the number of arms {k}", self.horizon),
            ));
        }
        if self.reps == 0 {
            return Err(Error::config("reps", "need at least one replication"));
        }
        if self.resolution == 0 {
            return Err(Error::config("resolution", "must be positive"));
        }
        let spec = self.risk_spec()?;
        if !spec.is_continuous() && !self.allow_discontinuous {
            return Err(Error::Discontinuous(spec.to_string()));
        }
        if self.policy == PolicyKind::Mts {
            let first = match &self.arms[0] {
                ArmModel::Multinomial { support, .. } => Some(support),
                ArmModel::Beta { .. } => None,
            };
            let shared = first.is_some()
                && self
                    .arms
                    .iter()
                    .all(|a| matches!(a, ArmModel::Multinomial { support, .. } if Some(support) == first));
            if !shared {
                return Err(Error::IncompatiblePolicy(
                    "mts needs multinomial arms on one shared support; use npts for continuous arms".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Parses a command-line arm: `bern:p`, `cat:p0,p1,…` (with `support`) or `beta:a,b`.
pub fn parse_arm(text: &str, support: Option<&[f64]>) -> Result<ArmModel> {
    let bad = |msg: String| Error::config("--arm", msg);
    let (kind, params) = text
        .split_once(':')
        .ok_or_else(|| bad(format!("`{text}` should look like bern:p, cat:p0,p1,... or beta:a,b")))?;
    let values = parse_list(params).map_err(bad)?;
    match kind.trim().to_ascii_lowercase().as_str() {
        "bern" | "bernoulli" => match values[..] {
            [p] => ArmModel::bernoulli(p),
            _ => Err(bad(format!("bern takes one parameter, got {}", values.len()))),
        },
        "beta" => match values[..] {
            [a, b] => ArmModel::beta(a, b),
            _ => Err(bad(format!("beta takes two parameters, got {}", values.len()))),
        },
        "cat" | "multinomial" => {
            let support = support.ok_or_else(|| bad("cat arms need --support".into()))?;
            ArmModel::multinomial(support.to_vec(), values)
        }
        other => Err(bad(format!("unknown arm kind `{other}`"))),
    }
}

/// Comma-separated reals.
pub fn parse_list(text: &str) -> std::result::Result<Vec<f64>, String> {
    text.split(',')
        .map(|x| {
            let x = x.trim();
            x.parse::<f64>().map_err(|_| format!("`{x}` is not a number"))
        })
        .collect()
}

/// Rounds to `digits` significant digits and prints the shortest decimal
/// that reads back as the rounded value.
pub fn format_sig(x: f64, digits: usize) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{}", if x == 0.0 { 0.0 } else { x });
    }
    let rounded: f64 = format!("{:.*e}", digits.max(1) - 1, x).parse().unwrap_or(x);
    format!("{rounded}")
}

pub fn trace_csv(trace: &RegretTrace, lb: &LowerBound) -> String {
    let mut out = String::with_capacity(48 * trace.horizon() + 64);
    out.push_str("t,mean_regret,std_regret,lower_bound\n");
    for t in 1..=trace.horizon() {
        let _ = writeln!(
            out,
            "{t},{},{},{}",
            format_sig(trace.mean[t - 1], CSV_DIGITS),
            format_sig(trace.std[t - 1], CSV_DIGITS),
            format_sig(lb.at(t), CSV_DIGITS)
        );
    }
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct Meta {
    pub version: &'static str,
    pub config: ExperimentConfig,
    pub risk: String,
    pub resolution: usize,
    pub true_risks: Vec<f64>,
    pub gaps: Vec<f64>,
    pub optimal_arm: usize,
    pub lower_bound: LowerBound,
    pub final_mean_regret: f64,
    pub final_std_regret: f64,
    pub mean_pulls: Vec<f64>,
    pub wall_clock_seconds: f64,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub trace: RegretTrace,
    pub meta: Meta,
    pub trace_path: PathBuf,
    pub meta_path: PathBuf,
}

/// Runs the replications and writes `trace.csv` and `meta.json` into `config.out`.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    let started = Instant::now();
    config.validate()?;
    let spec = config.risk_spec()?;
    let instance = BanditInstance::new(config.arms.clone(), spec, config.resolution)?;
    let lb = lower_bound(&instance, config.resolution, &KinfOptions::default())?;
    let trace = run_replications(&instance, config.policy, config.horizon, config.reps, config.seed)?;

    fs::create_dir_all(&config.out)?;
    let trace_path = config.out.join(TRACE_FILE);
    fs::write(&trace_path, trace_csv(&trace, &lb))?;

    let k = instance.len();
    let mut mean_pulls = vec![0.0; k];
    for pulls in &trace.final_pulls {
        for (m, &p) in mean_pulls.iter_mut().zip(pulls) {
            *m += p as f64 / trace.reps() as f64;
        }
    }
    let meta = Meta {
        version: env!("CARGO_PKG_VERSION"),
        config: config.clone(),
        risk: instance.spec().to_string(),
        resolution: instance.resolution(),
        true_risks: instance.true_risks().to_vec(),
        gaps: instance.gaps().to_vec(),
        optimal_arm: instance.optimal_arm(),
        lower_bound: lb,
        final_mean_regret: trace.final_mean(),
        final_std_regret: trace.final_std(),
        mean_pulls,
        wall_clock_seconds: started.elapsed().as_secs_f64(),
    };
    let meta_path = config.out.join(META_FILE);
    fs::write(&meta_path, serde_json::to_string_pretty(&meta)? + "\n")?;
    Ok(ExperimentOutput {
        trace,
        meta,
        trace_path,
        meta_path,
    })
}
