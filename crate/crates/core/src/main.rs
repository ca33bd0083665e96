use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use riskbandit::bandit::{kinf_law, DEFAULT_RESOLUTION};
use riskbandit::bounds::{dominance_grid_check, tail_bound_report, Direction, DOMINANCE_RESOLUTION};
use riskbandit::distributions::DirichletParams;
use riskbandit::error::{Error, Result};
use riskbandit::experiments::{format_sig, parse_arm, run_experiment, ExperimentConfig, CSV_DIGITS};
use riskbandit::kinf::{kinf_solve, kinf_solve_below, KinfOptions};
use riskbandit::risk::parse_risk_expr;

#[derive(Parser)]
#[command(name = "riskbandit", version, about = "Risk-averse Thompson sampling experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a replicated experiment and write trace.csv and meta.json.
    Run {
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        reps: Option<usize>,
        #[arg(long)]
        horizon: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        allow_discontinuous: bool,
    },
    /// K_inf of each arm at the given risk level, one JSON line per arm.
    Kinf {
        /// bern:p, cat:p0,p1,... or beta:a,b
        #[arg(long = "arm", required = true)]
        arms: Vec<String>,
        #[arg(long)]
        risk: String,
        #[arg(long)]
        level: f64,
        #[arg(long, value_delimiter = ',')]
        support: Option<Vec<f64>>,
        /// Constrain the risk from above instead.
        #[arg(long)]
        below: bool,
        /// Quantile-grid size for beta arms.
        #[arg(long, default_value_t = DEFAULT_RESOLUTION)]
        resolution: usize,
    },
    /// Tail bounds for the risk of a Dirichlet draw next to a Monte Carlo estimate.
    Tailbounds {
        /// Dirichlet counts, comma separated.
        #[arg(long, value_delimiter = ',', required = true)]
        alpha: Vec<u64>,
        #[arg(long)]
        risk: String,
        #[arg(long)]
        level: f64,
        /// Defaults to equally spaced points on [0, 1].
        #[arg(long, value_delimiter = ',')]
        support: Option<Vec<f64>>,
        #[arg(long, value_enum, default_value_t = Side::AtLeast)]
        direction: Side,
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Search for a dominance witness subset on a grid of the simplex.
    Dominance {
        #[arg(long)]
        risk: String,
        #[arg(long, value_delimiter = ',')]
        support: Vec<f64>,
        #[arg(long, value_delimiter = ',')]
        p: Vec<f64>,
        #[arg(long, default_value_t = DOMINANCE_RESOLUTION)]
        resolution: usize,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Side {
    AtLeast,
    AtMost,
}

fn emit(value: &Value) {
    println!("{value}");
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run {
            config,
            seed,
            reps,
            horizon,
            out,
            allow_discontinuous,
        } => {
            let mut cfg = ExperimentConfig::from_file(&config)?;
            cfg.seed = seed.unwrap_or(cfg.seed);
            cfg.reps = reps.unwrap_or(cfg.reps);
            cfg.horizon = horizon.unwrap_or(cfg.horizon);
            cfg.out = out.unwrap_or(cfg.out);
            cfg.allow_discontinuous |= allow_discontinuous;
            let result = run_experiment(&cfg)?;
            for w in &result.meta.lower_bound.warnings {
                eprintln!("warning: {w}");
            }
            let n = result.trace.horizon();
            emit(&json!({
                "out": cfg.out,
                "horizon": n,
                "reps": result.trace.reps(),
                "final_mean_regret": format_sig(result.trace.final_mean(), CSV_DIGITS),
                "final_std_regret": format_sig(result.trace.final_std(), CSV_DIGITS),
                "final_lower_bound": format_sig(result.meta.lower_bound.at(n), CSV_DIGITS),
                "wall_clock_seconds": result.meta.wall_clock_seconds,
            }));
        }
        Command::Kinf {
            arms,
            risk: risk_text,
            level,
            support,
            below,
            resolution,
        } => {
            let spec = parse_risk_expr(&risk_text)?;
            let opts = KinfOptions::default();
            for text in arms {
                let arm = parse_arm(&text, support.as_deref())?;
                let law = kinf_law(&arm, resolution)?;
                let result = if below {
                    kinf_solve_below(&law, level, &spec, &opts)?
                } else {
                    kinf_solve(&law, level, &spec, &opts)?
                };
                let mut line = json!({ "arm": text, "risk": spec.to_string(), "level": level, "below": below });
                if let (Value::Object(line), Value::Object(res)) = (&mut line, serde_json::to_value(&result)?) {
                    line.extend(res);
                }
                emit(&line);
            }
        }
        Command::Tailbounds {
            alpha,
            risk: risk_text,
            level,
            support,
            direction,
            samples,
            seed,
        } => {
            let spec = parse_risk_expr(&risk_text)?;
            let params = DirichletParams::new(alpha)?;
            let support = match support {
                Some(s) => s,
                None => {
                    let m = params.len().saturating_sub(1).max(1);
                    (0..params.len()).map(|i| i as f64 / m as f64).collect()
                }
            };
            if support.len() != params.len() {
                return Err(Error::LengthMismatch {
                    left: support.len(),
                    right: params.len(),
                });
            }
            let direction = match direction {
                Side::AtLeast => Direction::AtLeast,
                Side::AtMost => Direction::AtMost,
            };
            let report = tail_bound_report(
                &params,
                &support,
                level,
                &spec,
                direction,
                samples,
                seed,
                &KinfOptions::default(),
            )?;
            let mut line = json!({ "risk": spec.to_string(), "alpha": params.alpha(), "support": support });
            if let (Value::Object(line), Value::Object(rep)) = (&mut line, serde_json::to_value(&report)?) {
                line.extend(rep);
            }
            emit(&line);
        }
        Command::Dominance {
            risk: risk_text,
            support,
            p,
            resolution,
        } => {
            let spec = parse_risk_expr(&risk_text)?;
            let result = dominance_grid_check(&spec, &support, &p, resolution)?;
            emit(&json!({
                "risk": spec.to_string(),
                "support": support,
                "p": p,
                "resolution": resolution,
                "holds": result.holds,
                "witness": result.witness,
            }));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
