//! Command-line surface over the model, analysis, solver, continuation, and
//! scenario modules. Deterministic, machine-readable output: CSV carries 17
//! significant digits, JSON 12.
//!
//! Exit codes: 0 success, 1 numeric-detection failure, 2 usage/input error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use sirsat::{
    basic_reproduction_number, branch_to_csv, builtin_schedule, classify_regime, cycles_to_csv,
    descartes_degenerate, disease_free_equilibrium, dulac_curve, endemic_equilibria,
    equilibrium_branch, integrate, integrate_schedule, run_hysteresis_demo, run_scenario,
    sensitivity_indices, trace_cycle_branch, transcritical_direction, BifurcationSet, Error,
    GammaSchedule, IntegrateOptions, ModelParams, ScenarioReport, State,
};

#[derive(Parser)]
#[command(
    name = "sirsat",
    about = "SIR-type model with saturated incidence and saturated recovery",
    version
)]
struct Cli {
    /// Parameter file (JSON with beta, lambda, mu, mu_prime, alpha, rho, gamma)
    #[arg(long, global = true)]
    params: Option<PathBuf>,
    /// Inline parameter override, e.g. --set gamma=0.35 (repeatable)
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Output format for tabular commands
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Write output to this file instead of standard output
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Relative integration tolerance
    #[arg(long, global = true)]
    rtol: Option<f64>,
    /// Absolute integration tolerance
    #[arg(long, global = true)]
    atol: Option<f64>,
    /// Reserved; the pipeline is deterministic
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Cmd {
    /// Closed-form report: R0, equilibria, sensitivities, direction, regime
    Analyze {
        /// Override the cautiousness level for this report
        #[arg(long)]
        gamma: Option<f64>,
    },
    /// Locate all five bifurcation points in gamma
    Bifurcations,
    /// Endemic-equilibrium branch on a uniform I grid
    Branch {
        #[arg(long, default_value_t = 0.01)]
        i_min: f64,
        #[arg(long)]
        i_max: Option<f64>,
        #[arg(long, default_value_t = 400)]
        steps: usize,
    },
    /// Integrate an initial-value problem, at fixed gamma or under a schedule
    Simulate {
        /// Initial state as S,I,R
        #[arg(long, value_name = "S,I,R")]
        init: String,
        #[arg(long, default_value_t = 0.0)]
        t0: f64,
        /// Final time (fixed-gamma run)
        #[arg(long, conflicts_with = "schedule")]
        t_end: Option<f64>,
        /// Piecewise-constant gamma schedule (.json or CSV)
        #[arg(long)]
        schedule: Option<PathBuf>,
        /// Cap on the integrator step (denser output samples)
        #[arg(long)]
        max_step: Option<f64>,
    },
    /// Detect stable/unstable limit cycles on a gamma grid
    Cycles {
        #[arg(long)]
        gamma_min: f64,
        #[arg(long)]
        gamma_max: f64,
        #[arg(long, default_value_t = 30)]
        steps: usize,
    },
    /// Run the built-in (or a custom) schedule and check its checkpoints
    Scenario {
        /// Custom schedule file; defaults to the built-in 13-segment one
        #[arg(long)]
        schedule: Option<PathBuf>,
        /// Initial state as S,I,R
        #[arg(long, value_name = "S,I,R", default_value = "100,0.001,0")]
        init: String,
        /// Run the six-leg hysteresis demonstration instead
        #[arg(long, conflicts_with_all = ["schedule", "init"])]
        hysteresis: bool,
        /// Also write the trajectory as CSV to this file
        #[arg(long)]
        trajectory_out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("sirsat: {e}");
            match e {
                Error::InvalidInput(_) | Error::Parse(_) | Error::OutOfRange(_) => {
                    ExitCode::from(2)
                }
                _ => ExitCode::from(1),
            }
        }
    }
}

fn load_params(cli: &Cli) -> Result<ModelParams, Error> {
    let mut p = match &cli.params {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))?;
            serde_json::from_str(&text)
                .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?
        }
        None => ModelParams::reference(0.1)?,
    };
    for kv in &cli.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::InvalidInput(format!("--set needs KEY=VALUE, got '{kv}'")))?;
        let v: f64 = v
            .trim()
            .parse()
            .map_err(|_| Error::InvalidInput(format!("--set {k}: bad number '{v}'")))?;
        let mut raw = p;
        match k.trim() {
            "beta" => raw.beta = v,
            "lambda" => raw.lambda = v,
            "mu" => raw.mu = v,
            "mu_prime" => raw.mu_prime = v,
            "alpha" => raw.alpha = v,
            "rho" => raw.rho = v,
            "gamma" => raw.gamma = v,
            other => {
                return Err(Error::InvalidInput(format!("unknown parameter '{other}'")));
            }
        }
        // re-validate the assembled set
        p = ModelParams::new(
            raw.beta, raw.lambda, raw.mu, raw.mu_prime, raw.alpha, raw.rho, raw.gamma,
        )?;
    }
    Ok(p)
}

fn integrate_options(cli: &Cli) -> IntegrateOptions {
    let mut opts = IntegrateOptions::default();
    if let Some(r) = cli.rtol {
        opts.rtol = r;
    }
    if let Some(a) = cli.atol {
        opts.atol = a;
    }
    opts
}

fn parse_init(text: &str) -> Result<State, Error> {
    let parts: Vec<&str> = text.split(',').collect();
    if parts.len() != 3 {
        return Err(Error::InvalidInput(format!("--init needs S,I,R, got '{text}'")));
    }
    let mut v = [0.0; 3];
    for (slot, part) in v.iter_mut().zip(&parts) {
        *slot = part
            .trim()
            .parse()
            .map_err(|_| Error::InvalidInput(format!("--init: bad number '{part}'")))?;
    }
    Ok(State::new(v[0], v[1], v[2]))
}

fn load_schedule(path: &Path) -> Result<GammaSchedule, Error> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))?;
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
        GammaSchedule::from_json(&text)
    } else {
        GammaSchedule::from_csv(&text)
    }
}

/// Rounds every JSON number to 12 significant digits, for stable
/// human-facing output.
fn round_numbers(v: &mut Value) {
    match v {
        Value::Number(n) => {
            if !n.is_i64() && !n.is_u64() {
                if let Some(f) = n.as_f64() {
                    let rounded: f64 = format!("{f:.11e}").parse().unwrap_or(f);
                    if let Some(nn) = serde_json::Number::from_f64(rounded) {
                        *n = nn;
                    }
                }
            }
        }
        Value::Array(a) => a.iter_mut().for_each(round_numbers),
        Value::Object(o) => o.values_mut().for_each(round_numbers),
        _ => {}
    }
}

fn emit(cli: &Cli, text: &str) -> Result<(), Error> {
    let text = text.trim_end_matches('\n');
    match &cli.out {
        Some(path) => std::fs::write(path, format!("{text}\n"))
            .map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display()))),
        None => {
            use std::io::Write;
            let mut stdout = std::io::stdout().lock();
            match writeln!(stdout, "{text}") {
                Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => {
                    std::process::exit(0)
                }
                r => r.map_err(|e| Error::InvalidInput(format!("stdout: {e}"))),
            }
        }
    }
}

fn emit_json(cli: &Cli, mut value: Value) -> Result<(), Error> {
    round_numbers(&mut value);
    let text = serde_json::to_string_pretty(&value)
        .map_err(|e| Error::Parse(format!("serialization: {e}")))?;
    emit(cli, &text)
}

fn to_value<T: serde::Serialize>(v: &T) -> Result<Value, Error> {
    serde_json::to_value(v).map_err(|e| Error::Parse(format!("serialization: {e}")))
}

fn run(cli: &Cli) -> Result<ExitCode, Error> {
    let p = load_params(cli)?;
    match &cli.cmd {
        Cmd::Analyze { gamma } => {
            let p = match gamma {
                Some(g) => p.with_gamma(*g)?,
                None => p,
            };
            let endemic = endemic_equilibria(&p)?;
            let cubic = sirsat::cubic_coefficients(&p);
            let report = json!({
                "params": to_value(&p)?,
                "R0": basic_reproduction_number(&p),
                "dfe": to_value(&disease_free_equilibrium(&p))?,
                "endemic": to_value(&endemic)?,
                "cubic": to_value(&cubic)?,
                "descartes_degenerate": descartes_degenerate(&cubic),
                "sensitivity": to_value(&sensitivity_indices(&p))?,
                "transcritical": to_value(&transcritical_direction(&p)?)?,
                "dulac": to_value(&dulac_curve(&p))?,
                "regime": classify_regime(&p, p.gamma)?.to_string(),
            });
            emit_json(cli, report)?;
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Bifurcations => {
            let set = BifurcationSet::locate_all(&p)?;
            emit_json(cli, to_value(&set.points().as_slice())?)?;
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Branch { i_min, i_max, steps } => {
            let i_max = i_max.unwrap_or_else(|| sirsat::admissible_i_sup(&p) * (1.0 - 1e-3));
            let points = equilibrium_branch(&p, *i_min, i_max, *steps)?;
            match cli.format {
                Some(Format::Json) => emit_json(cli, to_value(&points)?)?,
                _ => emit(cli, &branch_to_csv(&points))?,
            }
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Simulate { init, t0, t_end, schedule, max_step } => {
            let y0 = parse_init(init)?;
            let mut opts = integrate_options(cli);
            opts.max_step = *max_step;
            let traj = match (t_end, schedule) {
                (Some(te), None) => integrate(&p, &y0, *t0, *te, &opts)?,
                (None, Some(path)) => integrate_schedule(&p, &y0, &load_schedule(path)?, &opts)?,
                _ => {
                    return Err(Error::InvalidInput(
                        "exactly one of --t-end or --schedule is required".into(),
                    ));
                }
            };
            match cli.format {
                Some(Format::Json) => emit_json(cli, to_value(&traj)?)?,
                _ => emit(cli, &traj.to_csv())?,
            }
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Cycles { gamma_min, gamma_max, steps } => {
            let rows = trace_cycle_branch(&p, *gamma_min, *gamma_max, *steps)?;
            match cli.format {
                Some(Format::Json) => emit_json(cli, to_value(&rows)?)?,
                _ => emit(cli, &cycles_to_csv(&rows))?,
            }
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Scenario { schedule, init, hysteresis, trajectory_out } => {
            let report: ScenarioReport = if *hysteresis {
                run_hysteresis_demo(&p)?
            } else {
                let sched = match schedule {
                    Some(path) => load_schedule(path)?,
                    None => builtin_schedule(),
                };
                run_scenario(&p, &sched, &parse_init(init)?)?
            };
            if let Some(path) = trajectory_out {
                std::fs::write(path, report.trajectory.to_csv())
                    .map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))?;
            }
            match cli.format {
                Some(Format::Csv) => emit(cli, &report.trajectory.to_csv())?,
                _ => {
                    // the trajectory is emitted separately; keep the report readable
                    let summary = json!({
                        "checkpoints": to_value(&report.checkpoints)?,
                        "hysteresis_verdict": report.hysteresis_verdict,
                        "samples": report.trajectory.len(),
                        "final_state": to_value(report.trajectory.last_state())?,
                    });
                    emit_json(cli, summary)?;
                }
            }
            Ok(if report.hysteresis_verdict { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
    }
}
