//! `matchctl`: simulations, matching checks and linear demonstrations.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 domain outcome
//! (divergence or a failed check).

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use matchctl::ballbeam::{params_report, BallBeamModel, DimensionlessParams};
use matchctl::config::{GridSpec, ModelConfig};
use matchctl::linear::{
    condition_ratio, jordan_oracle, lemma1_residual, lemma1_solve, random_instance, random_matrix,
    random_states, round_trip_error, theorem2_match, ClosedLoopJson, FeedbackJson, JsonMatrix,
    LtiJson,
};
use matchctl::matching::{sweep_residuals, ClosedLoopSpec};
use matchctl::sim::{lyapunov_report, settle_time, simulate_ball_beam, BallBeamController, TerminalStatus};

const SCHEMA: &str = "matchctl.manifest/1";
const MANIFEST: &str = "manifest.json";

#[derive(Parser)]
#[command(name = "matchctl", version, about = "Matching control for underactuated Lagrangian systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON model configuration; the shipped defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, env = "MATCHCTL_OUT", default_value = "matchctl-out")]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum ControllerArg {
    Nonlinear,
    Linearized,
    GainsFile,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum ClosedArg {
    /// The shipped ball-and-beam family.
    Family,
    /// The open loop itself.
    Open,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the ball-and-beam and write a trajectory CSV.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "nonlinear")]
        controller: ControllerArg,
        /// Gains `{v, a, b}` for `--controller gains-file`.
        #[arg(long)]
        gains: Option<PathBuf>,
        #[arg(long, allow_negative_numbers = true)]
        initial_s: Option<f64>,
        #[arg(long, allow_negative_numbers = true)]
        initial_theta: Option<f64>,
        #[arg(long, allow_negative_numbers = true)]
        initial_sdot: Option<f64>,
        #[arg(long, allow_negative_numbers = true)]
        initial_thetadot: Option<f64>,
    },
    /// Sweep matching residuals over a grid.
    CheckMatching {
        #[command(flatten)]
        common: Common,
        /// `s=LO:HI:N,theta=LO:HI:N`; the configured grid when omitted.
        #[arg(long)]
        grid: Option<String>,
        /// Bound on the matching residual blocks.
        #[arg(long, default_value_t = 1e-6)]
        tolerance: f64,
        /// Bound on the λ-equation residuals.
        #[arg(long, default_value_t = 1e-5)]
        pde_tolerance: f64,
        /// Seed for the probe velocities.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value = "family")]
        closed: ClosedArg,
    },
    /// Match a random admissible linear feedback and verify the round trip.
    LinearDemo {
        #[arg(long, env = "MATCHCTL_OUT", default_value = "matchctl-out")]
        out: PathBuf,
        #[arg(long, default_value_t = 2)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 1e-9)]
        tolerance: f64,
    },
    /// Nondegenerate symmetric X with RX = XRᵀ.
    Lemma1 {
        #[arg(long, env = "MATCHCTL_OUT", default_value = "matchctl-out")]
        out: PathBuf,
        /// JSON matrix `{shape, data}`; random otherwise.
        #[arg(long)]
        matrix: Option<PathBuf>,
        #[arg(long, default_value_t = 3)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Compare rescaled physical parameters with the printed set.
    Params {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Serialize)]
struct Manifest {
    schema: &'static str,
    command: &'static str,
    config: Value,
    inputs: Vec<String>,
    outputs: Vec<String>,
    summary: Value,
}

struct Outcome {
    manifest: Manifest,
    code: u8,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cmd: Command) -> Result<u8> {
    let (out, outcome) = match cmd {
        Command::Simulate {
            common,
            controller,
            gains,
            initial_s,
            initial_theta,
            initial_sdot,
            initial_thetadot,
        } => {
            let mut cfg = load_config(common.config.as_deref())?;
            for (slot, v) in cfg
                .sim
                .initial
                .iter_mut()
                .zip([initial_s, initial_theta, initial_sdot, initial_thetadot])
            {
                if let Some(v) = v {
                    *slot = v;
                }
            }
            let inputs = paths([common.config.as_deref(), gains.as_deref()]);
            let out = common.out;
            (out.clone(), simulate(&cfg, controller, gains.as_deref(), &out, inputs)?)
        }
        Command::CheckMatching {
            common,
            grid,
            tolerance,
            pde_tolerance,
            seed,
            closed,
        } => {
            let mut cfg = load_config(common.config.as_deref())?;
            if let Some(g) = grid {
                cfg.grid = GridSpec::parse(&g)?;
            }
            let inputs = paths([common.config.as_deref()]);
            let out = common.out;
            let outcome = check_matching(&cfg, tolerance, pde_tolerance, seed, closed, &out, inputs)?;
            (out, outcome)
        }
        Command::LinearDemo {
            out,
            n,
            seed,
            tolerance,
        } => {
            let outcome = linear_demo(n, seed, tolerance, &out)?;
            (out, outcome)
        }
        Command::Lemma1 {
            out,
            matrix,
            n,
            seed,
        } => {
            let outcome = lemma1(matrix.as_deref(), n, seed, &out)?;
            (out, outcome)
        }
        Command::Params { common } => {
            let cfg = load_config(common.config.as_deref())?;
            let inputs = paths([common.config.as_deref()]);
            let out = common.out;
            (out.clone(), params(&cfg, &out, inputs)?)
        }
    };
    write_json(&out.join(MANIFEST), &outcome.manifest)?;
    Ok(outcome.code)
}

fn paths<const N: usize>(items: [Option<&Path>; N]) -> Vec<String> {
    items.iter().flatten().map(|p| p.display().to_string()).collect()
}

/// Pretty JSON on stdout; a closed pipe is not an error.
fn emit<T: Serialize>(value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    let _ = writeln!(std::io::stdout().lock(), "{text}");
    Ok(())
}

fn load_config(path: Option<&Path>) -> Result<ModelConfig> {
    match path {
        None => Ok(ModelConfig::default()),
        Some(p) => {
            if !p.exists() {
                bail!("config file not found: {}", p.display());
            }
            Ok(ModelConfig::load(p)?)
        }
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn simulate(
    cfg: &ModelConfig,
    controller: ControllerArg,
    gains: Option<&Path>,
    out: &Path,
    inputs: Vec<String>,
) -> Result<Outcome> {
    let model = cfg.build_model()?;
    let sim = cfg.sim_config(&model)?;
    let law = match controller {
        ControllerArg::Nonlinear => BallBeamController::Nonlinear,
        ControllerArg::Linearized => BallBeamController::Linearized,
        ControllerArg::GainsFile => {
            let path = gains.context("--controller gains-file needs --gains PATH")?;
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading gains file {}", path.display()))?;
            let fb: FeedbackJson = serde_json::from_str(&text)
                .with_context(|| format!("parsing gains file {}", path.display()))?;
            BallBeamController::Gains(fb.to_feedback()?)
        }
    };
    let traj = simulate_ball_beam(&model, &law, &sim, &cfg.initial_state())?;

    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let csv_path = out.join("trajectory.csv");
    let file = fs::File::create(&csv_path).with_context(|| format!("writing {}", csv_path.display()))?;
    traj.write_csv(std::io::BufWriter::new(file))?;

    let s0 = model.dims.s0_star;
    // 0.01 m and 0.02 rad in rescaled units.
    let s_tol = 0.01 / model.scales.length;
    let settle = settle_time(&traj, &[s0, 0.0], &[s_tol, 0.02]);
    let code = match traj.status {
        TerminalStatus::Completed => 0,
        TerminalStatus::Diverged { .. } => 2,
        TerminalStatus::Error { .. } => 1,
    };
    let last = traj.last().map(|r| json!({ "t": r.t, "q": r.q, "qdot": r.qdot }));
    let summary = json!({
        "controller": controller,
        "status": traj.status,
        "records": traj.records.len(),
        "final": last,
        "settle_time": settle,
        "settle_time_seconds": settle.map(|t| t * model.scales.time),
        "lyapunov": lyapunov_report(&traj, 1e-6),
    });
    Ok(Outcome {
        manifest: Manifest {
            schema: SCHEMA,
            command: "simulate",
            config: serde_json::to_value(cfg)?,
            inputs,
            outputs: vec![csv_path.display().to_string()],
            summary,
        },
        code,
    })
}

fn check_matching(
    cfg: &ModelConfig,
    tolerance: f64,
    pde_tolerance: f64,
    seed: u64,
    closed_arg: ClosedArg,
    out: &Path,
    inputs: Vec<String>,
) -> Result<Outcome> {
    let model = cfg.build_model()?;
    let open = model.open_loop_system()?;
    let closed = match closed_arg {
        ClosedArg::Family => model.closed_loop_family()?,
        ClosedArg::Open => ClosedLoopSpec::from_open(&open),
    };
    let report = sweep_residuals(&open, &closed, &cfg.grid.states(seed));
    let pass = report.failures.is_empty()
        && report.max_matching() <= tolerance
        && report.max_pde() <= pde_tolerance;
    let path = out.join("residuals.json");
    write_json(
        &path,
        &json!({
            "closed": closed_arg,
            "tolerance": tolerance,
            "pde_tolerance": pde_tolerance,
            "pass": pass,
            "report": report,
        }),
    )?;
    let summary = json!({
        "pass": pass,
        "points": report.points.len(),
        "failures": report.failures.len(),
        "max_geodesic": report.max_geodesic,
        "max_dissipative": report.max_dissipative,
        "max_potential": report.max_potential,
        "max_lambda": report.max_lambda,
        "max_metric": report.max_metric,
    });
    emit(&summary)?;
    Ok(Outcome {
        manifest: Manifest {
            schema: SCHEMA,
            command: "check-matching",
            config: json!({ "model": cfg, "seed": seed, "closed": closed_arg }),
            inputs,
            outputs: vec![path.display().to_string()],
            summary,
        },
        code: if pass { 0 } else { 2 },
    })
}

fn linear_demo(n: usize, seed: u64, tolerance: f64, out: &Path) -> Result<Outcome> {
    if !(1..=6).contains(&n) {
        bail!("--n must be between 1 and 6, got {n}");
    }
    let (sys, fb) = random_instance(n, seed)?;
    let closed = theorem2_match(&sys, &fb)?;
    let round_trip = round_trip_error(&sys, &fb, &closed, &random_states(n, 20, seed))?;
    let residual = closed.matching_residual(&sys)?;
    let pass = round_trip <= tolerance && residual <= tolerance;
    let report = json!({
        "n": n,
        "seed": seed,
        "system": LtiJson::from(&sys),
        "feedback": FeedbackJson::from(&fb),
        "closed_loop": ClosedLoopJson::from(&closed),
        "round_trip_error": round_trip,
        "matching_residual": residual,
        "tolerance": tolerance,
        "pass": pass,
    });
    let path = out.join("linear_demo.json");
    write_json(&path, &report)?;
    emit(&report)?;
    Ok(Outcome {
        manifest: Manifest {
            schema: SCHEMA,
            command: "linear-demo",
            config: json!({ "n": n, "seed": seed, "tolerance": tolerance }),
            inputs: vec![],
            outputs: vec![path.display().to_string()],
            summary: json!({ "pass": pass, "round_trip_error": round_trip, "matching_residual": residual }),
        },
        code: if pass { 0 } else { 2 },
    })
}

fn lemma1(matrix: Option<&Path>, n: usize, seed: u64, out: &Path) -> Result<Outcome> {
    let r = match matrix {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            let m: JsonMatrix =
                serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))?;
            m.to_matrix()?
        }
        None => {
            if n == 0 {
                bail!("--n must be at least 1");
            }
            random_matrix(n, seed)
        }
    };
    if !r.is_square() {
        bail!("R must be square, got {} x {}", r.nrows(), r.ncols());
    }
    let (report, code) = match lemma1_solve(&r) {
        Ok(sol) => {
            let oracle = if r.nrows() <= 4 { jordan_oracle(&r)? } else { None };
            (
                json!({
                    "r": JsonMatrix::from_matrix(&r),
                    "x": JsonMatrix::from_matrix(&sol.x),
                    "dimension": sol.dimension,
                    "attempts": sol.attempts,
                    "residual": lemma1_residual(&r, &sol.x),
                    "condition_ratio": condition_ratio(&sol.x),
                    "jordan_dimension": oracle.map(|o| o.dimension),
                }),
                0,
            )
        }
        Err(e) => (
            json!({ "r": JsonMatrix::from_matrix(&r), "error": e.to_string() }),
            2,
        ),
    };
    let path = out.join("lemma1.json");
    write_json(&path, &report)?;
    emit(&report)?;
    Ok(Outcome {
        manifest: Manifest {
            schema: SCHEMA,
            command: "lemma1",
            config: json!({ "n": r.nrows(), "seed": matrix.is_none().then_some(seed) }),
            inputs: paths([matrix]),
            outputs: vec![path.display().to_string()],
            summary: json!({ "ok": code == 0 }),
        },
        code,
    })
}

fn params(cfg: &ModelConfig, out: &Path, inputs: Vec<String>) -> Result<Outcome> {
    let report = params_report(&cfg.physical, &DimensionlessParams::printed())?;
    let path = out.join("params.json");
    write_json(&path, &report)?;
    emit(&report)?;
    // Fails early if the resolved parameters cannot build a model.
    let _: BallBeamModel = cfg.build_model()?;
    Ok(Outcome {
        manifest: Manifest {
            schema: SCHEMA,
            command: "params",
            config: serde_json::to_value(cfg)?,
            inputs,
            outputs: vec![path.display().to_string()],
            summary: json!({ "rows": report.rows.len() }),
        },
        code: 0,
    })
}
