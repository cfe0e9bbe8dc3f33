use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use nsp_core::domain::RadialGrid;
use nsp_core::energy::identity_kappa;
use nsp_core::evolve::{run_simulation, write_checkpoint, RunFailure, SimConfig, TimeSeries};
use nsp_core::ineqlab::{run_lab, LabReport};
use nsp_core::steady::{
    export_columns, make_profile, solve_steady_monotone_with, steady_regularity_report, CertReport,
    ProfileKind, SteadyState,
};
use nsp_core::{FluidParams, NspError};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::config::{parse_config_with, Config, ParseError};
use crate::exit;
use crate::output::{num, timeseries_csv, write, write_json};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Steady,
    Simulate,
    VerifyInequalities,
    Sweep,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub command: Command,
    pub config_path: PathBuf,
    /// Overrides `[output] dir`.
    pub output_dir: Option<PathBuf>,
    /// `section.key=value` entries applied after the file.
    pub overrides: Vec<String>,
    /// Overrides `[ineqlab] seed`.
    pub seed: Option<u64>,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("configuration error: {0}")]
    Parse(#[from] ParseError),
    #[error("{0}")]
    Run(#[from] NspError),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(_) => exit::IO,
            CliError::Parse(_) => exit::PARSE,
            CliError::Run(e) => nsp_exit_code(e),
        }
    }
}

fn nsp_exit_code(e: &NspError) -> i32 {
    match e {
        NspError::Parameter(_) | NspError::Domain(_) => exit::PARSE,
        NspError::Monotonicity(_) | NspError::Iteration(_) | NspError::Degenerate(_) => {
            exit::VERDICT
        }
        NspError::Vacuum { .. } | NspError::NonFinite(_) | NspError::Internal(_) => exit::ABORT,
    }
}

type CliResult<T> = Result<T, CliError>;

/// Loads the configuration named by `run` with its overrides applied.
pub fn load(run: &RunConfig) -> CliResult<Config> {
    let text = std::fs::read_to_string(&run.config_path)?;
    let mut overrides = run.overrides.clone();
    if let Some(seed) = run.seed {
        overrides.push(format!("ineqlab.seed={seed}"));
    }
    Ok(parse_config_with(&text, &overrides)?)
}

/// Runs one subcommand and returns the process exit code; errors are
/// reported on stderr.
pub fn run(run: &RunConfig) -> i32 {
    let result = load(run).and_then(|cfg| {
        let out = run
            .output_dir
            .clone()
            .unwrap_or_else(|| PathBuf::from(&cfg.output.dir));
        match run.command {
            Command::Steady => cmd_steady(&cfg, &out),
            Command::Simulate => cmd_simulate(&cfg, &out),
            Command::VerifyInequalities => cmd_verify_inequalities(&cfg, &out),
            Command::Sweep => cmd_sweep(&cfg, &out),
        }
    });
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("nsp: {e}");
            e.exit_code()
        }
    }
}

fn solve_steady(
    cfg: &Config,
    fluid: &FluidParams,
    grid: RadialGrid,
) -> nsp_core::Result<SteadyState> {
    let grid = Arc::new(grid);
    let kind = match cfg.steady.profile {
        ProfileKind::GeneralGammaEnvelope { c0, epsilon, .. } => {
            ProfileKind::GeneralGammaEnvelope {
                gamma: fluid.gamma,
                c0,
                epsilon,
            }
        }
        k => k,
    };
    let profile = make_profile(kind, fluid.c_star, cfg.steady.amplitude, &grid)?;
    solve_steady_monotone_with(fluid.gamma, &profile, &cfg.steady.options)
}

fn cert_json(c: &CertReport) -> serde_json::Value {
    json!({
        "max_residual": c.max_residual,
        "min_residual": c.min_residual,
        "normal_derivative": c.normal_derivative,
        "tol": c.tol,
        "verdict": verdict_str(c.passed),
    })
}

fn verdict_str(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

/// Writes the steady profiles and `certificate.json`; exit 0 iff the bounds
/// and both certificates hold.
pub fn cmd_steady(cfg: &Config, out: &Path) -> CliResult<i32> {
    let start = Instant::now();
    let s = solve_steady(cfg, &cfg.fluid, cfg.domain.grid()?)?;
    let reg = steady_regularity_report(&s)?;
    write(
        &out.join("rho_tilde.txt"),
        &export_columns("rho_tilde", &s.rho_tilde),
    )?;
    write(
        &out.join("phi_tilde.txt"),
        &export_columns("phi_tilde", &s.phi_tilde),
    )?;
    write(
        &out.join("background.txt"),
        &export_columns("b", &s.profile.values),
    )?;
    let ok = s.bounds_ok && s.super_cert.passed && s.sub_cert.passed;
    let report = json!({
        "config_digest": cfg.digest,
        "gamma": s.gamma,
        "c_star": s.c_star,
        "profile": s.profile.kind.name(),
        "amplitude": s.profile.amplitude,
        "n_cells": s.grid().n_cells(),
        "r_inner": s.grid().r_inner(),
        "r_outer": s.grid().r_outer(),
        "bounds": {
            "verdict": verdict_str(s.bounds_ok),
            "max_violation": s.bounds_violation,
            "min_density": s.rho_tilde.min(),
            "max_density": s.rho_tilde.max(),
        },
        "residual_elliptic": s.residual_elliptic,
        "residual_discrete": s.residual_discrete,
        "limit_gap": s.limit_gap,
        "shift": s.shift,
        "iterations": {"from_super": s.iterations_from_super, "from_sub": s.iterations_from_sub},
        "supersolution": cert_json(&s.super_cert),
        "subsolution": cert_json(&s.sub_cert),
        "regularity": {
            "rho_derivative_norms": reg.norms.rho,
            "phi_derivative_norms": reg.norms.phi,
            "refined": {"rho": reg.refined.rho, "phi": reg.refined.phi},
            "extended": {"rho": reg.extended.rho, "phi": reg.extended.phi},
            "compatibility_residual": reg.compatibility_residual,
            "stable_under_refinement": reg.stable_under_refinement,
            "stable_under_extension": reg.stable_under_extension,
        },
        "verdict": verdict_str(ok),
        "elapsed_s": start.elapsed().as_secs_f64(),
    });
    write_json(&out.join("certificate.json"), &report)?;
    Ok(if ok { exit::OK } else { exit::VERDICT })
}

#[derive(Debug, Clone, Serialize)]
pub struct FailureSummary {
    pub t: f64,
    pub step: usize,
    pub message: String,
    pub runtime_abort: bool,
}

/// One simulation's outcome; everything except `timings` is reproducible.
#[derive(Debug, Clone, Serialize)]
pub struct JobSummary {
    pub config_digest: String,
    pub seed: u64,
    pub gamma: f64,
    pub delta: f64,
    pub n_cells: usize,
    pub r_max: f64,
    pub dt: f64,
    pub steps: usize,
    pub samples: usize,
    /// `sup E(t) / E(0)`; absent when `E(0) = 0` or the run aborted.
    pub sup_energy_ratio: Option<f64>,
    pub sup_combined_ratio: Option<f64>,
    pub sup_combined_ratio_with_qtt: Option<f64>,
    pub c_fit: Option<f64>,
    pub margin: f64,
    /// `PASS`, `FAIL`, or `NONE` when no verdict applies.
    pub verdict: String,
    pub max_energy: f64,
    pub max_mass_drift: f64,
    pub max_identity_residual: f64,
    pub identity_kappa: f64,
    pub steady_residual_elliptic: f64,
    pub steady_residual_discrete: f64,
    pub failure: Option<FailureSummary>,
    pub timings: Timings,
}

#[derive(Debug, Clone, Serialize)]
pub struct Timings {
    pub steady_s: f64,
    pub simulate_s: f64,
}

impl JobSummary {
    pub fn exit_code(&self) -> i32 {
        match &self.failure {
            Some(f) if f.runtime_abort => exit::ABORT,
            Some(_) => exit::VERDICT,
            None if self.verdict == "FAIL" => exit::VERDICT,
            None => exit::OK,
        }
    }
}

fn summarize(
    cfg: &Config,
    fluid: &FluidParams,
    steady: &SteadyState,
    ts: &TimeSeries,
    timings: Timings,
) -> JobSummary {
    let grid = steady.grid();
    JobSummary {
        config_digest: cfg.digest.clone(),
        seed: cfg.ineqlab.seed,
        gamma: fluid.gamma,
        delta: ts.delta,
        n_cells: grid.n_cells(),
        r_max: grid.r_outer(),
        dt: ts.dt,
        steps: ts.steps,
        samples: ts.samples.len(),
        sup_energy_ratio: ts.verdict.map(|v| v.sup_energy_ratio),
        sup_combined_ratio: ts.verdict.map(|v| v.sup_combined_ratio),
        sup_combined_ratio_with_qtt: ts.verdict.map(|v| v.sup_combined_ratio_with_qtt),
        c_fit: ts.verdict.map(|v| v.c_fit),
        margin: cfg.evolve.margin,
        verdict: match ts.verdict {
            Some(v) => verdict_str(v.passed).to_string(),
            None => "NONE".to_string(),
        },
        max_energy: ts.sup_energy(),
        max_mass_drift: ts.max_mass_drift(),
        max_identity_residual: ts
            .samples
            .iter()
            .map(|s| s.identity_residual.abs())
            .fold(0.0, f64::max),
        identity_kappa: identity_kappa(&ts.samples, ts.delta),
        steady_residual_elliptic: steady.residual_elliptic,
        steady_residual_discrete: steady.residual_discrete,
        failure: ts.failure.as_ref().map(|f| FailureSummary {
            t: f.t,
            step: f.step,
            message: f.message.clone(),
            runtime_abort: f.runtime_abort,
        }),
        timings,
    }
}

/// Solves the steady state, runs the simulation and writes `timeseries.csv`,
/// `summary.json` and any checkpoints into `out`.
pub fn simulate_job(
    cfg: &Config,
    fluid: &FluidParams,
    grid: RadialGrid,
    delta: f64,
    out: &Path,
) -> CliResult<JobSummary> {
    let t0 = Instant::now();
    let steady = Arc::new(solve_steady(cfg, fluid, grid)?);
    let steady_s = t0.elapsed().as_secs_f64();

    let e = &cfg.evolve;
    let mut sim = SimConfig::new(*fluid, Arc::clone(&steady));
    sim.dt = e.dt;
    sim.t_end = e.t_end;
    sim.delta = delta;
    sim.init = e.init;
    sim.sponge_width = e.sponge_width;
    sim.sponge_rate = e.sponge_rate;
    sim.output_stride = e.output_stride;
    sim.physics = e.physics;
    sim.margin = e.margin;
    sim.digest = cfg.digest.clone();

    let stride = cfg.output.checkpoint_stride;
    let io_failure: Mutex<Option<std::io::Error>> = Mutex::new(None);
    let t1 = Instant::now();
    let ts = run_simulation(&sim, |step, state| {
        if stride > 0 && step % stride == 0 {
            let path = out.join(format!("state_{step}.txt"));
            if let Err(err) = write(&path, &write_checkpoint(state)) {
                *io_failure.lock().unwrap() = Some(err);
                return Err(NspError::Internal("checkpoint could not be written".into()));
            }
        }
        Ok(())
    });
    if let Some(err) = io_failure.into_inner().unwrap() {
        return Err(err.into());
    }
    let ts = match ts {
        Ok(ts) => ts,
        // the initial state itself is already out of range
        Err(e @ (NspError::Vacuum { .. } | NspError::NonFinite(_))) => TimeSeries {
            samples: Vec::new(),
            config_digest: cfg.digest.clone(),
            verdict: None,
            failure: Some(RunFailure {
                t: 0.0,
                step: 0,
                message: e.to_string(),
                runtime_abort: true,
            }),
            dt: 0.0,
            steps: 0,
            delta,
            c_visc: fluid.longitudinal_viscosity(),
        },
        Err(e) => return Err(e.into()),
    };
    let simulate_s = t1.elapsed().as_secs_f64();

    write(&out.join("timeseries.csv"), &timeseries_csv(&ts.samples))?;
    let summary = summarize(
        cfg,
        fluid,
        &steady,
        &ts,
        Timings {
            steady_s,
            simulate_s,
        },
    );
    write_json(&out.join("summary.json"), &summary)?;
    Ok(summary)
}

pub fn cmd_simulate(cfg: &Config, out: &Path) -> CliResult<i32> {
    let s = simulate_job(cfg, &cfg.fluid, cfg.domain.grid()?, cfg.evolve.delta, out)?;
    if let Some(f) = &s.failure {
        eprintln!(
            "nsp: run stopped at t = {} (step {}): {}",
            f.t, f.step, f.message
        );
    }
    Ok(s.exit_code())
}

#[derive(Serialize)]
struct InequalityOutput<'a> {
    /// Seconds since the Unix epoch; the only field that differs on rerun.
    timestamp: u64,
    config_digest: &'a str,
    seed: u64,
    verdict: &'static str,
    report: &'a LabReport,
}

pub fn cmd_verify_inequalities(cfg: &Config, out: &Path) -> CliResult<i32> {
    let report = run_lab(&cfg.ineqlab)?;
    let timestamp = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_secs());
    let ok = report.passed();
    write_json(
        &out.join("inequalities.json"),
        &InequalityOutput {
            timestamp,
            config_digest: &cfg.digest,
            seed: cfg.ineqlab.seed,
            verdict: verdict_str(ok),
            report: &report,
        },
    )?;
    Ok(if ok { exit::OK } else { exit::VERDICT })
}

/// Worker count from `NSP_THREADS`, or `None` for the rayon default.
fn thread_cap() -> CliResult<Option<usize>> {
    match std::env::var("NSP_THREADS") {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(Some(n)),
            _ => Err(ParseError {
                line: None,
                key: Some("NSP_THREADS".into()),
                message: format!("expected a positive integer, got `{v}`"),
            }
            .into()),
        },
    }
}

pub const SWEEP_HEADER: &str = "job,gamma,delta,n_cells,r_max,dt,steps,sup_energy_ratio,sup_combined_ratio,c_fit,verdict,max_mass_drift,steady_residual_elliptic,steady_residual_discrete,failure_t";

fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| "nan".to_string(), num)
}

/// Cartesian sweep over the `[sweep]` lists; job `k` writes into
/// `out/job_<k>` and one row of `out/sweep.csv`.
pub fn cmd_sweep(cfg: &Config, out: &Path) -> CliResult<i32> {
    let sw = &cfg.sweep;
    let mut jobs = Vec::new();
    for &gamma in &sw.gamma {
        for &delta in &sw.delta {
            for &n in &sw.n_cells {
                for &r_max in &sw.r_max {
                    jobs.push((gamma, delta, n, r_max));
                }
            }
        }
    }
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = thread_cap()? {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| NspError::Internal(format!("thread pool: {e}")))?;
    let results: Vec<CliResult<JobSummary>> = pool.install(|| {
        jobs.par_iter()
            .enumerate()
            .map(|(k, &(gamma, delta, n, r_max))| {
                let fluid = FluidParams { gamma, ..cfg.fluid };
                fluid.validate()?;
                let grid = RadialGrid::new(cfg.domain.r_inner, r_max, n, cfg.domain.stretch)?;
                simulate_job(cfg, &fluid, grid, delta, &out.join(format!("job_{k}")))
            })
            .collect()
    });

    let mut csv = format!("{SWEEP_HEADER}\n");
    let mut code = exit::OK;
    for (k, (job, res)) in jobs.iter().zip(&results).enumerate() {
        let (gamma, delta, n, r_max) = *job;
        match res {
            Ok(s) => {
                code = code.max(s.exit_code());
                let failure_t = s.failure.as_ref().map(|f| f.t);
                csv.push_str(&format!(
                    "{k},{},{},{n},{},{},{},{},{},{},{},{},{},{},{}\n",
                    num(gamma),
                    num(delta),
                    num(r_max),
                    num(s.dt),
                    s.steps,
                    opt(s.sup_energy_ratio),
                    opt(s.sup_combined_ratio),
                    opt(s.c_fit),
                    s.verdict,
                    num(s.max_mass_drift),
                    num(s.steady_residual_elliptic),
                    num(s.steady_residual_discrete),
                    opt(failure_t),
                ));
            }
            Err(e) => {
                eprintln!("nsp: sweep job {k}: {e}");
                code = code.max(e.exit_code());
                csv.push_str(&format!(
                    "{k},{},{},{n},{},nan,0,nan,nan,nan,ERROR,nan,nan,nan,nan\n",
                    num(gamma),
                    num(delta),
                    num(r_max),
                ));
            }
        }
    }
    write(&out.join("sweep.csv"), &csv)?;
    Ok(code)
}
