//! Radially symmetric perturbations of a steady state.
//!
//! With `rho = rho_tilde + q`, `Phi = Phi_tilde + phi` and `u = u(r) r_hat`,
//! the system integrated here is
//!
//! ```text
//! q_t = -div(rho u)
//! u_t = d_r(phi - [h(rho) - h(rho_tilde)]) - u u' + (2 mu + lambda)/rho d_r div u
//! Delta phi = q
//! ```
//!
//! which is the primitive momentum equation divided by `rho` after the steady
//! balance `d_r h(rho_tilde) = d_r Phi_tilde` has been subtracted, so the zero
//! perturbation is an exact equilibrium of the discrete scheme. Radial fields
//! are curl free and the only boundary condition left at the inner sphere is
//! `u(R) = 0`; the slip coefficient never enters. The velocity is also
//! pinned at `R_max`, where a sponge layer damps outgoing waves.
//!
//! Time stepping is Heun's method for the explicit part combined with
//! Crank-Nicolson for the linear viscous and sponge terms, which is second
//! order overall.

use std::fmt::Write as _;
use std::sync::Arc;

use serde::Serialize;

use crate::domain::{FvOperators, RadialField, RadialGrid};
use crate::elliptic::EllipticOperator;
use crate::energy::{self, EnergySample, StabilityVerdict};
use crate::error::{param, NspError, Result};
use crate::params::FluidParams;
use crate::steady::{smooth_step, SteadyState};
use crate::tridiag;

/// Abort when the density drops below this fraction of `c_*`.
pub const VACUUM_FRACTION: f64 = 0.1;
/// Fraction of the acoustic CFL limit used by `dt = auto`.
pub const AUTO_CFL_FACTOR: f64 = 0.4;

#[derive(Debug, Clone)]
pub struct PerturbationState {
    pub q: RadialField,
    pub u: RadialField,
    pub phi: RadialField,
    pub t: f64,
}

impl PerturbationState {
    pub fn zeros(grid: &Arc<RadialGrid>) -> Self {
        Self {
            q: RadialField::zeros(Arc::clone(grid)),
            u: RadialField::zeros(Arc::clone(grid)),
            phi: RadialField::zeros(Arc::clone(grid)),
            t: 0.0,
        }
    }

    pub fn grid(&self) -> &Arc<RadialGrid> {
        self.q.grid()
    }
}

/// Time derivatives evaluated from the equations, never by differencing.
#[derive(Debug, Clone)]
pub struct Tendencies {
    pub q_t: RadialField,
    pub u_t: RadialField,
    pub phi_t: RadialField,
    pub q_tt: RadialField,
}

/// Switches for the individual terms of the model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Physics {
    /// Enthalpy gradient.
    pub pressure: bool,
    /// Electrostatic force and the Poisson equation for `phi`.
    pub coupling: bool,
    pub viscosity: bool,
    /// Full nonlinear terms; otherwise the system is linearised about the
    /// steady state.
    pub nonlinear: bool,
    pub sponge: bool,
}

impl Default for Physics {
    fn default() -> Self {
        Self {
            pressure: true,
            coupling: true,
            viscosity: true,
            nonlinear: true,
            sponge: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum InitKind {
    /// Zero-mass density pulse at rest.
    Density,
    /// Velocity pulse with `q = 0`.
    Velocity,
    /// Density pulse carrying the outgoing acoustic velocity `c_s q / rho`.
    Mixed,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TimeStep {
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone)]
pub struct SimConfig {
    pub params: FluidParams,
    pub steady: Arc<SteadyState>,
    pub dt: TimeStep,
    pub t_end: f64,
    pub delta: f64,
    pub init: InitKind,
    /// Width of the sponge layer; `None` means 20% of the shell.
    pub sponge_width: Option<f64>,
    /// Sponge relaxation rate; `None` means far-field sound speed over width.
    pub sponge_rate: Option<f64>,
    pub output_stride: usize,
    pub physics: Physics,
    /// Stability margin handed to the verdict.
    pub margin: f64,
    /// Identifier of the configuration that produced the run.
    pub digest: String,
}

impl SimConfig {
    pub fn new(params: FluidParams, steady: Arc<SteadyState>) -> Self {
        Self {
            params,
            steady,
            dt: TimeStep::Auto,
            t_end: 10.0,
            delta: 1e-3,
            init: InitKind::Mixed,
            sponge_width: None,
            sponge_rate: None,
            output_stride: 10,
            physics: Physics::default(),
            margin: 2.0,
            digest: String::new(),
        }
    }

    pub fn grid(&self) -> &Arc<RadialGrid> {
        self.steady.grid()
    }
}

/// Everything about the discretised model that does not change in time.
#[derive(Debug, Clone)]
pub struct Model {
    params: FluidParams,
    physics: Physics,
    grid: Arc<RadialGrid>,
    fv: FvOperators,
    poisson: EllipticOperator,
    rho_tilde: Vec<f64>,
    h_prime: Vec<f64>,
    c_visc: f64,
    sponge: Vec<f64>,
    sponge_rate: f64,
    visc: (Vec<f64>, Vec<f64>, Vec<f64>),
}

impl Model {
    pub fn new(
        params: FluidParams,
        steady: &SteadyState,
        physics: Physics,
        sponge_width: Option<f64>,
        sponge_rate: Option<f64>,
    ) -> Result<Self> {
        params.validate()?;
        if (params.gamma - steady.gamma).abs() > 0.0 || params.c_star != steady.c_star {
            return param("fluid parameters differ from those of the steady state");
        }
        let grid = Arc::clone(steady.grid());
        let (r0, r1) = (grid.r_inner(), grid.r_outer());
        let width = sponge_width.unwrap_or(0.2 * (r1 - r0));
        if !(width > 0.0 && width <= r1 - r0) {
            return param(format!("sponge width {width} must lie in (0, R_max - R]"));
        }
        let rate = sponge_rate.unwrap_or(params.sound_speed(params.c_star) / width);
        if !(rate >= 0.0 && rate.is_finite()) {
            return param(format!("sponge rate {rate} must be finite and >= 0"));
        }
        let sponge = grid
            .nodes()
            .iter()
            .map(|&r| smooth_step((r - (r1 - width)) / width))
            .collect();
        let rho_tilde = steady.rho_tilde.values().to_vec();
        let h_prime = rho_tilde
            .iter()
            .map(|&p| params.enthalpy_prime(p))
            .collect();
        let fv = FvOperators::new(&grid);
        let visc = fv.viscous_tridiag();
        Ok(Self {
            c_visc: params.longitudinal_viscosity(),
            poisson: EllipticOperator::new(Arc::clone(&grid)),
            params,
            physics,
            grid,
            fv,
            rho_tilde,
            h_prime,
            sponge,
            sponge_rate: rate,
            visc,
        })
    }

    pub fn from_config(cfg: &SimConfig) -> Result<Self> {
        Self::new(
            cfg.params,
            &cfg.steady,
            cfg.physics,
            cfg.sponge_width,
            cfg.sponge_rate,
        )
    }

    pub fn grid(&self) -> &Arc<RadialGrid> {
        &self.grid
    }

    pub fn physics(&self) -> Physics {
        self.physics
    }

    pub fn rho_tilde(&self) -> &[f64] {
        &self.rho_tilde
    }

    pub fn h_prime(&self) -> &[f64] {
        &self.h_prime
    }

    /// `2 mu + lambda`, or 0 with viscosity switched off.
    pub fn c_visc(&self) -> f64 {
        if self.physics.viscosity {
            self.c_visc
        } else {
            0.0
        }
    }

    pub fn sponge_mask(&self) -> &[f64] {
        &self.sponge
    }

    pub fn sponge_rate(&self) -> f64 {
        self.sponge_rate
    }

    fn check_density(&self, q: &[f64], t: f64) -> Result<()> {
        let floor = VACUUM_FRACTION * self.params.c_star;
        let mut worst = (f64::INFINITY, 0usize);
        for (i, (a, b)) in self.rho_tilde.iter().zip(q).enumerate() {
            let rho = a + b;
            if rho.is_nan() {
                return Err(NspError::NonFinite(format!("density at t = {t}")));
            }
            if rho < worst.0 {
                worst = (rho, i);
            }
        }
        if worst.0 < floor {
            return Err(NspError::Vacuum {
                t,
                r: self.grid.nodes()[worst.1],
                min_density: worst.0,
            });
        }
        Ok(())
    }

    pub fn min_density(&self, q: &[f64]) -> f64 {
        self.rho_tilde
            .iter()
            .zip(q)
            .map(|(a, b)| a + b)
            .fold(f64::INFINITY, f64::min)
    }

    fn potential(&self, q: &[f64]) -> Result<Vec<f64>> {
        if self.physics.coupling {
            Ok(self.poisson.solve_poisson(q)?.phi.into_values())
        } else {
            Ok(vec![0.0; q.len()])
        }
    }

    fn density(&self, q: &[f64]) -> Vec<f64> {
        if self.physics.nonlinear {
            self.rho_tilde.iter().zip(q).map(|(a, b)| a + b).collect()
        } else {
            self.rho_tilde.clone()
        }
    }

    fn continuity(&self, rho: &[f64], u: &[f64]) -> Vec<f64> {
        let flux: Vec<f64> = rho.iter().zip(u).map(|(a, b)| -a * b).collect();
        let mut out = vec![0.0; u.len()];
        self.fv.divergence(&flux, &mut out);
        out
    }

    /// Explicit tendencies `(q_t, u_t)` given `q`, `u` and the matching `phi`.
    fn explicit(&self, q: &[f64], u: &[f64], phi: &[f64], t: f64) -> Result<(Vec<f64>, Vec<f64>)> {
        self.check_density(q, t)?;
        let n = q.len();
        let rho = self.density(q);
        let q_t = self.continuity(&rho, u);

        let mut potential = vec![0.0; n];
        if self.physics.coupling {
            potential.copy_from_slice(phi);
        }
        if self.physics.pressure {
            for i in 0..n {
                let dh = if self.physics.nonlinear {
                    self.params.enthalpy_increment(self.rho_tilde[i], q[i])
                } else {
                    self.h_prime[i] * q[i]
                };
                potential[i] -= dh;
            }
        }
        let mut u_t = vec![0.0; n];
        self.fv.gradient(&potential, &mut u_t);
        if self.physics.nonlinear {
            let mut du = vec![0.0; n];
            self.fv.gradient(u, &mut du);
            for i in 0..n {
                u_t[i] -= u[i] * du[i];
            }
            if self.physics.viscosity {
                let mut v = vec![0.0; n];
                self.fv.viscous(u, &mut v);
                for i in 0..n {
                    u_t[i] += self.c_visc * (1.0 / rho[i] - 1.0 / self.rho_tilde[i]) * v[i];
                }
            }
        }
        u_t[0] = 0.0;
        u_t[n - 1] = 0.0;
        Ok((q_t, u_t))
    }

    /// Tridiagonal form of the implicit velocity operator.
    fn implicit_rows(&self) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let n = self.grid.len();
        let (mut lo, mut di, mut up) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        if self.physics.viscosity {
            for i in 1..n - 1 {
                let c = self.c_visc / self.rho_tilde[i];
                lo[i] = c * self.visc.0[i];
                di[i] = c * self.visc.1[i];
                up[i] = c * self.visc.2[i];
            }
        }
        if self.physics.sponge {
            for i in 1..n - 1 {
                di[i] -= self.sponge_rate * self.sponge[i];
            }
        }
        (lo, di, up)
    }

    fn apply_rows(rows: &(Vec<f64>, Vec<f64>, Vec<f64>), u: &[f64]) -> Vec<f64> {
        let n = u.len();
        (0..n)
            .map(|i| {
                let mut s = rows.1[i] * u[i];
                if i > 0 {
                    s += rows.0[i] * u[i - 1];
                }
                if i + 1 < n {
                    s += rows.2[i] * u[i + 1];
                }
                s
            })
            .collect()
    }

    pub fn tendencies(&self, state: &PerturbationState) -> Result<Tendencies> {
        let q = state.q.values();
        let u = state.u.values();
        let (q_t, mut u_t) = self.explicit(q, u, state.phi.values(), state.t)?;
        let implicit = Self::apply_rows(&self.implicit_rows(), u);
        for (a, b) in u_t.iter_mut().zip(implicit) {
            *a += b;
        }
        let phi_t = self.potential(&q_t)?;
        let rho = self.density(q);
        let flux: Vec<f64> = (0..q.len())
            .map(|i| {
                let qt_u = if self.physics.nonlinear {
                    q_t[i] * u[i]
                } else {
                    0.0
                };
                -(qt_u + rho[i] * u_t[i])
            })
            .collect();
        let mut q_tt = vec![0.0; q.len()];
        self.fv.divergence(&flux, &mut q_tt);
        let g = &self.grid;
        Ok(Tendencies {
            q_t: RadialField::new(Arc::clone(g), q_t)?,
            u_t: RadialField::new(Arc::clone(g), u_t)?,
            phi_t: RadialField::new(Arc::clone(g), phi_t)?,
            q_tt: RadialField::new(Arc::clone(g), q_tt)?,
        })
    }

    /// Acoustic CFL limit `0.5 h_min / (max|u| + max c_s)`.
    pub fn cfl_limit(&self, state: &PerturbationState) -> f64 {
        let rho = self.density(state.q.values());
        let cs = rho
            .iter()
            .map(|&p| self.params.sound_speed(p.max(0.0)))
            .fold(0.0, f64::max);
        0.5 * self.grid.min_spacing() / (state.u.max_abs() + cs)
    }

    /// One Heun / Crank-Nicolson step.
    pub fn step(&self, state: &PerturbationState, dt: f64) -> Result<PerturbationState> {
        if dt == 0.0 {
            return Ok(state.clone());
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return param(format!("time step {dt} must be finite and >= 0"));
        }
        let n = self.grid.len();
        let q = state.q.values();
        let u = state.u.values();
        let rows = self.implicit_rows();
        let bu = Self::apply_rows(&rows, u);
        let lhs_lo: Vec<f64> = rows.0.iter().map(|v| -0.5 * dt * v).collect();
        let lhs_di: Vec<f64> = rows.1.iter().map(|v| 1.0 - 0.5 * dt * v).collect();
        let lhs_up: Vec<f64> = rows.2.iter().map(|v| -0.5 * dt * v).collect();

        let (q_t0, u_t0) = self.explicit(q, u, state.phi.values(), state.t)?;
        let q1: Vec<f64> = (0..n).map(|i| q[i] + dt * q_t0[i]).collect();
        let rhs: Vec<f64> = (0..n)
            .map(|i| u[i] + dt * u_t0[i] + 0.5 * dt * bu[i])
            .collect();
        let u1 = tridiag::solve(&lhs_lo, &lhs_di, &lhs_up, &rhs)?;
        let phi1 = self.potential(&q1)?;

        let (q_t1, u_t1) = self.explicit(&q1, &u1, &phi1, state.t + dt)?;
        let q2: Vec<f64> = (0..n)
            .map(|i| q[i] + 0.5 * dt * (q_t0[i] + q_t1[i]))
            .collect();
        let rhs: Vec<f64> = (0..n)
            .map(|i| u[i] + 0.5 * dt * (u_t0[i] + u_t1[i]) + 0.5 * dt * bu[i])
            .collect();
        let mut u2 = tridiag::solve(&lhs_lo, &lhs_di, &lhs_up, &rhs)?;
        u2[0] = 0.0;
        u2[n - 1] = 0.0;
        let phi2 = self.potential(&q2)?;
        let t = state.t + dt;
        self.check_density(&q2, t)?;
        let g = &self.grid;
        let next = PerturbationState {
            q: RadialField::new(Arc::clone(g), q2)
                .map_err(|_| NspError::NonFinite(format!("q at t = {t}")))?,
            u: RadialField::new(Arc::clone(g), u2)
                .map_err(|_| NspError::NonFinite(format!("u at t = {t}")))?,
            phi: RadialField::new(Arc::clone(g), phi2)?,
            t,
        };
        Ok(next)
    }

    /// Diagnostics of one state; `identity_residual` is left at 0.
    pub fn sample(&self, state: &PerturbationState) -> Result<EnergySample> {
        let tend = self.tendencies(state)?;
        let e = energy::energy_e(state, &tend);
        let (d, d_no_qtt) = energy::dissipation_d(state, &tend);
        let u = state.u.values();
        let w = self.grid.weights();
        let sponge_dissipation = if self.physics.sponge {
            (0..u.len())
                .map(|i| self.sponge_rate * self.sponge[i] * w[i] * self.rho_tilde[i] * u[i] * u[i])
                .sum()
        } else {
            0.0
        };
        Ok(EnergySample {
            t: state.t,
            e,
            d,
            d_no_qtt,
            mass: energy::mass(&state.q),
            e_basic: energy::basic_energy(state, &self.rho_tilde, &self.h_prime),
            identity_residual: 0.0,
            min_density: self.min_density(state.q.values()),
            viscous_dissipation: self.c_visc() * self.fv.face_divergence_energy(u),
            sponge_dissipation,
        })
    }
}

/// Tendencies of `state` for the full model with default switches.
pub fn compute_rhs(
    state: &PerturbationState,
    steady: &SteadyState,
    params: &FluidParams,
) -> Result<Tendencies> {
    Model::new(*params, steady, Physics::default(), None, None)?.tendencies(state)
}

/// One step of the scheme for the model described by `config`.
pub fn step_imex(
    state: &PerturbationState,
    dt: f64,
    config: &SimConfig,
) -> Result<PerturbationState> {
    Model::from_config(config)?.step(state, dt)
}

/// Compactly supported `C^infinity` bump of half-width `w` centred at `c`.
pub fn bump(r: f64, c: f64, w: f64) -> f64 {
    let x = (r - c) / w;
    if x.abs() >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - x * x)).exp()
    }
}

/// Shapes `(q, u)` of unit amplitude; `q` has zero discrete mass.
fn initial_shapes(model: &Model, kind: InitKind) -> (Vec<f64>, Vec<f64>) {
    let g = &model.grid;
    let (r0, r1) = (g.r_inner(), g.r_outer());
    let l = r1 - r0;
    let c1 = r0 + (3.0_f64).min(0.3 * l);
    let w = (1.5_f64).min(0.1 * l);
    let c2 = c1 + 2.0 * w;
    let pos: Vec<f64> = g.nodes().iter().map(|&r| bump(r, c1, w)).collect();
    let neg: Vec<f64> = g.nodes().iter().map(|&r| bump(r, c2, w)).collect();
    let wts = g.weights();
    let mp: f64 = pos.iter().zip(wts).map(|(a, b)| a * b).sum();
    let mn: f64 = neg.iter().zip(wts).map(|(a, b)| a * b).sum();
    let ratio = mp / mn;
    let q: Vec<f64> = pos.iter().zip(&neg).map(|(p, m)| p - ratio * m).collect();
    let zero = vec![0.0; q.len()];
    match kind {
        InitKind::Density => (q, zero),
        InitKind::Velocity => (zero, pos),
        InitKind::Mixed => {
            let u = q
                .iter()
                .zip(&model.rho_tilde)
                .map(|(qi, &rho)| model.params.sound_speed(rho) / rho * qi)
                .collect();
            (q, u)
        }
    }
}

fn scaled_state(model: &Model, shapes: &(Vec<f64>, Vec<f64>), a: f64) -> Result<PerturbationState> {
    let g = &model.grid;
    let q: Vec<f64> = shapes.0.iter().map(|v| a * v).collect();
    let mut u: Vec<f64> = shapes.1.iter().map(|v| a * v).collect();
    let n = u.len();
    u[0] = 0.0;
    u[n - 1] = 0.0;
    model.check_density(&q, 0.0)?;
    let phi = model.potential(&q)?;
    Ok(PerturbationState {
        q: RadialField::new(Arc::clone(g), q)?,
        u: RadialField::new(Arc::clone(g), u)?,
        phi: RadialField::new(Arc::clone(g), phi)?,
        t: 0.0,
    })
}

/// Initial perturbation of the given shape, scaled so that the discrete
/// `E(0)` equals `delta`.
pub fn init_perturbation(kind: InitKind, delta: f64, model: &Model) -> Result<PerturbationState> {
    if !(delta >= 0.0 && delta.is_finite()) {
        return param(format!("delta = {delta} must be finite and >= 0"));
    }
    if delta == 0.0 {
        return Ok(PerturbationState::zeros(&model.grid));
    }
    let shapes = initial_shapes(model, kind);
    let energy_at = |a: f64| -> Result<f64> {
        let s = scaled_state(model, &shapes, a)?;
        Ok(energy::energy_e(&s, &model.tendencies(&s)?))
    };
    let probe = 1e-8;
    let slope = energy_at(probe)? / probe;
    if !(slope > 0.0) {
        return Err(NspError::Degenerate("initial shape has zero energy".into()));
    }
    let mut a = delta / slope;
    for _ in 0..60 {
        let e = energy_at(a)?;
        if (e - delta).abs() <= 1e-13 * delta {
            break;
        }
        a *= delta / e;
    }
    scaled_state(model, &shapes, a)
}

#[derive(Debug, Clone, Serialize)]
pub struct RunFailure {
    pub t: f64,
    pub step: usize,
    pub message: String,
    /// True for vacuum and non-finite aborts.
    pub runtime_abort: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct TimeSeries {
    pub samples: Vec<EnergySample>,
    pub config_digest: String,
    pub verdict: Option<StabilityVerdict>,
    pub failure: Option<RunFailure>,
    pub dt: f64,
    pub steps: usize,
    pub delta: f64,
    pub c_visc: f64,
}

impl TimeSeries {
    pub fn max_mass_drift(&self) -> f64 {
        let m0 = self.samples.first().map_or(0.0, |s| s.mass);
        self.samples
            .iter()
            .map(|s| (s.mass - m0).abs())
            .fold(0.0, f64::max)
    }

    pub fn sup_energy(&self) -> f64 {
        self.samples.iter().map(|s| s.e).fold(0.0, f64::max)
    }
}

/// Fixed step size and step count covering `[0, t_end]`.
pub fn resolve_time_step(
    config: &SimConfig,
    model: &Model,
    state: &PerturbationState,
) -> Result<(f64, usize)> {
    if !(config.t_end >= 0.0 && config.t_end.is_finite()) {
        return param(format!("t_end = {} must be finite and >= 0", config.t_end));
    }
    let limit = model.cfl_limit(state);
    let target = match config.dt {
        TimeStep::Auto => AUTO_CFL_FACTOR * limit,
        TimeStep::Fixed(dt) => {
            if !(dt > 0.0) {
                return param(format!("dt = {dt} must be > 0"));
            }
            if dt > limit {
                return param(format!(
                    "dt = {dt} exceeds the acoustic CFL limit {limit:.3e}"
                ));
            }
            dt
        }
    };
    if config.t_end == 0.0 {
        return Ok((target, 0));
    }
    let steps = (config.t_end / target).ceil() as usize;
    Ok((config.t_end / steps as f64, steps))
}

/// Integrates to `t_end`, sampling every `output_stride` steps and at the
/// final time. `observe(step, state)` sees every sampled state. Aborts are
/// recorded in the returned series rather than propagated.
pub fn run_simulation(
    config: &SimConfig,
    mut observe: impl FnMut(usize, &PerturbationState) -> Result<()>,
) -> Result<TimeSeries> {
    if config.output_stride == 0 {
        return param("output_stride must be >= 1");
    }
    let model = Model::from_config(config)?;
    let mut state = init_perturbation(config.init, config.delta, &model)?;
    let (dt, steps) = resolve_time_step(config, &model, &state)?;

    let mut samples = vec![model.sample(&state)?];
    observe(0, &state)?;
    let mut failure = None;
    for k in 1..=steps {
        match model.step(&state, dt) {
            Ok(next) => state = next,
            Err(e) => {
                failure = Some(RunFailure {
                    t: state.t + dt,
                    step: k,
                    runtime_abort: matches!(e, NspError::Vacuum { .. } | NspError::NonFinite(_)),
                    message: e.to_string(),
                });
                break;
            }
        }
        // the last step lands on t_end up to roundoff
        if k == steps {
            state.t = config.t_end;
        }
        if k % config.output_stride == 0 || k == steps {
            samples.push(model.sample(&state)?);
            observe(k, &state)?;
        }
    }
    energy::fill_identity_residuals(&mut samples)?;
    let verdict = if failure.is_none() && samples[0].e > 0.0 {
        let c_fit = energy::fit_viscous_constant(&samples);
        Some(energy::check_theorem_bound(&samples, c_fit, config.margin)?)
    } else {
        None
    };
    Ok(TimeSeries {
        samples,
        config_digest: config.digest.clone(),
        verdict,
        failure,
        dt,
        steps,
        delta: config.delta,
        c_visc: model.c_visc(),
    })
}

/// Columnar checkpoint text with header `r q u phi`.
pub fn write_checkpoint(state: &PerturbationState) -> String {
    let mut out = String::from("r q u phi\n");
    let r = state.grid().nodes();
    for i in 0..r.len() {
        let _ = writeln!(
            out,
            "{:.16e} {:.16e} {:.16e} {:.16e}",
            r[i], state.q[i], state.u[i], state.phi[i]
        );
    }
    out
}

/// Parses [`write_checkpoint`] output back onto `grid`.
pub fn parse_checkpoint(text: &str, grid: &Arc<RadialGrid>, t: f64) -> Result<PerturbationState> {
    let mut lines = text.lines();
    if lines
        .next()
        .map(str::split_whitespace)
        .map(Iterator::collect::<Vec<_>>)
        != Some(vec!["r", "q", "u", "phi"])
    {
        return param("checkpoint header must be `r q u phi`");
    }
    let (mut q, mut u, mut phi) = (Vec::new(), Vec::new(), Vec::new());
    for (k, line) in lines.enumerate() {
        let cols: Vec<f64> = line
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| NspError::Parameter(format!("checkpoint row {}: {e}", k + 1)))?;
        if cols.len() != 4 {
            return param(format!(
                "checkpoint row {} has {} columns",
                k + 1,
                cols.len()
            ));
        }
        if k >= grid.len() || (cols[0] - grid.nodes()[k]).abs() > 1e-12 * cols[0].abs() {
            return param(format!("checkpoint row {} does not match the grid", k + 1));
        }
        q.push(cols[1]);
        u.push(cols[2]);
        phi.push(cols[3]);
    }
    Ok(PerturbationState {
        q: RadialField::new(Arc::clone(grid), q)?,
        u: RadialField::new(Arc::clone(grid), u)?,
        phi: RadialField::new(Arc::clone(grid), phi)?,
        t,
    })
}
