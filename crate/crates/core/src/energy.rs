//! Energy and dissipation functionals of the perturbation, the zero-order
//! energy balance, and the stability verdict.
//!
//! `E` and `D` are plain sums of norms. Gradient norms of potentials use the
//! Dirichlet form of the Poisson operator, which also counts the monopole
//! field outside the truncation radius.

use serde::Serialize;

use crate::domain::{
    fd_weights, integrate, scalar_gradient_norm, vector_gradient_norm, FvOperators, RadialField,
};
use crate::error::{param, NspError, Result};
use crate::evolve::{PerturbationState, Tendencies};

/// The five summands of `E`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct EnergyParts {
    /// `||u||_{H^3}`.
    pub u_h3: f64,
    /// `||q||_{H^2}`.
    pub q_h2: f64,
    /// `||(q_t, u_t)||_{H^1}`.
    pub qt_ut_h1: f64,
    pub grad_phi: f64,
    pub grad_phi_t: f64,
}

impl EnergyParts {
    pub fn total(&self) -> f64 {
        self.u_h3 + self.q_h2 + self.qt_ut_h1 + self.grad_phi + self.grad_phi_t
    }
}

/// The five summands of `D`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct DissipationParts {
    /// `||grad u||_{H^2}`.
    pub grad_u_h2: f64,
    /// `||grad u_t||_{H^1}`.
    pub grad_ut_h1: f64,
    pub q_h2: f64,
    pub q_t_h1: f64,
    pub q_tt: f64,
}

impl DissipationParts {
    pub fn total(&self) -> f64 {
        self.without_qtt() + self.q_tt
    }

    pub fn without_qtt(&self) -> f64 {
        self.grad_u_h2 + self.grad_ut_h1 + self.q_h2 + self.q_t_h1
    }
}

fn root_sum_squares(norms: impl IntoIterator<Item = f64>) -> f64 {
    norms.into_iter().map(|n| n * n).sum::<f64>().sqrt()
}

fn scalar_hk(f: &RadialField, k: usize) -> f64 {
    root_sum_squares((0..=k).map(|j| scalar_gradient_norm(f.grid(), f.values(), j)))
}

fn vector_norms(u: &RadialField, js: std::ops::RangeInclusive<usize>) -> f64 {
    root_sum_squares(js.map(|j| vector_gradient_norm(u.grid(), u.values(), j)))
}

pub fn energy_parts(state: &PerturbationState, tend: &Tendencies) -> EnergyParts {
    let ops = FvOperators::new(state.q.grid());
    let qt_h1 = scalar_hk(&tend.q_t, 1);
    let ut_h1 = vector_norms(&tend.u_t, 0..=1);
    EnergyParts {
        u_h3: vector_norms(&state.u, 0..=3),
        q_h2: scalar_hk(&state.q, 2),
        qt_ut_h1: (qt_h1 * qt_h1 + ut_h1 * ut_h1).sqrt(),
        grad_phi: ops.dirichlet_energy(state.phi.values()).sqrt(),
        grad_phi_t: ops.dirichlet_energy(tend.phi_t.values()).sqrt(),
    }
}

/// `E = ||u||_{H^3} + ||q||_{H^2} + ||(q_t, u_t)||_{H^1} + ||grad phi|| +
/// ||grad phi_t||`.
pub fn energy_e(state: &PerturbationState, tend: &Tendencies) -> f64 {
    energy_parts(state, tend).total()
}

pub fn dissipation_parts(state: &PerturbationState, tend: &Tendencies) -> DissipationParts {
    DissipationParts {
        grad_u_h2: vector_norms(&state.u, 1..=3),
        grad_ut_h1: vector_norms(&tend.u_t, 1..=2),
        q_h2: scalar_hk(&state.q, 2),
        q_t_h1: scalar_hk(&tend.q_t, 1),
        q_tt: scalar_gradient_norm(tend.q_tt.grid(), tend.q_tt.values(), 0),
    }
}

/// `(D, D without ||q_tt||)`.
pub fn dissipation_d(state: &PerturbationState, tend: &Tendencies) -> (f64, f64) {
    let p = dissipation_parts(state, tend);
    (p.total(), p.without_qtt())
}

/// Discrete `int q dx`.
pub fn mass(q: &RadialField) -> f64 {
    integrate(q.grid(), q.values())
}

/// `1/2 (sum w rho_tilde u^2 + sum w h'(rho_tilde) q^2 + B(phi, phi))`.
pub fn basic_energy(state: &PerturbationState, rho_tilde: &[f64], h_prime: &[f64]) -> f64 {
    let g = state.q.grid();
    let w = g.weights();
    let q = state.q.values();
    let u = state.u.values();
    let kinetic: f64 = (0..w.len())
        .map(|i| w[i] * rho_tilde[i] * u[i] * u[i])
        .sum();
    let internal: f64 = (0..w.len()).map(|i| w[i] * h_prime[i] * q[i] * q[i]).sum();
    let field = FvOperators::new(g).dirichlet_energy(state.phi.values());
    0.5 * (kinetic + internal + field)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergySample {
    pub t: f64,
    #[serde(rename = "E")]
    pub e: f64,
    #[serde(rename = "D")]
    pub d: f64,
    #[serde(rename = "D_no_qtt")]
    pub d_no_qtt: f64,
    pub mass: f64,
    #[serde(rename = "E_basic")]
    pub e_basic: f64,
    /// `dE_basic/dt + c_visc ||grad u||^2 + sponge loss`, filled once the
    /// neighbouring samples exist.
    pub identity_residual: f64,
    pub min_density: f64,
    /// `c_visc ||grad u||^2` in the scheme's discrete form.
    pub viscous_dissipation: f64,
    /// Energy removed by the sponge layer per unit time.
    pub sponge_dissipation: f64,
}

/// Residual of the zero-order balance at the middle of three consecutive
/// samples. The balance is averaged over the window: the centred difference
/// of `E_basic` is exactly the window mean of its derivative, and the
/// dissipation is averaged through its quadratic interpolant.
pub fn basic_energy_identity_residual(window: &[EnergySample]) -> Result<f64> {
    if window.len() < 3 {
        return param("the energy identity needs at least 3 samples");
    }
    let mid = window.len() / 2;
    identity_over(&window[mid - 1..mid + 2], 0, 2)
}

/// Mean of `dE_basic/dt + dissipation` over `[t_a, t_b]` for nodes `a < b`
/// of a 3-sample window.
fn identity_over(win: &[EnergySample], a: usize, b: usize) -> Result<f64> {
    let ts: Vec<f64> = win.iter().map(|s| s.t).collect();
    if ts.windows(2).any(|w| w[1] <= w[0]) {
        return param("sample times must increase strictly");
    }
    let (ta, tb) = (ts[a], ts[b]);
    let de = (win[b].e_basic - win[a].e_basic) / (tb - ta);
    // 3-point Gauss-Legendre is exact for the quadratic interpolant
    let gauss = [
        (-(0.6_f64).sqrt(), 5.0 / 9.0),
        (0.0, 8.0 / 9.0),
        ((0.6_f64).sqrt(), 5.0 / 9.0),
    ];
    let mut mean = 0.0;
    for (x, wq) in gauss {
        let t = 0.5 * (ta + tb) + 0.5 * (tb - ta) * x;
        let lw = fd_weights(t, &ts, 0);
        let d: f64 = lw
            .iter()
            .zip(win)
            .map(|(c, s)| c * (s.viscous_dissipation + s.sponge_dissipation))
            .sum();
        mean += 0.5 * wq * d;
    }
    Ok(de + mean)
}

/// Fills `identity_residual` for every sample; interior samples use the
/// centred window, the two end samples their adjacent half-window.
pub fn fill_identity_residuals(samples: &mut [EnergySample]) -> Result<()> {
    let n = samples.len();
    if n < 3 {
        return Ok(());
    }
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let r = if i == 0 {
            identity_over(&samples[0..3], 0, 1)?
        } else if i == n - 1 {
            identity_over(&samples[n - 3..n], 1, 2)?
        } else {
            identity_over(&samples[i - 1..i + 2], 0, 2)?
        };
        out.push(r);
    }
    for (s, r) in samples.iter_mut().zip(out) {
        s.identity_residual = r;
    }
    Ok(())
}

/// Trapezoid rule over the sample times.
pub fn time_integral(samples: &[EnergySample], f: impl Fn(&EnergySample) -> f64) -> Vec<f64> {
    let mut acc = 0.0;
    let mut out = Vec::with_capacity(samples.len());
    for (i, s) in samples.iter().enumerate() {
        if i > 0 {
            let p = &samples[i - 1];
            acc += 0.5 * (s.t - p.t) * (f(p) + f(s));
        }
        out.push(acc);
    }
    out
}

/// `int c_visc ||grad u||^2 dt / int D_no_qtt^2 dt`: how much of the
/// dissipation budget the viscous term actually realises; 0 when both vanish.
pub fn fit_viscous_constant(samples: &[EnergySample]) -> f64 {
    let num = time_integral(samples, |s| s.viscous_dissipation);
    let den = time_integral(samples, |s| s.d_no_qtt * s.d_no_qtt);
    match (num.last(), den.last()) {
        (Some(&n), Some(&d)) if d > 0.0 => n / d,
        _ => 0.0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StabilityVerdict {
    /// `sup_t E(t) / E(0)`.
    pub sup_energy_ratio: f64,
    /// `sup_t (E(t)^2 + c_fit int_0^t D_no_qtt^2) / E(0)^2`.
    pub sup_combined_ratio: f64,
    /// Same with the `||q_tt||` term included in `D`.
    pub sup_combined_ratio_with_qtt: f64,
    pub c_fit: f64,
    pub margin: f64,
    pub passed: bool,
}

/// PASS when `sup E/E(0) <= margin` and the combined ratio, which is
/// quadratic in `E`, stays below `margin^2`.
pub fn check_theorem_bound(
    samples: &[EnergySample],
    c_fit: f64,
    margin: f64,
) -> Result<StabilityVerdict> {
    let Some(first) = samples.first() else {
        return param("empty time series");
    };
    let e0 = first.e;
    if !(e0 > 0.0) {
        return Err(NspError::Degenerate(
            "E(0) = 0, the stability ratio is undefined".into(),
        ));
    }
    let int_d = time_integral(samples, |s| s.d_no_qtt * s.d_no_qtt);
    let int_d_full = time_integral(samples, |s| s.d * s.d);
    let mut sup_e = 0.0_f64;
    let mut sup_c = 0.0_f64;
    let mut sup_cq = 0.0_f64;
    for (i, s) in samples.iter().enumerate() {
        sup_e = sup_e.max(s.e / e0);
        sup_c = sup_c.max((s.e * s.e + c_fit * int_d[i]) / (e0 * e0));
        sup_cq = sup_cq.max((s.e * s.e + c_fit * int_d_full[i]) / (e0 * e0));
    }
    Ok(StabilityVerdict {
        sup_energy_ratio: sup_e,
        sup_combined_ratio: sup_c,
        sup_combined_ratio_with_qtt: sup_cq,
        c_fit,
        margin,
        passed: sup_e <= margin && sup_c <= margin * margin,
    })
}

/// Largest `|identity residual| / (delta D^2)` over samples with `D > 0`.
pub fn identity_kappa(samples: &[EnergySample], delta: f64) -> f64 {
    samples
        .iter()
        .filter(|s| s.d > 0.0 && delta > 0.0)
        .map(|s| s.identity_residual.abs() / (delta * s.d * s.d))
        .fold(0.0, f64::max)
}
