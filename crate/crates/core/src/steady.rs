//! Steady states `(rho_tilde, 0, Phi_tilde)` by monotone iteration between an
//! explicit sub- and supersolution.
//!
//! With `u = 0` the momentum balance reduces to `h(rho_tilde) = Phi_tilde + c_1`
//! and the potential solves the semilinear problem
//!
//! ```text
//! Delta Phi = F(Phi) - b,   F(Phi) = rho_tilde(Phi),
//! ```
//!
//! where `c_1` is fixed by the normalisation `F(0) = c_*`. The iteration
//! `(L_h - M) Phi_{k+1} = F(Phi_k) - b - M Phi_k` is monotone as long as
//! `M >= sup F'` on the order interval, because `M - L_h` is an M-matrix.

use std::fmt::Write as _;
use std::sync::Arc;

use crate::domain::{radial_derivative, scalar_gradient_norm, RadialField, RadialGrid};
use crate::elliptic::EllipticOperator;
use crate::error::{param, NspError, Result};

/// Safety factor applied to `sup F'` when choosing the shift.
pub const SHIFT_FACTOR: f64 = 1.1;

/// The constitutive map `Phi -> rho` of one branch, `F(Phi) = c_* (1 + Phi /
/// c_1)^{1/(gamma-1)}` for `gamma > 1` and `F(Phi) = c_* e^Phi` for
/// `gamma = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Nonlinearity {
    pub gamma: f64,
    pub c_star: f64,
}

impl Nonlinearity {
    pub fn new(gamma: f64, c_star: f64) -> Result<Self> {
        if !(gamma >= 1.0 && gamma.is_finite()) {
            return param(format!("gamma = {gamma} must be >= 1"));
        }
        if !(c_star > 0.0 && c_star.is_finite()) {
            return param(format!("c_star = {c_star} must be > 0"));
        }
        Ok(Self { gamma, c_star })
    }

    /// `c_1 = gamma / (gamma - 1) c_*^{gamma - 1}`; zero for `gamma = 1`,
    /// where the enthalpy is `ln rho` and no shift is needed.
    pub fn c1(&self) -> f64 {
        if self.gamma == 1.0 {
            0.0
        } else {
            self.gamma / (self.gamma - 1.0) * self.c_star.powf(self.gamma - 1.0)
        }
    }

    pub fn f(&self, phi: f64) -> Result<f64> {
        if self.gamma == 1.0 {
            return Ok(self.c_star * phi.exp());
        }
        let c1 = self.c1();
        let base = 1.0 + phi / c1;
        if !(base > 0.0) {
            return Err(NspError::Domain(format!(
                "Phi + c_1 = {} must be positive",
                phi + c1
            )));
        }
        Ok(self.c_star * base.powf(1.0 / (self.gamma - 1.0)))
    }

    pub fn f_prime(&self, phi: f64) -> Result<f64> {
        if self.gamma == 1.0 {
            return Ok(self.c_star * phi.exp());
        }
        let c1 = self.c1();
        let base = 1.0 + phi / c1;
        if !(base > 0.0) {
            return Err(NspError::Domain(format!(
                "Phi + c_1 = {} must be positive",
                phi + c1
            )));
        }
        let e = 1.0 / (self.gamma - 1.0);
        Ok(self.c_star * e / c1 * base.powf(e - 1.0))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProfileKind {
    Constant,
    /// `b = c_* + amplitude s(r) / r` with a smooth cutoff `s`.
    AdmissibleBump,
    /// `b = c_* + amplitude s(r) (U(r) - c_*)`, where `U = F(c_0 r^{-epsilon})`
    /// is the general-gamma upper envelope.
    GeneralGammaEnvelope {
        gamma: f64,
        c0: f64,
        epsilon: f64,
    },
}

impl ProfileKind {
    pub fn name(&self) -> &'static str {
        match self {
            ProfileKind::Constant => "constant",
            ProfileKind::AdmissibleBump => "admissible_bump",
            ProfileKind::GeneralGammaEnvelope { .. } => "general_gamma_envelope",
        }
    }
}

/// Doping profile `b(r)` on a grid.
#[derive(Debug, Clone)]
pub struct BackgroundProfile {
    pub kind: ProfileKind,
    pub c_star: f64,
    pub amplitude: f64,
    pub values: RadialField,
}

/// `C^infinity` step: 0 for `x <= 0`, 1 for `x >= 1`.
pub fn smooth_step(x: f64) -> f64 {
    let psi = |t: f64| if t > 0.0 { (-1.0 / t).exp() } else { 0.0 };
    let a = psi(x);
    let b = psi(1.0 - x);
    if a + b == 0.0 {
        0.0
    } else {
        a / (a + b)
    }
}

/// Cutoff of the doping perturbation: 1 near `R`, 0 well before `R_max`. The
/// window depends on `R_max` only through `min(L, 15 R)`, so profiles on
/// long shells coincide.
pub fn profile_cutoff(grid: &RadialGrid, r: f64) -> f64 {
    let r0 = grid.r_inner();
    let l = (grid.r_outer() - r0).min(15.0 * r0);
    let (a, b) = (r0 + 0.3 * l, r0 + 0.6 * l);
    1.0 - smooth_step((r - a) / (b - a))
}

pub fn make_profile(
    kind: ProfileKind,
    c_star: f64,
    amplitude: f64,
    grid: &Arc<RadialGrid>,
) -> Result<BackgroundProfile> {
    if !(0.0..=1.0).contains(&amplitude) {
        return param(format!("amplitude = {amplitude} must lie in [0, 1]"));
    }
    if !(c_star > 0.0 && c_star.is_finite()) {
        return param(format!("c_star = {c_star} must be > 0"));
    }
    let values = match kind {
        ProfileKind::Constant => RadialField::constant(Arc::clone(grid), c_star),
        ProfileKind::AdmissibleBump => RadialField::from_fn(Arc::clone(grid), |r| {
            c_star + amplitude * profile_cutoff(grid, r) / r
        })?,
        ProfileKind::GeneralGammaEnvelope { gamma, c0, epsilon } => {
            check_envelope(gamma, c0, epsilon)?;
            let nl = Nonlinearity::new(gamma, c_star)?;
            let mut v = Vec::with_capacity(grid.len());
            for &r in grid.nodes() {
                let upper = nl.f(c0 * r.powf(-epsilon))?;
                v.push(c_star + amplitude * profile_cutoff(grid, r) * (upper - c_star));
            }
            RadialField::new(Arc::clone(grid), v)?
        }
    };
    Ok(BackgroundProfile {
        kind,
        c_star,
        amplitude,
        values,
    })
}

fn check_envelope(gamma: f64, c0: f64, epsilon: f64) -> Result<()> {
    if !(gamma > 1.0 && gamma.is_finite()) {
        return param(format!("the envelope profile needs gamma > 1, got {gamma}"));
    }
    if !(c0 > 0.0 && c0.is_finite()) {
        return param(format!("c0 = {c0} must be > 0"));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return param(format!("epsilon = {epsilon} must lie in (0, 1)"));
    }
    Ok(())
}

/// The zero potential, a subsolution on every branch.
pub fn subsolution_phi(gamma: f64, grid: &Arc<RadialGrid>) -> Result<RadialField> {
    if !(gamma >= 1.0) {
        return param(format!("gamma = {gamma} must be >= 1"));
    }
    Ok(RadialField::zeros(Arc::clone(grid)))
}

/// Explicit supersolution for `gamma` in `[1, 2]` and `b <= c_* + 1/r`:
/// `gamma/(gamma-1) ((c_* + 1/r)^{gamma-1} - c_*^{gamma-1})`, and
/// `ln(1 + 1/(c_* r))` at `gamma = 1`.
pub fn supersolution_phi(gamma: f64, c_star: f64, grid: &Arc<RadialGrid>) -> Result<RadialField> {
    if !(gamma >= 1.0) {
        return param(format!("gamma = {gamma} must be >= 1"));
    }
    if gamma > 2.0 {
        return param(format!(
            "the explicit supersolution needs gamma <= 2 (got {gamma}); use the envelope profile"
        ));
    }
    if !(c_star > 0.0) {
        return param(format!("c_star = {c_star} must be > 0"));
    }
    if gamma == 1.0 {
        RadialField::from_fn(Arc::clone(grid), |r| (1.0 / (c_star * r)).ln_1p())
    } else {
        let g1 = gamma - 1.0;
        let c1 = gamma / g1 * c_star.powf(g1);
        RadialField::from_fn(Arc::clone(grid), |r| {
            gamma / g1 * (c_star + 1.0 / r).powf(g1) - c1
        })
    }
}

/// `c_0 r^{-epsilon}`, the supersolution paired with the envelope profile.
pub fn envelope_supersolution_phi(
    c0: f64,
    epsilon: f64,
    grid: &Arc<RadialGrid>,
) -> Result<RadialField> {
    check_envelope(2.0, c0, epsilon)?;
    RadialField::from_fn(Arc::clone(grid), |r| c0 * r.powf(-epsilon))
}

/// `rho = F(Phi)` pointwise.
pub fn rho_from_phi(phi: &RadialField, gamma: f64, c_star: f64) -> Result<RadialField> {
    let nl = Nonlinearity::new(gamma, c_star)?;
    let v = phi
        .values()
        .iter()
        .map(|&p| nl.f(p))
        .collect::<Result<Vec<_>>>()?;
    RadialField::new(Arc::clone(phi.grid()), v)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Sub,
    Super,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CertReport {
    pub role: Role,
    /// Extremes over interior nodes of `Delta_h Phi - F(Phi) + b`.
    pub max_residual: f64,
    pub min_residual: f64,
    /// `dPhi/dn = -Phi'(R)` with `n` pointing into the ball.
    pub normal_derivative: f64,
    pub tol: f64,
    pub passed: bool,
}

/// Default sign tolerance of [`check_subsuper`].
pub const CERT_TOL: f64 = 1e-8;

pub fn check_subsuper(
    phi: &RadialField,
    role: Role,
    gamma: f64,
    profile: &BackgroundProfile,
    tol: f64,
) -> Result<CertReport> {
    let nl = Nonlinearity::new(gamma, profile.c_star)?;
    let grid = phi.grid();
    let ops = crate::domain::FvOperators::new(grid);
    let lap = ops.interior_laplacian(phi.values());
    let b = profile.values.values();
    let mut max_residual = f64::NEG_INFINITY;
    let mut min_residual = f64::INFINITY;
    for (i, l) in lap.iter().enumerate() {
        let f = nl.f(phi[i])?;
        if let Some(l) = l {
            let res = l - f + b[i];
            max_residual = max_residual.max(res);
            min_residual = min_residual.min(res);
        }
    }
    let normal_derivative = -radial_derivative(phi, 1)?[0];
    let passed = match role {
        Role::Super => max_residual <= tol && normal_derivative >= -tol,
        Role::Sub => min_residual >= -tol && normal_derivative <= tol,
    };
    Ok(CertReport {
        role,
        max_residual,
        min_residual,
        normal_derivative,
        tol,
        passed,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteadyOptions {
    /// Max-norm increment at which each monotone sequence stops.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SteadyOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 500,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SteadyState {
    pub rho_tilde: RadialField,
    pub phi_tilde: RadialField,
    pub gamma: f64,
    pub c_star: f64,
    pub profile: BackgroundProfile,
    /// Max over interior nodes of `|Phi'' + 2 Phi'/r - (rho - b)|` with the
    /// nodal difference stencils; an `O(h^2)` consistency measure.
    pub residual_elliptic: f64,
    /// Max over all nodes of `|L_h Phi - (rho - b)|`, the residual of the
    /// discrete system actually solved.
    pub residual_discrete: f64,
    pub bounds_ok: bool,
    /// Largest violation of the pointwise density bounds (0 when they hold).
    pub bounds_violation: f64,
    pub shift: f64,
    pub iterations_from_super: usize,
    pub iterations_from_sub: usize,
    /// Max-norm gap between the two monotone limits.
    pub limit_gap: f64,
    pub super_cert: CertReport,
    pub sub_cert: CertReport,
    pub options: SteadyOptions,
}

impl SteadyState {
    pub fn grid(&self) -> &Arc<RadialGrid> {
        self.rho_tilde.grid()
    }

    /// Pointwise upper density bound for this profile.
    pub fn upper_bound(&self, r: f64) -> Result<f64> {
        upper_bound(&self.profile, self.gamma, r)
    }
}

fn upper_bound(profile: &BackgroundProfile, gamma: f64, r: f64) -> Result<f64> {
    match profile.kind {
        ProfileKind::GeneralGammaEnvelope { c0, epsilon, .. } => {
            Nonlinearity::new(gamma, profile.c_star)?.f(c0 * r.powf(-epsilon))
        }
        _ => Ok(profile.c_star + 1.0 / r),
    }
}

fn starting_supersolution(gamma: f64, profile: &BackgroundProfile) -> Result<RadialField> {
    let grid = profile.values.grid();
    match profile.kind {
        ProfileKind::GeneralGammaEnvelope {
            gamma: g,
            c0,
            epsilon,
        } => {
            if g != gamma {
                return param(format!(
                    "envelope profile was built for gamma = {g}, solving with {gamma}"
                ));
            }
            envelope_supersolution_phi(c0, epsilon, grid)
        }
        _ => supersolution_phi(gamma, profile.c_star, grid),
    }
}

/// Both monotone sequences and the certificates of the converged pair.
pub fn solve_steady_monotone(
    gamma: f64,
    profile: &BackgroundProfile,
    tol: f64,
) -> Result<SteadyState> {
    solve_steady_monotone_with(
        gamma,
        profile,
        &SteadyOptions {
            tol,
            ..SteadyOptions::default()
        },
    )
}

pub fn solve_steady_monotone_with(
    gamma: f64,
    profile: &BackgroundProfile,
    opts: &SteadyOptions,
) -> Result<SteadyState> {
    if !(opts.tol > 0.0) {
        return param(format!("tolerance {} must be > 0", opts.tol));
    }
    let nl = Nonlinearity::new(gamma, profile.c_star)?;
    let grid = Arc::clone(profile.values.grid());
    let b = profile.values.values();
    let upper = starting_supersolution(gamma, profile)?;
    let lower = subsolution_phi(gamma, &grid)?;

    // F' is monotone in Phi, so its sup over [0, max Phi_super] sits at an end
    let phi_max = upper.max().max(0.0);
    let m = SHIFT_FACTOR * nl.f_prime(0.0)?.max(nl.f_prime(phi_max)?);
    let op = EllipticOperator::new(Arc::clone(&grid));

    let step = |phi: &[f64]| -> Result<Vec<f64>> {
        let mut rhs = Vec::with_capacity(phi.len());
        for (p, bi) in phi.iter().zip(b) {
            rhs.push(nl.f(*p)? - bi - m * p);
        }
        op.solve_shifted_values(m, &rhs)
    };

    let mut hi = upper.values().to_vec();
    let mut lo = lower.values().to_vec();
    let slack = 1e-12 * (1.0 + phi_max);
    let (mut it_hi, mut it_lo) = (0usize, 0usize);
    let (mut done_hi, mut done_lo) = (false, false);
    while !(done_hi && done_lo) {
        if it_hi.max(it_lo) >= opts.max_iter {
            return Err(NspError::Iteration(format!(
                "no convergence to {:.1e} within {} iterations",
                opts.tol, opts.max_iter
            )));
        }
        if !done_hi {
            let next = step(&hi)?;
            let mut inc = 0.0_f64;
            for (i, (n, o)) in next.iter().zip(&hi).enumerate() {
                if *n > o + slack {
                    return Err(NspError::Monotonicity(format!(
                        "supersolution sequence increased at node {i} (iteration {})",
                        it_hi + 1
                    )));
                }
                inc = inc.max((n - o).abs());
            }
            hi = next;
            it_hi += 1;
            done_hi = inc < opts.tol;
        }
        if !done_lo {
            let next = step(&lo)?;
            let mut inc = 0.0_f64;
            for (i, (n, o)) in next.iter().zip(&lo).enumerate() {
                if *n < o - slack {
                    return Err(NspError::Monotonicity(format!(
                        "subsolution sequence decreased at node {i} (iteration {})",
                        it_lo + 1
                    )));
                }
                inc = inc.max((n - o).abs());
            }
            lo = next;
            it_lo += 1;
            done_lo = inc < opts.tol;
        }
        if let Some(i) = (0..hi.len()).find(|&i| lo[i] > hi[i] + slack) {
            return Err(NspError::Monotonicity(format!(
                "sequences crossed at r = {}",
                grid.nodes()[i]
            )));
        }
    }
    let limit_gap = hi
        .iter()
        .zip(&lo)
        .fold(0.0_f64, |a, (h, l)| a.max((h - l).abs()));
    if limit_gap > 10.0 * opts.tol {
        return Err(NspError::Iteration(format!(
            "monotone limits differ by {limit_gap:.3e}"
        )));
    }

    let phi_vals: Vec<f64> = hi.iter().zip(&lo).map(|(h, l)| 0.5 * (h + l)).collect();
    let phi_tilde = RadialField::new(Arc::clone(&grid), phi_vals)?;
    let rho_tilde = rho_from_phi(&phi_tilde, gamma, profile.c_star)?;

    let lap = op.apply(phi_tilde.values());
    let residual_discrete = (0..grid.len())
        .map(|i| (lap[i] - (rho_tilde[i] - b[i])).abs())
        .fold(0.0, f64::max);
    let residual_elliptic = nodal_residual(&phi_tilde, &rho_tilde, b)?;

    let mut bounds_violation = 0.0_f64;
    for (&r, &rho) in grid.nodes().iter().zip(rho_tilde.values()) {
        let up = upper_bound(profile, gamma, r)?;
        bounds_violation = bounds_violation.max(profile.c_star - rho).max(rho - up);
    }
    let super_cert = check_subsuper(&upper, Role::Super, gamma, profile, CERT_TOL)?;
    let sub_cert = check_subsuper(&lower, Role::Sub, gamma, profile, CERT_TOL)?;

    Ok(SteadyState {
        rho_tilde,
        phi_tilde,
        gamma,
        c_star: profile.c_star,
        profile: profile.clone(),
        residual_elliptic,
        residual_discrete,
        bounds_ok: bounds_violation <= 1e-8,
        bounds_violation,
        shift: m,
        iterations_from_super: it_hi,
        iterations_from_sub: it_lo,
        limit_gap,
        super_cert,
        sub_cert,
        options: *opts,
    })
}

fn nodal_residual(phi: &RadialField, rho: &RadialField, b: &[f64]) -> Result<f64> {
    let d1 = radial_derivative(phi, 1)?;
    let d2 = radial_derivative(phi, 2)?;
    let r = phi.grid().nodes();
    let n = r.len() - 1;
    Ok((1..n)
        .map(|i| (d2[i] + 2.0 * d1[i] / r[i] - (rho[i] - b[i])).abs())
        .fold(0.0, f64::max))
}

/// Norms `|| grad^j rho_tilde ||` and `|| grad^j Phi_tilde ||` for `j = 1..=3`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteadyNorms {
    pub rho: [f64; 3],
    pub phi: [f64; 3],
}

impl SteadyNorms {
    pub fn of(steady: &SteadyState) -> Self {
        let g = steady.grid();
        let norm = |f: &RadialField, j| scalar_gradient_norm(g, f.values(), j);
        Self {
            rho: [1, 2, 3].map(|j| norm(&steady.rho_tilde, j)),
            phi: [1, 2, 3].map(|j| norm(&steady.phi_tilde, j)),
        }
    }

    fn all(&self) -> impl Iterator<Item = f64> + '_ {
        self.rho.iter().chain(&self.phi).copied()
    }

    /// Every pair of norms within a factor 2, treating values below `floor`
    /// on both sides as equal.
    pub fn within_factor_two(&self, other: &SteadyNorms, floor: f64) -> bool {
        self.all()
            .zip(other.all())
            .all(|(a, b)| (a < floor && b < floor) || (a <= 2.0 * b && b <= 2.0 * a))
    }
}

#[derive(Debug, Clone)]
pub struct RegularityReport {
    pub norms: SteadyNorms,
    pub refined: SteadyNorms,
    pub extended: SteadyNorms,
    /// Weighted `L^2` norm of `Phi' - h'(rho) rho'` on the base grid.
    pub compatibility_residual: f64,
    pub stable_under_refinement: bool,
    pub stable_under_extension: bool,
}

/// Norms below this are treated as zero in the stability comparison.
pub const REGULARITY_FLOOR: f64 = 1e-8;

/// Derivative norms of the steady pair on its grid, on the refined grid, and
/// on a grid with twice the outer radius.
pub fn steady_regularity_report(steady: &SteadyState) -> Result<RegularityReport> {
    let grid = steady.grid();
    let norms = SteadyNorms::of(steady);
    let resolve = |g: RadialGrid| -> Result<SteadyNorms> {
        let g = Arc::new(g);
        let p = make_profile(
            steady.profile.kind,
            steady.c_star,
            steady.profile.amplitude,
            &g,
        )?;
        let s = solve_steady_monotone_with(steady.gamma, &p, &steady.options)?;
        Ok(SteadyNorms::of(&s))
    };
    let refined = resolve(grid.refined()?)?;
    let extended = resolve(grid.with_outer_radius(2.0 * grid.r_outer())?)?;

    let d_rho = radial_derivative(&steady.rho_tilde, 1)?;
    let d_phi = radial_derivative(&steady.phi_tilde, 1)?;
    let gamma = steady.gamma;
    let mismatch: Vec<f64> = (0..grid.len())
        .map(|i| d_phi[i] - gamma * steady.rho_tilde[i].powf(gamma - 2.0) * d_rho[i])
        .collect();
    let compatibility_residual = crate::domain::dot(grid, &mismatch, &mismatch).sqrt();

    Ok(RegularityReport {
        stable_under_refinement: norms.within_factor_two(&refined, REGULARITY_FLOOR),
        stable_under_extension: norms.within_factor_two(&extended, REGULARITY_FLOOR),
        norms,
        refined,
        extended,
        compatibility_residual,
    })
}

/// Two whitespace-separated columns `r value`, one node per line, with a
/// header naming the field.
pub fn export_columns(name: &str, field: &RadialField) -> String {
    let mut out = format!("r {name}\n");
    for (r, v) in field.grid().nodes().iter().zip(field.values()) {
        let _ = writeln!(out, "{r:.16e} {v:.16e}");
    }
    out
}
