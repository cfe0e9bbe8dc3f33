//! Radial linear elliptic solvers on the truncated exterior domain.
//!
//! Both operators share the finite-volume Laplacian of
//! [`FvOperators::laplacian_tridiag`]: a zero-flux condition at the inner
//! sphere and the monopole closure `phi' + phi / r = 0` at the outer radius.
//! Off-diagonal entries are positive and every row is weakly diagonally
//! dominant (strictly in the last row), so `M - L_h` is a nonsingular
//! M-matrix for every `M >= 0`.

use std::sync::Arc;

use crate::domain::{scalar_gradient_norm, weighted_l2_norm, FvOperators, RadialField, RadialGrid};
use crate::error::{param, NspError, Result};
use crate::tridiag;

/// Relative residual every Poisson solve must certify.
pub const POISSON_RESIDUAL_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct PoissonSolution {
    pub phi: RadialField,
    /// `phi'(R_max)`, fixed by the outer closure to `-phi(R_max) / R_max`.
    pub flux_at_outer: f64,
    /// `|| L_h phi - q ||_{L^2}`.
    pub residual_norm: f64,
}

/// Factor-free tridiagonal form of the Laplacian on one grid, reusable across
/// many right-hand sides.
#[derive(Debug, Clone)]
pub struct EllipticOperator {
    grid: Arc<RadialGrid>,
    ops: FvOperators,
    lower: Vec<f64>,
    diag: Vec<f64>,
    upper: Vec<f64>,
}

impl EllipticOperator {
    pub fn new(grid: Arc<RadialGrid>) -> Self {
        let ops = FvOperators::new(&grid);
        let (lower, diag, upper) = ops.laplacian_tridiag();
        Self {
            grid,
            ops,
            lower,
            diag,
            upper,
        }
    }

    pub fn grid(&self) -> &Arc<RadialGrid> {
        &self.grid
    }

    pub fn fv(&self) -> &FvOperators {
        &self.ops
    }

    /// `L_h phi` including both boundary closures.
    pub fn apply(&self, phi: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; phi.len()];
        self.ops.laplacian(phi, &mut out);
        out
    }

    /// Solves `(L_h - M) w = rhs`, followed by one step of iterative
    /// refinement.
    pub fn solve_shifted_values(&self, m: f64, rhs: &[f64]) -> Result<Vec<f64>> {
        if !(m >= 0.0 && m.is_finite()) {
            return param(format!("shift M = {m} must be finite and >= 0"));
        }
        if rhs.len() != self.grid.len() {
            return param("right-hand side does not match the grid");
        }
        let diag: Vec<f64> = self.diag.iter().map(|d| d - m).collect();
        let mut w = tridiag::solve(&self.lower, &diag, &self.upper, rhs)?;
        let lw = self.apply(&w);
        let defect: Vec<f64> = rhs
            .iter()
            .zip(lw.iter().zip(&w))
            .map(|(b, (l, x))| b - (l - m * x))
            .collect();
        let dw = tridiag::solve(&self.lower, &diag, &self.upper, &defect)?;
        for (x, d) in w.iter_mut().zip(dw) {
            *x += d;
        }
        Ok(w)
    }

    pub fn solve_poisson(&self, q: &[f64]) -> Result<PoissonSolution> {
        let phi = self.solve_shifted_values(0.0, q)?;
        let lphi = self.apply(&phi);
        let defect: Vec<f64> = lphi.iter().zip(q).map(|(a, b)| a - b).collect();
        let residual_norm = crate::domain::dot(&self.grid, &defect, &defect).sqrt();
        let q_norm = crate::domain::dot(&self.grid, q, q).sqrt();
        let scale = self.diag.iter().fold(0.0_f64, |a, d| a.max(d.abs()));
        let phi_max = phi.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
        // the absolute floor only matters when q vanishes to roundoff
        let allowed = POISSON_RESIDUAL_TOL * q_norm
            + 64.0 * f64::EPSILON * scale * phi_max * self.grid.volume().sqrt();
        if !(residual_norm <= allowed) {
            return Err(NspError::Internal(format!(
                "Poisson residual {residual_norm:.3e} exceeds {allowed:.3e}"
            )));
        }
        let n = phi.len() - 1;
        let flux_at_outer = -phi[n] / self.grid.r_outer();
        Ok(PoissonSolution {
            phi: RadialField::new(Arc::clone(&self.grid), phi)?,
            flux_at_outer,
            residual_norm,
        })
    }
}

/// Solves `phi'' + 2 phi' / r = q` with `phi'(R) = 0` and the monopole
/// closure at `R_max`.
pub fn solve_poisson_neumann(q: &RadialField) -> Result<PoissonSolution> {
    EllipticOperator::new(Arc::clone(q.grid())).solve_poisson(q.values())
}

/// `|| grad^2 phi || = sqrt(||phi''||^2 + 2 ||phi'/r||^2)`.
pub fn hessian_norm_radial(phi: &RadialField) -> f64 {
    scalar_gradient_norm(phi.grid(), phi.values(), 2)
}

/// Solves `(Delta - M) w = rhs` with the same boundary closures as the
/// Poisson problem.
pub fn solve_shifted(m: f64, rhs: &RadialField) -> Result<RadialField> {
    let op = EllipticOperator::new(Arc::clone(rhs.grid()));
    let w = op.solve_shifted_values(m, rhs.values())?;
    RadialField::new(Arc::clone(rhs.grid()), w)
}

/// `|| grad^2 phi || / || q ||` for the Poisson solution of `q`; `None` when
/// `q` vanishes.
pub fn poisson_regularity_ratio(q: &RadialField) -> Result<Option<f64>> {
    let q_norm = weighted_l2_norm(q);
    if q_norm == 0.0 {
        return Ok(None);
    }
    let sol = solve_poisson_neumann(q)?;
    Ok(Some(hessian_norm_radial(&sol.phi) / q_norm))
}
