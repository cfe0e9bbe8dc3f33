//! Discrete `L^2` and `H^k` norms of radial profiles.
//!
//! The norms are those of the 3-D fields, not of the 1-D profiles: a scalar
//! `f(r)` and a radial vector field `u(r) r_hat` have full derivative tensors
//! whose squared Frobenius norms involve the angular metric terms. For a
//! scalar with `c = (f'' - f'/r) / r`:
//!
//! ```text
//! |grad f|^2   = f'^2
//! |grad^2 f|^2 = f''^2 + 2 (f'/r)^2
//! |grad^3 f|^2 = f'''^2 + 6 c^2
//! ```
//!
//! A radial vector field is the gradient of a potential with `psi' = u`, so
//! its tensors are those of `psi` shifted by one order; with
//! `c = (u' - u/r) / r`:
//!
//! ```text
//! |u|^2          = u^2
//! |grad u|^2     = u'^2 + 2 (u/r)^2
//! |grad^2 u|^2   = u''^2 + 6 c^2
//! |grad^3 u|^2   = u'''^2 + 12 c'^2 + 24 (c/r)^2
//! ```

use crate::domain::stencil::{derivative_values, DerivativeOrder};
use crate::domain::{RadialField, RadialGrid};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldKind {
    Scalar,
    /// Radial component of a vector field `u(r) r_hat`.
    RadialVector,
}

/// `sum_i w_i f_i`.
pub fn integrate(grid: &RadialGrid, values: &[f64]) -> f64 {
    grid.weights().iter().zip(values).map(|(w, v)| w * v).sum()
}

/// Weighted inner product `sum_i w_i f_i g_i`.
pub fn dot(grid: &RadialGrid, f: &[f64], g: &[f64]) -> f64 {
    grid.weights()
        .iter()
        .zip(f.iter().zip(g))
        .map(|(w, (a, b))| w * a * b)
        .sum()
}

pub fn weighted_l2_norm(f: &RadialField) -> f64 {
    dot(f.grid(), f.values(), f.values()).sqrt()
}

fn squares_norm(grid: &RadialGrid, density: impl Iterator<Item = f64>) -> f64 {
    grid.weights()
        .iter()
        .zip(density)
        .map(|(w, d)| w * d)
        .sum::<f64>()
        .sqrt()
}

struct Derivs {
    d1: Vec<f64>,
    d2: Vec<f64>,
    d3: Vec<f64>,
}

fn derivs(grid: &RadialGrid, values: &[f64], up_to: usize) -> Derivs {
    let d = |o| {
        if up_to >= o as usize {
            derivative_values(grid, values, o)
        } else {
            Vec::new()
        }
    };
    Derivs {
        d1: d(DerivativeOrder::First),
        d2: d(DerivativeOrder::Second),
        d3: d(DerivativeOrder::Third),
    }
}

/// `|| grad^j f ||` for a scalar radial profile, `j = 0..=3`.
pub fn scalar_gradient_norm(grid: &RadialGrid, values: &[f64], j: usize) -> f64 {
    scalar_gradient_norms(grid, values, j)[j]
}

/// `[||f||, ||grad f||, ..., ||grad^k f||]`.
pub(crate) fn scalar_gradient_norms(grid: &RadialGrid, f: &[f64], k: usize) -> Vec<f64> {
    assert!(k <= 3, "scalar norms are available up to third derivatives");
    let r = grid.nodes();
    let d = derivs(grid, f, k);
    let mut out = vec![squares_norm(grid, f.iter().map(|v| v * v))];
    if k >= 1 {
        out.push(squares_norm(grid, d.d1.iter().map(|v| v * v)));
    }
    if k >= 2 {
        out.push(squares_norm(
            grid,
            (0..f.len()).map(|i| d.d2[i].powi(2) + 2.0 * (d.d1[i] / r[i]).powi(2)),
        ));
    }
    if k >= 3 {
        out.push(squares_norm(
            grid,
            (0..f.len()).map(|i| {
                let c = (d.d2[i] - d.d1[i] / r[i]) / r[i];
                d.d3[i].powi(2) + 6.0 * c * c
            }),
        ));
    }
    out
}

/// `|| grad^j u ||` for the vector field `u(r) r_hat`, `j = 0..=3`.
pub fn vector_gradient_norm(grid: &RadialGrid, values: &[f64], j: usize) -> f64 {
    vector_gradient_norms(grid, values, j)[j]
}

pub(crate) fn vector_gradient_norms(grid: &RadialGrid, u: &[f64], k: usize) -> Vec<f64> {
    assert!(k <= 3, "vector norms are available up to third derivatives");
    let r = grid.nodes();
    let d = derivs(grid, u, k);
    let mut out = vec![squares_norm(grid, u.iter().map(|v| v * v))];
    if k >= 1 {
        out.push(squares_norm(
            grid,
            (0..u.len()).map(|i| d.d1[i].powi(2) + 2.0 * (u[i] / r[i]).powi(2)),
        ));
    }
    if k >= 2 {
        out.push(squares_norm(
            grid,
            (0..u.len()).map(|i| {
                let c = (d.d1[i] - u[i] / r[i]) / r[i];
                d.d2[i].powi(2) + 6.0 * c * c
            }),
        ));
    }
    if k >= 3 {
        out.push(squares_norm(
            grid,
            (0..u.len()).map(|i| {
                let ri = r[i];
                let c = (d.d1[i] - u[i] / ri) / ri;
                let dc = d.d2[i] / ri - 2.0 * d.d1[i] / (ri * ri) + 2.0 * u[i] / ri.powi(3);
                d.d3[i].powi(2) + 12.0 * dc * dc + 24.0 * (c / ri).powi(2)
            }),
        ));
    }
    out
}

/// Discrete `H^k` norm of a scalar profile (`k <= 3`), the square root of the
/// sum of squared norms of the derivative tensors of order `0..=k`.
pub fn sobolev_norm(f: &RadialField, k: usize) -> f64 {
    scalar_gradient_norms(f.grid(), f.values(), k)
        .iter()
        .map(|n| n * n)
        .sum::<f64>()
        .sqrt()
}

/// Discrete `H^k` norm of `u(r) r_hat`, including angular metric terms.
pub fn sobolev_norm_vector(u: &RadialField, k: usize) -> f64 {
    vector_gradient_norms(u.grid(), u.values(), k)
        .iter()
        .map(|n| n * n)
        .sum::<f64>()
        .sqrt()
}

impl FieldKind {
    pub fn sobolev_norm(self, f: &RadialField, k: usize) -> f64 {
        match self {
            FieldKind::Scalar => sobolev_norm(f, k),
            FieldKind::RadialVector => sobolev_norm_vector(f, k),
        }
    }
}
