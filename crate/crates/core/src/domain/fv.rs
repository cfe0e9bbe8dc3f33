//! Conservative finite-volume operators on the dual cells of a [`RadialGrid`].
//!
//! The divergence `D` of a nodal flux and the nodal gradient `G` are adjoint
//! in the quadrature inner product whenever the flux vanishes at both ends:
//! `sum w p (D F) = -sum w F (G p)`. The compact viscous operator and the
//! Poisson operator are symmetric and negative in the same inner product.
//! These pairings make mass conservation and the zero-order energy balance
//! hold exactly at the semi-discrete level.

use std::f64::consts::PI;

use crate::domain::RadialGrid;

#[derive(Debug, Clone)]
pub struct FvOperators {
    r: Vec<f64>,
    vol: Vec<f64>,
    /// `4 pi r_{i+1/2}^2` at the midpoint faces.
    mid_area: Vec<f64>,
    /// `4 pi r_i r_{i+1} / (r_{i+1} - r_i)`: exact flux coefficient for `1/r`.
    poisson_coef: Vec<f64>,
    /// `(r_{i+1}^3 - r_i^3) / 3`, the volume between nodes over `4 pi`.
    face_vol: Vec<f64>,
    area_inner: f64,
    area_outer: f64,
    r_outer: f64,
}

impl FvOperators {
    pub fn new(grid: &RadialGrid) -> Self {
        let r = grid.nodes().to_vec();
        let n = r.len() - 1;
        let mut mid_area = Vec::with_capacity(n);
        let mut poisson_coef = Vec::with_capacity(n);
        let mut face_vol = Vec::with_capacity(n);
        for i in 0..n {
            let (a, b) = (r[i], r[i + 1]);
            let m = 0.5 * (a + b);
            mid_area.push(4.0 * PI * m * m);
            poisson_coef.push(4.0 * PI * a * b / (b - a));
            face_vol.push((b * b * b - a * a * a) / 3.0);
        }
        Self {
            area_inner: 4.0 * PI * r[0] * r[0],
            area_outer: 4.0 * PI * r[n] * r[n],
            r_outer: r[n],
            vol: grid.weights().to_vec(),
            r,
            mid_area,
            poisson_coef,
            face_vol,
        }
    }

    pub fn len(&self) -> usize {
        self.r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }

    /// Conservative divergence `(1/r^2)(r^2 F)'` of a nodal radial flux, with
    /// face fluxes averaged from the two adjacent nodes and the boundary
    /// fluxes taken from the end nodes.
    pub fn divergence(&self, flux: &[f64], out: &mut [f64]) {
        let n = self.r.len() - 1;
        let mut left = self.area_inner * flux[0];
        for i in 0..=n {
            let right = if i == n {
                self.area_outer * flux[n]
            } else {
                self.mid_area[i] * 0.5 * (flux[i] + flux[i + 1])
            };
            out[i] = (right - left) / self.vol[i];
            left = right;
        }
    }

    /// Nodal gradient, the negative adjoint of [`Self::divergence`] for fluxes
    /// that vanish at both ends. End nodes use one-sided differences.
    pub fn gradient(&self, p: &[f64], out: &mut [f64]) {
        let n = self.r.len() - 1;
        out[0] = (p[1] - p[0]) / (self.r[1] - self.r[0]);
        out[n] = (p[n] - p[n - 1]) / (self.r[n] - self.r[n - 1]);
        for j in 1..n {
            out[j] = (self.mid_area[j] * (p[j + 1] - p[j])
                + self.mid_area[j - 1] * (p[j] - p[j - 1]))
                / (2.0 * self.vol[j]);
        }
    }

    /// Tridiagonal coefficients `(lower, diag, upper)` of the Laplacian with
    /// `phi'(R) = 0` and `phi' + phi / r = 0` at the outer radius. Row `i` has
    /// `lower[i]` multiplying `phi[i-1]` and `upper[i]` multiplying `phi[i+1]`.
    pub fn laplacian_tridiag(&self) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let n = self.r.len() - 1;
        let mut lower = vec![0.0; n + 1];
        let mut diag = vec![0.0; n + 1];
        let mut upper = vec![0.0; n + 1];
        for i in 0..=n {
            let v = self.vol[i];
            if i > 0 {
                lower[i] = self.poisson_coef[i - 1] / v;
                diag[i] -= self.poisson_coef[i - 1] / v;
            }
            if i < n {
                upper[i] = self.poisson_coef[i] / v;
                diag[i] -= self.poisson_coef[i] / v;
            } else {
                // outward flux 4 pi R^2 phi' = -4 pi R phi
                diag[i] -= 4.0 * PI * self.r_outer / v;
            }
        }
        (lower, diag, upper)
    }

    pub fn laplacian(&self, phi: &[f64], out: &mut [f64]) {
        let n = self.r.len() - 1;
        let mut left = 0.0;
        for i in 0..=n {
            let right = if i == n {
                -4.0 * PI * self.r_outer * phi[n]
            } else {
                self.poisson_coef[i] * (phi[i + 1] - phi[i])
            };
            out[i] = (right - left) / self.vol[i];
            left = right;
        }
    }

    /// Interior-node Laplacian without boundary closures, `None` at the ends.
    pub fn interior_laplacian(&self, phi: &[f64]) -> Vec<Option<f64>> {
        let n = self.r.len() - 1;
        (0..=n)
            .map(|i| {
                (i > 0 && i < n).then(|| {
                    (self.poisson_coef[i] * (phi[i + 1] - phi[i])
                        - self.poisson_coef[i - 1] * (phi[i] - phi[i - 1]))
                        / self.vol[i]
                })
            })
            .collect()
    }

    /// `B(phi, phi) = -sum w phi (L phi)`: the discrete `||grad phi||^2` over
    /// the whole exterior, including the monopole tail beyond the outer radius.
    pub fn dirichlet_energy(&self, phi: &[f64]) -> f64 {
        let n = self.r.len() - 1;
        let interior: f64 = (0..n)
            .map(|i| self.poisson_coef[i] * (phi[i + 1] - phi[i]).powi(2))
            .sum();
        interior + 4.0 * PI * self.r_outer * phi[n] * phi[n]
    }

    fn face_div(&self, u: &[f64], i: usize) -> f64 {
        let (a, b) = (self.r[i], self.r[i + 1]);
        (b * b * u[i + 1] - a * a * u[i]) / self.face_vol[i]
    }

    /// Compact `grad div u` for radial `u`, zero at the end nodes where the
    /// velocity is pinned.
    pub fn viscous(&self, u: &[f64], out: &mut [f64]) {
        let n = self.r.len() - 1;
        out[0] = 0.0;
        out[n] = 0.0;
        let mut left = self.face_div(u, 0);
        for i in 1..n {
            let right = self.face_div(u, i);
            out[i] = 4.0 * PI * self.r[i] * self.r[i] * (right - left) / self.vol[i];
            left = right;
        }
    }

    /// Tridiagonal coefficients of [`Self::viscous`] on interior rows; the end
    /// rows are zero.
    pub fn viscous_tridiag(&self) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let n = self.r.len() - 1;
        let mut lower = vec![0.0; n + 1];
        let mut diag = vec![0.0; n + 1];
        let mut upper = vec![0.0; n + 1];
        for i in 1..n {
            let s = 4.0 * PI * self.r[i] * self.r[i] / self.vol[i];
            let r2 = |k: usize| self.r[k] * self.r[k];
            upper[i] = s * r2(i + 1) / self.face_vol[i];
            diag[i] = -s * r2(i) * (1.0 / self.face_vol[i] + 1.0 / self.face_vol[i - 1]);
            lower[i] = s * r2(i - 1) / self.face_vol[i - 1];
        }
        (lower, diag, upper)
    }

    /// The scheme's discrete `||div u||^2`, equal to `-sum w u (viscous u)`
    /// when `u` vanishes at both ends.
    pub fn face_divergence_energy(&self, u: &[f64]) -> f64 {
        (0..self.r.len() - 1)
            .map(|i| 4.0 * PI * self.face_vol[i] * self.face_div(u, i).powi(2))
            .sum()
    }
}

/// Free-function form of [`FvOperators::face_divergence_energy`].
pub fn face_divergence_energy(grid: &RadialGrid, u: &[f64]) -> f64 {
    FvOperators::new(grid).face_divergence_energy(u)
}
