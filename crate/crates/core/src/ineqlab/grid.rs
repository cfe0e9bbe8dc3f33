use std::f64::consts::PI;

use crate::error::{param, NspError, Result};

/// Tensor grid on the shell `R <= r <= R_max`: uniform radial nodes including
/// both ends, polar nodes at cell midpoints (no pole nodes), periodic
/// azimuthal nodes.
#[derive(Debug, Clone)]
pub struct SphericalGrid {
    r: Vec<f64>,
    theta: Vec<f64>,
    phi: Vec<f64>,
    wr: Vec<f64>,
    wtheta: Vec<f64>,
    dphi: f64,
    sin: Vec<f64>,
    cot: Vec<f64>,
}

impl SphericalGrid {
    /// `nr` radial cells (`nr + 1` nodes), `ntheta` polar cells and `nphi`
    /// azimuthal cells. `nphi` must be even so that `phi + pi` is a node,
    /// which the polar reflection relies on.
    pub fn new(r_inner: f64, r_outer: f64, nr: usize, ntheta: usize, nphi: usize) -> Result<Self> {
        if !(r_inner > 0.0 && r_outer > r_inner && r_outer.is_finite()) {
            return param(format!(
                "need 0 < r_inner < r_outer, got [{r_inner}, {r_outer}]"
            ));
        }
        if nr < 16 {
            return param(format!("nr = {nr} must be >= 16"));
        }
        if ntheta < 8 {
            return param(format!("ntheta = {ntheta} must be >= 8"));
        }
        if nphi < 8 || nphi % 2 != 0 {
            return param(format!("nphi = {nphi} must be even and >= 8"));
        }
        let hr = (r_outer - r_inner) / nr as f64;
        let r: Vec<f64> = (0..=nr)
            .map(|i| {
                if i == nr {
                    r_outer
                } else {
                    r_inner + i as f64 * hr
                }
            })
            .collect();
        // trapezoid in r against r^2
        let wr: Vec<f64> = r
            .iter()
            .enumerate()
            .map(|(i, &ri)| {
                let end = i == 0 || i == nr;
                ri * ri * if end { 0.5 * hr } else { hr }
            })
            .collect();
        let dtheta = PI / ntheta as f64;
        let theta: Vec<f64> = (0..ntheta).map(|j| (j as f64 + 0.5) * dtheta).collect();
        // exact integral of sin over each polar cell
        let wtheta: Vec<f64> = (0..ntheta)
            .map(|j| (j as f64 * dtheta).cos() - ((j + 1) as f64 * dtheta).cos())
            .collect();
        let dphi = 2.0 * PI / nphi as f64;
        let phi: Vec<f64> = (0..nphi).map(|k| k as f64 * dphi).collect();
        let sin = theta.iter().map(|t| t.sin()).collect();
        let cot = theta.iter().map(|t| t.cos() / t.sin()).collect();
        Ok(Self {
            r,
            theta,
            phi,
            wr,
            wtheta,
            dphi,
            sin,
            cot,
        })
    }

    /// Same shell and resolution scaled by `factor` in each direction.
    pub fn refined(&self, factor: usize) -> Result<Self> {
        Self::new(
            self.r_inner(),
            self.r_outer(),
            self.nr() * factor,
            self.ntheta() * factor,
            self.nphi() * factor,
        )
    }

    /// Same index layout on the shell scaled by `s`.
    pub fn scaled(&self, s: f64) -> Result<Self> {
        Self::new(
            s * self.r_inner(),
            s * self.r_outer(),
            self.nr(),
            self.ntheta(),
            self.nphi(),
        )
    }

    pub fn r_inner(&self) -> f64 {
        self.r[0]
    }

    pub fn r_outer(&self) -> f64 {
        self.r[self.r.len() - 1]
    }

    /// Number of radial cells.
    pub fn nr(&self) -> usize {
        self.r.len() - 1
    }

    pub fn ntheta(&self) -> usize {
        self.theta.len()
    }

    pub fn nphi(&self) -> usize {
        self.phi.len()
    }

    pub fn shape(&self) -> [usize; 3] {
        [self.r.len(), self.theta.len(), self.phi.len()]
    }

    pub fn len(&self) -> usize {
        self.r.len() * self.theta.len() * self.phi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn r(&self) -> &[f64] {
        &self.r
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn phi(&self) -> &[f64] {
        &self.phi
    }

    pub fn hr(&self) -> f64 {
        self.r[1] - self.r[0]
    }

    pub fn dtheta(&self) -> f64 {
        PI / self.theta.len() as f64
    }

    pub fn dphi(&self) -> f64 {
        self.dphi
    }

    pub(crate) fn sin(&self) -> &[f64] {
        &self.sin
    }

    pub(crate) fn cot(&self) -> &[f64] {
        &self.cot
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.theta.len() + j) * self.phi.len() + k
    }

    /// Volume weight of node `(i, j, k)`, independent of `k`.
    #[inline]
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.wr[i] * self.wtheta[j] * self.dphi
    }

    /// Surface weight on the inner sphere, `R^2 sin(theta) dtheta dphi`.
    #[inline]
    pub fn surface_weight(&self, j: usize) -> f64 {
        self.r[0] * self.r[0] * self.wtheta[j] * self.dphi
    }

    /// `sum w f` over the shell.
    pub fn integrate(&self, f: &[f64]) -> f64 {
        debug_assert_eq!(f.len(), self.len());
        let np = self.nphi();
        let mut total = 0.0;
        for i in 0..self.r.len() {
            for j in 0..self.theta.len() {
                let base = self.index(i, j, 0);
                let s: f64 = f[base..base + np].iter().sum();
                total += self.weight(i, j) * s;
            }
        }
        total
    }

    /// Quadrature volume of the shell.
    pub fn volume(&self) -> f64 {
        self.integrate(&vec![1.0; self.len()])
    }

    /// Closed-form volume `4 pi (R_max^3 - R^3) / 3`.
    pub fn exact_volume(&self) -> f64 {
        4.0 * PI * (self.r_outer().powi(3) - self.r_inner().powi(3)) / 3.0
    }

    /// Values of `f(r, theta, phi)` at every node.
    pub fn sample(&self, f: impl Fn(f64, f64, f64) -> f64) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len());
        for &r in &self.r {
            for &t in &self.theta {
                for &p in &self.phi {
                    out.push(f(r, t, p));
                }
            }
        }
        out
    }
}

/// Spherical components `(v_r, v_theta, v_phi)` on a [`SphericalGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField3 {
    pub vr: Vec<f64>,
    pub vtheta: Vec<f64>,
    pub vphi: Vec<f64>,
}

impl VectorField3 {
    pub fn zeros(grid: &SphericalGrid) -> Self {
        let n = grid.len();
        Self {
            vr: vec![0.0; n],
            vtheta: vec![0.0; n],
            vphi: vec![0.0; n],
        }
    }

    pub fn new(
        grid: &SphericalGrid,
        vr: Vec<f64>,
        vtheta: Vec<f64>,
        vphi: Vec<f64>,
    ) -> Result<Self> {
        let n = grid.len();
        if vr.len() != n || vtheta.len() != n || vphi.len() != n {
            return param("vector components do not match the grid");
        }
        let v = Self { vr, vtheta, vphi };
        if !v
            .components()
            .iter()
            .all(|c| c.iter().all(|x| x.is_finite()))
        {
            return Err(NspError::NonFinite("vector field".into()));
        }
        Ok(v)
    }

    pub fn components(&self) -> [&[f64]; 3] {
        [&self.vr, &self.vtheta, &self.vphi]
    }

    /// `max |v_r|` on the inner sphere.
    pub fn max_normal_at_boundary(&self, grid: &SphericalGrid) -> f64 {
        let m = grid.ntheta() * grid.nphi();
        self.vr[..m].iter().fold(0.0, |a, v| a.max(v.abs()))
    }

    pub fn scaled(&self, c: f64) -> Self {
        let s = |v: &[f64]| v.iter().map(|x| c * x).collect();
        Self {
            vr: s(&self.vr),
            vtheta: s(&self.vtheta),
            vphi: s(&self.vphi),
        }
    }
}
