//! Truncated radial meshes of the exterior domain `R <= r <= R_max`, nodal
//! fields on them, and the discrete calculus shared by every other module.
//!
//! Every node `r_i` owns the dual cell bounded by the neighbouring face
//! midpoints (half cells at both ends). The quadrature weight of node `i` is
//! the exact volume `4/3 pi (r_{i+1/2}^3 - r_{i-1/2}^3)` of that shell, so the
//! weights telescope to the shell volume and a node value is integrated with
//! the exact `4 pi r^2` measure over its cell.

mod fv;
mod norms;
mod stencil;

use std::f64::consts::PI;
use std::ops::Index;
use std::sync::Arc;

use crate::error::{ensure_finite, param, Result};

pub use fv::{face_divergence_energy, FvOperators};
pub use norms::{
    dot, integrate, scalar_gradient_norm, sobolev_norm, sobolev_norm_vector, vector_gradient_norm,
    weighted_l2_norm, FieldKind,
};
pub use stencil::{fd_weights, radial_derivative, DerivativeOrder};

/// Volume of the spherical shell `a <= r <= b`.
pub fn shell_volume(a: f64, b: f64) -> f64 {
    4.0 / 3.0 * PI * (b.powi(3) - a.powi(3))
}

#[derive(Debug, Clone)]
pub struct RadialGrid {
    r_inner: f64,
    r_outer: f64,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    stencils: [Vec<stencil::Stencil>; 3],
    /// `(n_cells, stretch)` when built by [`RadialGrid::new`].
    recipe: Option<(usize, f64)>,
}

impl RadialGrid {
    /// Uniform grid for `stretch == 0`; otherwise consecutive cell widths grow
    /// by the constant factor `exp(stretch / n_cells)`, clustering nodes at
    /// the inner sphere.
    pub fn new(r_inner: f64, r_outer: f64, n_cells: usize, stretch: f64) -> Result<Self> {
        if !(r_inner.is_finite() && r_outer.is_finite() && stretch.is_finite()) {
            return param("grid bounds and stretch must be finite");
        }
        if r_inner <= 0.0 {
            return param(format!("inner radius {r_inner} must be > 0"));
        }
        if r_outer <= r_inner {
            return param(format!(
                "outer radius {r_outer} must exceed inner radius {r_inner}"
            ));
        }
        if n_cells < 4 {
            return param(format!("n_cells = {n_cells} must be at least 4"));
        }
        if stretch < 0.0 {
            return param(format!("stretch = {stretch} must be >= 0"));
        }
        let length = r_outer - r_inner;
        let n = n_cells;
        let mut nodes = Vec::with_capacity(n + 1);
        if stretch == 0.0 {
            let h = length / n as f64;
            nodes.extend((0..=n).map(|i| r_inner + i as f64 * h));
        } else {
            let ratio = (stretch / n as f64).exp();
            let h0 = length * (ratio - 1.0) / (ratio.powi(n as i32) - 1.0);
            let mut r = r_inner;
            let mut h = h0;
            nodes.push(r);
            for _ in 0..n {
                r += h;
                h *= ratio;
                nodes.push(r);
            }
        }
        nodes[n] = r_outer;
        let mut grid = Self::from_nodes(nodes)?;
        grid.recipe = Some((n_cells, stretch));
        Ok(grid)
    }

    /// Grid on arbitrary strictly increasing nodes (at least 5 of them, the
    /// width of the third-derivative stencil).
    pub fn from_nodes(nodes: Vec<f64>) -> Result<Self> {
        if nodes.len() < 5 {
            return param("a radial grid needs at least 5 nodes");
        }
        ensure_finite(&nodes, "grid nodes")?;
        if nodes.windows(2).any(|w| w[1] <= w[0]) {
            return param("grid nodes must be strictly increasing");
        }
        if nodes[0] <= 0.0 {
            return param("grid nodes must be positive");
        }
        let n = nodes.len() - 1;
        let r_inner = nodes[0];
        let r_outer = nodes[n];
        let mut weights = Vec::with_capacity(n + 1);
        let mut left = r_inner;
        for i in 0..=n {
            let right = if i == n {
                r_outer
            } else {
                0.5 * (nodes[i] + nodes[i + 1])
            };
            weights.push(shell_volume(left, right));
            left = right;
        }
        let stencils = [
            stencil::build(&nodes, DerivativeOrder::First),
            stencil::build(&nodes, DerivativeOrder::Second),
            stencil::build(&nodes, DerivativeOrder::Third),
        ];
        Ok(Self {
            r_inner,
            r_outer,
            nodes,
            weights,
            stencils,
            recipe: None,
        })
    }

    /// The grid with every cell split at its midpoint.
    pub fn refined(&self) -> Result<Self> {
        if let Some((n, stretch)) = self.recipe {
            return Self::new(self.r_inner, self.r_outer, 2 * n, stretch);
        }
        let mut nodes = Vec::with_capacity(2 * self.nodes.len() - 1);
        for w in self.nodes.windows(2) {
            nodes.push(w[0]);
            nodes.push(0.5 * (w[0] + w[1]));
        }
        nodes.push(self.r_outer);
        Self::from_nodes(nodes)
    }

    /// Same construction on `[R, r_outer]` with the cell count scaled by the
    /// shell length, so a uniform grid keeps its spacing.
    pub fn with_outer_radius(&self, r_outer: f64) -> Result<Self> {
        let Some((n, stretch)) = self.recipe else {
            return param("only grids built by RadialGrid::new can be extended");
        };
        let scale = (r_outer - self.r_inner) / (self.r_outer - self.r_inner);
        let n_new = (n as f64 * scale).round().max(4.0) as usize;
        Self::new(self.r_inner, r_outer, n_new, stretch)
    }

    /// `(n_cells, stretch)` for grids built by [`RadialGrid::new`].
    pub fn recipe(&self) -> Option<(usize, f64)> {
        self.recipe
    }

    pub fn r_inner(&self) -> f64 {
        self.r_inner
    }

    pub fn r_outer(&self) -> f64 {
        self.r_outer
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Dual-cell volumes; `sum(weights * f)` approximates `int f dx`.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn n_cells(&self) -> usize {
        self.nodes.len() - 1
    }

    /// Width of cell `i`, i.e. `r_{i+1} - r_i`.
    pub fn spacing(&self, i: usize) -> f64 {
        self.nodes[i + 1] - self.nodes[i]
    }

    pub fn min_spacing(&self) -> f64 {
        self.nodes
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min)
    }

    pub fn max_spacing(&self) -> f64 {
        self.nodes
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(0.0, f64::max)
    }

    pub fn volume(&self) -> f64 {
        shell_volume(self.r_inner, self.r_outer)
    }

    pub(crate) fn stencils(&self, order: DerivativeOrder) -> &[stencil::Stencil] {
        &self.stencils[order as usize - 1]
    }
}

/// One finite value per node of a shared [`RadialGrid`].
#[derive(Debug, Clone)]
pub struct RadialField {
    grid: Arc<RadialGrid>,
    values: Vec<f64>,
}

impl RadialField {
    pub fn new(grid: Arc<RadialGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return param(format!(
                "field has {} values but the grid has {} nodes",
                values.len(),
                grid.len()
            ));
        }
        ensure_finite(&values, "radial field")?;
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: Arc<RadialGrid>) -> Self {
        let values = vec![0.0; grid.len()];
        Self { grid, values }
    }

    pub fn constant(grid: Arc<RadialGrid>, c: f64) -> Self {
        let values = vec![c; grid.len()];
        Self { grid, values }
    }

    /// Samples `f(r)` at every node.
    pub fn from_fn(grid: Arc<RadialGrid>, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = grid.nodes().iter().map(|&r| f(r)).collect();
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &Arc<RadialGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Pointwise map, keeping the grid.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid: Arc::clone(&self.grid),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        self.map(|v| c * v)
    }

    /// `a * self + b * other`.
    pub fn axpby(&self, a: f64, other: &RadialField, b: f64) -> Self {
        debug_assert_eq!(self.len(), other.len());
        Self {
            grid: Arc::clone(&self.grid),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(x, y)| a * x + b * y)
                .collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max_abs_diff(&self, other: &RadialField) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

impl Index<usize> for RadialField {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.values[i]
    }
}
