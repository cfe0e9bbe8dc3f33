use crate::domain::RadialField;
use crate::error::{param, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DerivativeOrder {
    First = 1,
    Second = 2,
    Third = 3,
}

impl TryFrom<usize> for DerivativeOrder {
    type Error = crate::error::NspError;

    fn try_from(order: usize) -> Result<Self> {
        match order {
            1 => Ok(Self::First),
            2 => Ok(Self::Second),
            3 => Ok(Self::Third),
            _ => param(format!("derivative order {order} is not one of 1, 2, 3")),
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Stencil {
    pub start: usize,
    pub weights: Vec<f64>,
}

/// Finite-difference weights for the `m`-th derivative at `z` from values at
/// `xs` (Fornberg's recursion). Returns one weight per node.
pub fn fd_weights(z: f64, xs: &[f64], m: usize) -> Vec<f64> {
    let n = xs.len();
    assert!(n > m, "need more nodes than the derivative order");
    // c[k][j]: weight of node j for derivative k
    let mut c = vec![vec![0.0; n]; m + 1];
    c[0][0] = 1.0;
    let mut c1 = 1.0;
    let mut c4 = xs[0] - z;
    for i in 1..n {
        let mn = i.min(m);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = xs[i] - z;
        for j in 0..i {
            let c3 = xs[i] - xs[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    c.swap_remove(m)
}

/// Second-order stencils at every node: centred in the interior, one-sided
/// near the ends.
pub(crate) fn build(nodes: &[f64], order: DerivativeOrder) -> Vec<Stencil> {
    let n = nodes.len();
    let m = order as usize;
    // order-2 accuracy needs m + 2 points one-sided; centred stencils use
    // 3 points for m <= 2 and 5 points for m = 3
    let one_sided = m + 2;
    let half = if m <= 2 { 1 } else { 2 };
    (0..n)
        .map(|i| {
            let start = if i < half {
                0
            } else if i + half >= n {
                n.saturating_sub(one_sided)
            } else {
                i - half
            };
            let width = if i < half || i + half >= n {
                one_sided
            } else {
                2 * half + 1
            };
            let width = width.min(n - start);
            Stencil {
                start,
                weights: fd_weights(nodes[i], &nodes[start..start + width], m),
            }
        })
        .collect()
}

pub(crate) fn apply(stencils: &[Stencil], values: &[f64], out: &mut [f64]) {
    for (o, s) in out.iter_mut().zip(stencils) {
        *o = s
            .weights
            .iter()
            .zip(&values[s.start..])
            .map(|(w, v)| w * v)
            .sum();
    }
}

/// Radial derivative of order 1, 2 or 3 with second-order finite differences.
pub fn radial_derivative(f: &RadialField, order: usize) -> Result<RadialField> {
    let order = DerivativeOrder::try_from(order)?;
    let grid = f.grid();
    if grid.len() < order as usize + 2 {
        return param("grid too small for the requested derivative");
    }
    let mut out = vec![0.0; grid.len()];
    apply(grid.stencils(order), f.values(), &mut out);
    RadialField::new(std::sync::Arc::clone(grid), out)
}

/// Same as [`radial_derivative`] on raw node values.
pub(crate) fn derivative_values(
    grid: &crate::domain::RadialGrid,
    values: &[f64],
    order: DerivativeOrder,
) -> Vec<f64> {
    let mut out = vec![0.0; values.len()];
    apply(grid.stencils(order), values, &mut out);
    out
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::domain::RadialGrid;

    #[test]
    fn fornberg_reproduces_classic_weights() {
        let w = fd_weights(0.0, &[-1.0, 0.0, 1.0], 1);
        assert_eq!(w, vec![-0.5, 0.0, 0.5]);
        let w = fd_weights(0.0, &[-1.0, 0.0, 1.0], 2);
        assert_eq!(w, vec![1.0, -2.0, 1.0]);
        let w = fd_weights(0.0, &[0.0, 1.0, 2.0], 1);
        assert_eq!(w, vec![-1.5, 2.0, -0.5]);
        let w = fd_weights(0.0, &[-2.0, -1.0, 0.0, 1.0, 2.0], 3);
        let expect = [-0.5, 1.0, 0.0, -1.0, 0.5];
        for (a, b) in w.iter().zip(expect) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn quadratic_differentiated_exactly() {
        let g = Arc::new(RadialGrid::new(1.0, 3.0, 20, 0.0).unwrap());
        let f = RadialField::from_fn(Arc::clone(&g), |r| r * r).unwrap();
        let d = radial_derivative(&f, 1).unwrap();
        for (r, v) in g.nodes().iter().zip(d.values()) {
            assert!((v - 2.0 * r).abs() < 1e-12);
        }
        let d2 = radial_derivative(&f, 2).unwrap();
        assert!(d2.values().iter().all(|v| (v - 2.0).abs() < 1e-10));
    }

    #[test]
    fn constant_has_zero_derivatives() {
        let g = Arc::new(RadialGrid::new(1.0, 3.0, 20, 0.7).unwrap());
        let f = RadialField::constant(g, 4.2);
        for order in 1..=3 {
            let d = radial_derivative(&f, order).unwrap();
            assert!(d.max_abs() < 1e-8, "order {order}: {}", d.max_abs());
        }
    }

    #[test]
    fn bad_order_rejected() {
        let g = Arc::new(RadialGrid::new(1.0, 3.0, 20, 0.0).unwrap());
        let f = RadialField::zeros(g);
        assert!(radial_derivative(&f, 0).is_err());
        assert!(radial_derivative(&f, 4).is_err());
    }

    #[test]
    fn gaussian_derivatives_converge_at_second_order() {
        let exact: [fn(f64) -> f64; 3] = [
            |r| -2.0 * (r - 1.0) * (-(r - 1.0) * (r - 1.0)).exp(),
            |r| (4.0 * (r - 1.0).powi(2) - 2.0) * (-(r - 1.0) * (r - 1.0)).exp(),
            |r| {
                let x = r - 1.0;
                (12.0 * x - 8.0 * x.powi(3)) * (-x * x).exp()
            },
        ];
        for order in 1..=3 {
            let err = |n: usize| {
                let g = Arc::new(RadialGrid::new(1.0, 5.0, n, 0.0).unwrap());
                let f = RadialField::from_fn(Arc::clone(&g), |r| (-(r - 1.0) * (r - 1.0)).exp())
                    .unwrap();
                let d = radial_derivative(&f, order).unwrap();
                g.nodes()
                    .iter()
                    .zip(d.values())
                    .map(|(&r, v)| (v - exact[order - 1](r)).abs())
                    .fold(0.0, f64::max)
            };
            let ratio = err(200) / err(400);
            assert!(
                (3.5..4.6).contains(&ratio),
                "order {order}: error ratio {ratio}"
            );
        }
    }
}
