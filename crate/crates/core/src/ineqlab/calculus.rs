//! Second-order finite differences in spherical coordinates.
//!
//! Radial derivatives are centred with one-sided closures at both spheres.
//! Polar derivatives at the first and last rings borrow the ghost value across
//! the pole: the node `(-theta_0, phi)` is `(theta_0, phi + pi)`, with the
//! polar and azimuthal unit vectors reversed.

use super::grid::{SphericalGrid, VectorField3};

/// Sign a component picks up when continued across a pole.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    fn sign(self) -> f64 {
        match self {
            Parity::Even => 1.0,
            Parity::Odd => -1.0,
        }
    }
}

pub fn d_r(g: &SphericalGrid, f: &[f64]) -> Vec<f64> {
    let [nr, nt, np] = g.shape();
    let h = g.hr();
    let m = nt * np;
    let mut out = vec![0.0; f.len()];
    for i in 0..nr {
        for a in 0..m {
            let at = |ii: usize| f[ii * m + a];
            out[i * m + a] = if i == 0 {
                (-3.0 * at(0) + 4.0 * at(1) - at(2)) / (2.0 * h)
            } else if i == nr - 1 {
                (3.0 * at(i) - 4.0 * at(i - 1) + at(i - 2)) / (2.0 * h)
            } else {
                (at(i + 1) - at(i - 1)) / (2.0 * h)
            };
        }
    }
    out
}

pub fn d_theta(g: &SphericalGrid, f: &[f64], parity: Parity) -> Vec<f64> {
    let [nr, nt, np] = g.shape();
    let h = g.dtheta();
    let s = parity.sign();
    let half = np / 2;
    let mut out = vec![0.0; f.len()];
    for i in 0..nr {
        for j in 0..nt {
            for k in 0..np {
                let across = (k + half) % np;
                let prev = if j == 0 {
                    s * f[g.index(i, 0, across)]
                } else {
                    f[g.index(i, j - 1, k)]
                };
                let next = if j == nt - 1 {
                    s * f[g.index(i, nt - 1, across)]
                } else {
                    f[g.index(i, j + 1, k)]
                };
                out[g.index(i, j, k)] = (next - prev) / (2.0 * h);
            }
        }
    }
    out
}

pub fn d_phi(g: &SphericalGrid, f: &[f64]) -> Vec<f64> {
    let np = g.nphi();
    let h = g.dphi();
    let mut out = vec![0.0; f.len()];
    for (row_out, row) in out.chunks_mut(np).zip(f.chunks(np)) {
        for k in 0..np {
            row_out[k] = (row[(k + 1) % np] - row[(k + np - 1) % np]) / (2.0 * h);
        }
    }
    out
}

/// Calls `body(idx, r, sin_theta, cot_theta)` for every node.
fn for_each_node(g: &SphericalGrid, mut body: impl FnMut(usize, f64, f64, f64)) {
    let [nr, nt, np] = g.shape();
    for i in 0..nr {
        let r = g.r()[i];
        for j in 0..nt {
            let (s, c) = (g.sin()[j], g.cot()[j]);
            for k in 0..np {
                body(g.index(i, j, k), r, s, c);
            }
        }
    }
}

pub fn grad(g: &SphericalGrid, f: &[f64]) -> VectorField3 {
    let fr = d_r(g, f);
    let mut ft = d_theta(g, f, Parity::Even);
    let mut fp = d_phi(g, f);
    for_each_node(g, |n, r, s, _| {
        ft[n] /= r;
        fp[n] /= r * s;
    });
    VectorField3 {
        vr: fr,
        vtheta: ft,
        vphi: fp,
    }
}

pub fn div(g: &SphericalGrid, v: &VectorField3) -> Vec<f64> {
    let dr = d_r(g, &v.vr);
    let dt = d_theta(g, &v.vtheta, Parity::Odd);
    let dp = d_phi(g, &v.vphi);
    let mut out = vec![0.0; g.len()];
    for_each_node(g, |n, r, s, c| {
        out[n] = dr[n] + 2.0 * v.vr[n] / r + (dt[n] + c * v.vtheta[n]) / r + dp[n] / (r * s);
    });
    out
}

pub fn curl(g: &SphericalGrid, v: &VectorField3) -> VectorField3 {
    let dt_vr = d_theta(g, &v.vr, Parity::Even);
    let dp_vr = d_phi(g, &v.vr);
    let dr_vt = d_r(g, &v.vtheta);
    let dp_vt = d_phi(g, &v.vtheta);
    let dr_vp = d_r(g, &v.vphi);
    let dt_vp = d_theta(g, &v.vphi, Parity::Odd);
    let mut out = VectorField3::zeros(g);
    for_each_node(g, |n, r, s, c| {
        out.vr[n] = (dt_vp[n] + c * v.vphi[n] - dp_vt[n] / s) / r;
        out.vtheta[n] = dp_vr[n] / (r * s) - dr_vp[n] - v.vphi[n] / r;
        out.vphi[n] = dr_vt[n] + v.vtheta[n] / r - dt_vr[n] / r;
    });
    out
}

/// The nine components of the covariant gradient in the orthonormal frame,
/// row-major in (derivative direction, component). Its trace is `div v`.
pub fn covariant_gradient(g: &SphericalGrid, v: &VectorField3) -> [Vec<f64>; 9] {
    let (vr, vt, vp) = (&v.vr, &v.vtheta, &v.vphi);
    let mut c = [
        d_r(g, vr),
        d_r(g, vt),
        d_r(g, vp),
        d_theta(g, vr, Parity::Even),
        d_theta(g, vt, Parity::Odd),
        d_theta(g, vp, Parity::Odd),
        d_phi(g, vr),
        d_phi(g, vt),
        d_phi(g, vp),
    ];
    let [_, _, _, c3, c4, c5, c6, c7, c8] = &mut c;
    for_each_node(g, |n, r, s, ct| {
        c3[n] = (c3[n] - vt[n]) / r;
        c4[n] = (c4[n] + vr[n]) / r;
        c5[n] /= r;
        c6[n] = c6[n] / (r * s) - vp[n] / r;
        c7[n] = c7[n] / (r * s) - ct * vp[n] / r;
        c8[n] = c8[n] / (r * s) + (vr[n] + ct * vt[n]) / r;
    });
    c
}

pub fn l2_norm(g: &SphericalGrid, f: &[f64]) -> f64 {
    let sq: Vec<f64> = f.iter().map(|x| x * x).collect();
    g.integrate(&sq).max(0.0).sqrt()
}

pub fn lp_norm(g: &SphericalGrid, f: &[f64], p: f64) -> f64 {
    let pw: Vec<f64> = f.iter().map(|x| x.abs().powf(p)).collect();
    g.integrate(&pw).max(0.0).powf(1.0 / p)
}

pub fn vector_l2_norm(g: &SphericalGrid, v: &VectorField3) -> f64 {
    components_l2_norm(g, &v.components())
}

fn components_l2_norm(g: &SphericalGrid, parts: &[&[f64]]) -> f64 {
    let sq: Vec<f64> = (0..g.len())
        .map(|n| parts.iter().map(|c| c[n] * c[n]).sum())
        .collect();
    g.integrate(&sq).max(0.0).sqrt()
}

/// `|| grad v ||` over all nine covariant components.
pub fn vector_gradient_norm(g: &SphericalGrid, v: &VectorField3) -> f64 {
    let c = covariant_gradient(g, v);
    let parts: Vec<&[f64]> = c.iter().map(|x| x.as_slice()).collect();
    components_l2_norm(g, &parts)
}

pub fn scalar_gradient_norm(g: &SphericalGrid, f: &[f64]) -> f64 {
    vector_l2_norm(g, &grad(g, f))
}

/// `int_{r = R} v . w dsigma` for two vector fields given on the full grid.
pub fn inner_surface_pairing(g: &SphericalGrid, v: &VectorField3, w: &VectorField3) -> f64 {
    let np = g.nphi();
    let mut total = 0.0;
    for j in 0..g.ntheta() {
        let mut row = 0.0;
        for k in 0..np {
            let n = g.index(0, j, k);
            row += v.vr[n] * w.vr[n] + v.vtheta[n] * w.vtheta[n] + v.vphi[n] * w.vphi[n];
        }
        total += g.surface_weight(j) * row;
    }
    total
}

/// Dot product of two vector fields, node by node.
pub fn pointwise_dot(v: &VectorField3, w: &VectorField3) -> Vec<f64> {
    (0..v.vr.len())
        .map(|n| v.vr[n] * w.vr[n] + v.vtheta[n] * w.vtheta[n] + v.vphi[n] * w.vphi[n])
        .collect()
}
