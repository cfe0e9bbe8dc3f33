//! Reference computations written without the library's numerics: their own
//! tridiagonal solver, quadrature, nonlinear solver and derivative tensors.
#![allow(dead_code)]

use std::f64::consts::PI;

/// Plain Thomas elimination; `lower[0]` and `upper[n-1]` are ignored.
pub fn thomas(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    c[0] = if n > 1 { upper[0] / diag[0] } else { 0.0 };
    d[0] = rhs[0] / diag[0];
    for i in 1..n {
        let m = diag[i] - lower[i] * c[i - 1];
        c[i] = if i + 1 < n { upper[i] / m } else { 0.0 };
        d[i] = (rhs[i] - lower[i] * d[i - 1]) / m;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    x
}

/// `int_a^b 4 pi r^2 f(r) dr`, composite trapezoid on `m` intervals.
pub fn shell_trapezoid(f: impl Fn(f64) -> f64, a: f64, b: f64, m: usize) -> f64 {
    let h = (b - a) / m as f64;
    let g = |r: f64| 4.0 * PI * r * r * f(r);
    let inner: f64 = (1..m).map(|k| g(a + k as f64 * h)).sum();
    h * (0.5 * g(a) + inner + 0.5 * g(b))
}

/// `sqrt(int 4 pi r^2 f^2)` over the span of `nodes`, each interval split
/// into 10 trapezoid panels.
pub fn refined_l2(f: impl Fn(f64) -> f64, nodes: &[f64]) -> f64 {
    nodes
        .windows(2)
        .map(|w| shell_trapezoid(|r| f(r).powi(2), w[0], w[1], 10))
        .sum::<f64>()
        .sqrt()
}

/// Density of the steady branch: the enthalpy difference from `c_*` is `phi`.
pub fn density(gamma: f64, c_star: f64, phi: f64) -> f64 {
    if gamma == 1.0 {
        c_star * phi.exp()
    } else {
        let g1 = gamma - 1.0;
        (c_star.powf(g1) + g1 / gamma * phi).powf(1.0 / g1)
    }
}

pub fn density_slope(gamma: f64, c_star: f64, phi: f64) -> f64 {
    if gamma == 1.0 {
        c_star * phi.exp()
    } else {
        let g1 = gamma - 1.0;
        (c_star.powf(g1) + g1 / gamma * phi).powf(1.0 / g1 - 1.0) / gamma
    }
}

/// Finite-volume Poisson system on dual cells: zero flux at the first node,
/// monopole flux `-4 pi R_max phi` out of the last, two-point face fluxes.
pub struct FvPoisson {
    pub vol: Vec<f64>,
    pub coef: Vec<f64>,
    pub outer: f64,
}

impl FvPoisson {
    pub fn new(r: &[f64]) -> Self {
        let n = r.len() - 1;
        let shell = |a: f64, b: f64| 4.0 * PI * (b.powi(3) - a.powi(3)) / 3.0;
        let mut vol = Vec::with_capacity(n + 1);
        for i in 0..=n {
            let a = if i == 0 {
                r[0]
            } else {
                0.5 * (r[i - 1] + r[i])
            };
            let b = if i == n {
                r[n]
            } else {
                0.5 * (r[i] + r[i + 1])
            };
            vol.push(shell(a, b));
        }
        let coef = (0..n)
            .map(|i| 4.0 * PI * r[i] * r[i + 1] / (r[i + 1] - r[i]))
            .collect();
        Self {
            vol,
            coef,
            outer: 4.0 * PI * r[n],
        }
    }

    pub fn apply(&self, phi: &[f64]) -> Vec<f64> {
        let n = phi.len() - 1;
        (0..=n)
            .map(|i| {
                let right = if i == n {
                    -self.outer * phi[n]
                } else {
                    self.coef[i] * (phi[i + 1] - phi[i])
                };
                let left = if i == 0 {
                    0.0
                } else {
                    self.coef[i - 1] * (phi[i] - phi[i - 1])
                };
                (right - left) / self.vol[i]
            })
            .collect()
    }

    /// Rows of the operator with `extra` subtracted from the diagonal.
    pub fn rows(&self, extra: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let n = self.vol.len() - 1;
        let mut lo = vec![0.0; n + 1];
        let mut di = vec![0.0; n + 1];
        let mut up = vec![0.0; n + 1];
        for i in 0..=n {
            if i > 0 {
                lo[i] = self.coef[i - 1] / self.vol[i];
                di[i] -= lo[i];
            }
            if i < n {
                up[i] = self.coef[i] / self.vol[i];
                di[i] -= up[i];
            } else {
                di[i] -= self.outer / self.vol[i];
            }
            di[i] -= extra[i];
        }
        (lo, di, up)
    }
}

/// Damped Newton on `L phi = rho(phi) - b` for the finite-volume system.
pub fn newton_steady(r: &[f64], b: &[f64], gamma: f64, c_star: f64) -> Vec<f64> {
    let sys = FvPoisson::new(r);
    let residual = |phi: &[f64]| -> Vec<f64> {
        let l = sys.apply(phi);
        (0..phi.len())
            .map(|i| l[i] - (density(gamma, c_star, phi[i]) - b[i]))
            .collect()
    };
    let sup = |v: &[f64]| v.iter().fold(0.0_f64, |a, x| a.max(x.abs()));
    let mut phi = vec![0.0; r.len()];
    let mut res = residual(&phi);
    for _ in 0..100 {
        let slope: Vec<f64> = phi
            .iter()
            .map(|&p| density_slope(gamma, c_star, p))
            .collect();
        let (lo, di, up) = sys.rows(&slope);
        let neg: Vec<f64> = res.iter().map(|x| -x).collect();
        let dx = thomas(&lo, &di, &up, &neg);
        let mut lambda = 1.0;
        loop {
            let trial: Vec<f64> = phi.iter().zip(&dx).map(|(p, d)| p + lambda * d).collect();
            let tr = residual(&trial);
            if sup(&tr) <= (1.0 - 0.25 * lambda) * sup(&res) || lambda < 1e-6 {
                phi = trial;
                res = tr;
                break;
            }
            lambda *= 0.5;
        }
        if sup(&dx) <= 1e-14 * (1.0 + sup(&phi)) {
            break;
        }
    }
    phi
}

/// Truncated Taylor polynomial in three variables, total degree <= 4.
#[derive(Debug, Clone)]
pub struct Jet {
    c: Vec<f64>,
}

pub const JET_ORDER: usize = 4;

fn exponents() -> Vec<[usize; 3]> {
    let mut out = Vec::new();
    for d in 0..=JET_ORDER {
        for a in (0..=d).rev() {
            for b in (0..=d - a).rev() {
                out.push([a, b, d - a - b]);
            }
        }
    }
    out
}

fn slot(e: [usize; 3]) -> Option<usize> {
    exponents().iter().position(|x| *x == e)
}

impl Jet {
    pub fn constant(v: f64) -> Self {
        let mut c = vec![0.0; exponents().len()];
        c[0] = v;
        Self { c }
    }

    /// `x_axis` evaluated at `point + h`.
    pub fn variable(axis: usize, at: f64) -> Self {
        let mut j = Self::constant(at);
        let mut e = [0; 3];
        e[axis] = 1;
        j.c[slot(e).unwrap()] = 1.0;
        j
    }

    pub fn add(&self, o: &Jet) -> Jet {
        Jet {
            c: self.c.iter().zip(&o.c).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn scale(&self, s: f64) -> Jet {
        Jet {
            c: self.c.iter().map(|a| s * a).collect(),
        }
    }

    pub fn mul(&self, o: &Jet) -> Jet {
        let ex = exponents();
        let mut c = vec![0.0; ex.len()];
        for (i, a) in ex.iter().enumerate() {
            if self.c[i] == 0.0 {
                continue;
            }
            for (k, b) in ex.iter().enumerate() {
                let e = [a[0] + b[0], a[1] + b[1], a[2] + b[2]];
                if e.iter().sum::<usize>() <= JET_ORDER {
                    c[slot(e).unwrap()] += self.c[i] * o.c[k];
                }
            }
        }
        Jet { c }
    }

    /// `g(self)` from the Taylor coefficients `g^(k)(x0) / k!` of `g` at the
    /// constant term `x0`.
    pub fn compose(&self, taylor: &[f64]) -> Jet {
        let mut dx = self.clone();
        dx.c[0] = 0.0;
        let mut out = Jet::constant(taylor[0]);
        let mut p = Jet::constant(1.0);
        for t in taylor.iter().skip(1).take(JET_ORDER) {
            p = p.mul(&dx);
            out = out.add(&p.scale(*t));
        }
        out
    }

    /// `sum_{|alpha| = k} (k! / alpha!) (d^alpha f)^2`, the squared Frobenius
    /// norm of the k-th derivative tensor.
    pub fn tensor_sq(&self, k: usize) -> f64 {
        let fact = |n: usize| (1..=n).product::<usize>() as f64;
        exponents()
            .iter()
            .zip(&self.c)
            .filter(|(e, _)| e.iter().sum::<usize>() == k)
            .map(|(e, c)| {
                let af = fact(e[0]) * fact(e[1]) * fact(e[2]);
                fact(k) * af * c * c
            })
            .sum()
    }
}

/// Taylor coefficients of `t -> t^p` at `t0`.
pub fn power_taylor(t0: f64, p: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(JET_ORDER + 1);
    let mut coef = 1.0;
    for k in 0..=JET_ORDER {
        out.push(coef * t0.powf(p - k as f64));
        coef *= (p - k as f64) / (k as f64 + 1.0);
    }
    out
}

/// Squared norms `|grad^k (u(r) r_hat)|^2`, `k = 0..=3`, at radius `r`,
/// given the Taylor coefficients of `u` at `r`.
pub fn radial_vector_tensor_sq(r: f64, u_taylor: &[f64]) -> [f64; 4] {
    let (x, y, z) = (
        Jet::variable(0, r),
        Jet::variable(1, 0.0),
        Jet::variable(2, 0.0),
    );
    let s2 = x.mul(&x).add(&y.mul(&y)).add(&z.mul(&z));
    let s = s2.compose(&power_taylor(r * r, 0.5));
    let inv = s2.compose(&power_taylor(r * r, -0.5));
    let u = s.compose(u_taylor);
    let comps = [
        x.mul(&inv).mul(&u),
        y.mul(&inv).mul(&u),
        z.mul(&inv).mul(&u),
    ];
    let mut out = [0.0; 4];
    for (k, o) in out.iter_mut().enumerate() {
        *o = comps.iter().map(|c| c.tensor_sq(k)).sum();
    }
    out
}

/// Same for a scalar `f(r)`.
pub fn radial_scalar_tensor_sq(r: f64, f_taylor: &[f64]) -> [f64; 4] {
    let (x, y, z) = (
        Jet::variable(0, r),
        Jet::variable(1, 0.0),
        Jet::variable(2, 0.0),
    );
    let s2 = x.mul(&x).add(&y.mul(&y)).add(&z.mul(&z));
    let f = s2.compose(&power_taylor(r * r, 0.5)).compose(f_taylor);
    [0, 1, 2, 3].map(|k| f.tensor_sq(k))
}

/// Taylor coefficients of `e^{-x^2}` at `x0`, computed by composing jets in
/// one variable.
pub fn gaussian_taylor(x0: f64) -> Vec<f64> {
    let x = Jet::variable(0, x0);
    let arg = x.mul(&x).scale(-1.0);
    let e0 = arg.c[0].exp();
    let fact = |n: usize| (1..=n).product::<usize>() as f64;
    let exp_taylor: Vec<f64> = (0..=JET_ORDER).map(|k| e0 / fact(k)).collect();
    let g = arg.compose(&exp_taylor);
    (0..=JET_ORDER)
        .map(|k| g.c[slot([k, 0, 0]).unwrap()])
        .collect()
}

/// Taylor coefficients of `(x)^2 e^{-x^2}` at `x0`.
pub fn bumped_gaussian_taylor(x0: f64) -> Vec<f64> {
    let g = gaussian_taylor(x0);
    let sq = [x0 * x0, 2.0 * x0, 1.0];
    (0..=JET_ORDER)
        .map(|k| (0..=k.min(2)).map(|a| sq[a] * g[k - a]).sum())
        .collect()
}

/// Manufactured radial Poisson pair: `phi = e^{-(r-R)^2}` and
/// `q = phi'' + 2 phi' / r`.
pub fn manufactured_pair(r_inner: f64) -> (impl Fn(f64) -> f64, impl Fn(f64) -> f64) {
    let phi = move |r: f64| (-(r - r_inner).powi(2)).exp();
    let q = move |r: f64| {
        let x = r - r_inner;
        let e = (-x * x).exp();
        (4.0 * x * x - 2.0) * e - 4.0 * x * e / r
    };
    (phi, q)
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}
