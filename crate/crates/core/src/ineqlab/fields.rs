//! Seeded smooth test fields.
//!
//! Every field is a sum of terms `P(x/|x|) e^{-(r-R)/l} chi(r)` with `P` a
//! random polynomial of degree <= 2 in the unit vector, hence a trigonometric
//! polynomial of azimuthal order <= 2 that is smooth through the poles. The
//! cutoff `chi` vanishes identically on the outer fifth of the shell.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::grid::{SphericalGrid, VectorField3};
use crate::domain::{RadialField, RadialGrid};
use crate::error::{param, Result};
use crate::steady::smooth_step;

const VECTOR_STREAM: u64 = 1;
const SCALAR_STREAM: u64 = 2;
const RADIAL_STREAM: u64 = 3;

/// Width of the factor `1 - e^{-(r-R)^2/w^2}` on the normal component,
/// relative to the shell thickness.
const TANGENT_WIDTH: f64 = 0.15;

#[derive(Debug, Clone)]
struct Angular {
    c0: f64,
    b: [f64; 3],
    s: [[f64; 3]; 3],
}

impl Angular {
    fn random(rng: &mut ChaCha8Rng) -> Self {
        let mut n = || rng.sample::<f64, _>(StandardNormal);
        let c0 = n();
        let b = [0.7 * n(), 0.7 * n(), 0.7 * n()];
        let mut s = [[0.0; 3]; 3];
        for a in 0..3 {
            for c in a..3 {
                let x = 0.5 * n();
                s[a][c] = x;
                s[c][a] = x;
            }
        }
        Self { c0, b, s }
    }

    fn eval(&self, e: [f64; 3]) -> f64 {
        let mut v = self.c0;
        for a in 0..3 {
            v += self.b[a] * e[a];
            for c in 0..3 {
                v += self.s[a][c] * e[a] * e[c];
            }
        }
        v
    }
}

#[derive(Debug, Clone)]
struct Term {
    amplitude: [f64; 3],
    angular: Angular,
    decay: f64,
}

/// A field shape on a reference shell `[R, R_max]`; it can be sampled on any
/// grid whose shell is a dilation of the reference one.
#[derive(Debug, Clone)]
pub struct FieldShape {
    r_inner: f64,
    r_outer: f64,
    terms: Vec<Term>,
    tangent: bool,
}

fn random_terms(rng: &mut ChaCha8Rng, modes: usize, thickness: f64) -> Vec<Term> {
    (0..modes)
        .map(|_| {
            let amplitude = [
                rng.sample::<f64, _>(StandardNormal),
                rng.sample::<f64, _>(StandardNormal),
                rng.sample::<f64, _>(StandardNormal),
            ];
            let angular = Angular::random(rng);
            let decay = thickness * rng.gen_range(0.12..0.4);
            Term {
                amplitude,
                angular,
                decay,
            }
        })
        .collect()
}

impl FieldShape {
    /// Vector field with `v_r = 0` on the inner sphere.
    pub fn random_tangent(seed: u64, r_inner: f64, r_outer: f64, modes: usize) -> Result<Self> {
        Self::random(seed, VECTOR_STREAM, r_inner, r_outer, modes, true)
    }

    /// Scalar field; only the first amplitude entry is used.
    pub fn random_scalar(seed: u64, r_inner: f64, r_outer: f64, modes: usize) -> Result<Self> {
        Self::random(seed, SCALAR_STREAM, r_inner, r_outer, modes, false)
    }

    fn random(
        seed: u64,
        stream: u64,
        r_inner: f64,
        r_outer: f64,
        modes: usize,
        tangent: bool,
    ) -> Result<Self> {
        if modes == 0 {
            return param("modes must be >= 1");
        }
        if !(r_inner > 0.0 && r_outer > r_inner) {
            return param("need 0 < r_inner < r_outer");
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        let terms = random_terms(&mut rng, modes, r_outer - r_inner);
        Ok(Self {
            r_inner,
            r_outer,
            terms,
            tangent,
        })
    }

    fn cutoff(&self, r: f64) -> f64 {
        let l = self.r_outer - self.r_inner;
        let (a, b) = (self.r_inner + 0.5 * l, self.r_inner + 0.8 * l);
        1.0 - smooth_step((r - a) / (b - a))
    }

    fn envelope(&self, term: &Term, r: f64) -> f64 {
        (-(r - self.r_inner) / term.decay).exp() * self.cutoff(r)
    }

    /// Cartesian value at reference radius `r` and direction `e`.
    fn cartesian(&self, r: f64, e: [f64; 3]) -> [f64; 3] {
        let mut v = [0.0; 3];
        for t in &self.terms {
            let s = t.angular.eval(e) * self.envelope(t, r);
            for a in 0..3 {
                v[a] += t.amplitude[a] * s;
            }
        }
        v
    }

    fn scalar_at(&self, r: f64, e: [f64; 3]) -> f64 {
        self.terms
            .iter()
            .map(|t| t.amplitude[0] * t.angular.eval(e) * self.envelope(t, r))
            .sum()
    }

    fn dilation(&self, grid: &SphericalGrid) -> f64 {
        grid.r_inner() / self.r_inner
    }

    /// Samples `x -> V(x / s)` with `s = grid.r_inner() / R_ref`.
    pub fn vector_on(&self, grid: &SphericalGrid) -> VectorField3 {
        let s = self.dilation(grid);
        let w = TANGENT_WIDTH * (self.r_outer - self.r_inner);
        let mut v = VectorField3::zeros(grid);
        let mut n = 0;
        for (i, &r) in grid.r().iter().enumerate() {
            // pinned so the normal factor is exactly zero on the inner sphere
            let rr = if i == 0 { self.r_inner } else { r / s };
            let damp = if self.tangent {
                1.0 - (-((rr - self.r_inner) / w).powi(2)).exp()
            } else {
                1.0
            };
            for &t in grid.theta() {
                let (st, ct) = t.sin_cos();
                for &p in grid.phi() {
                    let (sp, cp) = p.sin_cos();
                    let er = [st * cp, st * sp, ct];
                    let et = [ct * cp, ct * sp, -st];
                    let ep = [-sp, cp, 0.0];
                    let c = self.cartesian(rr, er);
                    let dot = |b: [f64; 3]| c[0] * b[0] + c[1] * b[1] + c[2] * b[2];
                    v.vr[n] = damp * dot(er);
                    v.vtheta[n] = dot(et);
                    v.vphi[n] = dot(ep);
                    n += 1;
                }
            }
        }
        v
    }

    pub fn scalar_on(&self, grid: &SphericalGrid) -> Vec<f64> {
        let s = self.dilation(grid);
        grid.sample(|r, t, p| {
            let (st, ct) = t.sin_cos();
            let (sp, cp) = p.sin_cos();
            self.scalar_at(r / s, [st * cp, st * sp, ct])
        })
    }
}

/// Seeded tangent field on `grid` with `modes` terms.
pub fn random_tangent_field(seed: u64, grid: &SphericalGrid, modes: usize) -> Result<VectorField3> {
    Ok(FieldShape::random_tangent(seed, grid.r_inner(), grid.r_outer(), modes)?.vector_on(grid))
}

/// Seeded smooth scalar field on `grid`.
pub fn random_scalar_field(seed: u64, grid: &SphericalGrid, modes: usize) -> Result<Vec<f64>> {
    Ok(FieldShape::random_scalar(seed, grid.r_inner(), grid.r_outer(), modes)?.scalar_on(grid))
}

/// Seeded radial source: three Gaussians of random sign, centre and width,
/// all within the inner third of the radial grid.
pub fn random_radial_source(seed: u64, grid: &std::sync::Arc<RadialGrid>) -> Result<RadialField> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(RADIAL_STREAM);
    let (r0, r1) = (grid.r_inner(), grid.r_outer());
    let span = (r1 - r0) / 3.0;
    let bumps: Vec<(f64, f64, f64)> = (0..3)
        .map(|_| {
            let a: f64 = rng.sample(StandardNormal);
            let c = r0 + rng.gen_range(0.0..span);
            let w = rng.gen_range(0.05..0.15) * span;
            (a, c, w)
        })
        .collect();
    RadialField::from_fn(std::sync::Arc::clone(grid), |r| {
        bumps
            .iter()
            .map(|(a, c, w)| a * (-((r - c) / w).powi(2)).exp())
            .sum()
    })
}
