use serde::{Deserialize, Serialize};

use crate::error::{param, Result};

/// Physical constants of the barotropic Navier-Stokes-Poisson system with
/// pressure law `p(rho) = rho^gamma`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FluidParams {
    pub gamma: f64,
    pub mu: f64,
    pub lambda: f64,
    /// Navier-slip friction coefficient. Radial flows have no tangential
    /// component, so it never enters the radial evolution.
    pub alpha: f64,
    pub c_star: f64,
}

impl FluidParams {
    pub fn new(gamma: f64, mu: f64, lambda: f64, alpha: f64, c_star: f64) -> Result<Self> {
        let p = Self {
            gamma,
            mu,
            lambda,
            alpha,
            c_star,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.gamma, self.mu, self.lambda, self.alpha, self.c_star];
        if all.iter().any(|v| !v.is_finite()) {
            return param("fluid parameters must be finite");
        }
        if self.gamma < 1.0 {
            return param(format!("gamma = {} must be >= 1", self.gamma));
        }
        if self.mu <= 0.0 {
            return param(format!("mu = {} must be > 0", self.mu));
        }
        if self.lambda + 2.0 / 3.0 * self.mu < 0.0 {
            return param(format!(
                "lambda + 2 mu / 3 = {} must be >= 0",
                self.lambda + 2.0 / 3.0 * self.mu
            ));
        }
        if self.c_star <= 0.0 {
            return param(format!("c_star = {} must be > 0", self.c_star));
        }
        Ok(())
    }

    /// Coefficient of `grad div u` for curl-free flows, `2 mu + lambda`.
    pub fn longitudinal_viscosity(&self) -> f64 {
        2.0 * self.mu + self.lambda
    }

    pub fn pressure(&self, rho: f64) -> f64 {
        rho.powf(self.gamma)
    }

    pub fn sound_speed(&self, rho: f64) -> f64 {
        (self.gamma * rho.powf(self.gamma - 1.0)).sqrt()
    }

    /// Enthalpy `h` with `h'(s) = p'(s) / s`, normalised so that the steady
    /// relation reads `h(rho_tilde) = Phi_tilde + c_1`.
    pub fn enthalpy(&self, rho: f64) -> f64 {
        if self.gamma == 1.0 {
            rho.ln()
        } else {
            self.gamma / (self.gamma - 1.0) * rho.powf(self.gamma - 1.0)
        }
    }

    /// `h'(rho) = gamma rho^(gamma - 2)`.
    pub fn enthalpy_prime(&self, rho: f64) -> f64 {
        self.gamma * rho.powf(self.gamma - 2.0)
    }

    /// `h(base + q) - h(base)` without cancellation for small `q`.
    pub fn enthalpy_increment(&self, base: f64, q: f64) -> f64 {
        let x = q / base;
        if self.gamma == 1.0 {
            x.ln_1p()
        } else {
            let g1 = self.gamma - 1.0;
            self.gamma / g1 * base.powf(g1) * (g1 * x.ln_1p()).exp_m1()
        }
    }
}

impl Default for FluidParams {
    fn default() -> Self {
        Self {
            gamma: 2.0,
            mu: 1.0,
            lambda: 0.0,
            alpha: 0.0,
            c_star: 1.0,
        }
    }
}
