//! Field equations for the hedgehog ansatz in dimensionless form.
//!
//! With `t = g0 * rho0 * r` and `rho_hat = rho / rho0` the system becomes
//!
//! ```text
//! f''     = f (f^2 - 1) / t^2 + rho_hat^2 f
//! rho''   = -(2/t) rho' + 2 f^2 rho / t^2 + lambda_hat (rho^2 - 1) rho
//! ```
//!
//! with `lambda_hat = lambda / g0^2` the only remaining coupling.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Physical couplings: quartic coupling, gauge coupling and Higgs vacuum value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub lambda: f64,
    pub g0: f64,
    pub rho0: f64,
}

impl ModelParams {
    pub fn new(lambda: f64, g0: f64, rho0: f64) -> Result<Self> {
        let params = Self { lambda, g0, rho0 };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(Error::ParameterDomain(format!(
                "lambda must be finite and >= 0, got {}",
                self.lambda
            )));
        }
        if !(self.g0.is_finite() && self.g0 > 0.0) {
            return Err(Error::ParameterDomain(format!(
                "g0 must be finite and > 0, got {}",
                self.g0
            )));
        }
        if !(self.rho0.is_finite() && self.rho0 > 0.0) {
            return Err(Error::ParameterDomain(format!(
                "rho0 must be finite and > 0, got {}",
                self.rho0
            )));
        }
        Ok(())
    }

    /// Higgs mass parameter, `mu = sqrt(lambda) * rho0`.
    pub fn mu(&self) -> f64 {
        self.lambda.sqrt() * self.rho0
    }
}

/// Dimensionless reduction of [`ModelParams`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaledParams {
    pub lambda_hat: f64,
    /// Physical radius per unit of dimensionless radius, `1 / (g0 rho0)`.
    pub r_scale: f64,
    pub rho_scale: f64,
    pub g0: f64,
}

impl ScaledParams {
    /// Physical `alpha` for a dimensionless shooting coefficient.
    pub fn alpha_physical(&self, alpha_hat: f64) -> f64 {
        alpha_hat * self.g0 * self.g0 * self.rho_scale * self.rho_scale
    }

    /// Physical `beta` for a dimensionless shooting coefficient.
    pub fn beta_physical(&self, beta_hat: f64) -> f64 {
        beta_hat * self.g0 * self.rho_scale * self.rho_scale
    }

    pub fn alpha_hat(&self, alpha: f64) -> f64 {
        alpha / (self.g0 * self.g0 * self.rho_scale * self.rho_scale)
    }

    pub fn beta_hat(&self, beta: f64) -> f64 {
        beta / (self.g0 * self.rho_scale * self.rho_scale)
    }

    /// Converts a dimensionless mass integral to the physical monopole mass.
    pub fn mass_physical(&self, integral: f64) -> f64 {
        4.0 * std::f64::consts::PI * self.rho_scale / self.g0 * integral
    }
}

pub fn nondimensionalize(params: &ModelParams) -> Result<ScaledParams> {
    params.validate()?;
    Ok(ScaledParams {
        lambda_hat: params.lambda / (params.g0 * params.g0),
        r_scale: 1.0 / (params.g0 * params.rho0),
        rho_scale: params.rho0,
        g0: params.g0,
    })
}

/// Gauge and Higgs profiles with their first derivatives at radius `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseState {
    pub t: f64,
    pub f: f64,
    pub fp: f64,
    pub rho: f64,
    pub rhop: f64,
}

impl PhaseState {
    pub fn new(t: f64, f: f64, fp: f64, rho: f64, rhop: f64) -> Self {
        Self {
            t,
            f,
            fp,
            rho,
            rhop,
        }
    }

    pub fn from_array(t: f64, y: [f64; 4]) -> Self {
        Self::new(t, y[0], y[1], y[2], y[3])
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.f, self.fp, self.rho, self.rhop]
    }

    pub fn is_finite(&self) -> bool {
        self.t.is_finite()
            && self.f.is_finite()
            && self.fp.is_finite()
            && self.rho.is_finite()
            && self.rhop.is_finite()
    }
}

/// First-order form of the field equations at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Derivatives {
    pub fp: f64,
    pub fpp: f64,
    pub rhop: f64,
    pub rhopp: f64,
}

/// Right-hand side on a raw `[f, f', rho, rho']` vector. `flip_coupling` negates the
/// Higgs term of the gauge equation and exists only to exercise validation failures.
#[inline]
pub(crate) fn field_equations(t: f64, y: &[f64; 4], lambda_hat: f64, flip_coupling: bool) -> [f64; 4] {
    let [f, fp, rho, rhop] = *y;
    let inv_t2 = 1.0 / (t * t);
    let coupling = if flip_coupling { -rho * rho } else { rho * rho };
    let fpp = f * (f * f - 1.0) * inv_t2 + coupling * f;
    let rhopp =
        -2.0 * rhop / t + 2.0 * f * f * rho * inv_t2 + lambda_hat * (rho * rho - 1.0) * rho;
    [fp, fpp, rhop, rhopp]
}

pub fn rhs(state: &PhaseState, lambda_hat: f64) -> Result<Derivatives> {
    if !(state.t > 0.0) {
        return Err(Error::SingularPoint(state.t));
    }
    let [fp, fpp, rhop, rhopp] = field_equations(state.t, &state.to_array(), lambda_hat, false);
    Ok(Derivatives {
        fp,
        fpp,
        rhop,
        rhopp,
    })
}

/// Exact `lambda_hat = 0` solution: `f = t / sinh t`, `rho = coth t - 1/t`.
pub fn ps_exact(t: f64) -> Result<PhaseState> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::SingularPoint(t));
    }
    let f = t / t.sinh();
    let (fp, rho, rhop) = if t < 0.05 {
        let t2 = t * t;
        let fp = t * (-1.0 / 3.0 + t2 * (7.0 / 90.0 + t2 * (-31.0 / 2520.0 + t2 * (127.0 / 75600.0))));
        let rho = t * (1.0 / 3.0 + t2 * (-1.0 / 45.0 + t2 * (2.0 / 945.0 + t2 * (-1.0 / 4725.0))));
        let rhop = 1.0 / 3.0 + t2 * (-1.0 / 15.0 + t2 * (2.0 / 189.0 + t2 * (-1.0 / 675.0)));
        (fp, rho, rhop)
    } else if t > 350.0 {
        // sinh overflows long after every correction has vanished
        (0.0, 1.0 - 1.0 / t, 1.0 / (t * t))
    } else {
        let sh = t.sinh();
        let fp = (sh - t * t.cosh()) / (sh * sh);
        let rho = 1.0 / t.tanh() - 1.0 / t;
        let rhop = 1.0 / (t * t) - 1.0 / (sh * sh);
        (fp, rho, rhop)
    };
    Ok(PhaseState::new(t, f, fp, rho, rhop))
}

/// Static energy density of the ansatz; the dimensionless mass is its integral over `t`.
pub fn energy_density(state: &PhaseState, lambda_hat: f64) -> Result<f64> {
    let t = state.t;
    if !(t > 0.0) {
        return Err(Error::SingularPoint(t));
    }
    let PhaseState {
        f, fp, rho, rhop, ..
    } = *state;
    let gauge = fp * fp + (f * f - 1.0).powi(2) / (2.0 * t * t);
    let mixed = f * f * rho * rho;
    let higgs = 0.5 * (t * rhop).powi(2);
    let potential = 0.25 * lambda_hat * t * t * (rho * rho - 1.0).powi(2);
    Ok(gauge + mixed + higgs + potential)
}

/// Trapezoid integral of the energy density over `samples`, plus `far_tail`
/// (the analytic remainder beyond the last sample) and the `O(t0^3)` piece below
/// the first sample.
pub fn mass_integral(samples: &[PhaseState], lambda_hat: f64, far_tail: f64) -> Result<f64> {
    if samples.len() < 2 {
        return Err(Error::TooFewSamples {
            needed: 2,
            got: samples.len(),
        });
    }
    let mut total = 0.0;
    let mut prev = energy_density(&samples[0], lambda_hat)?;
    // density ~ c t^2 near the origin
    total += prev * samples[0].t / 3.0;
    for pair in samples.windows(2) {
        let next = energy_density(&pair[1], lambda_hat)?;
        total += 0.5 * (pair[1].t - pair[0].t) * (prev + next);
        prev = next;
    }
    Ok(total + far_tail)
}
