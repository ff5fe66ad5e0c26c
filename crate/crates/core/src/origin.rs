//! Local expansion at the regular singular point `t = 0`.
//!
//! Near the origin `f = 1 - alpha t^2 + a4 t^4` and `rho = beta t + b3 t^3`.
//! [`initial_state`] evaluates the truncated series at the handoff radius;
//! [`picard_verify`] solves the equivalent integral equations in `s = ln t`
//! by fixed-point iteration and is used to cross-check the series.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::PhaseState;

/// Default radius at which the series hands over to the integrator.
pub const DEFAULT_T0: f64 = 1e-3;
/// Largest handoff radius accepted by [`initial_state`].
pub const T0_MAX: f64 = 1e-2;

/// Dimensionless shooting coefficients: `f ~ 1 - alpha t^2`, `rho ~ beta t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ShootPoint {
    pub alpha: f64,
    pub beta: f64,
}

impl ShootPoint {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha >= 0.0 && beta.is_finite() && beta >= 0.0) {
            return Err(Error::ParameterDomain(format!(
                "shooting point must be finite and non-negative, got ({alpha}, {beta})"
            )));
        }
        Ok(Self { alpha, beta })
    }
}

/// Next-order series coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SeriesCoefficients {
    pub a4: f64,
    pub b3: f64,
    pub order: u32,
}

pub fn series_coefficients(sp: ShootPoint, lambda_hat: f64) -> SeriesCoefficients {
    let ShootPoint { alpha, beta } = sp;
    SeriesCoefficients {
        a4: (3.0 * alpha * alpha + beta * beta) / 10.0,
        b3: -beta * (4.0 * alpha + lambda_hat) / 10.0,
        order: 4,
    }
}

pub fn initial_state(sp: ShootPoint, lambda_hat: f64, t0: f64) -> Result<PhaseState> {
    if !(t0 > 0.0 && t0 <= T0_MAX) {
        return Err(Error::HandoffDomain { t0, t0_max: T0_MAX });
    }
    let c = series_coefficients(sp, lambda_hat);
    let t2 = t0 * t0;
    Ok(PhaseState::new(
        t0,
        1.0 - sp.alpha * t2 + c.a4 * t2 * t2,
        -2.0 * sp.alpha * t0 + 4.0 * c.a4 * t2 * t0,
        sp.beta * t0 + c.b3 * t2 * t0,
        sp.beta + 3.0 * c.b3 * t2,
    ))
}

/// Constants of the contraction argument, evaluated with `g0 = rho0 = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ContractionConstants {
    pub k: f64,
    pub m1: f64,
    pub m2: f64,
    pub m3: f64,
    pub m4: f64,
    /// Numerator of the geometric difference bound `M / 3^(n+1) e^(2s)`.
    pub m: f64,
    /// Iteration contracts for `s <= -s_threshold`.
    pub s_threshold: f64,
}

pub fn contraction_constants(sp: ShootPoint, lambda_hat: f64) -> ContractionConstants {
    let (g0, rho0, lam) = (1.0_f64, 1.0_f64, lambda_hat);
    let k = (2.0 * sp.alpha.abs()).max(2.0 * sp.beta.abs()).max(3.0);
    let k2 = k * k;
    let m1 = 0.5 * (2.0 * (2.0 * k + k2) + lam * (k2 + rho0 * rho0));
    let m2 = (6.0 * k + 2.0 * k2 + 2.0 * g0 * g0 * k2) / 3.0;
    let m3 = (8.0 + 3.0 * lam) * k2 + lam * rho0 * rho0;
    let m4 = 4.0 * k + 3.0 * (1.0 + g0 * g0) * k2;
    let m = (4.0 * k2 * k + lam * (k2 + rho0 * rho0) * k).max((2.0 + g0 * g0) * k2 * k);
    let e2s = m1.max(m2).max(m3).max(m4);
    ContractionConstants {
        k,
        m1,
        m2,
        m3,
        m4,
        m,
        s_threshold: 0.5 * e2s.ln(),
    }
}

/// Lower end of the truncated `s` quadrature; the integrands decay like `e^(2s)`.
pub const PICARD_S_MIN: f64 = -30.0;
/// Largest allowed spacing of the uniform `s` grid.
pub const PICARD_MAX_SPACING: f64 = 0.01;

/// Iterates and convergence record of the fixed-point solve.
#[derive(Debug, Clone, Serialize)]
pub struct PicardHistory {
    pub constants: ContractionConstants,
    pub s: Vec<f64>,
    /// `phi` and `psi` of the last iterate on the `s` grid, where
    /// `f = 1 + e^(2s) phi` and `rho = e^s psi`.
    pub phi: Vec<f64>,
    pub psi: Vec<f64>,
    /// `sup |phi_{n+1} - phi_n|, |psi_{n+1} - psi_n|` for `n = 0, 1, ...`.
    pub sup_diffs: Vec<f64>,
    /// `sup_diffs[n] / sup_diffs[n-1]`; `None` once the earlier difference is at round-off.
    pub ratios: Vec<Option<f64>>,
    /// Whether every difference respected `M / 3^(n+1) e^(2s)` pointwise.
    pub bound_holds: Vec<bool>,
}

impl PicardHistory {
    /// `(f, rho)` of the final iterate at radius `t`, linearly interpolated in `s`.
    pub fn state_at(&self, t: f64) -> Option<(f64, f64)> {
        let s = t.ln();
        let (lo, hi) = (self.s[0], *self.s.last()?);
        if !(s >= lo && s <= hi) {
            return None;
        }
        let h = (hi - lo) / (self.s.len() - 1) as f64;
        let j = (((s - lo) / h).floor() as usize).min(self.s.len() - 2);
        let w = (s - self.s[j]) / h;
        let phi = self.phi[j] * (1.0 - w) + self.phi[j + 1] * w;
        let psi = self.psi[j] * (1.0 - w) + self.psi[j + 1] * w;
        Some((1.0 + (2.0 * s).exp() * phi, s.exp() * psi))
    }

    /// Largest ratio over the recorded iterations `first..=last` (1-based iteration index
    /// of the later difference); `None` when every ratio there is at round-off.
    pub fn max_ratio(&self, first: usize, last: usize) -> Option<f64> {
        self.ratios
            .iter()
            .enumerate()
            .filter(|(n, _)| *n >= first && *n <= last)
            .filter_map(|(_, r)| *r)
            .reduce(f64::max)
    }
}

/// Runs `n_iters` Picard sweeps of the integral equations
///
/// ```text
/// phi = -alpha + 1/3 ∫ (e^{2σ} - e^{-3s+5σ}) (3 phi^2 + e^{2σ} phi^3 + psi^2 + e^{2σ} psi^2 phi) dσ
/// psi =  beta  + 1/3 ∫ (e^{2σ} - e^{-3s+5σ}) (2 (2 phi + e^{2σ} phi^2) psi + lambda (e^{2σ} psi^2 - 1) psi) dσ
/// ```
///
/// over `s ∈ [-30, s_max]` with composite trapezoid quadrature.
pub fn picard_verify(
    sp: ShootPoint,
    lambda_hat: f64,
    s_max: f64,
    n_iters: usize,
) -> Result<PicardHistory> {
    let constants = contraction_constants(sp, lambda_hat);
    if s_max > -constants.s_threshold {
        return Err(Error::ContractionDomain {
            s_max,
            threshold: -constants.s_threshold,
        });
    }
    if n_iters < 2 {
        return Err(Error::ParameterDomain(format!(
            "Picard verification needs at least 2 iterations, got {n_iters}"
        )));
    }
    let n = ((s_max - PICARD_S_MIN) / PICARD_MAX_SPACING).ceil() as usize;
    let h = (s_max - PICARD_S_MIN) / n as f64;
    let s: Vec<f64> = (0..=n).map(|j| PICARD_S_MIN + h * j as f64).collect();
    let e2: Vec<f64> = s.iter().map(|v| (2.0 * v).exp()).collect();
    let e5: Vec<f64> = s.iter().map(|v| (5.0 * v).exp()).collect();
    let em3: Vec<f64> = s.iter().map(|v| (-3.0 * v).exp()).collect();

    let mut phi = vec![-sp.alpha; n + 1];
    let mut psi = vec![sp.beta; n + 1];
    let mut sup_diffs = Vec::with_capacity(n_iters);
    let mut bound_holds = Vec::with_capacity(n_iters);
    let mut g_phi = vec![0.0; n + 1];
    let mut g_psi = vec![0.0; n + 1];

    for iter in 0..n_iters {
        for j in 0..=n {
            let (p, q, w) = (phi[j], psi[j], e2[j]);
            g_phi[j] = 3.0 * p * p + w * p * p * p + q * q + w * q * q * p;
            g_psi[j] = 2.0 * (2.0 * p + w * p * p) * q + lambda_hat * (w * q * q - 1.0) * q;
        }
        let next_phi = volterra(&g_phi, &e2, &e5, &em3, h, -sp.alpha);
        let next_psi = volterra(&g_psi, &e2, &e5, &em3, h, sp.beta);

        let bound = constants.m / 3f64.powi(iter as i32 + 1);
        let mut sup = 0.0_f64;
        let mut within = true;
        for j in 0..=n {
            let d = (next_phi[j] - phi[j]).abs().max((next_psi[j] - psi[j]).abs());
            sup = sup.max(d);
            within &= d <= bound * e2[j];
        }
        sup_diffs.push(sup);
        bound_holds.push(within);
        phi = next_phi;
        psi = next_psi;
    }

    let scale = phi
        .iter()
        .chain(psi.iter())
        .fold(1.0_f64, |m, v| m.max(v.abs()));
    let floor = 64.0 * f64::EPSILON * scale;
    let ratios = (0..sup_diffs.len())
        .map(|k| {
            if k == 0 || sup_diffs[k - 1] <= floor {
                None
            } else {
                Some(sup_diffs[k] / sup_diffs[k - 1])
            }
        })
        .collect();

    Ok(PicardHistory {
        constants,
        s,
        phi,
        psi,
        sup_diffs,
        ratios,
        bound_holds,
    })
}

/// `c + 1/3 ∫_{s_min}^{s} (e^{2σ} - e^{-3s} e^{5σ}) g(σ) dσ` on the grid.
fn volterra(g: &[f64], e2: &[f64], e5: &[f64], em3: &[f64], h: f64, c: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(g.len());
    let (mut a, mut b) = (0.0, 0.0);
    out.push(c);
    for j in 1..g.len() {
        a += 0.5 * h * (e2[j - 1] * g[j - 1] + e2[j] * g[j]);
        b += 0.5 * h * (e5[j - 1] * g[j - 1] + e5[j] * g[j]);
        out.push(c + (a - em3[j] * b) / 3.0);
    }
    out
}
