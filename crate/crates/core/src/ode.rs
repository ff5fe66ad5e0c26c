//! Dormand–Prince 5(4) stepper with Hairer's fourth-order continuous extension.
//!
//! The stepper is generic over the state dimension and knows nothing about the
//! monopole system; callers drive it through [`integrate`] and inspect every
//! accepted step via its [`DenseStep`].

use crate::error::{Error, Result};

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

// fifth-order solution minus embedded fourth-order solution
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

const SAFETY: f64 = 0.9;
const MIN_SCALE: f64 = 0.2;
const MAX_SCALE: f64 = 5.0;

/// Step-size control for [`integrate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepControl {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub h_init: f64,
    pub h_max: f64,
}

/// One accepted step together with its interpolant.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseStep<const N: usize> {
    pub t0: f64,
    pub h: f64,
    pub y0: [f64; N],
    pub y1: [f64; N],
    cont: [[f64; N]; 5],
}

impl<const N: usize> DenseStep<N> {
    pub fn t1(&self) -> f64 {
        self.t0 + self.h
    }

    /// Evaluates the continuous extension at `t` (clamped to the step).
    pub fn eval(&self, t: f64) -> [f64; N] {
        let theta = ((t - self.t0) / self.h).clamp(0.0, 1.0);
        let theta1 = 1.0 - theta;
        let c = &self.cont;
        let mut y = [0.0; N];
        for i in 0..N {
            y[i] = c[0][i]
                + theta * (c[1][i] + theta1 * (c[2][i] + theta * (c[3][i] + theta1 * c[4][i])));
        }
        y
    }

    /// Linear interpolant between the step endpoints, used only in tests of event refinement.
    #[doc(hidden)]
    pub fn linear(t0: f64, h: f64, y0: [f64; N], y1: [f64; N]) -> Self {
        let mut cont = [[0.0; N]; 5];
        cont[0] = y0;
        for i in 0..N {
            cont[1][i] = y1[i] - y0[i];
        }
        Self {
            t0,
            h,
            y0,
            y1,
            cont,
        }
    }
}

/// What the caller wants after inspecting an accepted step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Flow {
    Continue,
    Stop,
}

/// How an integration run ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Finish {
    ReachedEnd,
    Stopped,
    NonFinite,
}

fn axpy<const N: usize>(y: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    let mut out = *y;
    for i in 0..N {
        let mut acc = 0.0;
        for (c, k) in terms {
            acc += c * k[i];
        }
        out[i] += h * acc;
    }
    out
}

/// Integrates `y' = rhs(t, y)` from `t0` towards `t_end`, handing each accepted
/// step to `on_step`. Steps never overshoot `t_end`.
pub fn integrate<const N: usize, F, S>(
    rhs: F,
    t0: f64,
    y0: [f64; N],
    t_end: f64,
    control: &StepControl,
    mut on_step: S,
) -> Result<Finish>
where
    F: Fn(f64, &[f64; N]) -> [f64; N],
    S: FnMut(&DenseStep<N>) -> Flow,
{
    let mut t = t0;
    let mut y = y0;
    let mut k1 = rhs(t, &y);
    let mut h = control.h_init.min(control.h_max).min(t_end - t);
    if !y.iter().chain(k1.iter()).all(|v| v.is_finite()) {
        return Ok(Finish::NonFinite);
    }

    while t < t_end {
        let h_min = 1e-14 * t.abs().max(1.0);
        if h < h_min {
            return Err(Error::StepUnderflow { t, h });
        }
        let last = t + h >= t_end;
        if last {
            h = t_end - t;
        }

        let k2 = rhs(t + C2 * h, &axpy(&y, h, &[(A21, &k1)]));
        let k3 = rhs(t + C3 * h, &axpy(&y, h, &[(A31, &k1), (A32, &k2)]));
        let k4 = rhs(
            t + C4 * h,
            &axpy(&y, h, &[(A41, &k1), (A42, &k2), (A43, &k3)]),
        );
        let k5 = rhs(
            t + C5 * h,
            &axpy(&y, h, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
        );
        let t_new = if last { t_end } else { t + h };
        let k6 = rhs(
            t_new,
            &axpy(
                &y,
                h,
                &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)],
            ),
        );
        let y_new = axpy(
            &y,
            h,
            &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)],
        );
        let k7 = rhs(t_new, &y_new);

        let mut err = 0.0_f64;
        let mut finite = true;
        for i in 0..N {
            let e = h
                * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let scale = control
                .abs_tol
                .max(control.rel_tol * y[i].abs().max(y_new[i].abs()));
            finite &= y_new[i].is_finite() && k7[i].is_finite();
            err = err.max(e.abs() / scale);
        }

        if !finite {
            // non-finite trial states shrink the step; a persistent blow-up ends the run
            if h <= 1e-12 * t.abs().max(1.0) {
                return Ok(Finish::NonFinite);
            }
            h *= MIN_SCALE;
            continue;
        }

        if err <= 1.0 {
            let mut cont = [[0.0; N]; 5];
            for i in 0..N {
                let dy = y_new[i] - y[i];
                let bspl = h * k1[i] - dy;
                cont[0][i] = y[i];
                cont[1][i] = dy;
                cont[2][i] = bspl;
                cont[3][i] = dy - h * k7[i] - bspl;
                cont[4][i] = h
                    * (D1 * k1[i]
                        + D3 * k3[i]
                        + D4 * k4[i]
                        + D5 * k5[i]
                        + D6 * k6[i]
                        + D7 * k7[i]);
            }
            let step = DenseStep {
                t0: t,
                h,
                y0: y,
                y1: y_new,
                cont,
            };
            t = t_new;
            y = y_new;
            k1 = k7;
            if on_step(&step) == Flow::Stop {
                return Ok(Finish::Stopped);
            }
            let scale = if err == 0.0 {
                MAX_SCALE
            } else {
                (SAFETY * err.powf(-0.2)).clamp(MIN_SCALE, MAX_SCALE)
            };
            h = (h * scale).min(control.h_max);
        } else {
            h *= (SAFETY * err.powf(-0.2)).clamp(MIN_SCALE, 1.0);
        }
    }
    Ok(Finish::ReachedEnd)
}
