//! Post-hoc checks on solved profiles: monotonicity, equation residuals,
//! tail decay rates and the linearized Higgs probe.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::integrator::{refine_event, OutcomeTag, Trajectory};
use crate::model::{field_equations, PhaseState};
use crate::ode::{self, Flow, StepControl};

/// Smallest slack of each inequality over the audited samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Margins {
    /// `min f`
    pub f_above_zero: f64,
    /// `min (1 - f)`
    pub f_below_one: f64,
    /// `min (-f')`
    pub fp_negative: f64,
    /// `min rho`
    pub rho_above_zero: f64,
    /// `min (1 - rho)`
    pub rho_below_one: f64,
    /// `min rho'`
    pub rhop_positive: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AuditReport {
    pub f_in_01: bool,
    pub fp_negative: bool,
    pub rho_in_01: bool,
    pub rhop_positive: bool,
    pub worst_margins: Margins,
    pub residual_max: f64,
    pub samples_checked: usize,
}

impl AuditReport {
    pub fn passed(&self) -> bool {
        self.f_in_01 && self.fp_negative && self.rho_in_01 && self.rhop_positive
    }
}

/// Checks `0 < f < 1`, `f' < 0`, `0 < rho < 1`, `rho' > 0` on every integrated
/// sample past the first. Grafted tail samples are not audited.
pub fn monotonicity_audit(profile: &Trajectory) -> Result<AuditReport> {
    let tag = profile.outcome.tag;
    if tag.is_f_event() || tag.is_rho_event() || tag == OutcomeTag::Blowup {
        return Err(Error::AuditDomain(format!(
            "profile ends in {tag} at t = {:?}",
            profile.outcome.t_event
        )));
    }
    let samples = profile.integrated_samples();
    let audited = samples.get(1..).unwrap_or(&[]);
    if audited.is_empty() {
        return Err(Error::TooFewSamples { needed: 2, got: samples.len() });
    }
    let mut m = Margins {
        f_above_zero: f64::INFINITY,
        f_below_one: f64::INFINITY,
        fp_negative: f64::INFINITY,
        rho_above_zero: f64::INFINITY,
        rho_below_one: f64::INFINITY,
        rhop_positive: f64::INFINITY,
    };
    for s in audited {
        m.f_above_zero = m.f_above_zero.min(s.f);
        m.f_below_one = m.f_below_one.min(1.0 - s.f);
        m.fp_negative = m.fp_negative.min(-s.fp);
        m.rho_above_zero = m.rho_above_zero.min(s.rho);
        m.rho_below_one = m.rho_below_one.min(1.0 - s.rho);
        m.rhop_positive = m.rhop_positive.min(s.rhop);
    }
    let residual_max = if samples.len() >= 5 {
        residual_norm(samples, profile.lambda_hat)?
    } else {
        f64::NAN
    };
    Ok(AuditReport {
        f_in_01: m.f_above_zero > 0.0 && m.f_below_one > 0.0,
        fp_negative: m.fp_negative > 0.0,
        rho_in_01: m.rho_above_zero > 0.0 && m.rho_below_one > 0.0,
        rhop_positive: m.rhop_positive > 0.0,
        worst_margins: m,
        residual_max,
        samples_checked: audited.len(),
    })
}

/// Three-point derivative on a possibly non-uniform grid, second order.
fn central_derivative(t: [f64; 3], y: [f64; 3]) -> f64 {
    let hm = t[1] - t[0];
    let hp = t[2] - t[1];
    (hm * hm * y[2] - hp * hp * y[0] + (hp * hp - hm * hm) * y[1]) / (hm * hp * (hm + hp))
}

/// Sup-norm of the field equations evaluated with finite differences of the sampled
/// columns: `D f - f'`, `D rho - rho'`, `D f' - f''(state)` and `D rho' - rho''(state)`
/// at every interior sample.
pub fn residual_norm(samples: &[PhaseState], lambda_hat: f64) -> Result<f64> {
    if samples.len() < 5 {
        return Err(Error::TooFewSamples { needed: 5, got: samples.len() });
    }
    let mut worst = 0.0_f64;
    for w in samples.windows(3) {
        let t = [w[0].t, w[1].t, w[2].t];
        let s = &w[1];
        if !(s.t > 0.0) {
            return Err(Error::SingularPoint(s.t));
        }
        let d = field_equations(s.t, &s.to_array(), lambda_hat, false);
        let r = [
            central_derivative(t, [w[0].f, w[1].f, w[2].f]) - s.fp,
            central_derivative(t, [w[0].fp, w[1].fp, w[2].fp]) - d[1],
            central_derivative(t, [w[0].rho, w[1].rho, w[2].rho]) - s.rhop,
            central_derivative(t, [w[0].rhop, w[1].rhop, w[2].rhop]) - d[3],
        ];
        for v in r {
            worst = worst.max(v.abs());
        }
    }
    Ok(worst)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum DecayComponent {
    F,
    OneMinusRho,
}

/// `component ~ amplitude * g(t) * e^(-rate t)`, or for the massless Higgs tail
/// `amplitude * t^(-rate)`. See [`fit_decay`] for the prefactors `g`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecayFit {
    pub rate: f64,
    pub amplitude: f64,
    pub samples: usize,
}

/// Width of the band around a Higgs mass of exactly twice the gauge mass treated as resonant.
const RESONANCE_BAND: f64 = 1e-6;

/// Algebraic prefactor `g(t)` of an exponential tail and its log-derivative `g'/g`.
fn prefactor(component: DecayComponent, lambda_hat: f64, t: f64) -> (f64, f64) {
    match component {
        DecayComponent::F if lambda_hat > 0.0 => (1.0, 0.0),
        DecayComponent::F => (t, 1.0 / t),
        DecayComponent::OneMinusRho => {
            let m = (2.0 * lambda_hat).sqrt();
            if m < 2.0 - RESONANCE_BAND {
                (1.0 / t, -1.0 / t)
            } else if m <= 2.0 + RESONANCE_BAND {
                let l = t.ln();
                (l / t, 1.0 / (t * l) - 1.0 / t)
            } else {
                (1.0 / (t * t), -2.0 / t)
            }
        }
    }
}

fn power_law(component: DecayComponent, lambda_hat: f64) -> bool {
    component == DecayComponent::OneMinusRho && lambda_hat <= 0.0
}

impl DecayFit {
    /// Model value and derivative at `t`.
    pub fn eval(&self, component: DecayComponent, lambda_hat: f64, t: f64) -> (f64, f64) {
        let (a, r) = (self.amplitude, self.rate);
        if power_law(component, lambda_hat) {
            let v = a * t.powf(-r);
            return (v, -r * v / t);
        }
        let (g, dlog) = prefactor(component, lambda_hat, t);
        let v = a * g * (-r * t).exp();
        (v, v * (dlog - r))
    }
}

fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Log-linear least squares for the tail of `component` over samples with `t` in `window`.
///
/// With `lambda_hat > 0` the gauge field is fitted as `A e^(-r t)`. The Higgs deviation
/// follows the linearized equation driven by `f^2`: with `m = sqrt(2 lambda_hat)` below
/// 2 the free mode `B e^(-m t) / t` dominates, at `m = 2` the drive is resonant and gives
/// `B ln(t) e^(-2t) / t`, and above 2 the driven `B e^(-2t) / t^2` dominates.
/// Without the quartic coupling the gauge tail is `A t e^(-r t)` and the Higgs deviation
/// the power law `B t^(-p)`.
pub fn fit_decay(
    samples: &[PhaseState],
    window: (f64, f64),
    component: DecayComponent,
    lambda_hat: f64,
) -> Result<DecayFit> {
    let mut x = Vec::new();
    let mut y = Vec::new();
    for s in samples.iter().filter(|s| s.t >= window.0 && s.t <= window.1) {
        let v = match component {
            DecayComponent::F => s.f,
            DecayComponent::OneMinusRho => 1.0 - s.rho,
        };
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::FitDomain(format!(
                "{component:?} is not positive at t = {} ({v})",
                s.t
            )));
        }
        if power_law(component, lambda_hat) {
            x.push(s.t.ln());
            y.push(v.ln());
        } else {
            let (g, _) = prefactor(component, lambda_hat, s.t);
            if !(g > 0.0) {
                return Err(Error::FitDomain(format!("window reaches t = {}", s.t)));
            }
            x.push(s.t);
            y.push((v / g).ln());
        }
    }
    if x.len() < 10 {
        return Err(Error::TooFewSamples { needed: 10, got: x.len() });
    }
    let (slope, intercept) = linear_fit(&x, &y);
    Ok(DecayFit {
        rate: -slope,
        amplitude: intercept.exp(),
        samples: x.len(),
    })
}

/// Background field for the linearized Higgs probe.
#[derive(Debug, Clone, Copy)]
pub enum ProbeProfile<'a> {
    /// `p = 1`: the spherical Bessel equation of order one.
    Flat,
    /// Gauge profile of a solved trajectory, sampled in the dimensionless radius.
    Sampled {
        samples: &'a [PhaseState],
        lambda_hat: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProbeResult {
    /// First zero of the regular solution in the probe variable, if one occurs before `t_end`.
    pub first_zero: Option<f64>,
    pub t_end: f64,
    /// Whether the oscillatory `+Q` term was kept (massive Higgs).
    pub massive: bool,
}

/// Default probe start radius and slope.
pub const PROBE_T0: f64 = 1e-3;

/// First zero of the regular solution of
///
/// ```text
/// Q'' + (2/tau) Q' + (1 - 2 p^2 / tau^2) Q = 0,    tau = sqrt(lambda_hat) t
/// ```
///
/// along the frozen gauge profile `p`, started at `Q = tau0`, `Q' = 1`. Without the
/// quartic coupling the probe runs in the unscaled radius and the constant term is dropped.
pub fn linearized_probe(profile: ProbeProfile<'_>, t_end: f64) -> Result<ProbeResult> {
    linearized_probe_from(profile, t_end, PROBE_T0, 1.0)
}

/// [`linearized_probe`] with an explicit start radius and start slope.
pub fn linearized_probe_from(
    profile: ProbeProfile<'_>,
    t_end: f64,
    tau0: f64,
    slope: f64,
) -> Result<ProbeResult> {
    if !(tau0 > 0.0 && t_end > tau0) || slope == 0.0 {
        return Err(Error::ParameterDomain(format!(
            "probe needs 0 < tau0 < t_end and a non-zero slope (tau0 = {tau0}, t_end = {t_end})"
        )));
    }
    let (p, massive): (Box<dyn Fn(f64) -> f64 + '_>, bool) = match profile {
        ProbeProfile::Flat => (Box::new(|_| 1.0), true),
        ProbeProfile::Sampled {
            samples,
            lambda_hat,
        } => {
            let scale = if lambda_hat > 0.0 { lambda_hat.sqrt() } else { 1.0 };
            let interp = HermiteProfile::new(samples)?;
            let last = interp.t_last() * scale;
            if t_end > last {
                return Err(Error::ParameterDomain(format!(
                    "probe horizon {t_end} beyond the profile end {last}"
                )));
            }
            (Box::new(move |tau| interp.eval(tau / scale)), lambda_hat > 0.0)
        }
    };
    let mass = if massive { 1.0 } else { 0.0 };

    let mut domain_err = None;
    let mut zero = None;
    let control = StepControl {
        rel_tol: 1e-11,
        abs_tol: 1e-14,
        h_init: 0.1 * tau0,
        h_max: 0.05,
    };
    ode::integrate(
        |tau, y: &[f64; 2]| {
            let pv = p(tau);
            [
                y[1],
                -2.0 * y[1] / tau - (mass - 2.0 * pv * pv / (tau * tau)) * y[0],
            ]
        },
        tau0,
        [tau0 * slope, slope],
        t_end,
        &control,
        |step| {
            let pv = p(step.t1());
            if !(pv > 0.0 && pv <= 1.0) {
                domain_err = Some(Error::SturmDomain { t: step.t1(), p: pv });
                return Flow::Stop;
            }
            if step.y0[0].signum() != step.y1[0].signum() {
                if let Ok((t, _)) =
                    refine_event(|t| step.eval(t), step.t0, step.t1(), |y| y[0], 1e-12)
                {
                    zero = Some(t);
                    return Flow::Stop;
                }
            }
            Flow::Continue
        },
    )?;
    if let Some(e) = domain_err {
        return Err(e);
    }
    Ok(ProbeResult {
        first_zero: zero,
        t_end,
        massive,
    })
}

/// Piecewise-cubic Hermite interpolant of `f` through sampled values and slopes;
/// below the first sample it continues as `1 - c t^2`.
struct HermiteProfile<'a> {
    samples: &'a [PhaseState],
    c: f64,
}

impl<'a> HermiteProfile<'a> {
    fn new(samples: &'a [PhaseState]) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::TooFewSamples { needed: 2, got: samples.len() });
        }
        if let Some(bad) = samples.iter().find(|s| !(s.f > 0.0 && s.f <= 1.0)) {
            return Err(Error::SturmDomain { t: bad.t, p: bad.f });
        }
        let s0 = samples[0];
        Ok(Self {
            samples,
            c: (1.0 - s0.f) / (s0.t * s0.t),
        })
    }

    fn t_last(&self) -> f64 {
        self.samples[self.samples.len() - 1].t
    }

    fn eval(&self, t: f64) -> f64 {
        let s = self.samples;
        if t <= s[0].t {
            return 1.0 - self.c * t * t;
        }
        let j = s.partition_point(|x| x.t < t).clamp(1, s.len() - 1);
        let (a, b) = (&s[j - 1], &s[j]);
        let h = b.t - a.t;
        let u = (t - a.t) / h;
        let (u2, u3) = (u * u, u * u * u);
        (2.0 * u3 - 3.0 * u2 + 1.0) * a.f
            + (u3 - 2.0 * u2 + u) * h * a.fp
            + (-2.0 * u3 + 3.0 * u2) * b.f
            + (u3 - u2) * h * b.fp
    }
}
