//! Outward integration of the field equations with crossing detection.
//!
//! Every accepted step is scanned for sign changes of `f`, `f'`, `rho - 0`,
//! `rho - 1` and `rho'`. Crossings of `f` or `f'` end the run; crossings of the
//! Higgs components are logged and the run continues.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{field_equations, PhaseState};
use crate::ode::{self, DenseStep, Finish, Flow, StepControl};

/// Tolerances, horizon and guards for one trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorControls {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub t_max: f64,
    pub event_tol: f64,
    pub tube_f: f64,
    pub tube_rho: f64,
    pub tube_slope: f64,
    /// `|f|` and `|rho|` beyond this count as divergence.
    pub blowup_field: f64,
    /// `|f'|` and `|rho'|` beyond this count as divergence.
    pub blowup_slope: f64,
    /// Negates the Higgs coupling in the gauge equation; a mutation hook for validation tests.
    #[doc(hidden)]
    #[serde(default)]
    pub flip_coupling: bool,
}

impl Default for IntegratorControls {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            t_max: 12.0,
            event_tol: 1e-10,
            tube_f: 1e-2,
            tube_rho: 1e-2,
            tube_slope: 1e-2,
            blowup_field: 2.0,
            blowup_slope: 1e3,
            flip_coupling: false,
        }
    }
}

impl IntegratorControls {
    pub fn validate(&self, t_start: f64) -> Result<()> {
        let positive = [
            self.rel_tol,
            self.abs_tol,
            self.t_max,
            self.event_tol,
            self.tube_f,
            self.tube_rho,
            self.tube_slope,
            self.blowup_field,
            self.blowup_slope,
        ];
        if !positive.iter().all(|v| v.is_finite() && *v > 0.0) {
            return Err(Error::ParameterDomain(
                "integrator controls must be finite and positive".into(),
            ));
        }
        if self.tube_f >= 1.0 || self.tube_rho >= 1.0 {
            return Err(Error::ParameterDomain(
                "tube thresholds must be below 1".into(),
            ));
        }
        if !(self.t_max > t_start) {
            return Err(Error::ParameterDomain(format!(
                "t_max = {} must exceed the start radius {t_start}",
                self.t_max
            )));
        }
        Ok(())
    }

    pub fn with_t_max(mut self, t_max: f64) -> Self {
        self.t_max = t_max;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OutcomeTag {
    FPrimeZero,
    FZero,
    RhoPrimeZero,
    RhoZero,
    RhoCrossVev,
    Converged,
    Blowup,
    Horizon,
}

impl OutcomeTag {
    pub fn name(self) -> &'static str {
        match self {
            Self::FPrimeZero => "FPrimeZero",
            Self::FZero => "FZero",
            Self::RhoPrimeZero => "RhoPrimeZero",
            Self::RhoZero => "RhoZero",
            Self::RhoCrossVev => "RhoCrossVev",
            Self::Converged => "Converged",
            Self::Blowup => "Blowup",
            Self::Horizon => "Horizon",
        }
    }

    pub fn is_f_event(self) -> bool {
        matches!(self, Self::FPrimeZero | Self::FZero)
    }

    pub fn is_rho_event(self) -> bool {
        matches!(self, Self::RhoPrimeZero | Self::RhoZero | Self::RhoCrossVev)
    }
}

impl std::fmt::Display for OutcomeTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// A refined crossing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EventRecord {
    pub tag: OutcomeTag,
    pub t: f64,
    pub state: PhaseState,
}

/// Quantities scanned for crossings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Watched {
    F,
    FPrime,
    Rho,
    RhoPrime,
    RhoMinusVev,
}

/// A near-contact of a watched quantity with zero that did not change sign.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Tangency {
    pub quantity: Watched,
    pub t: f64,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Outcome {
    pub tag: OutcomeTag,
    /// Radius of the deciding event or of the guard trip; `None` for horizon and tube outcomes.
    pub t_event: Option<f64>,
    /// State at the event, or the final state when there is none.
    pub state: PhaseState,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ClassifyMode {
    /// Decides by the gauge field only.
    FFate,
    /// Decides by the first Higgs crossing.
    RhoFate,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub lambda_hat: f64,
    pub controls: IntegratorControls,
    /// Start state followed by the end of every accepted step.
    pub samples: Vec<PhaseState>,
    /// `steps[i]` interpolates between `samples[i]` and `samples[i + 1]`.
    pub steps: Vec<DenseStep<4>>,
    pub f_events: Vec<EventRecord>,
    pub rho_events: Vec<EventRecord>,
    pub tangencies: Vec<Tangency>,
    /// Radius at which a divergence guard tripped or the state went non-finite.
    pub blowup_at: Option<f64>,
    pub outcome: Outcome,
    /// Index of the first sample produced by tail grafting rather than integration.
    pub tail_start: Option<usize>,
}

impl Trajectory {
    pub fn last(&self) -> &PhaseState {
        self.samples.last().expect("trajectory has a start sample")
    }

    /// Dense-output state at radius `t` within the integrated range.
    pub fn state_at(&self, t: f64) -> Option<PhaseState> {
        let first = self.steps.first()?;
        let last = self.steps.last()?;
        if t < first.t0 || t > last.t1() {
            return None;
        }
        let j = self.steps.partition_point(|s| s.t1() < t);
        let step = &self.steps[j.min(self.steps.len() - 1)];
        Some(PhaseState::from_array(t, step.eval(t)))
    }

    /// First event of either family.
    pub fn first_event(&self) -> Option<&EventRecord> {
        self.f_events
            .iter()
            .chain(self.rho_events.iter())
            .min_by(|a, b| a.t.total_cmp(&b.t))
    }

    /// Integrated (not grafted) samples.
    pub fn integrated_samples(&self) -> &[PhaseState] {
        &self.samples[..self.tail_start.unwrap_or(self.samples.len())]
    }
}

const SUBDIVISIONS: usize = 4;
const TANGENCY_TOL: f64 = 1e-9;

/// Integrates from `start` until an `f`-crossing, a guard trip or `controls.t_max`,
/// and classifies the result in [`ClassifyMode::FFate`].
pub fn integrate(
    start: &PhaseState,
    lambda_hat: f64,
    controls: &IntegratorControls,
) -> Result<Trajectory> {
    if !(start.t > 0.0) {
        return Err(Error::SingularPoint(start.t));
    }
    if !start.is_finite() {
        return Err(Error::ParameterDomain("start state is not finite".into()));
    }
    if !(lambda_hat.is_finite() && lambda_hat >= 0.0) {
        return Err(Error::ParameterDomain(format!(
            "lambda_hat must be finite and >= 0, got {lambda_hat}"
        )));
    }
    controls.validate(start.t)?;

    let step_control = StepControl {
        rel_tol: controls.rel_tol,
        abs_tol: controls.abs_tol,
        h_init: 0.1 * start.t,
        h_max: 0.1,
    };
    let flip = controls.flip_coupling;
    let mut traj = Trajectory {
        lambda_hat,
        controls: *controls,
        samples: vec![*start],
        steps: Vec::new(),
        f_events: Vec::new(),
        rho_events: Vec::new(),
        tangencies: Vec::new(),
        blowup_at: None,
        outcome: Outcome {
            tag: OutcomeTag::Horizon,
            t_event: None,
            state: *start,
        },
        tail_start: None,
    };

    let finish = ode::integrate(
        |t, y| field_equations(t, y, lambda_hat, flip),
        start.t,
        start.to_array(),
        controls.t_max,
        &step_control,
        |step| {
            traj.samples.push(PhaseState::from_array(step.t1(), step.y1));
            scan_step(step, controls.event_tol, &mut traj);
            traj.steps.push(step.clone());
            let y = step.y1;
            let tripped = y[0].abs() > controls.blowup_field
                || y[2].abs() > controls.blowup_field
                || y[1].abs() > controls.blowup_slope
                || y[3].abs() > controls.blowup_slope;
            if !traj.f_events.is_empty() {
                Flow::Stop
            } else if tripped {
                traj.blowup_at = Some(step.t1());
                Flow::Stop
            } else {
                Flow::Continue
            }
        },
    )?;
    if finish == Finish::NonFinite && traj.f_events.is_empty() {
        traj.blowup_at = Some(traj.last().t);
    }
    traj.outcome = classify(&traj, ClassifyMode::FFate)?;
    Ok(traj)
}

fn watched(y: &[f64; 4], q: Watched) -> f64 {
    match q {
        Watched::F => y[0],
        Watched::FPrime => y[1],
        Watched::Rho => y[2],
        Watched::RhoPrime => y[3],
        Watched::RhoMinusVev => y[2] - 1.0,
    }
}

/// Crossing direction that constitutes an event: `+1` upward through zero, `-1` downward.
fn event_spec(q: Watched) -> (OutcomeTag, f64) {
    match q {
        Watched::F => (OutcomeTag::FZero, -1.0),
        Watched::FPrime => (OutcomeTag::FPrimeZero, 1.0),
        Watched::Rho => (OutcomeTag::RhoZero, -1.0),
        Watched::RhoPrime => (OutcomeTag::RhoPrimeZero, -1.0),
        Watched::RhoMinusVev => (OutcomeTag::RhoCrossVev, 1.0),
    }
}

fn admissible(tag: OutcomeTag, s: &PhaseState) -> bool {
    match tag {
        OutcomeTag::FPrimeZero => s.f > 0.0 && s.f < 1.0,
        OutcomeTag::FZero => s.fp < 0.0,
        OutcomeTag::RhoPrimeZero => s.rho > 0.0 && s.rho < 1.0,
        OutcomeTag::RhoCrossVev => s.rhop > 0.0,
        _ => true,
    }
}

fn scan_step(step: &DenseStep<4>, event_tol: f64, traj: &mut Trajectory) {
    let nodes: Vec<(f64, [f64; 4])> = (0..=SUBDIVISIONS)
        .map(|j| {
            if j == 0 {
                (step.t0, step.y0)
            } else if j == SUBDIVISIONS {
                (step.t1(), step.y1)
            } else {
                let t = step.t0 + step.h * j as f64 / SUBDIVISIONS as f64;
                (t, step.eval(t))
            }
        })
        .collect();

    for q in [
        Watched::F,
        Watched::FPrime,
        Watched::Rho,
        Watched::RhoPrime,
        Watched::RhoMinusVev,
    ] {
        let (tag, dir) = event_spec(q);
        let g = |y: &[f64; 4]| dir * watched(y, q);
        let mut crossed = false;
        for w in nodes.windows(2) {
            let (ga, gb) = (g(&w[0].1), g(&w[1].1));
            if !(ga < 0.0 && gb >= 0.0) {
                continue;
            }
            crossed = true;
            if let Ok((t, y)) = refine_event(|t| step.eval(t), w[0].0, w[1].0, g, event_tol) {
                let state = PhaseState::from_array(t, y);
                if admissible(tag, &state) {
                    let rec = EventRecord { tag, t, state };
                    if tag.is_f_event() {
                        traj.f_events.push(rec);
                    } else {
                        traj.rho_events.push(rec);
                    }
                }
            }
        }
        if !crossed {
            for w in nodes.windows(3) {
                let (a, b, c) = (
                    watched(&w[0].1, q),
                    watched(&w[1].1, q),
                    watched(&w[2].1, q),
                );
                if b.abs() < TANGENCY_TOL && b.abs() < a.abs() && b.abs() < c.abs() && a * c > 0.0
                {
                    traj.tangencies.push(Tangency {
                        quantity: q,
                        t: w[1].0,
                        value: b,
                    });
                }
            }
        }
    }
    traj.f_events.sort_by(|a, b| a.t.total_cmp(&b.t));
    traj.rho_events.sort_by(|a, b| a.t.total_cmp(&b.t));
}

/// Bisection for a sign change of `predicate(interp(t))` on `[lo, hi]`, down to `tol` in `t`.
/// Returns the upper end of the final interval, where the predicate has its post-crossing sign.
pub fn refine_event<S, I, P>(interp: I, lo: f64, hi: f64, predicate: P, tol: f64) -> Result<(f64, S)>
where
    I: Fn(f64) -> S,
    P: Fn(&S) -> f64,
{
    let (mut a, mut b) = (lo, hi);
    let ga = predicate(&interp(a));
    let gb = predicate(&interp(b));
    if !(ga.is_finite() && gb.is_finite()) || ga.signum() == gb.signum() && ga != 0.0 && gb != 0.0
    {
        return Err(Error::NoEvent { lo, hi });
    }
    if ga == 0.0 {
        return Ok((a, interp(a)));
    }
    while b - a > tol {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        let gm = predicate(&interp(m));
        if gm.signum() == ga.signum() && gm != 0.0 {
            a = m;
        } else {
            b = m;
        }
    }
    Ok((b, interp(b)))
}

/// Distance of the end state from the broken vacuum; the Higgs deviation uses the
/// far-field estimate `rho + t rho'`, exact for a `1 - B/t` tail.
pub fn in_tube(state: &PhaseState, controls: &IntegratorControls) -> bool {
    let rho_inf = state.rho + state.t * state.rhop;
    state.f < controls.tube_f
        && state.f > -controls.tube_f
        && (rho_inf - 1.0).abs() < controls.tube_rho
        && state.fp.abs() < controls.tube_slope
        && state.rhop.abs() < controls.tube_slope
}

/// Projection of the gauge state onto its growing mode near the vacuum.
/// Positive means `f` is about to turn up, negative that it is about to cross zero.
pub fn f_lean(state: &PhaseState) -> f64 {
    let k = (state.rho * state.rho - 1.0 / (state.t * state.t)).max(0.0).sqrt();
    state.fp + k * state.f
}

/// Projection of the Higgs deviation onto its growing mode near the vacuum.
/// Positive means `rho` is about to overshoot 1, negative that it falls back.
pub fn rho_lean(state: &PhaseState, lambda_hat: f64) -> f64 {
    let m = (2.0 * lambda_hat).sqrt();
    let u = state.rho - 1.0;
    u + state.t * state.rhop + m * state.t * u
}

pub fn classify(traj: &Trajectory, mode: ClassifyMode) -> Result<Outcome> {
    let end = *traj.integrated_samples().last().unwrap_or(traj.last());
    let first_fp = traj.f_events.iter().find(|e| e.tag == OutcomeTag::FPrimeZero);
    let first_f = traj.f_events.iter().find(|e| e.tag == OutcomeTag::FZero);
    if let (Some(a), Some(b)) = (first_fp, first_f) {
        if (a.t - b.t).abs() <= traj.controls.event_tol {
            return Err(Error::Integrity(format!(
                "f and f' vanish together at t = {}",
                a.t
            )));
        }
    }
    let decided = match mode {
        ClassifyMode::FFate => traj.f_events.first(),
        ClassifyMode::RhoFate => traj.rho_events.first(),
    };
    if let Some(e) = decided {
        return Ok(Outcome {
            tag: e.tag,
            t_event: Some(e.t),
            state: e.state,
        });
    }
    if let Some(t) = traj.blowup_at {
        return Ok(Outcome {
            tag: OutcomeTag::Blowup,
            t_event: Some(t),
            state: end,
        });
    }
    let tag = if traj.f_events.is_empty() && in_tube(&end, &traj.controls) {
        OutcomeTag::Converged
    } else {
        OutcomeTag::Horizon
    };
    Ok(Outcome {
        tag,
        t_event: None,
        state: end,
    })
}
