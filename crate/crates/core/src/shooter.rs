//! Nested bisection for the shooting pair.
//!
//! For fixed `beta` the gauge fate splits the `alpha` axis into an early turn-up
//! of `f` (too small) and a zero crossing of `f` (too large); bisection between
//! the two locates `alpha*(beta)`. Along that curve the Higgs fate splits the
//! `beta` axis into a fall-back of `rho` (too small) and an overshoot of the
//! vacuum value (too large), and an outer bisection locates `beta*`.

use serde::Serialize;

use crate::analysis::{
    fit_decay, monotonicity_audit, residual_norm, AuditReport, DecayComponent, DecayFit,
};
use crate::error::{Error, Result};
use crate::integrator::{
    f_lean, in_tube, integrate, rho_lean, IntegratorControls, Outcome, OutcomeTag, Trajectory,
};
use crate::model::{mass_integral, nondimensionalize, ModelParams, PhaseState, ScaledParams};
use crate::origin::{initial_state, ShootPoint, DEFAULT_T0};

/// Bisection tolerances and profile construction on top of the integrator controls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolveControls {
    pub integrator: IntegratorControls,
    pub tol_alpha: f64,
    pub tol_beta: f64,
    /// Series handoff radius.
    pub t0: f64,
    /// Radius up to which the reported profile extends.
    pub t_report: f64,
    /// Spacing of the resampled profile.
    pub sample_spacing: f64,
    /// Distance kept between the graft point and the first crossing of the trajectory,
    /// for couplings up to 1. Above that it shrinks as `1 / sqrt(lambda_hat)` so the
    /// growing Higgs mode is damped by the same number of e-folds.
    pub graft_margin: f64,
    /// Largest multiple of `t_max` tried before an undecided trajectory is resolved
    /// by its growing-mode projection.
    pub horizon_factor: f64,
}

impl Default for SolveControls {
    fn default() -> Self {
        Self {
            integrator: IntegratorControls::default(),
            tol_alpha: 1e-12,
            tol_beta: 1e-12,
            t0: DEFAULT_T0,
            t_report: 12.0,
            sample_spacing: 1e-3,
            graft_margin: 2.0,
            horizon_factor: 4.0,
        }
    }
}

impl SolveControls {
    /// Graft margin at a given coupling.
    pub fn graft_margin_at(&self, lambda_hat: f64) -> f64 {
        self.graft_margin * lambda_hat.sqrt().recip().min(1.0)
    }

    pub fn validate(&self) -> Result<()> {
        self.integrator.validate(self.t0)?;
        let positive = [
            self.tol_alpha,
            self.tol_beta,
            self.t0,
            self.t_report,
            self.sample_spacing,
            self.graft_margin,
        ];
        if !positive.iter().all(|v| v.is_finite() && *v > 0.0) {
            return Err(Error::ParameterDomain(
                "solve tolerances, radii and spacing must be finite and positive".into(),
            ));
        }
        if !(self.horizon_factor >= 1.0) {
            return Err(Error::ParameterDomain(format!(
                "horizon factor must be >= 1, got {}",
                self.horizon_factor
            )));
        }
        if self.t_report <= self.t0 + 2.0 * self.sample_spacing {
            return Err(Error::ParameterDomain(format!(
                "report radius {} too close to the handoff radius {}",
                self.t_report, self.t0
            )));
        }
        Ok(())
    }
}

/// Which of the two opposing classes a probe fell into.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Side {
    /// `alpha` too small (`f'` turns up) or `beta` too small (`rho` falls back).
    Low,
    /// `alpha` too large (`f` crosses zero) or `beta` too large (`rho` overshoots 1).
    High,
}

/// How a probe's side was decided.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Resolution {
    /// A crossing within the base horizon.
    Event,
    /// A crossing after extending the horizon.
    ExtendedHorizon,
    /// A crossing after relaxing the divergence guards.
    RelaxedGuard,
    /// The sign of the growing-mode projection at the end of the trajectory.
    Lean,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProbeRecord {
    pub value: f64,
    pub tag: OutcomeTag,
    pub side: Option<Side>,
    pub resolution: Resolution,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Bracket {
    pub lo: f64,
    pub hi: f64,
    pub lo_outcome: OutcomeTag,
    pub hi_outcome: OutcomeTag,
}

impl Bracket {
    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }
}

pub const SEED_ALPHA: f64 = 1.0 / 6.0;
pub const SEED_BETA: f64 = 1.0 / 3.0;
const EXPANSION: f64 = 4.0;
const SEARCH_MIN: f64 = 1e-12;
const SEARCH_MAX: f64 = 1e12;
const RELAXED_FIELD: f64 = 1e8;
const RELAXED_SLOPE: f64 = 1e15;

fn par_map<T, R, F>(items: Vec<T>, f: F) -> Vec<R>
where
    T: Send,
    R: Send,
    F: Fn(T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        items.into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.into_iter().map(f).collect()
    }
}

fn launch(alpha: f64, beta: f64, lambda_hat: f64, t0: f64, c: &IntegratorControls) -> Result<Trajectory> {
    let start = initial_state(ShootPoint::new(alpha, beta)?, lambda_hat, t0)?;
    integrate(&start, lambda_hat, c)
}

fn f_side(tag: OutcomeTag) -> Option<Side> {
    match tag {
        OutcomeTag::FPrimeZero => Some(Side::Low),
        OutcomeTag::FZero => Some(Side::High),
        _ => None,
    }
}

fn lean_side(lean: f64) -> Option<Side> {
    if lean > 0.0 {
        Some(Side::Low)
    } else if lean < 0.0 {
        Some(Side::High)
    } else {
        None
    }
}

/// Gauge fate of one `(alpha, beta)` pair, with the trajectory that decided it.
pub struct AlphaProbe {
    pub record: ProbeRecord,
    pub trajectory: Trajectory,
}

/// Classifies `alpha` at fixed `beta` by the gauge fate, extending the horizon and
/// relaxing the guards before falling back to the growing-mode projection of `f`.
pub fn probe_alpha(alpha: f64, beta: f64, lambda_hat: f64, controls: &SolveControls) -> Result<AlphaProbe> {
    let base = controls.integrator;
    let mut traj = launch(alpha, beta, lambda_hat, controls.t0, &base)?;
    let first_tag = traj.outcome.tag;
    let mut resolution = Resolution::Event;
    if traj.outcome.tag == OutcomeTag::Blowup {
        let relaxed = IntegratorControls {
            blowup_field: RELAXED_FIELD,
            blowup_slope: RELAXED_SLOPE,
            ..base
        };
        traj = launch(alpha, beta, lambda_hat, controls.t0, &relaxed)?;
        resolution = Resolution::RelaxedGuard;
    } else {
        let mut factor = 1.0;
        while f_side(traj.outcome.tag).is_none()
            && traj.outcome.tag != OutcomeTag::Blowup
            && factor * 2.0 <= controls.horizon_factor
        {
            factor *= 2.0;
            traj = launch(alpha, beta, lambda_hat, controls.t0, &base.with_t_max(base.t_max * factor))?;
            resolution = Resolution::ExtendedHorizon;
        }
    }
    let mut side = f_side(traj.outcome.tag);
    if side.is_none() {
        resolution = Resolution::Lean;
        side = lean_side(f_lean(traj.last()));
    }
    Ok(AlphaProbe {
        record: ProbeRecord {
            value: alpha,
            tag: if side.is_some() && resolution != Resolution::Lean {
                traj.outcome.tag
            } else {
                first_tag
            },
            side,
            resolution,
        },
        trajectory: traj,
    })
}

/// Searches a geometric ladder from `seed` for a pair of probes on opposite sides.
fn expand<P>(seed: f64, probe: P) -> Result<(Bracket, Vec<ProbeRecord>)>
where
    P: Fn(f64) -> Result<ProbeRecord> + Sync + Send,
{
    let first = probe(seed)?;
    let mut log = vec![first];
    let mut below: Option<ProbeRecord> = None;
    let mut above: Option<ProbeRecord> = None;
    match first.side {
        Some(Side::Low) => below = Some(first),
        Some(Side::High) => above = Some(first),
        None => {}
    }
    const CHUNK: usize = 4;
    let mut k_up = 1;
    let mut k_down = 1;
    loop {
        if let (Some(b), Some(a)) = (below, above) {
            return Ok((
                Bracket {
                    lo: b.value,
                    hi: a.value,
                    lo_outcome: b.tag,
                    hi_outcome: a.tag,
                },
                log,
            ));
        }
        let mut candidates = Vec::new();
        if above.is_none() {
            candidates.extend((0..CHUNK).map(|j| seed * EXPANSION.powi((k_up + j) as i32)).filter(|v| *v <= SEARCH_MAX));
            k_up += CHUNK;
        }
        if below.is_none() {
            candidates.extend((0..CHUNK).map(|j| seed / EXPANSION.powi((k_down + j) as i32)).filter(|v| *v >= SEARCH_MIN));
            k_down += CHUNK;
        }
        if candidates.is_empty() {
            let lo = log.iter().map(|r| r.value).fold(f64::INFINITY, f64::min);
            let hi = log.iter().map(|r| r.value).fold(0.0, f64::max);
            let tag_at = |v: f64| log.iter().find(|r| r.value == v).map(|r| r.tag).unwrap_or(OutcomeTag::Horizon);
            return Err(Error::Bracketing {
                lo,
                hi,
                lo_outcome: tag_at(lo),
                hi_outcome: tag_at(hi),
            });
        }
        let results = par_map(candidates, &probe);
        let mut results = results.into_iter().collect::<Result<Vec<_>>>()?;
        // walk outward from the seed so the tightest bracket wins
        results.sort_by(|a, b| (a.value / seed).ln().abs().total_cmp(&(b.value / seed).ln().abs()));
        for r in results {
            log.push(r);
            match r.side {
                Some(Side::High) if r.value > seed && above.is_none() => {
                    above = Some(r);
                }
                Some(Side::Low) if r.value > seed && above.is_none() => {
                    below = Some(below.map_or(r, |b| if r.value > b.value { r } else { b }));
                }
                Some(Side::Low) if r.value < seed && below.is_none() => {
                    below = Some(r);
                }
                Some(Side::High) if r.value < seed && below.is_none() => {
                    above = Some(above.map_or(r, |a| if r.value < a.value { r } else { a }));
                }
                _ => {}
            }
        }
    }
}

/// Brackets `alpha*(beta)` between a turn-up of `f'` and a zero of `f`.
pub fn bracket_alpha(beta: f64, lambda_hat: f64, controls: &SolveControls) -> Result<Bracket> {
    bracket_alpha_logged(beta, lambda_hat, controls).map(|(b, _)| b)
}

fn bracket_alpha_logged(beta: f64, lambda_hat: f64, controls: &SolveControls) -> Result<(Bracket, Vec<ProbeRecord>)> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::ParameterDomain(format!("beta must be positive, got {beta}")));
    }
    expand(SEED_ALPHA, |a| probe_alpha(a, beta, lambda_hat, controls).map(|p| p.record))
}

#[derive(Debug, Clone)]
pub struct AlphaResult {
    pub alpha_star: f64,
    pub bracket: Bracket,
    /// Trajectory at `alpha_star`, integrated to the extended horizon.
    pub trajectory: Trajectory,
    pub iterations: usize,
    pub log: Vec<ProbeRecord>,
}

/// Bisects a gauge-fate bracket down to `tol_alpha`.
pub fn bisect_alpha(
    bracket: Bracket,
    beta: f64,
    lambda_hat: f64,
    tol_alpha: f64,
    controls: &SolveControls,
) -> Result<AlphaResult> {
    if !(bracket.lo < bracket.hi) || bracket.lo_outcome == bracket.hi_outcome {
        return Err(Error::ParameterDomain(format!(
            "not a dichotomy bracket: {bracket:?}"
        )));
    }
    let mut b = bracket;
    let mut log = Vec::new();
    let mut iterations = 0;
    while b.width() > tol_alpha {
        let mid = b.midpoint();
        if mid <= b.lo || mid >= b.hi {
            break;
        }
        let probe = probe_alpha(mid, beta, lambda_hat, controls)?;
        log.push(probe.record);
        iterations += 1;
        match probe.record.side {
            Some(Side::Low) => {
                b.lo = mid;
                b.lo_outcome = probe.record.tag;
            }
            Some(Side::High) => {
                b.hi = mid;
                b.hi_outcome = probe.record.tag;
            }
            None => {
                let end = probe.trajectory.last();
                return Err(Error::Integrity(format!(
                    "alpha = {mid} at beta = {beta} is undecided ({} at t = {}, f = {}, f' = {})",
                    probe.trajectory.outcome.tag, end.t, end.f, end.fp
                )));
            }
        }
    }
    let alpha_star = b.midpoint();
    let extended = controls
        .integrator
        .with_t_max(controls.integrator.t_max * controls.horizon_factor);
    let trajectory = launch(alpha_star, beta, lambda_hat, controls.t0, &extended)?;
    Ok(AlphaResult {
        alpha_star,
        bracket: b,
        trajectory,
        iterations,
        log,
    })
}

/// Higgs fate of the trajectory on `alpha*(beta)`.
///
/// The first Higgs crossing decides the side. Without one, the growing-mode
/// projection of `rho` is read off where the gauge field is still settled:
/// `graft_margin` before its first crossing, or at the end of the run. The tag is
/// `Converged` when nothing crossed within the base horizon and the state there
/// lies in the tube.
pub fn rho_side(traj: &Trajectory, controls: &SolveControls) -> (OutcomeTag, Option<Side>, Resolution) {
    let t_base = controls.integrator.t_max;
    let settled_at_base = traj
        .first_event()
        .is_none_or(|e| e.t > t_base)
        && traj.blowup_at.is_none_or(|t| t > t_base)
        && traj
            .state_at(t_base)
            .is_some_and(|s| in_tube(&s, &traj.controls));
    if let Some(e) = traj.rho_events.first() {
        let side = match e.tag {
            OutcomeTag::RhoCrossVev => Side::High,
            _ => Side::Low,
        };
        return if e.t <= t_base {
            (e.tag, Some(side), Resolution::Event)
        } else if settled_at_base {
            (OutcomeTag::Converged, Some(side), Resolution::ExtendedHorizon)
        } else {
            (e.tag, Some(side), Resolution::ExtendedHorizon)
        };
    }
    let probe_state = match traj.f_events.first() {
        Some(e) => traj
            .state_at((e.t - controls.graft_margin_at(traj.lambda_hat)).max(traj.samples[0].t))
            .unwrap_or(*traj.last()),
        None => *traj.last(),
    };
    let tag = if settled_at_base {
        OutcomeTag::Converged
    } else if traj.blowup_at.is_some() {
        OutcomeTag::Blowup
    } else {
        OutcomeTag::Horizon
    };
    let lean = rho_lean(&probe_state, traj.lambda_hat);
    let side = if lean > 0.0 {
        Some(Side::High)
    } else if lean < 0.0 {
        Some(Side::Low)
    } else {
        None
    };
    (tag, side, Resolution::Lean)
}

/// One outer probe: the inner solve at `beta` and its Higgs fate.
#[derive(Debug, Clone)]
pub struct BetaProbe {
    pub record: ProbeRecord,
    pub alpha: AlphaResult,
}

pub fn probe_beta(beta: f64, lambda_hat: f64, controls: &SolveControls) -> Result<BetaProbe> {
    let (bracket, mut log) = bracket_alpha_logged(beta, lambda_hat, controls)?;
    let mut alpha = bisect_alpha(bracket, beta, lambda_hat, controls.tol_alpha, controls)?;
    log.append(&mut alpha.log);
    alpha.log = log;
    let (tag, side, resolution) = rho_side(&alpha.trajectory, controls);
    Ok(BetaProbe {
        record: ProbeRecord {
            value: beta,
            tag,
            side,
            resolution,
        },
        alpha,
    })
}

/// Parameters of the analytic tail attached beyond the graft radius.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailFit {
    pub t_graft: f64,
    pub f: DecayFit,
    pub higgs: DecayFit,
    /// Largest jump of `f` or `rho` between the integrated and the fitted profile at `t_graft`.
    pub mismatch: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    pub lambda_hat: f64,
    pub alpha_star: f64,
    pub beta_star: f64,
    pub alpha_bracket: Bracket,
    pub beta_bracket: Bracket,
    /// Higgs fate of the final trajectory before grafting.
    pub final_outcome: OutcomeTag,
    /// The profile reached the tube and carries a fitted tail to `t_report`.
    pub converged: bool,
    pub t_graft: f64,
    pub tail: Option<TailFit>,
    pub residual_norm: f64,
    pub audit: Option<AuditReport>,
    /// Dimensionless mass.
    pub energy: f64,
    pub alpha_iterations: usize,
    pub beta_iterations: usize,
    /// Outer probes that classified as converged before bisection finished.
    pub converged_candidates: Vec<f64>,
    pub beta_log: Vec<ProbeRecord>,
    #[serde(skip)]
    pub profile: Trajectory,
}

impl SolveReport {
    /// Converged and passing the monotonicity audit.
    pub fn passed(&self) -> bool {
        self.converged && self.audit.is_some_and(|a| a.passed())
    }
}

/// Full nested solve at `lambda_hat`.
pub fn bisect_beta(lambda_hat: f64, tol_alpha: f64, tol_beta: f64, controls: &SolveControls) -> Result<SolveReport> {
    if !(lambda_hat.is_finite() && lambda_hat >= 0.0) {
        return Err(Error::ParameterDomain(format!(
            "lambda_hat must be finite and >= 0, got {lambda_hat}"
        )));
    }
    let controls = SolveControls {
        tol_alpha,
        tol_beta,
        ..*controls
    };
    controls.validate()?;

    let probe = |b: f64| probe_beta(b, lambda_hat, &controls);
    let seed = probe(SEED_BETA)?;
    let mut candidates = Vec::new();
    if seed.record.tag == OutcomeTag::Converged {
        candidates.push(SEED_BETA);
    }
    let seed_record = seed.record;
    let (mut bracket, mut log) = expand(SEED_BETA, |b| {
        if b == SEED_BETA {
            Ok(seed_record)
        } else {
            probe(b).map(|p| p.record)
        }
    })?;
    for r in &log {
        if r.tag == OutcomeTag::Converged && !candidates.contains(&r.value) {
            candidates.push(r.value);
        }
    }

    let mut iterations = 0;
    while bracket.width() > tol_beta {
        let mid = bracket.midpoint();
        if mid <= bracket.lo || mid >= bracket.hi {
            break;
        }
        let p = probe(mid)?;
        iterations += 1;
        log.push(p.record);
        if p.record.tag == OutcomeTag::Converged {
            candidates.push(mid);
        }
        match p.record.side {
            Some(Side::Low) => {
                bracket.lo = mid;
                bracket.lo_outcome = p.record.tag;
            }
            Some(Side::High) => {
                bracket.hi = mid;
                bracket.hi_outcome = p.record.tag;
            }
            None => break,
        }
    }

    let beta_star = bracket.midpoint();
    let last = probe(beta_star)?;
    let (final_outcome, _, _) = rho_side(&last.alpha.trajectory, &controls);
    let alpha_iterations = last.alpha.iterations;
    let alpha_bracket = last.alpha.bracket;
    let alpha_star = last.alpha.alpha_star;
    let built = build_profile(&last.alpha.trajectory, lambda_hat, &controls)?;

    let samples = built.profile.integrated_samples();
    let residual = residual_norm(samples, lambda_hat)?;
    let audit = monotonicity_audit(&built.profile).ok();
    let energy = mass_integral(&built.profile.samples, lambda_hat, built.far_tail)?;

    Ok(SolveReport {
        lambda_hat,
        alpha_star,
        beta_star,
        alpha_bracket,
        beta_bracket: bracket,
        final_outcome,
        converged: built.profile.outcome.tag == OutcomeTag::Converged,
        t_graft: built.t_graft,
        tail: built.tail,
        residual_norm: residual,
        audit,
        energy,
        alpha_iterations,
        beta_iterations: iterations,
        converged_candidates: candidates,
        beta_log: log,
        profile: built.profile,
    })
}

/// Default-tolerance solve.
pub fn solve(lambda_hat: f64, controls: &SolveControls) -> Result<SolveReport> {
    bisect_beta(lambda_hat, controls.tol_alpha, controls.tol_beta, controls)
}

/// Solve for physical couplings; returns the reduction and the physical shooting pair.
pub fn solve_physical(params: &ModelParams, controls: &SolveControls) -> Result<PhysicalSolve> {
    let scaled = nondimensionalize(params)?;
    let report = solve(scaled.lambda_hat, controls)?;
    Ok(PhysicalSolve {
        alpha: scaled.alpha_physical(report.alpha_star),
        beta: scaled.beta_physical(report.beta_star),
        mass: scaled.mass_physical(report.energy),
        scaled,
        report,
    })
}

#[derive(Debug, Clone)]
pub struct PhysicalSolve {
    pub scaled: ScaledParams,
    pub alpha: f64,
    pub beta: f64,
    pub mass: f64,
    pub report: SolveReport,
}

struct BuiltProfile {
    profile: Trajectory,
    t_graft: f64,
    tail: Option<TailFit>,
    far_tail: f64,
}

/// Resamples the trajectory up to the graft radius and attaches the fitted tail.
///
/// The graft radius sits `graft_margin` before the first crossing (or guard trip) of
/// the trajectory, capped at `t_report`. A profile that already reaches `t_report`
/// inside the tube keeps its integrated samples and only records a tail fit.
fn build_profile(traj: &Trajectory, lambda_hat: f64, controls: &SolveControls) -> Result<BuiltProfile> {
    let t_start = traj.samples[0].t;
    let t_end = traj.last().t;
    let departure = traj
        .first_event()
        .map(|e| e.t)
        .or(traj.blowup_at)
        .map_or(t_end, |t| t - controls.graft_margin_at(lambda_hat));
    let t_limit = departure.min(controls.t_report).min(t_end);
    let h = controls.sample_spacing;
    let n = ((t_limit - t_start) / h + 1e-9).floor().max(0.0) as usize;

    let mut profile = traj.clone();
    profile.samples = (0..=n)
        .map(|i| traj.state_at(t_start + h * i as f64).expect("inside integrated range"))
        .collect();
    profile.tail_start = None;
    let end = *profile.last();
    let t_graft = end.t;

    if t_graft >= controls.t_report - 0.5 * h && in_tube(&end, &controls.integrator) {
        let window = (t_graft - 2.0, t_graft);
        let fit = fit_decay(&profile.samples, window, DecayComponent::F, lambda_hat)
            .and_then(|f| {
                fit_decay(&profile.samples, window, DecayComponent::OneMinusRho, lambda_hat)
                    .map(|higgs| TailFit {
                        t_graft,
                        f,
                        higgs,
                        mismatch: 0.0,
                    })
            })
            .ok();
        profile.outcome = Outcome {
            tag: OutcomeTag::Converged,
            t_event: None,
            state: end,
        };
        return Ok(BuiltProfile {
            far_tail: far_tail(&end, lambda_hat, fit.as_ref()),
            profile,
            t_graft,
            tail: fit,
        });
    }

    match graft_tail(&profile, lambda_hat, t_graft, controls.t_report, h, &controls.integrator) {
        Ok((grafted, fit)) => Ok(BuiltProfile {
            far_tail: far_tail(grafted.last(), lambda_hat, Some(&fit)),
            profile: grafted,
            t_graft,
            tail: Some(fit),
        }),
        Err(_) => {
            profile.outcome = Outcome {
                tag: OutcomeTag::Horizon,
                t_event: None,
                state: end,
            };
            Ok(BuiltProfile {
                far_tail: far_tail(&end, lambda_hat, None),
                profile,
                t_graft,
                tail: None,
            })
        }
    }
}

/// Energy beyond the last sample from the asymptotic forms: the magnetic term
/// `(f^2 - 1)^2 / (2 t^2) -> 1 / (2 t^2)` and, for the massless Higgs power law,
/// the gradient term `(t rho')^2 / 2`.
fn far_tail(end: &PhaseState, lambda_hat: f64, fit: Option<&TailFit>) -> f64 {
    let t = end.t;
    let magnetic = 1.0 / (2.0 * t);
    if lambda_hat > 0.0 {
        return magnetic;
    }
    let gradient = match fit {
        Some(fit) if fit.higgs.rate > 0.5 => {
            let (p, b) = (fit.higgs.rate, fit.higgs.amplitude);
            p * p * b * b / (2.0 * (2.0 * p - 1.0) * t.powf(2.0 * p - 1.0))
        }
        _ => 0.5 * t.powi(3) * end.rhop * end.rhop,
    };
    magnetic + gradient
}

/// Fits the linearized vacuum tails over `[t_graft - 2, t_graft]` and appends model
/// samples out to `t_report`.
pub fn graft_tail(
    profile: &Trajectory,
    lambda_hat: f64,
    t_graft: f64,
    t_report: f64,
    spacing: f64,
    controls: &IntegratorControls,
) -> Result<(Trajectory, TailFit)> {
    let at = profile
        .samples
        .iter()
        .rev()
        .find(|s| s.t <= t_graft + 1e-12)
        .copied()
        .ok_or(Error::GraftDomain(t_graft))?;
    if !in_tube(&at, controls) || at.f <= 0.0 || at.rho >= 1.0 {
        return Err(Error::GraftDomain(at.t));
    }
    let window = (at.t - 2.0, at.t);
    let f = fit_decay(&profile.samples, window, DecayComponent::F, lambda_hat)?;
    let higgs = fit_decay(&profile.samples, window, DecayComponent::OneMinusRho, lambda_hat)?;
    let (fv, _) = f.eval(DecayComponent::F, lambda_hat, at.t);
    let (hv, _) = higgs.eval(DecayComponent::OneMinusRho, lambda_hat, at.t);
    let mismatch = (fv - at.f).abs().max((1.0 - hv - at.rho).abs());
    if mismatch > 10.0 * controls.tube_f.min(controls.tube_rho) {
        return Err(Error::GraftDomain(at.t));
    }

    let mut out = profile.clone();
    let keep = out.samples.iter().position(|s| s.t > at.t + 1e-12).unwrap_or(out.samples.len());
    out.samples.truncate(keep);
    out.tail_start = Some(out.samples.len());
    let mut i = 1;
    loop {
        let t = at.t + spacing * i as f64;
        if t > t_report + 1e-9 {
            break;
        }
        let (fv, fd) = f.eval(DecayComponent::F, lambda_hat, t);
        let (hv, hd) = higgs.eval(DecayComponent::OneMinusRho, lambda_hat, t);
        out.samples.push(PhaseState::new(t, fv, fd, 1.0 - hv, -hd));
        i += 1;
    }
    out.outcome = Outcome {
        tag: OutcomeTag::Converged,
        t_event: None,
        state: *out.last(),
    };
    Ok((
        out,
        TailFit {
            t_graft: at.t,
            f,
            higgs,
            mismatch,
        },
    ))
}

/// Outcome of one sweep cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Cell {
    pub alpha: f64,
    pub beta: f64,
    pub outcome: OutcomeTag,
    pub t_event: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutcomeGrid {
    pub alphas: Vec<f64>,
    pub betas: Vec<f64>,
    /// Row-major: all `beta` for the first `alpha`, then the next `alpha`.
    pub cells: Vec<Cell>,
}

fn classify_cell(alpha: f64, beta: f64, lambda_hat: f64, t0: f64, controls: &IntegratorControls) -> Cell {
    let cell = |outcome, t_event| Cell {
        alpha,
        beta,
        outcome,
        t_event,
    };
    match launch(alpha, beta, lambda_hat, t0, controls) {
        Ok(traj) => {
            let o = if traj.outcome.tag.is_f_event() {
                traj.outcome
            } else {
                crate::integrator::classify(&traj, crate::integrator::ClassifyMode::RhoFate)
                    .unwrap_or(traj.outcome)
            };
            cell(o.tag, o.t_event)
        }
        Err(_) => cell(OutcomeTag::Blowup, None),
    }
}

fn check_grid(alpha_grid: &[f64], beta_grid: &[f64]) -> Result<()> {
    if alpha_grid.is_empty() || beta_grid.is_empty() {
        return Err(Error::ParameterDomain("sweep grids must be non-empty".into()));
    }
    if !alpha_grid
        .iter()
        .chain(beta_grid)
        .all(|v| v.is_finite() && *v >= 0.0)
    {
        return Err(Error::ParameterDomain(
            "sweep grids must be finite and non-negative".into(),
        ));
    }
    Ok(())
}

/// Classifies every grid cell: gauge fate first, Higgs fate when `f` never crosses.
pub fn sweep(alpha_grid: &[f64], beta_grid: &[f64], lambda_hat: f64, controls: &SolveControls) -> Result<OutcomeGrid> {
    check_grid(alpha_grid, beta_grid)?;
    let pairs: Vec<(f64, f64)> = alpha_grid
        .iter()
        .flat_map(|&a| beta_grid.iter().map(move |&b| (a, b)))
        .collect();
    let cells = par_map(pairs, |(a, b)| {
        classify_cell(a, b, lambda_hat, controls.t0, &controls.integrator)
    });
    Ok(OutcomeGrid {
        alphas: alpha_grid.to_vec(),
        betas: beta_grid.to_vec(),
        cells,
    })
}

/// Single-threaded [`sweep`], available regardless of features.
pub fn sweep_sequential(alpha_grid: &[f64], beta_grid: &[f64], lambda_hat: f64, controls: &SolveControls) -> Result<OutcomeGrid> {
    check_grid(alpha_grid, beta_grid)?;
    let mut cells = Vec::with_capacity(alpha_grid.len() * beta_grid.len());
    for &a in alpha_grid {
        for &b in beta_grid {
            cells.push(classify_cell(a, b, lambda_hat, controls.t0, &controls.integrator));
        }
    }
    Ok(OutcomeGrid {
        alphas: alpha_grid.to_vec(),
        betas: beta_grid.to_vec(),
        cells,
    })
}
