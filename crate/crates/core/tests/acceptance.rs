//! End-to-end acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

use std::process::ExitCode;
use std::time::Instant;

use monopole::analysis::{linearized_probe, ProbeProfile};
use monopole::integrator::{classify, integrate, ClassifyMode, IntegratorControls, OutcomeTag};
use monopole::origin::contraction_constants;
use monopole::shooter::{probe_beta, solve, SolveControls, SolveReport};
use monopole::{initial_state, picard_verify, ps_exact, series_coefficients, ShootPoint};

struct Suite {
    failures: usize,
}

impl Suite {
    fn record(&mut self, id: u32, name: &str, passed: bool, detail: String) {
        println!("{} criterion {id}: {name}: {detail}", if passed { "PASS" } else { "FAIL" });
        if !passed {
            self.failures += 1;
        }
    }
}

// ---- exact rational series -------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq)]
struct Q(i128, i128);

fn gcd(a: i128, b: i128) -> i128 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

impl Q {
    fn new(n: i128, d: i128) -> Self {
        let g = gcd(n, d).max(1) * d.signum();
        Q(n / g, d / g)
    }
    fn add(self, o: Q) -> Q {
        Q::new(self.0 * o.1 + o.0 * self.1, self.1 * o.1)
    }
    fn sub(self, o: Q) -> Q {
        self.add(Q(-o.0, o.1))
    }
    fn mul(self, o: Q) -> Q {
        Q::new(self.0 * o.0, self.1 * o.1)
    }
    fn div(self, o: Q) -> Q {
        Q::new(self.0 * o.1, self.1 * o.0)
    }
    fn to_f64(self) -> f64 {
        self.0 as f64 / self.1 as f64
    }
}

fn factorial(n: i128) -> i128 {
    (1..=n).product()
}

/// Power series quotient `num / den` truncated to `n` terms.
fn series_div(num: &[Q], den: &[Q], n: usize) -> Vec<Q> {
    let mut out = vec![Q(0, 1); n];
    for k in 0..n {
        let mut acc = num.get(k).copied().unwrap_or(Q(0, 1));
        for (j, o) in out[..k].iter().enumerate() {
            acc = acc.sub(o.mul(den.get(k - j).copied().unwrap_or(Q(0, 1))));
        }
        out[k] = acc.div(den[0]);
    }
    out
}

/// Taylor coefficients of `t / sinh t` and `coth t - 1/t` from the exponential series.
fn exact_profile_series(n: usize) -> (Vec<Q>, Vec<Q>) {
    let sinh_over_t: Vec<Q> = (0..n as i128)
        .map(|k| if k % 2 == 0 { Q::new(1, factorial(k + 1)) } else { Q(0, 1) })
        .collect();
    let f = series_div(&[Q(1, 1)], &sinh_over_t, n);
    // t cosh t - sinh t = sum_k t^(2k+1) (1/(2k)! - 1/(2k+1)!), divided by t * sinh t = t^2 (sinh t / t)
    let num: Vec<Q> = (0..n as i128)
        .map(|k| {
            if k % 2 == 1 {
                let m = k + 1;
                Q::new(1, factorial(m)).sub(Q::new(1, factorial(m + 1)))
            } else {
                Q(0, 1)
            }
        })
        .collect();
    let rho = series_div(&num, &sinh_over_t, n);
    (f, rho)
}

// ---- fixed-step RK4 oracle -------------------------------------------------

fn field_rhs(t: f64, y: [f64; 4], lh: f64) -> [f64; 4] {
    let [f, fp, r, rp] = y;
    [
        fp,
        f * (f * f - 1.0) / (t * t) + r * r * f,
        rp,
        -2.0 * rp / t + 2.0 * f * f * r / (t * t) + lh * (r * r - 1.0) * r,
    ]
}

/// Gauge fate and crossing radius with classical RK4 at fixed step `h`, started from
/// the leading series terms at `t0`.
fn rk4_fate(alpha: f64, beta: f64, lh: f64, t0: f64, h: f64, t_max: f64) -> (OutcomeTag, f64) {
    let a4 = (3.0 * alpha * alpha + beta * beta) / 10.0;
    let b3 = -beta * (4.0 * alpha + lh) / 10.0;
    let mut t = t0;
    let mut y = [
        1.0 - alpha * t * t + a4 * t.powi(4),
        -2.0 * alpha * t + 4.0 * a4 * t.powi(3),
        beta * t + b3 * t.powi(3),
        beta + 3.0 * b3 * t * t,
    ];
    let add = |y: [f64; 4], k: [f64; 4], s: f64| [y[0] + s * k[0], y[1] + s * k[1], y[2] + s * k[2], y[3] + s * k[3]];
    while t < t_max {
        let k1 = field_rhs(t, y, lh);
        let k2 = field_rhs(t + h / 2.0, add(y, k1, h / 2.0), lh);
        let k3 = field_rhs(t + h / 2.0, add(y, k2, h / 2.0), lh);
        let k4 = field_rhs(t + h, add(y, k3, h), lh);
        let next: [f64; 4] = std::array::from_fn(|i| y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]));
        if next[0] <= 0.0 {
            return (OutcomeTag::FZero, t + h * y[0] / (y[0] - next[0]));
        }
        if next[1] >= 0.0 && next[0] > 0.0 && next[0] < 1.0 {
            return (OutcomeTag::FPrimeZero, t + h * y[1] / (y[1] - next[1]));
        }
        y = next;
        t += h;
    }
    (OutcomeTag::Horizon, t)
}

/// First positive root of `tan t = t` by bisection on `sin t - t cos t`.
fn bessel_zero() -> f64 {
    let g = |t: f64| t.sin() - t * t.cos();
    let (mut lo, mut hi) = (4.0, 4.7);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(lo) * g(mid) <= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

// ---- criteria --------------------------------------------------------------

fn criterion_1(s: &mut Suite, r: &SolveReport, seconds: f64) {
    let da = (r.alpha_star - 1.0 / 6.0).abs();
    let db = (r.beta_star - 1.0 / 3.0).abs();
    let err = r
        .profile
        .samples
        .iter()
        .filter(|p| p.t >= 0.01 && p.t <= 10.0)
        .map(|p| {
            let e = ps_exact(p.t).unwrap();
            (p.f - e.f).abs().max((p.rho - e.rho).abs())
        })
        .fold(0.0, f64::max);
    s.record(
        1,
        "massless solve reproduces the exact profile",
        da < 1e-3 && db < 1e-3 && err < 1e-4 && seconds < 30.0,
        format!("|da| = {da:.2e}, |db| = {db:.2e}, max profile error {err:.2e}, {seconds:.2} s"),
    );
}

fn criterion_2(s: &mut Suite) {
    let (f, rho) = exact_profile_series(6);
    let (a4, b3) = (f[4], rho[3]);
    let alpha = Q(0, 1).sub(f[2]);
    let beta = rho[1];
    let exact = a4 == Q(7, 360) && b3 == Q(-1, 45) && alpha == Q(1, 6) && beta == Q(1, 3);
    let c = series_coefficients(ShootPoint::new(1.0 / 6.0, 1.0 / 3.0).unwrap(), 0.0);
    let ulp = |x: f64, q: Q| (x - q.to_f64()).abs() <= 2.0 * f64::EPSILON * q.to_f64().abs();
    s.record(
        2,
        "series coefficients at the exact shooting pair",
        exact && ulp(c.a4, a4) && ulp(c.b3, b3),
        format!("a4 = {} (exact {}/{}), b3 = {} (exact {}/{})", c.a4, a4.0, a4.1, c.b3, b3.0, b3.1),
    );
}

fn criterion_3(s: &mut Suite) {
    let mut ok = true;
    let mut detail = Vec::new();
    for (a, b, lh) in [(1.0 / 6.0, 1.0 / 3.0, 0.0), (1.0, 1.0, 1.0)] {
        let sp = ShootPoint::new(a, b).unwrap();
        let k = contraction_constants(sp, lh);
        match picard_verify(sp, lh, -k.s_threshold, 8) {
            Ok(h) => {
                let worst = h.max_ratio(1, 7);
                ok &= worst.is_some_and(|r| r <= 1.0 / 3.0 + 0.05);
                detail.push(format!("({a:.4}, {b:.4}, {lh}) max ratio {worst:?}"));
            }
            Err(e) => {
                ok = false;
                detail.push(format!("({a}, {b}, {lh}) error {e}"));
            }
        }
    }
    s.record(3, "fixed-point sweeps contract", ok, detail.join("; "));
}

fn criterion_4(s: &mut Suite) {
    let mut ok = true;
    let mut detail = Vec::new();
    let controls = IntegratorControls::default();
    for (alpha, expected) in [(1e-3, OutcomeTag::FPrimeZero), (50.0, OutcomeTag::FZero)] {
        let t0 = 1e-3;
        let start = initial_state(ShootPoint::new(alpha, 0.5).unwrap(), 1.0, t0).unwrap();
        let o = integrate(&start, 1.0, &controls).and_then(|tr| classify(&tr, ClassifyMode::FFate));
        let (rk_tag, rk_t) = rk4_fate(alpha, 0.5, 1.0, t0, 1e-4, controls.t_max);
        match o {
            Ok(o) => {
                let t = o.t_event.unwrap_or(f64::NAN);
                ok &= o.tag == expected && rk_tag == expected && (t - rk_t).abs() < 1e-3;
                detail.push(format!("alpha {alpha}: {} at {t:.6}, oracle {rk_tag} at {rk_t:.6}", o.tag));
            }
            Err(e) => {
                ok = false;
                detail.push(format!("alpha {alpha}: {e}"));
            }
        }
    }
    s.record(4, "gauge-fate dichotomy against a fixed-step oracle", ok, detail.join("; "));
}

fn criterion_5(s: &mut Suite, controls: &SolveControls) {
    let mut ok = true;
    let mut detail = Vec::new();
    for (beta, expected) in [
        (1e-3, &[OutcomeTag::RhoPrimeZero, OutcomeTag::RhoZero][..]),
        (50.0, &[OutcomeTag::RhoCrossVev][..]),
    ] {
        match probe_beta(beta, 1.0, controls) {
            Ok(p) => {
                let tag = p
                    .alpha
                    .trajectory
                    .rho_events
                    .first()
                    .map(|e| e.tag)
                    .unwrap_or(p.record.tag);
                ok &= expected.contains(&tag);
                detail.push(format!(
                    "beta {beta}: alpha* = {:.6}, Higgs fate {tag}",
                    p.alpha.alpha_star
                ));
            }
            Err(e) => {
                ok = false;
                detail.push(format!("beta {beta}: {e}"));
            }
        }
    }
    s.record(5, "Higgs-fate dichotomy along the gauge separatrix", ok, detail.join("; "));
}

fn criterion_6(s: &mut Suite, r: &SolveReport) {
    let audit_ok = r.audit.is_some_and(|a| {
        let m = a.worst_margins;
        a.passed()
            && [m.f_above_zero, m.f_below_one, m.fp_negative, m.rho_above_zero, m.rho_below_one, m.rhop_positive]
                .iter()
                .all(|v| *v > 0.0)
    });
    let (f_rate, h_rate) = r.tail.map_or((f64::NAN, f64::NAN), |t| (t.f.rate, t.higgs.rate));
    let ok = r.converged
        && audit_ok
        && r.residual_norm < 1e-6
        && (f_rate - 1.0).abs() < 0.05
        && (h_rate - 2f64.sqrt()).abs() < 0.07;
    s.record(
        6,
        "quartic monopole converges with monotone profiles",
        ok,
        format!(
            "converged {}, audit {audit_ok}, residual {:.2e}, f rate {f_rate:.4}, Higgs rate {h_rate:.4}",
            r.converged, r.residual_norm
        ),
    );
}

fn criterion_7(s: &mut Suite, r: &SolveReport) {
    let z = bessel_zero();
    let flat = linearized_probe(ProbeProfile::Flat, 5.0).ok().and_then(|p| p.first_zero);
    let solved = linearized_probe(
        ProbeProfile::Sampled {
            samples: r.profile.integrated_samples(),
            lambda_hat: 1.0,
        },
        5.0,
    )
    .ok()
    .and_then(|p| p.first_zero);
    let ok = flat.is_some_and(|f| (f - z).abs() < 1e-3) && solved.is_some_and(|v| v <= 4.4944);
    s.record(
        7,
        "linearized probe zeros",
        ok,
        format!("flat {flat:?} (root {z:.6}), solved profile {solved:?}"),
    );
}

fn criterion_8(s: &mut Suite, r: &SolveReport, controls: &SolveControls) {
    let shifted = SolveControls { t0: 5e-4, ..*controls };
    match solve(1.0, &shifted) {
        Ok(r2) => {
            let da = (r2.alpha_star - r.alpha_star).abs();
            let db = (r2.beta_star - r.beta_star).abs();
            s.record(
                8,
                "handoff radius insensitivity",
                da < 1e-7 && db < 1e-7,
                format!("|da| = {da:.2e}, |db| = {db:.2e}"),
            );
        }
        Err(e) => s.record(8, "handoff radius insensitivity", false, e.to_string()),
    }
}

fn criterion_9(s: &mut Suite, massless: &SolveReport, quartic: &SolveReport) {
    s.record(
        9,
        "energy bound",
        (massless.energy - 1.0).abs() < 1e-3 && quartic.energy > 1.0,
        format!("massless {:.6}, quartic {:.6}", massless.energy, quartic.energy),
    );
}

fn main() -> ExitCode {
    let controls = SolveControls::default();
    let mut suite = Suite { failures: 0 };

    let clock = Instant::now();
    let massless = solve(0.0, &controls);
    let seconds = clock.elapsed().as_secs_f64();
    let quartic = solve(1.0, &controls);

    match &massless {
        Ok(r) => criterion_1(&mut suite, r, seconds),
        Err(e) => suite.record(1, "massless solve", false, e.to_string()),
    }
    criterion_2(&mut suite);
    criterion_3(&mut suite);
    criterion_4(&mut suite);
    criterion_5(&mut suite, &controls);
    match &quartic {
        Ok(r) => {
            criterion_6(&mut suite, r);
            criterion_7(&mut suite, r);
            criterion_8(&mut suite, r, &controls);
        }
        Err(e) => {
            for id in 6..=8 {
                suite.record(id, "quartic solve", false, e.to_string());
            }
        }
    }
    match (&massless, &quartic) {
        (Ok(m), Ok(q)) => criterion_9(&mut suite, m, q),
        _ => suite.record(9, "energy bound", false, "solve failed".into()),
    }

    if suite.failures == 0 {
        println!("acceptance: all criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {} criteria failed", suite.failures);
        ExitCode::FAILURE
    }
}
