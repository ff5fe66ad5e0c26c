//! Text artifacts: profile and sweep CSV, flat JSON reports, key=value config files.

use std::collections::BTreeMap;

use serde_json::{json, Map, Value};

use crate::model::PhaseState;
use crate::shooter::{Bracket, OutcomeGrid, SolveReport};

pub const PROFILE_HEADER: &str = "t,f,fp,rho,rhop";
pub const SWEEP_HEADER: &str = "alpha,beta,outcome,t_event";

/// Profile samples as CSV with 17 significant digits per value.
pub fn profile_csv(samples: &[PhaseState]) -> String {
    let mut out = String::with_capacity(96 * (samples.len() + 1));
    out.push_str(PROFILE_HEADER);
    out.push('\n');
    for s in samples {
        out.push_str(&format!(
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}\n",
            s.t, s.f, s.fp, s.rho, s.rhop
        ));
    }
    out
}

pub fn parse_profile_csv(text: &str) -> Result<Vec<PhaseState>, String> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == PROFILE_HEADER => {}
        other => return Err(format!("expected header {PROFILE_HEADER:?}, got {other:?}")),
    }
    lines
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let v: Vec<f64> = l
                .split(',')
                .map(|x| x.trim().parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|e| format!("line {}: {e}", i + 2))?;
            match v[..] {
                [t, f, fp, rho, rhop] => Ok(PhaseState::new(t, f, fp, rho, rhop)),
                _ => Err(format!("line {}: expected 5 columns, got {}", i + 2, v.len())),
            }
        })
        .collect()
}

pub fn sweep_csv(grid: &OutcomeGrid) -> String {
    let mut out = String::new();
    out.push_str(SWEEP_HEADER);
    out.push('\n');
    for c in &grid.cells {
        let t = c.t_event.map(|t| format!("{t:.16e}")).unwrap_or_default();
        out.push_str(&format!("{:.16e},{:.16e},{},{}\n", c.alpha, c.beta, c.outcome, t));
    }
    out
}

fn put_bracket(map: &mut Map<String, Value>, prefix: &str, b: &Bracket) {
    map.insert(format!("{prefix}_lo"), json!(b.lo));
    map.insert(format!("{prefix}_hi"), json!(b.hi));
    map.insert(format!("{prefix}_width"), json!(b.width()));
    map.insert(format!("{prefix}_lo_outcome"), json!(b.lo_outcome.name()));
    map.insert(format!("{prefix}_hi_outcome"), json!(b.hi_outcome.name()));
}

/// Flat snake_case view of a [`SolveReport`]. Non-finite numbers become `null`.
pub fn report_json(report: &SolveReport) -> Map<String, Value> {
    let mut m = Map::new();
    m.insert("lambda_hat".into(), json!(report.lambda_hat));
    m.insert("alpha_star".into(), json!(report.alpha_star));
    m.insert("beta_star".into(), json!(report.beta_star));
    put_bracket(&mut m, "alpha_bracket", &report.alpha_bracket);
    put_bracket(&mut m, "beta_bracket", &report.beta_bracket);
    m.insert("final_outcome".into(), json!(report.final_outcome.name()));
    m.insert("converged".into(), json!(report.converged));
    m.insert("t_graft".into(), json!(report.t_graft));
    m.insert("residual_norm".into(), json!(report.residual_norm));
    m.insert("energy".into(), json!(report.energy));
    m.insert("alpha_iterations".into(), json!(report.alpha_iterations));
    m.insert("beta_iterations".into(), json!(report.beta_iterations));
    m.insert(
        "converged_candidates".into(),
        json!(report.converged_candidates.len()),
    );
    m.insert("profile_samples".into(), json!(report.profile.samples.len()));
    if let Some(tail) = &report.tail {
        m.insert("f_rate".into(), json!(tail.f.rate));
        m.insert("f_amplitude".into(), json!(tail.f.amplitude));
        m.insert("higgs_rate".into(), json!(tail.higgs.rate));
        m.insert("higgs_amplitude".into(), json!(tail.higgs.amplitude));
        m.insert("graft_mismatch".into(), json!(tail.mismatch));
    }
    m.insert("audit_passed".into(), json!(report.passed()));
    if let Some(a) = &report.audit {
        m.insert("audit_f_in_01".into(), json!(a.f_in_01));
        m.insert("audit_fp_negative".into(), json!(a.fp_negative));
        m.insert("audit_rho_in_01".into(), json!(a.rho_in_01));
        m.insert("audit_rhop_positive".into(), json!(a.rhop_positive));
        let w = &a.worst_margins;
        m.insert("margin_f_above_zero".into(), json!(w.f_above_zero));
        m.insert("margin_f_below_one".into(), json!(w.f_below_one));
        m.insert("margin_fp_negative".into(), json!(w.fp_negative));
        m.insert("margin_rho_above_zero".into(), json!(w.rho_above_zero));
        m.insert("margin_rho_below_one".into(), json!(w.rho_below_one));
        m.insert("margin_rhop_positive".into(), json!(w.rhop_positive));
    }
    m
}

/// Serializes a flat map with sorted keys and a trailing newline.
pub fn json_text(map: &Map<String, Value>) -> String {
    let mut s = serde_json::to_string_pretty(&Value::Object(map.clone()))
        .expect("maps of plain values always serialize");
    s.push('\n');
    s
}

/// Parses `key = value` lines; `#` starts a comment. Keys are normalised to snake_case.
pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>, String> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| format!("line {}: expected key = value", i + 1))?;
        let key = k.trim().replace('-', "_");
        if key.is_empty() {
            return Err(format!("line {}: empty key", i + 1));
        }
        out.insert(key, v.trim().to_string());
    }
    Ok(out)
}

/// Grid values from a comma list (`0.1,0.2`) or an inclusive linear range (`lo:hi:n`).
pub fn parse_grid(spec: &str) -> Result<Vec<f64>, String> {
    let spec = spec.trim();
    if spec.is_empty() {
        return Ok(Vec::new());
    }
    if spec.contains(':') {
        let parts: Vec<&str> = spec.split(':').collect();
        let [lo, hi, n] = parts[..] else {
            return Err(format!("range {spec:?} must be lo:hi:n"));
        };
        let lo: f64 = lo.trim().parse().map_err(|e| format!("{spec:?}: {e}"))?;
        let hi: f64 = hi.trim().parse().map_err(|e| format!("{spec:?}: {e}"))?;
        let n: usize = n.trim().parse().map_err(|e| format!("{spec:?}: {e}"))?;
        return Ok(match n {
            0 => Vec::new(),
            1 => vec![lo],
            _ => (0..n)
                .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
                .collect(),
        });
    }
    spec.split(',')
        .map(|x| x.trim().parse::<f64>().map_err(|e| format!("{x:?}: {e}")))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn profile_round_trip_is_exact() {
        let s = vec![
            PhaseState::new(1e-3, 0.999_999_833_333_3, -3.3e-4, 3.3e-4, 0.333_333),
            PhaseState::new(0.1, std::f64::consts::PI / 4.0, -1.0 / 3.0, 1e-300, 2.5),
        ];
        let text = profile_csv(&s);
        assert!(text.starts_with("t,f,fp,rho,rhop\n") && text.ends_with('\n'));
        assert_eq!(parse_profile_csv(&text).unwrap(), s);
    }

    #[test]
    fn malformed_profile_rejected() {
        assert!(parse_profile_csv("t,f\n1,2\n").is_err());
        assert!(parse_profile_csv("t,f,fp,rho,rhop\n1,2,3\n").is_err());
        assert!(parse_profile_csv("t,f,fp,rho,rhop\n1,2,3,x,5\n").is_err());
    }

    #[test]
    fn config_lines() {
        let c = parse_config("# run\nlambda-hat = 1\n tol_alpha=1e-9 # tight\n\n").unwrap();
        assert_eq!(c["lambda_hat"], "1");
        assert_eq!(c["tol_alpha"], "1e-9");
        assert!(parse_config("nonsense").is_err());
    }

    #[test]
    fn grids() {
        assert_eq!(parse_grid("0.1, 0.2").unwrap(), vec![0.1, 0.2]);
        assert_eq!(parse_grid("0:1:3").unwrap(), vec![0.0, 0.5, 1.0]);
        assert_eq!(parse_grid("2:3:1").unwrap(), vec![2.0]);
        assert!(parse_grid("").unwrap().is_empty());
        assert!(parse_grid("1:2").is_err());
        assert!(parse_grid("a,b").is_err());
    }
}
