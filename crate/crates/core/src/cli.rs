//! Command-line front end.
//!
//! Exit codes: 0 success, 1 usage, 2 solve failure, 3 validation or audit
//! failure, 4 I/O failure.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Map, Value};

use crate::analysis::{fit_decay, linearized_probe, DecayComponent, ProbeProfile};
use crate::io::{json_text, parse_config, parse_grid, profile_csv, report_json, sweep_csv};
use crate::model::{ps_exact, ModelParams};
use crate::origin::{contraction_constants, picard_verify, series_coefficients, ShootPoint};
use crate::shooter::{solve, solve_physical, sweep, SolveControls, SolveReport};

/// Lower edge of the flat-probe window around the first Bessel zero.
const BESSEL_ZERO: f64 = 4.493_409_457_909_064;

#[derive(Debug, Parser)]
#[command(
    name = "monopole",
    version,
    about = "Shooting solver for the 't Hooft-Polyakov monopole profile"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub options: Options,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve for the shooting pair and write the profile and report
    Solve,
    /// Classify a grid of shooting pairs
    Sweep,
    /// Run the end-to-end check against the exact massless solution
    Validate,
    /// First zero of the linearized Higgs probe
    Probe {
        /// Use the flat background p = 1 instead of a solved profile
        #[arg(long)]
        flat: bool,
        /// Probe horizon in the scaled radius
        #[arg(long, default_value_t = 5.0)]
        t_end: f64,
    },
    /// Series coefficients and fixed-point contraction history
    Series {
        #[arg(long, allow_hyphen_values = true)]
        alpha: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        beta: Option<f64>,
        /// Number of fixed-point sweeps
        #[arg(long, default_value_t = 8)]
        iterations: usize,
    },
}

#[derive(Debug, Default, Args)]
pub struct Options {
    /// Quartic coupling (physical)
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub lambda: Option<f64>,
    /// Gauge coupling (physical)
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub g0: Option<f64>,
    /// Higgs vacuum value (physical)
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub rho0: Option<f64>,
    /// Dimensionless quartic coupling lambda / g0^2
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub lambda_hat: Option<f64>,
    #[arg(long, global = true)]
    pub rel_tol: Option<f64>,
    #[arg(long, global = true)]
    pub abs_tol: Option<f64>,
    #[arg(long, global = true)]
    pub t_max: Option<f64>,
    #[arg(long, global = true)]
    pub tol_alpha: Option<f64>,
    #[arg(long, global = true)]
    pub tol_beta: Option<f64>,
    /// Series handoff radius
    #[arg(long, global = true)]
    pub t0: Option<f64>,
    /// Output directory for artifacts
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// key = value file; flags take precedence
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Comma list or lo:hi:n
    #[arg(long, global = true)]
    pub alpha_grid: Option<String>,
    /// Comma list or lo:hi:n
    #[arg(long, global = true)]
    pub beta_grid: Option<String>,
    /// Flips the sign of the Higgs coupling in the gauge equation
    #[arg(long, global = true, hide = true)]
    pub mutate_rhs: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Failure {
    Usage(String),
    Solve(String),
    Validation(String),
    Io(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Usage(_) => 1,
            Self::Solve(_) => 2,
            Self::Validation(_) => 3,
            Self::Io(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            Self::Usage(m) | Self::Solve(m) | Self::Validation(m) | Self::Io(m) => m,
        }
    }
}

/// Coupling selection: a physical triple or a direct dimensionless value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Coupling {
    Physical(ModelParams),
    Scaled(f64),
}

impl Coupling {
    pub fn lambda_hat(&self) -> f64 {
        match self {
            Self::Physical(p) => p.lambda / (p.g0 * p.g0),
            Self::Scaled(l) => *l,
        }
    }
}

/// Flags merged over the config file.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub coupling: Option<Coupling>,
    pub controls: SolveControls,
    pub out: PathBuf,
    pub alpha_grid: Vec<f64>,
    pub beta_grid: Vec<f64>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
}

const CONFIG_KEYS: &[&str] = &[
    "lambda",
    "g0",
    "rho0",
    "lambda_hat",
    "rel_tol",
    "abs_tol",
    "t_max",
    "tol_alpha",
    "tol_beta",
    "t0",
    "out",
    "alpha_grid",
    "beta_grid",
    "alpha",
    "beta",
];

fn config_number(map: &BTreeMap<String, String>, key: &str) -> Result<Option<f64>, Failure> {
    map.get(key)
        .map(|v| {
            v.parse::<f64>()
                .map_err(|e| Failure::Usage(format!("config key {key} = {v:?}: {e}")))
        })
        .transpose()
}

impl RunConfig {
    pub fn resolve(options: &Options, command: &Command) -> Result<Self, Failure> {
        let file = match &options.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
                parse_config(&text).map_err(Failure::Usage)?
            }
            None => BTreeMap::new(),
        };
        if let Some(k) = file.keys().find(|k| !CONFIG_KEYS.contains(&k.as_str())) {
            return Err(Failure::Usage(format!("unknown config key {k:?}")));
        }
        let num = |flag: Option<f64>, key: &str| -> Result<Option<f64>, Failure> {
            match flag {
                Some(v) => Ok(Some(v)),
                None => config_number(&file, key),
            }
        };

        let lambda = num(options.lambda, "lambda")?;
        let g0 = num(options.g0, "g0")?;
        let rho0 = num(options.rho0, "rho0")?;
        let lambda_hat = num(options.lambda_hat, "lambda_hat")?;
        let coupling = match (lambda, g0, rho0, lambda_hat) {
            (None, None, None, None) => None,
            (None, None, None, Some(l)) => {
                if !(l.is_finite() && l >= 0.0) {
                    return Err(Failure::Usage(format!("--lambda-hat must be >= 0, got {l}")));
                }
                Some(Coupling::Scaled(l))
            }
            (Some(l), Some(g), Some(r), None) => Some(Coupling::Physical(
                ModelParams::new(l, g, r).map_err(|e| Failure::Usage(e.to_string()))?,
            )),
            (_, _, _, Some(_)) => {
                return Err(Failure::Usage(
                    "give either --lambda-hat or the physical triple --lambda --g0 --rho0, not both"
                        .into(),
                ))
            }
            _ => {
                return Err(Failure::Usage(
                    "the physical triple needs all of --lambda, --g0 and --rho0".into(),
                ))
            }
        };

        let mut controls = SolveControls::default();
        if let Some(v) = num(options.rel_tol, "rel_tol")? {
            controls.integrator.rel_tol = v;
        }
        if let Some(v) = num(options.abs_tol, "abs_tol")? {
            controls.integrator.abs_tol = v;
        }
        if let Some(v) = num(options.t_max, "t_max")? {
            controls.integrator.t_max = v;
            controls.t_report = v;
        }
        if let Some(v) = num(options.tol_alpha, "tol_alpha")? {
            controls.tol_alpha = v;
        }
        if let Some(v) = num(options.tol_beta, "tol_beta")? {
            controls.tol_beta = v;
        }
        if let Some(v) = num(options.t0, "t0")? {
            controls.t0 = v;
        }
        controls.integrator.flip_coupling = options.mutate_rhs;
        controls
            .validate()
            .map_err(|e| Failure::Usage(e.to_string()))?;

        let grid = |flag: &Option<String>, key: &str| -> Result<Vec<f64>, Failure> {
            match flag.as_deref().or(file.get(key).map(String::as_str)) {
                Some(spec) => parse_grid(spec).map_err(Failure::Usage),
                None => Ok(Vec::new()),
            }
        };
        let (alpha, beta) = match command {
            Command::Series { alpha, beta, .. } => (*alpha, *beta),
            _ => (None, None),
        };
        Ok(Self {
            coupling,
            controls,
            out: options
                .out
                .clone()
                .or_else(|| file.get("out").map(PathBuf::from))
                .unwrap_or_else(|| PathBuf::from(".")),
            alpha_grid: grid(&options.alpha_grid, "alpha_grid")?,
            beta_grid: grid(&options.beta_grid, "beta_grid")?,
            alpha: alpha.map_or_else(|| config_number(&file, "alpha"), |v| Ok(Some(v)))?,
            beta: beta.map_or_else(|| config_number(&file, "beta"), |v| Ok(Some(v)))?,
        })
    }

    fn require_coupling(&self) -> Result<Coupling, Failure> {
        self.coupling.ok_or_else(|| {
            Failure::Usage(
                "missing coupling: pass --lambda-hat or --lambda --g0 --rho0".into(),
            )
        })
    }
}

fn write_artifact(dir: &Path, name: &str, contents: &str) -> Result<(), Failure> {
    std::fs::create_dir_all(dir).map_err(|e| Failure::Io(format!("{}: {e}", dir.display())))?;
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}

fn run_solve(config: &RunConfig) -> Result<(SolveReport, Map<String, Value>), Failure> {
    let solve_err = |e: crate::Error| Failure::Solve(e.to_string());
    match config.require_coupling()? {
        Coupling::Scaled(lh) => {
            let report = solve(lh, &config.controls).map_err(solve_err)?;
            let json = report_json(&report);
            Ok((report, json))
        }
        Coupling::Physical(params) => {
            let phys = solve_physical(&params, &config.controls).map_err(solve_err)?;
            let mut json = report_json(&phys.report);
            json.insert("lambda".into(), json!(params.lambda));
            json.insert("g0".into(), json!(params.g0));
            json.insert("rho0".into(), json!(params.rho0));
            json.insert("mu".into(), json!(params.mu()));
            json.insert("r_scale".into(), json!(phys.scaled.r_scale));
            json.insert("alpha_physical".into(), json!(phys.alpha));
            json.insert("beta_physical".into(), json!(phys.beta));
            json.insert("mass_physical".into(), json!(phys.mass));
            Ok((phys.report, json))
        }
    }
}

fn cmd_solve(config: &RunConfig, out: &mut dyn Write) -> Result<(), Failure> {
    let (report, json) = run_solve(config)?;
    let text = json_text(&json);
    write_artifact(&config.out, "profile.csv", &profile_csv(&report.profile.samples))?;
    write_artifact(&config.out, "report.json", &text)?;
    out.write_all(text.as_bytes())
        .map_err(|e| Failure::Io(e.to_string()))?;
    if !report.converged {
        return Err(Failure::Solve(format!(
            "profile left the convergence tube before t = {}",
            config.controls.t_report
        )));
    }
    if !report.passed() {
        return Err(Failure::Validation("monotonicity audit failed".into()));
    }
    Ok(())
}

fn cmd_sweep(config: &RunConfig, out: &mut dyn Write) -> Result<(), Failure> {
    let lh = config.require_coupling()?.lambda_hat();
    if config.alpha_grid.is_empty() || config.beta_grid.is_empty() {
        return Err(Failure::Usage(
            "sweep needs non-empty --alpha-grid and --beta-grid".into(),
        ));
    }
    let grid = sweep(&config.alpha_grid, &config.beta_grid, lh, &config.controls)
        .map_err(|e| Failure::Usage(e.to_string()))?;
    let text = sweep_csv(&grid);
    write_artifact(&config.out, "sweep.csv", &text)?;
    out.write_all(text.as_bytes())
        .map_err(|e| Failure::Io(e.to_string()))
}

/// One row of the validation table.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub value: f64,
    pub limit: f64,
    pub passed: bool,
}

/// Threshold multiplier for runs looser than the default step tolerance:
/// one extra unit per decade above 1e-10.
pub fn widening(rel_tol: f64) -> f64 {
    1.0 + (rel_tol / 1e-10).max(1.0).log10()
}

/// End-to-end massless run compared against the exact solution.
pub fn validation_checks(controls: &SolveControls) -> Vec<Check> {
    let w = widening(controls.integrator.rel_tol);
    let mut checks = Vec::new();
    let mut check = |name, value: f64, limit: f64| {
        checks.push(Check {
            name,
            value,
            limit,
            passed: value.is_finite() && value <= limit,
        });
    };
    match solve(0.0, controls) {
        Err(_) => check("solve", f64::INFINITY, 0.0),
        Ok(r) => {
            check("alpha_star", (r.alpha_star - 1.0 / 6.0).abs(), 1e-3 * w);
            check("beta_star", (r.beta_star - 1.0 / 3.0).abs(), 1e-3 * w);
            let profile_err = r
                .profile
                .samples
                .iter()
                .filter(|s| s.t >= 0.01 && s.t <= 10.0)
                .map(|s| {
                    let e = ps_exact(s.t).expect("positive radius");
                    (s.f - e.f).abs().max((s.rho - e.rho).abs())
                })
                .fold(0.0, f64::max);
            check("profile_error", profile_err, 1e-4 * w);
            check("converged", if r.converged { 0.0 } else { 1.0 }, 0.0);
            check("audit", if r.passed() { 0.0 } else { 1.0 }, 0.0);
            check("residual_norm", r.residual_norm, 1e-5 * w);
            check("mass", (r.energy - 1.0).abs(), 1e-3 * w);
            let samples = &r.profile.samples;
            match fit_decay(samples, (6.0, 10.0), DecayComponent::F, 0.0) {
                Ok(f) => check("f_rate", (f.rate - 1.0).abs(), 0.02 * w),
                Err(_) => check("f_rate", f64::INFINITY, 0.02 * w),
            }
            match fit_decay(samples, (6.0, 10.0), DecayComponent::OneMinusRho, 0.0) {
                Ok(h) => {
                    check("higgs_power", (h.rate - 1.0).abs(), 0.02 * w);
                    check("higgs_amplitude", (h.amplitude - 1.0).abs(), 0.02 * w);
                }
                Err(_) => check("higgs_power", f64::INFINITY, 0.02 * w),
            }
        }
    }
    match linearized_probe(ProbeProfile::Flat, 5.0) {
        Ok(p) => check(
            "flat_probe_zero",
            p.first_zero.map_or(f64::INFINITY, |z| (z - BESSEL_ZERO).abs()),
            1e-3,
        ),
        Err(_) => check("flat_probe_zero", f64::INFINITY, 1e-3),
    }
    checks
}

fn cmd_validate(config: &RunConfig, out: &mut dyn Write) -> Result<(), Failure> {
    let checks = validation_checks(&config.controls);
    let mut table = String::new();
    let _ = writeln!(
        table,
        "threshold widening x{:.1} (rel_tol {:e})",
        widening(config.controls.integrator.rel_tol),
        config.controls.integrator.rel_tol
    );
    let _ = writeln!(table, "{:<18} {:>12} {:>12}  result", "check", "value", "limit");
    for c in &checks {
        let _ = writeln!(
            table,
            "{:<18} {:>12.3e} {:>12.3e}  {}",
            c.name,
            c.value,
            c.limit,
            if c.passed { "PASS" } else { "FAIL" }
        );
    }
    out.write_all(table.as_bytes())
        .map_err(|e| Failure::Io(e.to_string()))?;
    let failed: Vec<_> = checks.iter().filter(|c| !c.passed).map(|c| c.name).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Validation(format!("failed checks: {}", failed.join(", "))))
    }
}

fn cmd_probe(config: &RunConfig, flat: bool, t_end: f64, out: &mut dyn Write) -> Result<(), Failure> {
    let (result, lambda_hat) = if flat {
        let r = linearized_probe(ProbeProfile::Flat, t_end)
            .map_err(|e| Failure::Usage(e.to_string()))?;
        (r, None)
    } else {
        let (report, _) = run_solve(config)?;
        let lh = report.lambda_hat;
        let r = linearized_probe(
            ProbeProfile::Sampled {
                samples: report.profile.integrated_samples(),
                lambda_hat: lh,
            },
            t_end,
        )
        .map_err(|e| Failure::Validation(e.to_string()))?;
        (r, Some(lh))
    };
    let mut m = Map::new();
    m.insert("first_zero".into(), json!(result.first_zero));
    m.insert("t_end".into(), json!(result.t_end));
    m.insert("massive".into(), json!(result.massive));
    m.insert("bessel_zero".into(), json!(BESSEL_ZERO));
    if let Some(lh) = lambda_hat {
        m.insert("lambda_hat".into(), json!(lh));
    }
    out.write_all(json_text(&m).as_bytes())
        .map_err(|e| Failure::Io(e.to_string()))?;
    match result.first_zero {
        Some(z) if result.massive && z > BESSEL_ZERO + 1e-3 => Err(Failure::Validation(format!(
            "first zero {z} beyond the Bessel bound"
        ))),
        None if result.massive => Err(Failure::Validation(format!(
            "no zero before {t_end}"
        ))),
        _ => Ok(()),
    }
}

fn cmd_series(config: &RunConfig, iterations: usize, out: &mut dyn Write) -> Result<(), Failure> {
    let lh = config.coupling.map_or(0.0, |c| c.lambda_hat());
    let sp = ShootPoint::new(config.alpha.unwrap_or(0.0), config.beta.unwrap_or(0.0))
        .map_err(|e| Failure::Usage(e.to_string()))?;
    let c = series_coefficients(sp, lh);
    let k = contraction_constants(sp, lh);
    let history = picard_verify(sp, lh, -k.s_threshold, iterations)
        .map_err(|e| Failure::Usage(e.to_string()))?;
    let mut m = Map::new();
    m.insert("alpha".into(), json!(sp.alpha));
    m.insert("beta".into(), json!(sp.beta));
    m.insert("lambda_hat".into(), json!(lh));
    m.insert("a4".into(), json!(c.a4 + 0.0));
    m.insert("b3".into(), json!(c.b3 + 0.0));
    m.insert("order".into(), json!(c.order));
    m.insert("s_max".into(), json!(-k.s_threshold));
    m.insert("contraction_k".into(), json!(k.k));
    m.insert("contraction_m".into(), json!(k.m));
    m.insert("picard_sup_diffs".into(), json!(history.sup_diffs));
    m.insert("picard_ratios".into(), json!(history.ratios));
    m.insert("picard_bound_holds".into(), json!(history.bound_holds));
    out.write_all(json_text(&m).as_bytes())
        .map_err(|e| Failure::Io(e.to_string()))
}

fn dispatch(cli: &Cli, out: &mut dyn Write) -> Result<(), Failure> {
    let config = RunConfig::resolve(&cli.options, &cli.command)?;
    match &cli.command {
        Command::Solve => cmd_solve(&config, out),
        Command::Sweep => cmd_sweep(&config, out),
        Command::Validate => cmd_validate(&config, out),
        Command::Probe { flat, t_end } => cmd_probe(&config, *flat, *t_end, out),
        Command::Series { iterations, .. } => cmd_series(&config, *iterations, out),
    }
}

fn thread_limit() -> Result<Option<usize>, Failure> {
    match std::env::var("MONOPOLE_THREADS") {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|n| *n > 0)
            .map(Some)
            .ok_or_else(|| Failure::Usage(format!("MONOPOLE_THREADS must be a positive integer, got {v:?}"))),
        Err(_) => Ok(None),
    }
}

fn with_threads<T: Send>(limit: Option<usize>, f: impl FnOnce() -> T + Send) -> T {
    #[cfg(feature = "parallel")]
    if let Some(n) = limit {
        if let Ok(pool) = rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            return pool.install(f);
        }
    }
    #[cfg(not(feature = "parallel"))]
    let _ = limit;
    f()
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run<I, T>(args: I, out: &mut (dyn Write + Send), err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = write!(err, "{e}");
            return code;
        }
    };
    let result = thread_limit().and_then(|limit| with_threads(limit, || dispatch(&cli, out)));
    match result {
        Ok(()) => 0,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message());
            f.exit_code()
        }
    }
}
