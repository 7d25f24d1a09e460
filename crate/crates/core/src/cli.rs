//! Command-line front end: JSON run configs, the four experiment verbs, and
//! their CSV/SVG/text outputs.
//!
//! Exit codes: 0 success, 1 configuration error, 2 numerical (or output)
//! failure, 3 a hypothesis check did not hold.

use std::ffi::OsString;
use std::fmt::{self, Write as _};
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use serde::de::{self, Deserializer};
use serde::Deserialize;
use serde_json::Value;
use thiserror::Error;

use crate::conditions::{check_cls, check_de_castro, cls_example_bound, Grid};
use crate::floquet::{criterion_example, criterion_polynomial, fmt_sig, stability_report, StabilityReport};
use crate::integrate::{self, StepperConfig, Trajectory};
use crate::orbit::{self, find_periodic_orbit, OrbitSearch, PeriodicOrbit, PoincareSection};
use crate::perturb::{self, sin2t_perturbation, SweepOptions};
use crate::svg::{render_phase_svg, PlotSpec};
use crate::systems::{example_equation, example_system, GeneralizedLienard, PolynomialLienard};

/// Polylines are thinned to at most this many vertices.
pub const MAX_PLOT_POINTS: usize = 20_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitStatus {
    Success = 0,
    ConfigError = 1,
    NumericalFailure = 2,
    HypothesisFailure = 3,
}

impl ExitStatus {
    pub fn code(self) -> i32 {
        self as i32
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("cannot write {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

impl CliError {
    pub fn status(&self) -> ExitStatus {
        match self {
            CliError::Config(_) => ExitStatus::ConfigError,
            CliError::Numerical(_) | CliError::Io { .. } => ExitStatus::NumericalFailure,
        }
    }
}

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn numeric_err(e: impl fmt::Display) -> CliError {
    CliError::Numerical(e.to_string())
}

/// Which equation to study.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum SystemSpec {
    #[default]
    Example6,
    Harmonic,
    VanDerPol { mu: f64 },
    /// Coefficient lists `p_0 … p_n`, lowest degree first.
    Polynomial(Vec<Vec<f64>>),
}

impl FromStr for SystemSpec {
    type Err = String;

    /// `"example6"`, `"harmonic"`, or `"vanderpol mu=<v>"`.
    fn from_str(s: &str) -> Result<Self, String> {
        let mut tokens = s.split_whitespace();
        let name = tokens.next().ok_or("empty system name")?;
        let params: Vec<&str> = tokens.collect();
        let no_params = |spec: SystemSpec| match params.first() {
            Some(p) => Err(format!("system `{name}` takes no parameters, got `{p}`")),
            None => Ok(spec),
        };
        match name {
            "example6" => no_params(SystemSpec::Example6),
            "harmonic" => no_params(SystemSpec::Harmonic),
            "vanderpol" => {
                let mut mu = 1.0_f64;
                for p in params {
                    match p.split_once('=') {
                        Some(("mu", v)) => mu = v.parse().map_err(|_| format!("bad value for mu: `{v}`"))?,
                        _ => return Err(format!("unknown vanderpol parameter `{p}`, expected `mu=<v>`")),
                    }
                }
                if !mu.is_finite() {
                    return Err("mu must be finite".into());
                }
                Ok(SystemSpec::VanDerPol { mu })
            }
            other => Err(format!("unknown system `{other}`, expected one of `example6`, `harmonic`, `vanderpol mu=<v>`")),
        }
    }
}

impl<'de> Deserialize<'de> for SystemSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        match Value::deserialize(d)? {
            Value::String(s) => s.parse().map_err(de::Error::custom),
            Value::Object(map) => {
                if let Some(k) = map.keys().find(|k| k.as_str() != "polynomial") {
                    return Err(de::Error::custom(format!("unknown field `{k}` in system, expected `polynomial`")));
                }
                let coeffs = map.get("polynomial").ok_or_else(|| de::Error::missing_field("polynomial"))?;
                Vec::<Vec<f64>>::deserialize(coeffs).map(SystemSpec::Polynomial).map_err(de::Error::custom)
            }
            _ => Err(de::Error::custom("system must be a builtin name or {\"polynomial\": [[...], ...]}")),
        }
    }
}

/// A constructed system, keeping the polynomial form when there is one.
pub struct BuiltSystem {
    pub system: GeneralizedLienard,
    pub polynomial: Option<PolynomialLienard>,
    pub is_example: bool,
}

impl SystemSpec {
    pub fn build(&self) -> Result<BuiltSystem, CliError> {
        Ok(match self {
            SystemSpec::Example6 => {
                BuiltSystem { system: example_system(), polynomial: Some(example_equation()), is_example: true }
            }
            SystemSpec::Harmonic => {
                BuiltSystem { system: GeneralizedLienard::harmonic(), polynomial: None, is_example: false }
            }
            SystemSpec::VanDerPol { mu } => {
                BuiltSystem { system: GeneralizedLienard::van_der_pol(*mu), polynomial: None, is_example: false }
            }
            SystemSpec::Polynomial(c) => {
                let p = PolynomialLienard::from_vecs(c.clone()).map_err(|e| config_err(format!("system: {e}")))?;
                BuiltSystem { system: p.to_generalized(), polynomial: Some(p), is_example: false }
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OrbitConfig {
    pub a_guess: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for OrbitConfig {
    fn default() -> Self {
        let s = OrbitSearch::default();
        Self { a_guess: -0.5, tol: s.tol, max_iter: s.max_iter }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub epsilons: Vec<f64>,
    /// Forcing family; only `"sin2t"` is built in.
    pub perturbation: String,
    /// Feed the forcing `t/τ₀` instead of `t`.
    pub rescale: bool,
    pub periodicity_tol: f64,
    pub n_returns: usize,
    pub parallel: bool,
}

impl Default for SweepConfig {
    fn default() -> Self {
        let mut epsilons: Vec<f64> = [1000.0, 900.0, 800.0, 700.0, 600.0, 500.0, 400.0, 300.0, 200.0]
            .iter()
            .map(|d| 1.0 / d)
            .collect();
        epsilons.push(0.01);
        Self {
            epsilons,
            perturbation: "sin2t".into(),
            rescale: false,
            periodicity_tol: perturb::DEFAULT_PERIODICITY_TOL,
            n_returns: perturb::DEFAULT_RETURNS,
            parallel: true,
        }
    }
}

/// One JSON file per run. Every section is optional.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub system: SystemSpec,
    pub stepper: StepperConfig,
    pub orbit: OrbitConfig,
    pub sweep: SweepConfig,
    pub conditions: Grid,
    pub plot: PlotSpec,
    /// Extra orbit portraits, one per magnification.
    pub zoom_views: Vec<f64>,
    pub out_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            system: SystemSpec::default(),
            stepper: StepperConfig::default(),
            orbit: OrbitConfig::default(),
            sweep: SweepConfig::default(),
            conditions: Grid::default(),
            plot: PlotSpec::default(),
            zoom_views: vec![20.0],
            out_dir: PathBuf::from("out"),
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| config_err(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| match e {
            CliError::Config(msg) => config_err(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// Checks everything that can be checked without integrating.
    pub fn validate(&self) -> Result<(), CliError> {
        self.system.build()?;
        self.stepper.validate().map_err(|e| config_err(format!("stepper: {e}")))?;
        let o = &self.orbit;
        if !(o.a_guess.is_finite() && o.a_guess < 0.0) {
            return Err(config_err(format!("orbit.a_guess must be negative, got {}", o.a_guess)));
        }
        if !(o.tol.is_finite() && o.tol > 0.0) || o.max_iter == 0 {
            return Err(config_err("orbit.tol must be positive and orbit.max_iter at least 1"));
        }
        let s = &self.sweep;
        if let Some(e) = s.epsilons.iter().find(|e| !(e.is_finite() && e.abs() < 1.0)) {
            return Err(config_err(format!("sweep.epsilons: {e} is outside (-1, 1)")));
        }
        if s.perturbation != "sin2t" {
            return Err(config_err(format!("sweep.perturbation: unknown family `{}`, expected `sin2t`", s.perturbation)));
        }
        if !(s.periodicity_tol.is_finite() && s.periodicity_tol > 0.0) || s.n_returns == 0 {
            return Err(config_err("sweep.periodicity_tol must be positive and sweep.n_returns at least 1"));
        }
        self.conditions.validate().map_err(|e| config_err(format!("conditions: {e}")))?;
        self.plot.validate().map_err(|e| config_err(format!("plot: {e}")))?;
        if let Some(z) = self.zoom_views.iter().find(|z| !(z.is_finite() && **z > 0.0)) {
            return Err(config_err(format!("zoom_views: {z} is not a positive magnification")));
        }
        Ok(())
    }

    fn search(&self) -> OrbitSearch {
        OrbitSearch { tol: self.orbit.tol, max_iter: self.orbit.max_iter }
    }
}

/// What a command produced.
#[derive(Debug, Clone, PartialEq)]
pub struct CmdOutput {
    pub status: ExitStatus,
    /// Text echoed to stdout.
    pub summary: String,
    pub files: Vec<PathBuf>,
}

struct OutDir {
    root: PathBuf,
    written: Vec<PathBuf>,
}

impl OutDir {
    fn new(root: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(root).map_err(|source| CliError::Io { path: root.to_path_buf(), source })?;
        Ok(Self { root: root.to_path_buf(), written: Vec::new() })
    }

    fn write(&mut self, name: &str, contents: &[u8]) -> Result<(), CliError> {
        let path = self.root.join(name);
        fs::write(&path, contents).map_err(|source| CliError::Io { path: path.clone(), source })?;
        self.written.push(path);
        Ok(())
    }
}

/// Keeps every k-th vertex plus the last one.
fn thin(traj: &Trajectory, max_points: usize) -> Trajectory {
    let n = traj.len();
    if n <= max_points {
        return traj.clone();
    }
    let stride = n.div_ceil(max_points - 1);
    let mut idx: Vec<usize> = (0..n).step_by(stride).collect();
    if idx.last() != Some(&(n - 1)) {
        idx.push(n - 1);
    }
    Trajectory {
        times: idx.iter().map(|&i| traj.times[i]).collect(),
        states: idx.iter().map(|&i| traj.states[i]).collect(),
    }
}

fn svg_for(traj: &Trajectory, spec: &PlotSpec) -> Result<String, CliError> {
    render_phase_svg(&thin(traj, MAX_PLOT_POINTS), spec).map_err(numeric_err)
}

fn locate_orbit(cfg: &RunConfig, sys: &GeneralizedLienard) -> Result<PeriodicOrbit, CliError> {
    find_periodic_orbit(sys, cfg.orbit.a_guess, cfg.search(), cfg.stepper).map_err(numeric_err)
}

/// Finds the periodic orbit and writes `orbit.csv`, `orbit.svg`, zoomed
/// portraits and `summary.txt`.
pub fn cmd_orbit(cfg: &RunConfig) -> Result<CmdOutput, CliError> {
    cfg.validate()?;
    let built = cfg.system.build()?;
    let orbit = locate_orbit(cfg, &built.system)?;
    let mut out = OutDir::new(&cfg.out_dir)?;

    let mut csv = Vec::new();
    orbit::write_orbit_csv(&orbit.trajectory, &mut csv).map_err(numeric_err)?;
    out.write("orbit.csv", &csv)?;

    let title = format!("{}: periodic orbit through (0, {})", built.system.name(), fmt_sig(orbit.a, 7));
    let spec = PlotSpec { title: Some(title.clone()), ..cfg.plot.clone() };
    out.write("orbit.svg", svg_for(&orbit.trajectory, &spec)?.as_bytes())?;
    for &z in &cfg.zoom_views {
        let spec = PlotSpec { title: Some(format!("{title}, zoom x{z}")), ..cfg.plot.zoomed(cfg.plot.zoom * z) };
        out.write(&format!("orbit_zoom{z}.svg"), svg_for(&orbit.trajectory, &spec)?.as_bytes())?;
    }

    let mut summary = String::new();
    let _ = writeln!(summary, "system: {}", built.system.name());
    let _ = writeln!(summary, "a: {}", fmt_sig(orbit.a, 7));
    let _ = writeln!(summary, "tau0: {}", fmt_sig(orbit.tau0, 7));
    let _ = writeln!(summary, "residual: {:.3e}", orbit.residual);
    let _ = writeln!(summary, "iterations: {}", orbit.iterations);
    let _ = writeln!(summary, "closure_error: {:.3e}", orbit.closure_error());
    out.write("summary.txt", summary.as_bytes())?;
    Ok(CmdOutput { status: ExitStatus::Success, summary, files: out.written })
}

/// Multipliers and criteria along the periodic orbit: `stability.csv` and
/// `report.txt`.
pub fn cmd_floquet(cfg: &RunConfig) -> Result<CmdOutput, CliError> {
    cfg.validate()?;
    let built = cfg.system.build()?;
    let orbit = locate_orbit(cfg, &built.system)?;
    let report: StabilityReport = stability_report(&built.system, &orbit, cfg.stepper).map_err(numeric_err)?;
    let mut out = OutDir::new(&cfg.out_dir)?;

    let csv = format!("{}\n{}\n", StabilityReport::CSV_HEADER, report.to_csv_row());
    out.write("stability.csv", csv.as_bytes())?;

    let mut text = format!("system: {}\n", built.system.name());
    text.push_str(&report.to_text());
    if let Some(p) = &built.polynomial {
        let _ = writeln!(text, "criterion_polynomial: {:.9}", criterion_polynomial(p, &orbit));
    }
    if built.is_example {
        let _ = writeln!(text, "criterion_example: {:.9}", criterion_example(&orbit));
    }
    out.write("report.txt", text.as_bytes())?;
    Ok(CmdOutput { status: ExitStatus::Success, summary: text, files: out.written })
}

/// Levinson–Smith and De Castro hypothesis checks; exit 3 unless all hold.
pub fn cmd_conditions(cfg: &RunConfig) -> Result<CmdOutput, CliError> {
    cfg.validate()?;
    let built = cfg.system.build()?;
    let cls = check_cls(&built.system, &cfg.conditions).map_err(|e| config_err(format!("conditions: {e}")))?;
    let dc = check_de_castro(&built.system, &cfg.conditions).map_err(|e| config_err(format!("conditions: {e}")))?;
    let mut out = OutDir::new(&cfg.out_dir)?;

    let ok = cls.all_ok() && dc.all_ok();
    let mut text = format!("system: {}\n", built.system.name());
    text.push_str(&cls.to_text());
    if built.is_example {
        let _ = writeln!(text, "cls_x1_analytic_bound: {:.7}", cls_example_bound());
    }
    text.push_str(&dc.to_text());
    let _ = writeln!(text, "all_hypotheses_hold: {ok}");
    out.write("conditions.txt", text.as_bytes())?;
    let status = if ok { ExitStatus::Success } else { ExitStatus::HypothesisFailure };
    Ok(CmdOutput { status, summary: text, files: out.written })
}

/// Forced-response sweep over `sweep.epsilons`: `sweep.csv`, one portrait
/// per amplitude and `sweep_summary.txt` with the loss threshold.
pub fn cmd_sweep(cfg: &RunConfig) -> Result<CmdOutput, CliError> {
    cfg.validate()?;
    let sc = &cfg.sweep;
    if sc.epsilons.is_empty() {
        return Err(config_err("sweep.epsilons must not be empty"));
    }
    let built = cfg.system.build()?;
    let sys = &built.system;
    let orbit = locate_orbit(cfg, sys)?;
    let tau0 = orbit.tau0;
    let family = |e: f64| {
        let p = sin2t_perturbation(e)?;
        Ok(if sc.rescale { p.rescaled(tau0) } else { p })
    };
    let opts = SweepOptions { periodicity_tol: sc.periodicity_tol, n_returns: sc.n_returns, parallel: sc.parallel, ..SweepOptions::new(orbit.a) };
    let rows = perturb::sweep_epsilon(sys, family, &sc.epsilons, cfg.stepper, opts);
    let mut out = OutDir::new(&cfg.out_dir)?;

    let mut csv = Vec::new();
    perturb::write_sweep_csv(&rows, &mut csv).map_err(numeric_err)?;
    out.write("sweep.csv", &csv)?;

    let mut notes = String::new();
    for (i, row) in rows.iter().enumerate() {
        let pert = family(row.epsilon).map_err(numeric_err)?;
        let rhs = perturb::forced_rhs(sys, &pert);
        let span = sc.n_returns as f64 * tau0;
        match integrate::integrate(&rhs, PoincareSection::anchor(orbit.a), 0.0, span, cfg.stepper) {
            Ok(traj) => {
                let title = format!("{}: epsilon = {}, {} periods", sys.name(), row.epsilon, sc.n_returns);
                let spec = PlotSpec { title: Some(title), ..cfg.plot.clone() };
                let name = format!("phase_{i:02}_eps_{:.6}.svg", row.epsilon);
                out.write(&name, svg_for(&traj, &spec)?.as_bytes())?;
            }
            Err(e) => {
                let _ = writeln!(notes, "portrait skipped for epsilon = {}: {e}", row.epsilon);
            }
        }
    }

    let mut text = String::new();
    let _ = writeln!(text, "system: {}", sys.name());
    let _ = writeln!(text, "anchor_a: {}", fmt_sig(orbit.a, 7));
    let _ = writeln!(text, "tau0: {}", fmt_sig(tau0, 7));
    for r in &rows {
        match (&r.tau, &r.error) {
            (Some(t), _) => {
                let _ = writeln!(text, "epsilon {}: tau {:.4}, drift {:.3e}, periodic {}", r.epsilon, t, r.drift, r.periodic);
            }
            (None, err) => {
                let _ = writeln!(text, "epsilon {}: failed: {}", r.epsilon, err.as_deref().unwrap_or("unknown"));
            }
        }
    }
    let loss = perturb::detect_periodicity_loss(&rows);
    match loss.epsilon {
        Some(e) => {
            let _ = writeln!(text, "periodicity_loss: epsilon = {e}");
        }
        None => text.push_str("periodicity_loss: none\n"),
    }
    if let Some(n) = &loss.note {
        let _ = writeln!(text, "note: {n}");
    }
    text.push_str(&notes);
    out.write("sweep_summary.txt", text.as_bytes())?;

    if rows.iter().all(|r| r.tau.is_none()) {
        return Err(CliError::Numerical(format!("every sweep row failed\n{text}")));
    }
    Ok(CmdOutput { status: ExitStatus::Success, summary: text, files: out.written })
}

type Command = fn(&RunConfig) -> Result<CmdOutput, CliError>;

#[derive(Debug, Parser)]
#[command(name = "lienard", version, about = "Periodic orbits and stability of generalized Liénard oscillators")]
struct Cli {
    #[command(subcommand)]
    command: Verb,
}

#[derive(Debug, Subcommand)]
enum Verb {
    /// Locate the periodic orbit and plot it.
    Orbit(Overrides),
    /// Monodromy, multipliers and stability criteria.
    Floquet(Overrides),
    /// Levinson–Smith and De Castro hypothesis checks.
    Conditions(Overrides),
    /// Forced-response sweep over the amplitude list.
    Sweep(Overrides),
}

#[derive(Debug, Args)]
struct Overrides {
    /// JSON run config; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Replace the sweep amplitudes (repeatable or comma separated).
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    epsilon: Vec<f64>,
    #[arg(long, allow_negative_numbers = true)]
    a_guess: Option<f64>,
    /// Fixed integration step.
    #[arg(long)]
    step: Option<f64>,
}

impl Overrides {
    fn resolve(&self) -> Result<RunConfig, CliError> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(out) = &self.out {
            cfg.out_dir = out.clone();
        }
        if !self.epsilon.is_empty() {
            cfg.sweep.epsilons = self.epsilon.clone();
        }
        if let Some(a) = self.a_guess {
            cfg.orbit.a_guess = a;
        }
        if let Some(h) = self.step {
            cfg.stepper.step = h;
        }
        Ok(cfg)
    }
}

/// Parses `args` (including the program name), runs the verb and returns the
/// process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let rendered = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(stdout, "{rendered}");
                    0
                }
                _ => {
                    let _ = write!(stderr, "{rendered}");
                    ExitStatus::ConfigError.code()
                }
            };
        }
    };
    let (ov, cmd): (&Overrides, Command) = match &cli.command {
        Verb::Orbit(o) => (o, cmd_orbit),
        Verb::Floquet(o) => (o, cmd_floquet),
        Verb::Conditions(o) => (o, cmd_conditions),
        Verb::Sweep(o) => (o, cmd_sweep),
    };
    let result = ov.resolve().and_then(|cfg| {
        if let Ok(b) = cfg.system.build() {
            for w in b.polynomial.iter().flat_map(|p| p.warnings()) {
                let _ = writeln!(stderr, "warning: {w}");
            }
        }
        cmd(&cfg)
    });
    match result {
        Ok(out) => {
            let _ = write!(stdout, "{}", out.summary);
            if out.status == ExitStatus::HypothesisFailure {
                let _ = writeln!(stderr, "hypothesis check failed");
            }
            out.status.code()
        }
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.status().code()
        }
    }
}
