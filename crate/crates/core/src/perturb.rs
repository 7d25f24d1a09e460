//! Periodically forced Liénard equations and amplitude sweeps.
//!
//! The forced equation is `u'' + φ(u, u')·u' + ψ(u) = ε·ω(t, u, u')`. Its
//! response is measured by integrating from the unperturbed section anchor
//! and recording successive returns to the section `{u' = 0, u < 0}`.
//! The reported period is the first return time; the drift is the largest
//! distance between a return state and the starting state, and the response
//! counts as periodic while that drift stays within tolerance.

use std::fmt;
use std::io::{self, Write};
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::integrate::{IntegrateError, StepperConfig};
use crate::orbit::{next_return, PoincareSection};
use crate::systems::{GeneralizedLienard, State, SystemError};

/// Forcing profile `ω(t, u, v)`.
pub type Forcing = Arc<dyn Fn(f64, f64, f64) -> f64 + Send + Sync>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PerturbError {
    #[error("forcing amplitude must satisfy |epsilon| < 1, got {0}")]
    AmplitudeOutOfRange(f64),
    #[error("section start must satisfy u' = 0 and u < 0, got {0}")]
    NotOnSection(State),
    #[error("no section return within t = {horizon} after return {completed}")]
    NoReturn { completed: usize, horizon: f64 },
    #[error("n_returns must be at least 1")]
    NoReturnsRequested,
    #[error(transparent)]
    Integrate(#[from] IntegrateError),
}

#[derive(Clone)]
pub struct Perturbation {
    pub omega: Forcing,
    pub epsilon: f64,
    pub label: String,
    /// Evaluate `ω(t/τ, …)` instead of `ω(t, …)` when set.
    pub time_scale: Option<f64>,
}

impl fmt::Debug for Perturbation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Perturbation")
            .field("label", &self.label)
            .field("epsilon", &self.epsilon)
            .field("time_scale", &self.time_scale)
            .finish()
    }
}

impl Perturbation {
    pub fn new(
        label: impl Into<String>,
        epsilon: f64,
        omega: impl Fn(f64, f64, f64) -> f64 + Send + Sync + 'static,
    ) -> Result<Self, PerturbError> {
        if !(epsilon.is_finite() && epsilon.abs() < 1.0) {
            return Err(PerturbError::AmplitudeOutOfRange(epsilon));
        }
        Ok(Self { omega: Arc::new(omega), epsilon, label: label.into(), time_scale: None })
    }

    /// Feeds the forcing the rescaled clock `t/τ`.
    pub fn rescaled(mut self, tau: f64) -> Self {
        self.time_scale = Some(tau);
        self
    }

    /// `ε·ω` at time `t`, position `u`, velocity `v`.
    pub fn forcing(&self, t: f64, u: f64, v: f64) -> f64 {
        let clock = match self.time_scale {
            Some(tau) => t / tau,
            None => t,
        };
        self.epsilon * (self.omega)(clock, u, v)
    }
}

/// `ε·sin(2t)·u'`, forcing period π.
pub fn sin2t_perturbation(epsilon: f64) -> Result<Perturbation, PerturbError> {
    Perturbation::new("sin2t", epsilon, |t, _u, v| (2.0 * t).sin() * v)
}

pub const SIN2T_FORCING_PERIOD: f64 = std::f64::consts::PI;

/// `(t, x) ↦ (−φ(x2,x1)·x1 − ψ(x2) + ε·ω(t, x2, x1), x1)`.
pub fn forced_rhs<'a>(
    sys: &'a GeneralizedLienard,
    pert: &'a Perturbation,
) -> impl Fn(f64, State) -> Result<State, SystemError> + 'a {
    move |t, x| {
        let base = sys.eval_rhs(x)?;
        let out = State::new(base.x1 + pert.forcing(t, x.x2, x.x1), base.x2);
        if out.is_finite() {
            Ok(out)
        } else {
            Err(SystemError::NonFinite { state: x })
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecurrenceResult {
    /// Time from the start to the first same-direction section return.
    pub tau_estimate: f64,
    /// Mean interval between consecutive returns over all recorded returns.
    pub mean_interval: f64,
    /// Largest distance between a return state and the start state.
    pub drift: f64,
    pub periodic: bool,
    pub n_returns: usize,
    pub return_times: Vec<f64>,
    pub return_states: Vec<State>,
}

/// Follows a (possibly nonautonomous) flow from a section point through
/// `n_returns` same-direction section returns.
///
/// Each return is searched within `cfg.t_max` of the previous one.
pub fn estimate_recurrence<F>(
    rhs: &F,
    x0: State,
    t0: f64,
    cfg: StepperConfig,
    periodicity_tol: f64,
    n_returns: usize,
) -> Result<RecurrenceResult, PerturbError>
where
    F: Fn(f64, State) -> Result<State, SystemError>,
{
    if x0.x1 != 0.0 || !PoincareSection::admissible(&x0) {
        return Err(PerturbError::NotOnSection(x0));
    }
    if n_returns == 0 {
        return Err(PerturbError::NoReturnsRequested);
    }
    let mut times = Vec::with_capacity(n_returns);
    let mut states = Vec::with_capacity(n_returns);
    let (mut t, mut x) = (t0, x0);
    for completed in 0..n_returns {
        let ev = next_return(rhs, x, t, cfg.t_max, cfg)?
            .ok_or(PerturbError::NoReturn { completed, horizon: cfg.t_max })?;
        // restart exactly on the section
        t = ev.t;
        x = State::new(0.0, ev.state.x2);
        times.push(ev.t);
        states.push(ev.state);
    }
    let drift = states.iter().map(|s| s.distance(&x0)).fold(0.0, f64::max);
    let last = *times.last().expect("n_returns >= 1");
    Ok(RecurrenceResult {
        tau_estimate: times[0] - t0,
        mean_interval: (last - t0) / n_returns as f64,
        drift,
        periodic: drift <= periodicity_tol,
        n_returns,
        return_times: times,
        return_states: states,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepOptions {
    /// Unperturbed section anchor `a*`; every row starts from `(0, a*)` at
    /// `t = 0`.
    pub anchor: f64,
    pub periodicity_tol: f64,
    pub n_returns: usize,
    pub parallel: bool,
}

impl SweepOptions {
    pub fn new(anchor: f64) -> Self {
        Self { anchor, periodicity_tol: DEFAULT_PERIODICITY_TOL, n_returns: DEFAULT_RETURNS, parallel: true }
    }
}

pub const DEFAULT_PERIODICITY_TOL: f64 = 1e-3;
pub const DEFAULT_RETURNS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub epsilon: f64,
    pub tau: Option<f64>,
    pub drift: f64,
    pub periodic: bool,
    pub error: Option<String>,
}

/// One row per amplitude, sorted by `ε`. Failures are recorded in the row.
pub fn sweep_epsilon<P>(
    sys: &GeneralizedLienard,
    family: P,
    eps_list: &[f64],
    cfg: StepperConfig,
    opts: SweepOptions,
) -> Vec<SweepRow>
where
    P: Fn(f64) -> Result<Perturbation, PerturbError> + Sync,
{
    let mut eps: Vec<f64> = eps_list.to_vec();
    eps.sort_by(f64::total_cmp);
    let row = |e: f64| -> SweepRow {
        let run = || -> Result<RecurrenceResult, PerturbError> {
            let pert = family(e)?;
            let rhs = forced_rhs(sys, &pert);
            estimate_recurrence(&rhs, PoincareSection::anchor(opts.anchor), 0.0, cfg, opts.periodicity_tol, opts.n_returns)
        };
        match run() {
            Ok(r) => SweepRow { epsilon: e, tau: Some(r.tau_estimate), drift: r.drift, periodic: r.periodic, error: None },
            Err(err) => SweepRow { epsilon: e, tau: None, drift: f64::NAN, periodic: false, error: Some(err.to_string()) },
        }
    };
    if opts.parallel {
        eps.par_iter().map(|&e| row(e)).collect()
    } else {
        eps.iter().map(|&e| row(e)).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicityLoss {
    /// Smallest `ε` flagged non-periodic.
    pub epsilon: Option<f64>,
    pub note: Option<String>,
}

/// First amplitude at which periodicity is lost. Rows must be sorted by `ε`.
pub fn detect_periodicity_loss(rows: &[SweepRow]) -> PeriodicityLoss {
    let Some(first) = rows.iter().position(|r| !r.periodic) else {
        return PeriodicityLoss { epsilon: None, note: None };
    };
    let recovered: Vec<f64> = rows[first + 1..].iter().filter(|r| r.periodic).map(|r| r.epsilon).collect();
    let note = (!recovered.is_empty()).then(|| {
        format!("non-monotone: periodic again at epsilon = {recovered:?} after the first loss")
    });
    PeriodicityLoss { epsilon: Some(rows[first].epsilon), note }
}

pub const SWEEP_CSV_HEADER: &str = "epsilon,tau,drift,periodic";

/// `epsilon,tau,drift,periodic` with `tau` to 4 decimals.
pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], mut out: W) -> io::Result<()> {
    writeln!(out, "{SWEEP_CSV_HEADER}")?;
    for r in rows {
        let tau = r.tau.map_or_else(String::new, |t| format!("{t:.4}"));
        let drift = if r.drift.is_finite() { format!("{:.6e}", r.drift) } else { String::new() };
        writeln!(out, "{},{},{},{}", r.epsilon, tau, drift, r.periodic)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::systems::example_system;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

    #[test]
    fn zero_forcing_matches_unperturbed_field() {
        let sys = example_system();
        let pert = sin2t_perturbation(0.0).unwrap();
        let rhs = forced_rhs(&sys, &pert);
        for k in 0..50 {
            let t = k as f64 * 0.37;
            let x = State::new((k as f64 * 0.7).sin(), (k as f64 * 0.3).cos() - 0.5);
            assert_eq!(rhs(t, x).unwrap(), sys.eval_rhs(x).unwrap());
        }
    }

    #[test]
    fn sin2t_forcing_values() {
        let pert = sin2t_perturbation(0.001).unwrap();
        assert_eq!(pert.label, "sin2t");
        assert!((pert.forcing(FRAC_PI_4, 0.0, 1.0) - 0.001).abs() < 1e-18);
        let sys = example_system();
        let rhs = forced_rhs(&sys, &pert);
        let x = State::new(1.0, 0.0);
        let diff = rhs(FRAC_PI_4, x).unwrap() - sys.eval_rhs(x).unwrap();
        assert!((diff.x1 - 0.001).abs() < 1e-15 && diff.x2 == 0.0);
        for &(u, v) in &[(0.3, 2.0), (-1.0, -4.0)] {
            assert!(pert.forcing(FRAC_PI_2, u, v).abs() < 1e-15);
        }
        assert_eq!(sin2t_perturbation(0.0).unwrap().forcing(0.4, 1.0, 1.0), 0.0);
    }

    #[test]
    fn constant_forcing_shifts_velocity_equation() {
        let sys = example_system();
        let pert = Perturbation::new("one", 0.25, |_, _, _| 1.0).unwrap();
        let rhs = forced_rhs(&sys, &pert);
        let x = State::new(-0.4, 1.2);
        let d = rhs(3.0, x).unwrap() - sys.eval_rhs(x).unwrap();
        assert!((d.x1 - 0.25).abs() < 1e-15);
    }

    #[test]
    fn rescaled_clock() {
        let pert = Perturbation::new("t", 0.5, |t, _, _| t).unwrap().rescaled(4.0);
        assert_eq!(pert.forcing(2.0, 0.0, 0.0), 0.25);
    }

    #[test]
    fn amplitude_bound() {
        assert!(matches!(sin2t_perturbation(1.0), Err(PerturbError::AmplitudeOutOfRange(_))));
        assert!(sin2t_perturbation(f64::NAN).is_err());
    }

    #[test]
    fn recurrence_preconditions() {
        let sys = GeneralizedLienard::harmonic();
        let rhs = |_t: f64, x: State| sys.eval_rhs(x);
        let cfg = StepperConfig::rk4(1e-3);
        assert!(matches!(
            estimate_recurrence(&rhs, State::new(0.1, -1.0), 0.0, cfg, 1e-3, 3),
            Err(PerturbError::NotOnSection(_))
        ));
        assert!(matches!(
            estimate_recurrence(&rhs, State::new(0.0, -1.0), 0.0, cfg, 1e-3, 0),
            Err(PerturbError::NoReturnsRequested)
        ));
        let r = estimate_recurrence(&rhs, State::new(0.0, -1.0), 0.0, cfg, 1e-6, 3).unwrap();
        assert!((r.tau_estimate - 2.0 * std::f64::consts::PI).abs() < 1e-9);
        assert!((r.mean_interval - r.tau_estimate).abs() < 1e-9);
        assert!(r.periodic && r.drift < 1e-9);
        assert_eq!(r.return_times.len(), 3);
    }

    fn row(epsilon: f64, periodic: bool) -> SweepRow {
        SweepRow { epsilon, tau: Some(5.43), drift: 0.0, periodic, error: None }
    }

    #[test]
    fn periodicity_loss_detection() {
        assert_eq!(detect_periodicity_loss(&[row(0.0, true), row(0.001, true)]).epsilon, None);
        let loss = detect_periodicity_loss(&[row(0.001, true), row(0.005, false), row(0.007, true)]);
        assert_eq!(loss.epsilon, Some(0.005));
        assert!(loss.note.is_some());
        let loss = detect_periodicity_loss(&[row(0.005, true), row(0.01, false)]);
        assert_eq!(loss.epsilon, Some(0.01));
        assert!(loss.note.is_none());
    }

    #[test]
    fn sweep_csv_format() {
        let rows = vec![
            SweepRow { epsilon: 0.0, tau: Some(5.429544952), drift: 0.0, periodic: true, error: None },
            SweepRow { epsilon: 0.5, tau: None, drift: f64::NAN, periodic: false, error: Some("x".into()) },
        ];
        let mut buf = Vec::new();
        write_sweep_csv(&rows, &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "epsilon,tau,drift,periodic\n0,5.4295,0.000000e0,true\n0.5,,,false\n"
        );
    }
}
