//! Explicit Runge–Kutta integration with dense step recording and
//! section-crossing detection.
//!
//! Two steppers are provided: classical fourth-order Runge–Kutta on a uniform
//! grid (the default, step `1e-4`) and Dormand–Prince 5(4) with embedded
//! error control. Every accepted step is stored.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::systems::{State, SystemError};

/// States with a fixed, small number of real components.
pub trait OdeState: Copy {
    const DIM: usize;

    fn component(&self, i: usize) -> f64;

    /// `self + h·dir`.
    fn axpy(self, h: f64, dir: Self) -> Self;

    fn max_abs(&self) -> f64 {
        (0..Self::DIM).map(|i| self.component(i).abs()).fold(0.0, f64::max)
    }

    fn is_finite(&self) -> bool {
        (0..Self::DIM).all(|i| self.component(i).is_finite())
    }
}

impl OdeState for State {
    const DIM: usize = 2;

    fn component(&self, i: usize) -> f64 {
        match i {
            0 => self.x1,
            1 => self.x2,
            _ => panic!("state component {i} out of range"),
        }
    }

    fn axpy(self, h: f64, dir: Self) -> Self {
        State::new(self.x1 + h * dir.x1, self.x2 + h * dir.x2)
    }
}

impl<const N: usize> OdeState for [f64; N] {
    const DIM: usize = N;

    fn component(&self, i: usize) -> f64 {
        self[i]
    }

    fn axpy(self, h: f64, dir: Self) -> Self {
        let mut out = self;
        for (o, d) in out.iter_mut().zip(dir) {
            *o += h * d;
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Rk4Fixed,
    Rk45Adaptive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StepperConfig {
    pub method: Method,
    /// Step length of the fixed-step method; also the initial step and the
    /// refinement substep of the adaptive one.
    pub step: f64,
    pub rtol: f64,
    pub atol: f64,
    /// Horizon guard for open-ended integrations (searches for a return).
    pub t_max: f64,
}

impl Default for StepperConfig {
    fn default() -> Self {
        Self {
            method: Method::Rk4Fixed,
            step: 1e-4,
            rtol: 1e-10,
            atol: 1e-12,
            t_max: 50.0,
        }
    }
}

impl StepperConfig {
    pub fn rk4(step: f64) -> Self {
        Self { step, ..Self::default() }
    }

    pub fn adaptive(rtol: f64, atol: f64) -> Self {
        Self {
            method: Method::Rk45Adaptive,
            step: 1e-3,
            rtol,
            atol,
            ..Self::default()
        }
    }

    pub fn with_t_max(mut self, t_max: f64) -> Self {
        self.t_max = t_max;
        self
    }

    pub fn validate(&self) -> Result<(), IntegrateError> {
        let bad = |what: &str| Err(IntegrateError::InvalidConfig(what.to_string()));
        if !(self.step.is_finite() && self.step > 0.0) {
            return bad("step must be positive and finite");
        }
        if !(self.rtol > 0.0 && self.rtol < 1.0) {
            return bad("rtol must lie in (0, 1)");
        }
        if !(self.atol > 0.0 && self.atol < 1.0) {
            return bad("atol must lie in (0, 1)");
        }
        if !(self.t_max.is_finite() && self.t_max > 0.0) {
            return bad("t_max must be positive and finite");
        }
        Ok(())
    }
}

/// State norm above which an integration is declared divergent.
pub const BLOWUP_THRESHOLD: f64 = 1e8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IntegrateError {
    #[error("invalid stepper configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid time span [{t0}, {t1}]")]
    InvalidSpan { t0: f64, t1: f64 },
    #[error("non-finite initial state")]
    NonFiniteInitial,
    #[error("solution diverged (norm > 1e8) after t = {last_t}")]
    Divergence { last_t: f64 },
    #[error("evaluation failed at t = {t}: {source}")]
    Evaluation {
        t: f64,
        #[source]
        source: SystemError,
    },
    #[error("non-finite value produced at t = {t}")]
    NonFinite { t: f64 },
    #[error("adaptive step size underflow at t = {t}")]
    StepUnderflow { t: f64 },
}

/// Recorded solution: strictly increasing times with matching states.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<S = State> {
    pub times: Vec<f64>,
    pub states: Vec<S>,
}

impl<S: OdeState> Trajectory<S> {
    fn start(t0: f64, x0: S) -> Self {
        Self { times: vec![t0], states: vec![x0] }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn first(&self) -> Option<(f64, S)> {
        Some((*self.times.first()?, *self.states.first()?))
    }

    pub fn last(&self) -> Option<(f64, S)> {
        Some((*self.times.last()?, *self.states.last()?))
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, &S)> + '_ {
        self.times.iter().copied().zip(self.states.iter())
    }

    fn push(&mut self, t: f64, x: S) {
        self.times.push(t);
        self.states.push(x);
    }
}

/// Crossing direction of a guard function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    Rising,
    Falling,
    Any,
}

impl Direction {
    /// Whether the sign change `before -> after` of a guard is a crossing in
    /// this direction. The left value must be strictly off the section.
    pub fn matches(self, before: f64, after: f64) -> bool {
        let rising = before < 0.0 && after >= 0.0;
        let falling = before > 0.0 && after <= 0.0;
        match self {
            Direction::Rising => rising,
            Direction::Falling => falling,
            Direction::Any => rising || falling,
        }
    }
}

/// A refined guard zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event<S = State> {
    pub t: f64,
    pub state: S,
    /// Sign of the guard change: `Rising` or `Falling`.
    pub direction: Direction,
}

/// Guard tolerance targeted by crossing refinement.
pub const EVENT_TOL: f64 = 1e-12;
/// Bisection cap; `2^-64` of a step is below double resolution.
const MAX_BISECTIONS: usize = 64;

fn eval<S, F>(rhs: &F, t: f64, x: S) -> Result<S, IntegrateError>
where
    S: OdeState,
    F: Fn(f64, S) -> Result<S, SystemError>,
{
    let dx = rhs(t, x).map_err(|source| IntegrateError::Evaluation { t, source })?;
    if dx.is_finite() {
        Ok(dx)
    } else {
        Err(IntegrateError::NonFinite { t })
    }
}

/// One classical RK4 step.
pub fn rk4_step<S, F>(rhs: &F, t: f64, x: S, h: f64) -> Result<S, IntegrateError>
where
    S: OdeState,
    F: Fn(f64, S) -> Result<S, SystemError>,
{
    let k1 = eval(rhs, t, x)?;
    let k2 = eval(rhs, t + 0.5 * h, x.axpy(0.5 * h, k1))?;
    let k3 = eval(rhs, t + 0.5 * h, x.axpy(0.5 * h, k2))?;
    let k4 = eval(rhs, t + h, x.axpy(h, k3))?;
    Ok(x.axpy(h / 6.0, k1).axpy(h / 3.0, k2).axpy(h / 3.0, k3).axpy(h / 6.0, k4))
}

// Dormand–Prince 5(4) tableau.
const DP_C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const DP_A: [[f64; 6]; 7] = [
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const DP_B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const DP_B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// One Dormand–Prince attempt; returns the 5th-order solution and the
/// scaled error norm (accept when ≤ 1).
fn dp_attempt<S, F>(rhs: &F, t: f64, x: S, h: f64, rtol: f64, atol: f64) -> Result<(S, f64), IntegrateError>
where
    S: OdeState,
    F: Fn(f64, S) -> Result<S, SystemError>,
{
    let mut k: Vec<S> = Vec::with_capacity(7);
    for stage in 0..7 {
        let mut xs = x;
        for (j, kj) in k.iter().enumerate() {
            let a = DP_A[stage][j];
            if a != 0.0 {
                xs = xs.axpy(h * a, *kj);
            }
        }
        k.push(eval(rhs, t + DP_C[stage] * h, xs)?);
    }
    let mut x5 = x;
    let mut x4 = x;
    for (i, ki) in k.iter().enumerate() {
        x5 = x5.axpy(h * DP_B5[i], *ki);
        x4 = x4.axpy(h * DP_B4[i], *ki);
    }
    let mut sum = 0.0;
    for i in 0..S::DIM {
        let sc = atol + rtol * x.component(i).abs().max(x5.component(i).abs());
        let e = (x5.component(i) - x4.component(i)) / sc;
        sum += e * e;
    }
    Ok((x5, (sum / S::DIM as f64).sqrt()))
}

/// Incremental integrator shared by every driver in the crate, so that
/// closed-span and open-ended integrations visit identical grid points.
pub struct Stepper<'a, S, F> {
    rhs: &'a F,
    cfg: StepperConfig,
    t0: f64,
    steps_taken: u64,
    t: f64,
    x: S,
    h: f64,
}

impl<'a, S, F> Stepper<'a, S, F>
where
    S: OdeState,
    F: Fn(f64, S) -> Result<S, SystemError>,
{
    pub fn new(rhs: &'a F, x0: S, t0: f64, cfg: StepperConfig) -> Result<Self, IntegrateError> {
        cfg.validate()?;
        if !x0.is_finite() {
            return Err(IntegrateError::NonFiniteInitial);
        }
        Ok(Self { rhs, cfg, t0, steps_taken: 0, t: t0, x: x0, h: cfg.step })
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn state(&self) -> S {
        self.x
    }

    /// Advances one accepted step without passing `t_stop`.
    pub fn advance(&mut self, t_stop: f64) -> Result<(f64, S), IntegrateError> {
        let (t_new, x_new) = match self.cfg.method {
            Method::Rk4Fixed => {
                // Grid points are t0 + k·step, never accumulated.
                let grid = self.t0 + (self.steps_taken + 1) as f64 * self.cfg.step;
                let t_next = if grid >= t_stop - 1e-9 * self.cfg.step { t_stop } else { grid };
                let x_next = rk4_step(self.rhs, self.t, self.x, t_next - self.t)?;
                (t_next, x_next)
            }
            Method::Rk45Adaptive => self.adaptive_step(t_stop)?,
        };
        if !x_new.is_finite() {
            return Err(IntegrateError::NonFinite { t: t_new });
        }
        if x_new.max_abs() > BLOWUP_THRESHOLD {
            return Err(IntegrateError::Divergence { last_t: self.t });
        }
        self.steps_taken += 1;
        self.t = t_new;
        self.x = x_new;
        Ok((t_new, x_new))
    }

    fn adaptive_step(&mut self, t_stop: f64) -> Result<(f64, S), IntegrateError> {
        let min_h = 1e-14 * self.t.abs().max(1.0);
        loop {
            let h = self.h.min(t_stop - self.t);
            if h < min_h {
                return Err(IntegrateError::StepUnderflow { t: self.t });
            }
            let (x5, err) = dp_attempt(self.rhs, self.t, self.x, h, self.cfg.rtol, self.cfg.atol)?;
            let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            if err <= 1.0 {
                self.h = h * factor;
                let t_new = if t_stop - (self.t + h) <= 1e-12 * t_stop.abs().max(1.0) {
                    t_stop
                } else {
                    self.t + h
                };
                return Ok((t_new, x5));
            }
            self.h = h * factor.min(1.0);
        }
    }
}

/// Integrates `rhs` from `(t0, x0)` to `t1`, storing every accepted step.
///
/// Fixed mode takes `ceil((t1 − t0)/step)` steps on the grid `t0 + k·step`,
/// the last one shortened to land on `t1`.
pub fn integrate<S, F>(rhs: &F, x0: S, t0: f64, t1: f64, cfg: StepperConfig) -> Result<Trajectory<S>, IntegrateError>
where
    S: OdeState,
    F: Fn(f64, S) -> Result<S, SystemError>,
{
    if !(t0.is_finite() && t1.is_finite() && t1 > t0) {
        return Err(IntegrateError::InvalidSpan { t0, t1 });
    }
    let mut stepper = Stepper::new(rhs, x0, t0, cfg)?;
    let mut traj = Trajectory::start(t0, x0);
    while stepper.time() < t1 {
        let (t, x) = stepper.advance(t1)?;
        traj.push(t, x);
    }
    Ok(traj)
}

/// Locates the guard zero inside the step `[t_left, t_right]` by bisection,
/// re-integrating from the left endpoint with RK4 substeps no longer than
/// `max_sub`.
#[allow(clippy::too_many_arguments)]
fn refine<S, F, G>(
    rhs: &F,
    guard: &G,
    t_left: f64,
    x_left: S,
    t_right: f64,
    x_right: S,
    max_sub: f64,
    direction: Direction,
) -> Result<Event<S>, IntegrateError>
where
    S: OdeState,
    F: Fn(f64, S) -> Result<S, SystemError>,
    G: Fn(&S) -> f64,
{
    let flow = |dt: f64| -> Result<S, IntegrateError> {
        if dt <= 0.0 {
            return Ok(x_left);
        }
        let n = (dt / max_sub).ceil().max(1.0) as usize;
        let h = dt / n as f64;
        let mut x = x_left;
        for i in 0..n {
            x = rk4_step(rhs, t_left + i as f64 * h, x, h)?;
        }
        Ok(x)
    };
    let g_left = guard(&x_left);
    let left_negative = g_left < 0.0;
    // bracket offsets from t_left with their states and guard values
    let mut lo = (0.0, x_left, g_left);
    let mut hi = (t_right - t_left, x_right, guard(&x_right));
    for _ in 0..MAX_BISECTIONS {
        if lo.2.abs().min(hi.2.abs()) <= EVENT_TOL {
            break;
        }
        let mid = 0.5 * (lo.0 + hi.0);
        if mid <= lo.0 || mid >= hi.0 {
            break;
        }
        let xm = flow(mid)?;
        let gm = guard(&xm);
        if gm != 0.0 && (gm < 0.0) == left_negative {
            lo = (mid, xm, gm);
        } else {
            hi = (mid, xm, gm);
        }
    }
    let best = if lo.0 > 0.0 && lo.2.abs() < hi.2.abs() { lo } else { hi };
    let best = (t_left + best.0, best.1, best.2);
    let dir = match direction {
        Direction::Any => {
            if g_left < 0.0 {
                Direction::Rising
            } else {
                Direction::Falling
            }
        }
        d => d,
    };
    Ok(Event { t: best.0, state: best.1, direction: dir })
}

/// First crossing of `guard` in `direction` between consecutive samples at or
/// after `start_index`, refined to `|guard| ≤ 1e-12` where double precision
/// allows. `None` when the trajectory ends first.
pub fn find_crossing<S, F, G>(
    rhs: &F,
    traj: &Trajectory<S>,
    guard: G,
    direction: Direction,
    start_index: usize,
) -> Result<Option<Event<S>>, IntegrateError>
where
    S: OdeState,
    F: Fn(f64, S) -> Result<S, SystemError>,
    G: Fn(&S) -> f64,
{
    let n = traj.len();
    if n < 2 {
        return Ok(None);
    }
    let mut g_prev = guard(&traj.states[start_index.min(n - 1)]);
    for k in start_index..n.saturating_sub(1) {
        let g_next = guard(&traj.states[k + 1]);
        if direction.matches(g_prev, g_next) {
            let dt = traj.times[k + 1] - traj.times[k];
            // substeps: a fixed-grid step is reproduced in one RK4 stage,
            // larger adaptive steps are split
            let max_sub = dt.min(1e-3);
            let ev = refine(
                rhs,
                &guard,
                traj.times[k],
                traj.states[k],
                traj.times[k + 1],
                traj.states[k + 1],
                max_sub,
                direction,
            )?;
            return Ok(Some(ev));
        }
        g_prev = g_next;
    }
    Ok(None)
}

/// Integrates forward from `(t0, x0)` until the first crossing of `guard`
/// in `direction` whose refined state satisfies `accept`, or until
/// `t0 + horizon`.
///
/// Returns the recorded trajectory (ending at the last full step) and the
/// event, if any.
pub fn integrate_to_event<S, F, G, A>(
    rhs: &F,
    x0: S,
    t0: f64,
    horizon: f64,
    cfg: StepperConfig,
    guard: G,
    direction: Direction,
    accept: A,
) -> Result<(Trajectory<S>, Option<Event<S>>), IntegrateError>
where
    S: OdeState,
    F: Fn(f64, S) -> Result<S, SystemError>,
    G: Fn(&S) -> f64,
    A: Fn(&S) -> bool,
{
    let t_end = t0 + horizon;
    let mut stepper = Stepper::new(rhs, x0, t0, cfg)?;
    let mut traj = Trajectory::start(t0, x0);
    let mut g_prev = guard(&x0);
    while stepper.time() < t_end {
        let (t_left, x_left) = (stepper.time(), stepper.state());
        let (t, x) = stepper.advance(t_end)?;
        traj.push(t, x);
        let g = guard(&x);
        if direction.matches(g_prev, g) {
            let max_sub = (t - t_left).min(1e-3);
            let ev = refine(rhs, &guard, t_left, x_left, t, x, max_sub, direction)?;
            if accept(&ev.state) {
                return Ok((traj, Some(ev)));
            }
        }
        g_prev = g;
    }
    Ok((traj, None))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn harmonic(_t: f64, x: State) -> Result<State, SystemError> {
        Ok(State::new(-x.x2, x.x1))
    }

    #[test]
    fn harmonic_full_period() {
        let traj = integrate(&harmonic, State::new(0.0, 1.0), 0.0, 2.0 * PI, StepperConfig::rk4(1e-3)).unwrap();
        let (t, x) = traj.last().unwrap();
        assert_eq!(t, 2.0 * PI);
        assert!(x.distance(&State::new(0.0, 1.0)) < 1e-8);
        assert_eq!(traj.len(), (2.0 * PI / 1e-3).ceil() as usize + 1);
    }

    #[test]
    fn free_particle_is_linear() {
        let free = |_t: f64, x: State| Ok(State::new(0.0, x.x1));
        let traj = integrate(&free, State::new(1.0, 0.0), 0.0, 1.0, StepperConfig::default()).unwrap();
        let (_, x) = traj.last().unwrap();
        assert!((x.x1 - 1.0).abs() < 1e-15);
        assert!((x.x2 - 1.0).abs() < 1e-12);
        assert_eq!(traj.len(), 10_001);
    }

    fn harmonic_error(h: f64) -> f64 {
        let traj = integrate(&harmonic, State::new(0.0, 1.0), 0.0, 2.0 * PI, StepperConfig::rk4(h)).unwrap();
        traj.last().unwrap().1.distance(&State::new(0.0, 1.0))
    }

    #[test]
    fn rk4_is_fourth_order() {
        // exact grid: 2π/h integer not required, the short last step is tiny
        let ratio = harmonic_error(2.0 * PI / 200.0) / harmonic_error(2.0 * PI / 400.0);
        assert!((ratio - 16.0).abs() <= 1.6, "ratio {ratio}");
    }

    #[test]
    fn adaptive_meets_tolerance() {
        let cfg = StepperConfig::adaptive(1e-10, 1e-12);
        let traj = integrate(&harmonic, State::new(0.0, 1.0), 0.0, 2.0 * PI, cfg).unwrap();
        let (t, x) = traj.last().unwrap();
        assert_eq!(t, 2.0 * PI);
        assert!(x.distance(&State::new(0.0, 1.0)) < 1e-8);
        assert!(traj.len() < 2000);
        assert!(traj.times.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn time_reversal() {
        let cfg = StepperConfig::rk4(1e-3);
        let x0 = State::new(0.3, -0.8);
        let fwd = integrate(&harmonic, x0, 0.0, 5.0, cfg).unwrap();
        let back = |t: f64, x: State| harmonic(t, x).map(|d| -d);
        let rev = integrate(&back, fwd.last().unwrap().1, 0.0, 5.0, cfg).unwrap();
        assert!(rev.last().unwrap().1.distance(&x0) < 1e-7);
    }

    #[test]
    fn fixed_step_is_deterministic() {
        let sys = crate::systems::example_system();
        let rhs = |_t: f64, x: State| sys.eval_rhs(x);
        let a = integrate(&rhs, State::new(0.0, -0.75), 0.0, 3.0, StepperConfig::default()).unwrap();
        let b = integrate(&rhs, State::new(0.0, -0.75), 0.0, 3.0, StepperConfig::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn divergence_is_reported() {
        let blow = |_t: f64, x: State| Ok(State::new(x.x1 * x.x1, 0.0));
        let err = integrate(&blow, State::new(1.0, 0.0), 0.0, 2.0, StepperConfig::rk4(1e-3)).unwrap_err();
        match err {
            IntegrateError::Divergence { last_t } => assert!(last_t > 0.9 && last_t < 1.1, "{last_t}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn nan_is_an_evaluation_error() {
        let bad = |_t: f64, _x: State| Ok(State::new(f64::NAN, 0.0));
        let err = integrate(&bad, State::new(1.0, 0.0), 0.0, 1.0, StepperConfig::default()).unwrap_err();
        assert!(matches!(err, IntegrateError::NonFinite { .. }));
    }

    #[test]
    fn invalid_inputs() {
        assert!(matches!(
            integrate(&harmonic, State::default(), 1.0, 1.0, StepperConfig::default()),
            Err(IntegrateError::InvalidSpan { .. })
        ));
        assert!(matches!(
            integrate(&harmonic, State::new(f64::NAN, 0.0), 0.0, 1.0, StepperConfig::default()),
            Err(IntegrateError::NonFiniteInitial)
        ));
        assert!(StepperConfig::rk4(0.0).validate().is_err());
        assert!(StepperConfig::adaptive(2.0, 1e-9).validate().is_err());
    }

    #[test]
    fn crossing_of_harmonic_velocity() {
        // u = cos t, u' = -sin t from (u'=0, u=1); pick the guard u = cos t
        let traj = integrate(&harmonic, State::new(0.0, 1.0), 0.0, 3.0, StepperConfig::rk4(1e-3)).unwrap();
        let ev = find_crossing(&harmonic, &traj, |x: &State| x.x2, Direction::Falling, 0).unwrap().unwrap();
        assert!((ev.t - FRAC_PI_2).abs() < 1e-9, "t = {}", ev.t);
        assert!(ev.state.x2.abs() <= EVENT_TOL);
        assert_eq!(ev.direction, Direction::Falling);
        let k = traj.times.partition_point(|&t| t < ev.t);
        assert!(traj.times[k - 1] <= ev.t && ev.t <= traj.times[k]);

        assert!(find_crossing(&harmonic, &traj, |x: &State| x.x2, Direction::Rising, 0).unwrap().is_none());
        assert!(find_crossing(&harmonic, &traj, |_: &State| 1.0, Direction::Any, 0).unwrap().is_none());
    }

    #[test]
    fn crossing_refinement_on_adaptive_steps() {
        let traj = integrate(&harmonic, State::new(0.0, 1.0), 0.0, 3.0, StepperConfig::adaptive(1e-10, 1e-12)).unwrap();
        let ev = find_crossing(&harmonic, &traj, |x: &State| x.x2, Direction::Any, 0).unwrap().unwrap();
        assert!((ev.t - FRAC_PI_2).abs() < 1e-9);
        assert_eq!(ev.direction, Direction::Falling);
    }

    #[test]
    fn example_return_time() {
        let sys = crate::systems::example_system();
        let rhs = |_t: f64, x: State| sys.eval_rhs(x);
        let (_, ev) = integrate_to_event(
            &rhs,
            State::new(0.0, -0.7548829),
            0.0,
            20.0,
            StepperConfig::default(),
            |x: &State| x.x1,
            Direction::Rising,
            |x: &State| x.x2 < 0.0,
        )
        .unwrap();
        let ev = ev.unwrap();
        assert!((ev.t - 5.4296).abs() < 1e-3, "t = {}", ev.t);
    }

    #[test]
    fn six_dimensional_states() {
        let rhs = |_t: f64, y: [f64; 6]| Ok(y.map(|v| -v));
        let traj = integrate(&rhs, [1.0; 6], 0.0, 1.0, StepperConfig::rk4(1e-3)).unwrap();
        let (_, y) = traj.last().unwrap();
        for v in y {
            assert!((v - (-1.0f64).exp()).abs() < 1e-12);
        }
    }
}
