//! Periodic orbits of the unperturbed system via a Poincaré return map.
//!
//! The section is `{u' = 0, u < 0}` crossed with `u'` increasing. From an
//! anchor `(u', u) = (0, a)` with `a < 0`, the return map sends `a` to the
//! position at the next crossing. A fixed point of the map is a periodic
//! orbit; its return time is the least period.

use std::io::{self, BufRead, Write};

use thiserror::Error;

use crate::integrate::{self, Direction, Event, IntegrateError, StepperConfig, Trajectory};
use crate::systems::{GeneralizedLienard, State};

/// The section `{x1 = 0, x2 < 0}` with rising `x1`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PoincareSection;

impl PoincareSection {
    pub const DIRECTION: Direction = Direction::Rising;

    pub fn guard(x: &State) -> f64 {
        x.x1
    }

    pub fn admissible(x: &State) -> bool {
        x.x2 < 0.0
    }

    pub fn anchor(a: f64) -> State {
        State::new(0.0, a)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OrbitError {
    #[error("section anchor must be negative, got {0}")]
    NonNegativeAnchor(f64),
    #[error("no return to the section from a = {a} within t = {horizon}")]
    NoReturn { a: f64, horizon: f64 },
    #[error("return-map iteration did not converge after {iterations} iterations (last residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },
    #[error(transparent)]
    Integrate(#[from] IntegrateError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReturnPoint {
    pub a_next: f64,
    pub t_return: f64,
    /// Full refined crossing state.
    pub state: State,
}

/// First same-direction return of a nonautonomous flow started at
/// `(t0, x0)`, searched up to `t0 + horizon`.
pub(crate) fn next_return<F>(
    rhs: &F,
    x0: State,
    t0: f64,
    horizon: f64,
    cfg: StepperConfig,
) -> Result<Option<Event>, IntegrateError>
where
    F: Fn(f64, State) -> Result<State, crate::systems::SystemError>,
{
    let (_, ev) = integrate::integrate_to_event(
        rhs,
        x0,
        t0,
        horizon,
        cfg,
        PoincareSection::guard,
        PoincareSection::DIRECTION,
        PoincareSection::admissible,
    )?;
    Ok(ev)
}

fn return_map_within(
    sys: &GeneralizedLienard,
    a: f64,
    horizon: f64,
    cfg: StepperConfig,
) -> Result<ReturnPoint, OrbitError> {
    if !(a < 0.0) {
        return Err(OrbitError::NonNegativeAnchor(a));
    }
    let rhs = |_t: f64, x: State| sys.eval_rhs(x);
    match next_return(&rhs, PoincareSection::anchor(a), 0.0, horizon, cfg)? {
        Some(ev) => Ok(ReturnPoint { a_next: ev.state.x2, t_return: ev.t, state: ev.state }),
        None => Err(OrbitError::NoReturn { a, horizon }),
    }
}

/// Return map of the section, searching up to `cfg.t_max`.
pub fn return_map(sys: &GeneralizedLienard, a: f64, cfg: StepperConfig) -> Result<ReturnPoint, OrbitError> {
    return_map_within(sys, a, cfg.t_max, cfg)
}

/// Periodic orbit anchored on the section.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicOrbit {
    /// Section anchor: the orbit passes through `(u', u) = (0, a)`.
    pub a: f64,
    /// Least period.
    pub tau0: f64,
    /// One period starting at `(0, a)`, on the stepper's grid.
    pub trajectory: Trajectory,
    /// `|return_map(a) − a|` at acceptance.
    pub residual: f64,
    pub iterations: usize,
}

impl PeriodicOrbit {
    pub fn period(&self) -> f64 {
        self.tau0
    }

    /// Distance between the recorded end and start states.
    pub fn closure_error(&self) -> f64 {
        let first = self.trajectory.states[0];
        let last = *self.trajectory.states.last().expect("non-empty trajectory");
        first.distance(&last)
    }

    pub fn anchor(&self) -> State {
        PoincareSection::anchor(self.a)
    }
}

/// Least period of an orbit.
pub fn period(orbit: &PeriodicOrbit) -> f64 {
    orbit.tau0
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrbitSearch {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for OrbitSearch {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 50 }
    }
}

/// Secant iteration on `g(a) = return_map(a) − a`.
///
/// The first secant pair is `(a_guess, return_map(a_guess))`. Steps that
/// would leave the half-line `a < 0` fall back to a plain return-map
/// iteration. After the first return the search horizon becomes ten times
/// the current period estimate.
pub fn find_periodic_orbit(
    sys: &GeneralizedLienard,
    a_guess: f64,
    search: OrbitSearch,
    cfg: StepperConfig,
) -> Result<PeriodicOrbit, OrbitError> {
    if !(a_guess < 0.0) {
        return Err(OrbitError::NonNegativeAnchor(a_guess));
    }
    cfg.validate()?;
    let mut horizon = cfg.t_max;
    let eval = |a: f64, horizon: &mut f64| -> Result<ReturnPoint, OrbitError> {
        let r = return_map_within(sys, a, *horizon, cfg)?;
        *horizon = 10.0 * r.t_return;
        Ok(r)
    };

    let mut a0 = a_guess;
    let mut r0 = eval(a0, &mut horizon)?;
    let mut g0 = r0.a_next - a0;
    if g0.abs() <= search.tol {
        return build_orbit(sys, a0, r0, g0.abs(), 0, cfg);
    }
    let mut a1 = r0.a_next;
    for iter in 1..=search.max_iter {
        let r1 = eval(a1, &mut horizon)?;
        let g1 = r1.a_next - a1;
        if g1.abs() <= search.tol {
            return build_orbit(sys, a1, r1, g1.abs(), iter, cfg);
        }
        let denom = g1 - g0;
        let secant = if denom != 0.0 { a1 - g1 * (a1 - a0) / denom } else { f64::NAN };
        let a2 = if secant.is_finite() && secant < 0.0 { secant } else { r1.a_next };
        a0 = a1;
        g0 = g1;
        r0 = r1;
        a1 = a2;
    }
    Err(OrbitError::NotConverged { iterations: search.max_iter, residual: (r0.a_next - a0).abs() })
}

fn build_orbit(
    sys: &GeneralizedLienard,
    a: f64,
    ret: ReturnPoint,
    residual: f64,
    iterations: usize,
    cfg: StepperConfig,
) -> Result<PeriodicOrbit, OrbitError> {
    let trajectory = sample_orbit(sys, a, ret.t_return, cfg)?;
    Ok(PeriodicOrbit { a, tau0: ret.t_return, trajectory, residual, iterations })
}

/// Trajectory from `(0, a)` over `[0, period]` on the stepper grid.
pub fn sample_orbit(
    sys: &GeneralizedLienard,
    a: f64,
    period: f64,
    cfg: StepperConfig,
) -> Result<Trajectory, IntegrateError> {
    let rhs = |_t: f64, x: State| sys.eval_rhs(x);
    integrate::integrate(&rhs, PoincareSection::anchor(a), 0.0, period, cfg)
}

/// Writes `t,u,u_prime` rows.
pub fn write_orbit_csv<W: Write>(traj: &Trajectory, mut out: W) -> io::Result<()> {
    writeln!(out, "t,u,u_prime")?;
    for (t, x) in traj.iter() {
        writeln!(out, "{:.10},{:.12},{:.12}", t, x.x2, x.x1)?;
    }
    Ok(())
}

/// Reads the format written by [`write_orbit_csv`].
pub fn read_orbit_csv<R: BufRead>(input: R) -> io::Result<Trajectory> {
    let bad = |msg: String| io::Error::new(io::ErrorKind::InvalidData, msg);
    let mut lines = input.lines();
    match lines.next().transpose()? {
        Some(h) if h.trim() == "t,u,u_prime" => {}
        other => return Err(bad(format!("unexpected header {other:?}"))),
    }
    let mut traj = Trajectory { times: Vec::new(), states: Vec::new() };
    for (lineno, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<f64> = line
            .split(',')
            .map(|f| f.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| bad(format!("line {}: {e}", lineno + 2)))?;
        if fields.len() != 3 {
            return Err(bad(format!("line {}: expected 3 fields", lineno + 2)));
        }
        traj.times.push(fields[0]);
        traj.states.push(State::from_position_velocity(fields[1], fields[2]));
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::systems::example_system;
    use std::f64::consts::PI;

    #[test]
    fn harmonic_return_map_is_identity() {
        let sys = GeneralizedLienard::harmonic();
        let r = return_map(&sys, -1.0, StepperConfig::default()).unwrap();
        assert!((r.a_next + 1.0).abs() < 1e-8);
        assert!((r.t_return - 2.0 * PI).abs() < 1e-8);
    }

    #[test]
    fn example_anchor_is_nearly_fixed() {
        let r = return_map(&example_system(), -0.7548829, StepperConfig::default()).unwrap();
        assert!((r.a_next + 0.7548829).abs() < 1e-6, "{}", r.a_next);
    }

    #[test]
    fn inner_seed_moves_outward() {
        let r = return_map(&example_system(), -0.3, StepperConfig::default()).unwrap();
        assert!(r.a_next < -0.3, "{}", r.a_next);
    }

    #[test]
    fn non_negative_seed_rejected() {
        let sys = example_system();
        assert!(matches!(return_map(&sys, 0.0, StepperConfig::default()), Err(OrbitError::NonNegativeAnchor(_))));
        assert!(matches!(
            find_periodic_orbit(&sys, 0.5, OrbitSearch::default(), StepperConfig::default()),
            Err(OrbitError::NonNegativeAnchor(_))
        ));
    }

    #[test]
    fn no_return_reported() {
        // u'' = 0 from rest never moves, so u' never rises through 0
        let sys = GeneralizedLienard::free_particle();
        let err = return_map(&sys, -1.0, StepperConfig::rk4(1e-2).with_t_max(5.0)).unwrap_err();
        assert!(matches!(err, OrbitError::NoReturn { .. }));
    }

    #[test]
    fn harmonic_orbit_converges_immediately() {
        let sys = GeneralizedLienard::harmonic();
        let orbit = find_periodic_orbit(&sys, -1.0, OrbitSearch { tol: 1e-8, max_iter: 5 }, StepperConfig::default()).unwrap();
        assert_eq!(orbit.iterations, 0);
        assert!((period(&orbit) - 2.0 * PI).abs() < 1e-8);
    }

    #[test]
    fn csv_round_trip() {
        let sys = GeneralizedLienard::harmonic();
        let traj = sample_orbit(&sys, -1.0, 1.0, StepperConfig::rk4(0.1)).unwrap();
        let mut buf = Vec::new();
        write_orbit_csv(&traj, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("t,u,u_prime\n"));
        let back = read_orbit_csv(&buf[..]).unwrap();
        assert_eq!(back.len(), traj.len());
        for ((t0, x0), (t1, x1)) in traj.iter().zip(back.iter()) {
            assert!((t0 - t1).abs() < 1e-10);
            assert!(x0.distance(x1) < 1e-11);
        }
        assert!(read_orbit_csv(&b"a,b,c\n"[..]).is_err());
    }
}
