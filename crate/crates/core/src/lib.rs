//! Periodic orbits of generalized Liénard oscillators.
//!
//! The crate locates limit cycles of `u'' + φ(u, u')·u' + ψ(u) = 0` through a
//! Poincaré return map, computes their characteristic multipliers from the
//! variational equation, checks the Levinson–Smith and De Castro hypotheses on
//! sampled grids, and measures how the period of a periodically forced
//! response drifts with the forcing amplitude.

pub mod cli;
pub mod conditions;
pub mod floquet;
pub mod integrate;
pub mod matrix;
pub mod orbit;
pub mod perturb;
pub mod quadrature;
pub mod svg;
pub mod systems;

pub use integrate::{Direction, Event, IntegrateError, Method, StepperConfig, Trajectory};
pub use matrix::Matrix2;
pub use systems::{example_equation, example_system, GeneralizedLienard, Polynomial, PolynomialLienard, State};
