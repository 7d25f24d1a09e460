//! Generalized and polynomial Liénard systems.
//!
//! A generalized Liénard equation `u'' + φ(u, u')·u' + ψ(u) = 0` is handled in
//! its planar first-order form with the state ordered as `x = (x1, x2) = (u', u)`:
//!
//! ```text
//! x1' = -φ(x2, x1)·x1 - ψ(x2)
//! x2' = x1
//! ```
//!
//! The damping `φ` is always called as `φ(u, v)` with `u` the position and `v`
//! the velocity, whatever order the state stores them in.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matrix::Matrix2;

/// Point of the phase plane: `x1 = u'` (velocity), `x2 = u` (position).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct State {
    pub x1: f64,
    pub x2: f64,
}

impl State {
    pub const fn new(x1: f64, x2: f64) -> Self {
        Self { x1, x2 }
    }

    /// State from position and velocity.
    pub const fn from_position_velocity(u: f64, v: f64) -> Self {
        Self { x1: v, x2: u }
    }

    pub fn position(&self) -> f64 {
        self.x2
    }

    pub fn velocity(&self) -> f64 {
        self.x1
    }

    pub fn is_finite(&self) -> bool {
        self.x1.is_finite() && self.x2.is_finite()
    }

    pub fn norm(&self) -> f64 {
        self.x1.hypot(self.x2)
    }

    pub fn distance(&self, other: &State) -> f64 {
        (*self - *other).norm()
    }
}

impl Add for State {
    type Output = State;
    fn add(self, o: State) -> State {
        State::new(self.x1 + o.x1, self.x2 + o.x2)
    }
}

impl Sub for State {
    type Output = State;
    fn sub(self, o: State) -> State {
        State::new(self.x1 - o.x1, self.x2 - o.x2)
    }
}

impl Mul<f64> for State {
    type Output = State;
    fn mul(self, s: f64) -> State {
        State::new(self.x1 * s, self.x2 * s)
    }
}

impl Neg for State {
    type Output = State;
    fn neg(self) -> State {
        State::new(-self.x1, -self.x2)
    }
}

impl fmt::Display for State {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(u'={}, u={})", self.x1, self.x2)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SystemError {
    #[error("non-finite vector field value at state {state}")]
    NonFinite { state: State },
    #[error("invalid polynomial Liénard system: {0}")]
    InvalidPolynomial(String),
}

/// Two-argument scalar function `(u, v) -> value`.
pub type Fn2 = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;
/// One-argument scalar function `u -> value`.
pub type Fn1 = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DerivativeMode {
    Analytic,
    FiniteDifference,
}

#[derive(Clone)]
struct Derivatives {
    dphi_dv: Fn2,
    dphi_du: Fn2,
    dpsi_du: Fn1,
}

/// `u'' + φ(u, u')·u' + ψ(u) = 0`.
#[derive(Clone)]
pub struct GeneralizedLienard {
    name: String,
    phi: Fn2,
    psi: Fn1,
    derivatives: Option<Derivatives>,
}

impl fmt::Debug for GeneralizedLienard {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GeneralizedLienard")
            .field("name", &self.name)
            .field("derivative_mode", &self.derivative_mode())
            .finish()
    }
}

/// Central-difference step used when no analytic derivative is supplied.
pub fn fd_step(at: f64) -> f64 {
    1e-6f64.max(1e-8 * at.abs())
}

fn central_diff(f: impl Fn(f64) -> f64, at: f64) -> f64 {
    let h = fd_step(at);
    (f(at + h) - f(at - h)) / (2.0 * h)
}

impl GeneralizedLienard {
    /// System without analytic derivatives; partials fall back to central
    /// finite differences.
    pub fn new(
        name: impl Into<String>,
        phi: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        psi: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            phi: Arc::new(phi),
            psi: Arc::new(psi),
            derivatives: None,
        }
    }

    /// Attaches analytic partials `∂φ/∂v`, `∂φ/∂u` and `ψ'`.
    pub fn with_derivatives(
        mut self,
        dphi_dv: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        dphi_du: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        dpsi_du: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        self.derivatives = Some(Derivatives {
            dphi_dv: Arc::new(dphi_dv),
            dphi_du: Arc::new(dphi_du),
            dpsi_du: Arc::new(dpsi_du),
        });
        self
    }

    /// Drops analytic derivatives so that every partial is computed by finite
    /// differences.
    pub fn finite_difference(mut self) -> Self {
        self.derivatives = None;
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn derivative_mode(&self) -> DerivativeMode {
        if self.derivatives.is_some() {
            DerivativeMode::Analytic
        } else {
            DerivativeMode::FiniteDifference
        }
    }

    pub fn phi(&self, u: f64, v: f64) -> f64 {
        (self.phi)(u, v)
    }

    pub fn psi(&self, u: f64) -> f64 {
        (self.psi)(u)
    }

    /// `∂φ/∂v`, derivative with respect to the velocity argument.
    pub fn dphi_dv(&self, u: f64, v: f64) -> f64 {
        match &self.derivatives {
            Some(d) => (d.dphi_dv)(u, v),
            None => central_diff(|w| self.phi(u, w), v),
        }
    }

    /// `∂φ/∂u`, derivative with respect to the position argument.
    pub fn dphi_du(&self, u: f64, v: f64) -> f64 {
        match &self.derivatives {
            Some(d) => (d.dphi_du)(u, v),
            None => central_diff(|w| self.phi(w, v), u),
        }
    }

    pub fn dpsi_du(&self, u: f64) -> f64 {
        match &self.derivatives {
            Some(d) => (d.dpsi_du)(u),
            None => central_diff(|w| self.psi(w), u),
        }
    }

    /// Planar vector field `(−φ(x2,x1)·x1 − ψ(x2), x1)`.
    pub fn eval_rhs(&self, x: State) -> Result<State, SystemError> {
        let (u, v) = (x.x2, x.x1);
        let out = State::new(-self.phi(u, v) * v - self.psi(u), v);
        if out.is_finite() {
            Ok(out)
        } else {
            Err(SystemError::NonFinite { state: x })
        }
    }

    /// Jacobian of [`eval_rhs`](Self::eval_rhs) with respect to `(x1, x2)`.
    pub fn jacobian(&self, x: State) -> Result<Matrix2, SystemError> {
        let (u, v) = (x.x2, x.x1);
        let j = Matrix2::new(
            -self.dphi_dv(u, v) * v - self.phi(u, v),
            -self.dphi_du(u, v) * v - self.dpsi_du(u),
            1.0,
            0.0,
        );
        if j.is_finite() {
            Ok(j)
        } else {
            Err(SystemError::NonFinite { state: x })
        }
    }

    /// `(∂φ/∂v)·v + φ` at position `u`, velocity `v`: the damping integrand of
    /// the orbital stability criterion. Equal to minus the Jacobian trace.
    pub fn damping_integrand(&self, u: f64, v: f64) -> f64 {
        self.dphi_dv(u, v) * v + self.phi(u, v)
    }

    /// Compares the analytic partials against central differences at the
    /// given points and returns the worst relative error (denominator
    /// floored at 1). Returns 0 for finite-difference systems.
    pub fn derivative_mismatch(&self, points: &[(f64, f64)]) -> f64 {
        if self.derivatives.is_none() {
            return 0.0;
        }
        let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(1.0);
        points
            .iter()
            .map(|&(u, v)| {
                let fd_v = central_diff(|w| self.phi(u, w), v);
                let fd_u = central_diff(|w| self.phi(w, v), u);
                let fd_psi = central_diff(|w| self.psi(w), u);
                rel(self.dphi_dv(u, v), fd_v)
                    .max(rel(self.dphi_du(u, v), fd_u))
                    .max(rel(self.dpsi_du(u), fd_psi))
            })
            .fold(0.0, f64::max)
    }

    /// `u'' + u = 0`.
    pub fn harmonic() -> Self {
        Self::new("harmonic", |_, _| 0.0, |u| u).with_derivatives(|_, _| 0.0, |_, _| 0.0, |_| 1.0)
    }

    /// `u'' = 0`.
    pub fn free_particle() -> Self {
        Self::new("free", |_, _| 0.0, |_| 0.0).with_derivatives(|_, _| 0.0, |_, _| 0.0, |_| 0.0)
    }

    /// Van der Pol oscillator `u'' + μ(u² − 1)u' + u = 0`.
    pub fn van_der_pol(mu: f64) -> Self {
        Self::new(format!("vanderpol mu={mu}"), move |u, _| mu * (u * u - 1.0), |u| u)
            .with_derivatives(|_, _| 0.0, move |u, _| 2.0 * mu * u, |_| 1.0)
    }
}

/// Dense polynomial with ascending coefficients.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Polynomial(pub Vec<f64>);

impl Polynomial {
    pub fn new(coeffs: impl Into<Vec<f64>>) -> Self {
        Self(coeffs.into())
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.0
    }

    pub fn eval(&self, u: f64) -> f64 {
        self.0.iter().rev().fold(0.0, |acc, &c| acc * u + c)
    }

    pub fn derivative(&self) -> Polynomial {
        Polynomial(
            self.0
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, &c)| k as f64 * c)
                .collect(),
        )
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&c| c == 0.0)
    }
}

/// `u'' + Σ_{k=0..n} p_k(u)·u'^k = 0`, with `p_0 = ψ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolynomialLienard {
    coeffs: Vec<Polynomial>,
}

impl PolynomialLienard {
    /// `coeffs[k]` is `p_k`. Requires `n ≥ 1` and `p_n ≠ 0`.
    pub fn new(coeffs: Vec<Polynomial>) -> Result<Self, SystemError> {
        if coeffs.len() < 2 {
            return Err(SystemError::InvalidPolynomial(
                "need at least p_0 and p_1 (n >= 1)".into(),
            ));
        }
        if coeffs.last().is_some_and(Polynomial::is_zero) {
            return Err(SystemError::InvalidPolynomial(format!(
                "leading coefficient p_{} is the zero polynomial",
                coeffs.len() - 1
            )));
        }
        if coeffs.iter().flat_map(|p| p.0.iter()).any(|c| !c.is_finite()) {
            return Err(SystemError::InvalidPolynomial("non-finite coefficient".into()));
        }
        Ok(Self { coeffs })
    }

    pub fn from_vecs(coeffs: Vec<Vec<f64>>) -> Result<Self, SystemError> {
        Self::new(coeffs.into_iter().map(Polynomial).collect())
    }

    /// Highest velocity power `n`.
    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[Polynomial] {
        &self.coeffs
    }

    /// Validation warnings. The existence results need the last nonzero term
    /// to have an odd index.
    pub fn warnings(&self) -> Vec<String> {
        let n = self.degree();
        if n % 2 == 0 {
            vec![format!(
                "highest velocity power n = {n} is even; periodic-orbit existence expects an odd index"
            )]
        } else {
            Vec::new()
        }
    }

    /// Vector field evaluated directly from the polynomial form.
    pub fn eval_rhs(&self, x: State) -> Result<State, SystemError> {
        let (u, v) = (x.x2, x.x1);
        let sum = self.coeffs.iter().rev().fold(0.0, |acc, p| acc * v + p.eval(u));
        let out = State::new(-sum, v);
        if out.is_finite() {
            Ok(out)
        } else {
            Err(SystemError::NonFinite { state: x })
        }
    }

    /// `Σ_{k≥1} k·p_k(u)·v^{k−1}`.
    pub fn criterion_integrand(&self, u: f64, v: f64) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .skip(1)
            .rev()
            .fold(0.0, |acc, (k, p)| acc * v + k as f64 * p.eval(u))
    }

    /// Converts to `φ(u, v) = Σ_{k≥1} p_k(u)·v^{k−1}`, `ψ = p_0`, with exact
    /// derivatives.
    pub fn to_generalized(&self) -> GeneralizedLienard {
        let damping: Arc<Vec<Polynomial>> = Arc::new(self.coeffs[1..].to_vec());
        let damping_du: Arc<Vec<Polynomial>> =
            Arc::new(damping.iter().map(Polynomial::derivative).collect());
        let psi = self.coeffs[0].clone();
        let dpsi = psi.derivative();

        // Horner in v over polynomial-in-u coefficients.
        fn horner(ps: &[Polynomial], u: f64, v: f64) -> f64 {
            ps.iter().rev().fold(0.0, |acc, p| acc * v + p.eval(u))
        }

        let phi = {
            let d = Arc::clone(&damping);
            move |u: f64, v: f64| horner(&d, u, v)
        };
        let dphi_dv = {
            let d = Arc::clone(&damping);
            move |u: f64, v: f64| {
                d.iter()
                    .enumerate()
                    .skip(1)
                    .rev()
                    .fold(0.0, |acc, (j, p)| acc * v + j as f64 * p.eval(u))
            }
        };
        let dphi_du = move |u: f64, v: f64| horner(&damping_du, u, v);
        let psi_fn = move |u: f64| psi.eval(u);
        let dpsi_fn = move |u: f64| dpsi.eval(u);

        GeneralizedLienard::new("polynomial", phi, psi_fn).with_derivatives(dphi_dv, dphi_du, dpsi_fn)
    }
}

/// Coefficients of `u'' + [u² + (u + u')² − 1]u' + u = 0`:
/// `p_0 = u`, `p_1 = 2u² − 1`, `p_2 = 2u`, `p_3 = 1`.
pub fn example_equation() -> PolynomialLienard {
    PolynomialLienard::from_vecs(vec![
        vec![0.0, 1.0],
        vec![-1.0, 0.0, 2.0],
        vec![0.0, 2.0],
        vec![1.0],
    ])
    .expect("fixed coefficients are valid")
}

/// The example equation in generalized form, named `example6`.
pub fn example_system() -> GeneralizedLienard {
    let mut sys = example_equation().to_generalized();
    sys.name = "example6".into();
    sys
}
