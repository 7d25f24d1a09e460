//! Characteristic multipliers and orbital-stability integrals.
//!
//! The monodromy matrix is obtained by integrating the variational equation
//! `Y' = f'(q(t))·Y`, `Y(0) = I`, jointly with the orbit `q`. Along a periodic
//! orbit one multiplier is 1 and the other equals
//! `exp(∫ tr f'(q)) = exp(−∫ [(∂φ/∂v)·u' + φ])`, which gives three independent
//! routes to the second multiplier: the determinant of the monodromy matrix,
//! Liouville's trace integral, and the damping integral.

use std::fmt::Write as _;

use serde::Serialize;

use crate::integrate::{self, IntegrateError, StepperConfig};
use crate::matrix::Matrix2;
use crate::orbit::PeriodicOrbit;
use crate::quadrature::simpson;
use crate::systems::{GeneralizedLienard, PolynomialLienard, State, SystemError};

pub use crate::matrix::Eigen2;

/// `det J` below this magnitude is treated as degenerate.
pub const DEGENERACY_THRESHOLD: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Monodromy {
    pub phi_tau0: Matrix2,
    /// Multiplier closest to 1.
    pub rho1: f64,
    pub rho2: f64,
    pub unit_residual: f64,
    /// Complex pair; `rho1`, `rho2` then hold the common modulus.
    pub complex: bool,
}

impl Monodromy {
    pub fn from_matrix(phi_tau0: Matrix2) -> Self {
        let Eigen2 { lambda1, lambda2, complex } = phi_tau0.eigenvalues();
        let (rho1, rho2) =
            if (lambda1 - 1.0).abs() <= (lambda2 - 1.0).abs() { (lambda1, lambda2) } else { (lambda2, lambda1) };
        Self { phi_tau0, rho1, rho2, unit_residual: (rho1 - 1.0).abs(), complex }
    }

    pub fn det(&self) -> f64 {
        self.phi_tau0.det()
    }
}

/// Integrates a planar field together with its variational equation.
///
/// `field(t, x)` returns the vector field value and its Jacobian at `x`.
/// Returns the final state and the fundamental matrix `Y(t1)` with
/// `Y(t0) = I`.
pub fn fundamental_matrix<F>(
    field: F,
    x0: State,
    t0: f64,
    t1: f64,
    cfg: StepperConfig,
) -> Result<(State, Matrix2), IntegrateError>
where
    F: Fn(f64, State) -> Result<(State, Matrix2), SystemError>,
{
    // layout: [x1, x2, Y11, Y21, Y12, Y22]
    let rhs = |t: f64, z: [f64; 6]| -> Result<[f64; 6], SystemError> {
        let x = State::new(z[0], z[1]);
        let (dx, j) = field(t, x)?;
        let c1 = j.mul_vec(State::new(z[2], z[3]));
        let c2 = j.mul_vec(State::new(z[4], z[5]));
        Ok([dx.x1, dx.x2, c1.x1, c1.x2, c2.x1, c2.x2])
    };
    let z0 = [x0.x1, x0.x2, 1.0, 0.0, 0.0, 1.0];
    let traj = integrate::integrate(&rhs, z0, t0, t1, cfg)?;
    let (_, z) = traj.last().expect("integration records at least two points");
    Ok((State::new(z[0], z[1]), Matrix2::from_columns(State::new(z[2], z[3]), State::new(z[4], z[5]))))
}

/// Monodromy matrix of a periodic orbit and its multipliers.
pub fn monodromy(sys: &GeneralizedLienard, orbit: &PeriodicOrbit, cfg: StepperConfig) -> Result<Monodromy, IntegrateError> {
    let field = |_t: f64, x: State| Ok((sys.eval_rhs(x)?, sys.jacobian(x)?));
    let (_, phi) = fundamental_matrix(field, orbit.anchor(), 0.0, orbit.tau0, cfg)?;
    Ok(Monodromy::from_matrix(phi))
}

fn orbit_integral(orbit: &PeriodicOrbit, f: impl Fn(State) -> f64) -> f64 {
    let values: Vec<f64> = orbit.trajectory.states.iter().map(|&x| f(x)).collect();
    simpson(&orbit.trajectory.times, &values)
}

/// `exp(∫₀^τ₀ tr f'(q(t)) dt)` by quadrature over the orbit samples.
pub fn rho2_via_liouville(sys: &GeneralizedLienard, orbit: &PeriodicOrbit) -> Result<f64, SystemError> {
    let traces: Vec<f64> = orbit
        .trajectory
        .states
        .iter()
        .map(|&x| sys.jacobian(x).map(|j| j.trace()))
        .collect::<Result<_, _>>()?;
    Ok(simpson(&orbit.trajectory.times, &traces).exp())
}

/// `exp(−Q)` with `Q` the damping integral of [`criterion_generalized`].
pub fn rho2_via_integral(sys: &GeneralizedLienard, orbit: &PeriodicOrbit) -> f64 {
    (-criterion_generalized(sys, orbit)).exp()
}

/// `Q = ∫₀^τ₀ [(∂φ/∂v)(u₀, u₀')·u₀' + φ(u₀, u₀')] dt`. The orbit is
/// orbitally asymptotically stable when `Q > 0`.
pub fn criterion_generalized(sys: &GeneralizedLienard, orbit: &PeriodicOrbit) -> f64 {
    orbit_integral(orbit, |x| sys.damping_integrand(x.x2, x.x1))
}

/// `∫₀^τ₀ Σ_{k≥1} k·p_k(u₀)·u₀'^{k−1} dt`.
pub fn criterion_polynomial(p: &PolynomialLienard, orbit: &PeriodicOrbit) -> f64 {
    orbit_integral(orbit, |x| p.criterion_integrand(x.x2, x.x1))
}

/// `2u² + 4u·u' + 3u'² − 1`.
pub fn example_integrand(u: f64, v: f64) -> f64 {
    2.0 * u * u + 4.0 * u * v + 3.0 * v * v - 1.0
}

/// `∫₀^τ₀ (2u₀² + 4u₀u₀' + 3u₀'² − 1) dt` for the example equation.
pub fn criterion_example(orbit: &PeriodicOrbit) -> f64 {
    orbit_integral(orbit, |x| example_integrand(x.x2, x.x1))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct JacobianJ {
    pub j: Matrix2,
    pub det: f64,
    pub nondegenerate: bool,
}

/// `J(τ₀) = Φ(τ₀) − I + diag(−ψ(a), 0)`.
pub fn jacobian_j(mono: &Monodromy, psi_a: f64) -> JacobianJ {
    let j = mono.phi_tau0 - Matrix2::IDENTITY + Matrix2::diag(-psi_a, 0.0);
    let det = j.det();
    JacobianJ { j, det, nondegenerate: det.abs() > DEGENERACY_THRESHOLD }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StabilityReport {
    pub tau0: f64,
    pub a: f64,
    pub rho1: f64,
    pub rho2_det: f64,
    pub rho2_liouville: f64,
    pub rho2_integral: f64,
    pub criterion_value: f64,
    pub stable: bool,
    pub unit_residual: f64,
    pub complex: bool,
    /// `Φ(τ₀)₁₂ / ψ(a)²`.
    pub pi_tau0: f64,
    pub phi_tau0: Matrix2,
    pub det_j: f64,
    pub nondegenerate: bool,
}

impl StabilityReport {
    /// Largest pairwise relative difference among the three `ρ₂` routes.
    pub fn route_spread(&self) -> f64 {
        let r = [self.rho2_det, self.rho2_liouville, self.rho2_integral];
        let mut worst = 0.0f64;
        for i in 0..3 {
            for j in i + 1..3 {
                let scale = r[i].abs().max(r[j].abs());
                if scale > 0.0 {
                    worst = worst.max((r[i] - r[j]).abs() / scale);
                }
            }
        }
        worst
    }

    /// The criterion sign, the determinant route, and the integral route all
    /// agree on stability.
    pub fn consistent(&self) -> bool {
        (self.criterion_value > 0.0) == (self.rho2_det < 1.0) && (self.rho2_det < 1.0) == (self.rho2_integral < 1.0)
    }

    /// `key: value` lines.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let rows: [(&str, String); 16] = [
            ("a", fmt_sig(self.a, 7)),
            ("tau0", fmt_sig(self.tau0, 7)),
            ("rho1", fmt_sig(self.rho1, 7)),
            ("rho2_det", format!("{:.9e}", self.rho2_det)),
            ("rho2_liouville", format!("{:.9e}", self.rho2_liouville)),
            ("rho2_integral", format!("{:.9e}", self.rho2_integral)),
            ("route_spread", format!("{:.3e}", self.route_spread())),
            ("criterion_value", format!("{:.9}", self.criterion_value)),
            ("stable", self.stable.to_string()),
            ("unit_residual", format!("{:.3e}", self.unit_residual)),
            ("complex_multipliers", self.complex.to_string()),
            ("phi_tau0", format!("[[{:.9e}, {:.9e}], [{:.9e}, {:.9e}]]", self.phi_tau0.m11, self.phi_tau0.m12, self.phi_tau0.m21, self.phi_tau0.m22)),
            ("pi_tau0", format!("{:.9e}", self.pi_tau0)),
            ("det_j", format!("{:.9e}", self.det_j)),
            ("nondegenerate", self.nondegenerate.to_string()),
            ("consistent", self.consistent().to_string()),
        ];
        for (k, v) in rows {
            let _ = writeln!(s, "{k}: {v}");
        }
        s
    }

    pub const CSV_HEADER: &'static str =
        "a,tau0,rho1,rho2_det,rho2_liouville,rho2_integral,criterion_value,stable,det_j,nondegenerate";

    pub fn to_csv_row(&self) -> String {
        format!(
            "{:.10},{:.10},{:.10},{:.10e},{:.10e},{:.10e},{:.10},{},{:.10e},{}",
            self.a,
            self.tau0,
            self.rho1,
            self.rho2_det,
            self.rho2_liouville,
            self.rho2_integral,
            self.criterion_value,
            self.stable,
            self.det_j,
            self.nondegenerate
        )
    }
}

/// Runs every route for one orbit.
pub fn stability_report(
    sys: &GeneralizedLienard,
    orbit: &PeriodicOrbit,
    cfg: StepperConfig,
) -> Result<StabilityReport, IntegrateError> {
    let mono = monodromy(sys, orbit, cfg)?;
    let rho2_liouville =
        rho2_via_liouville(sys, orbit).map_err(|source| IntegrateError::Evaluation { t: 0.0, source })?;
    let criterion_value = criterion_generalized(sys, orbit);
    let psi_a = sys.psi(orbit.a);
    let jj = jacobian_j(&mono, psi_a);
    Ok(StabilityReport {
        tau0: orbit.tau0,
        a: orbit.a,
        rho1: mono.rho1,
        rho2_det: mono.det(),
        rho2_liouville,
        rho2_integral: (-criterion_value).exp(),
        criterion_value,
        stable: criterion_value > 0.0,
        unit_residual: mono.unit_residual,
        complex: mono.complex,
        pi_tau0: mono.phi_tau0.m12 / (psi_a * psi_a),
        phi_tau0: mono.phi_tau0,
        det_j: jj.det,
        nondegenerate: jj.nondegenerate,
    })
}

/// Formats with `digits` significant digits in positional notation.
pub fn fmt_sig(x: f64, digits: usize) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let mag = x.abs().log10().floor() as i64;
    let decimals = (digits as i64 - 1 - mag).max(0) as usize;
    format!("{x:.decimals$}")
}
