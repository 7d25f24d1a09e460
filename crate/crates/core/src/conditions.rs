//! Sampled checks of the Levinson–Smith (C_LS) existence hypotheses and the
//! De Castro uniqueness hypotheses.
//!
//! Every check runs on a finite grid, so a `true` flag means "no
//! counterexample among the samples", not a proof.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::quadrature::simpson_fn;
use crate::systems::GeneralizedLienard;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GridError {
    #[error("grid range [{0}, {1}] is empty or non-finite")]
    BadRange(f64, f64),
    #[error("grid resolution must be positive and finite, got {0}")]
    BadResolution(f64),
    #[error("x range must contain a positive part")]
    NoPositiveX,
}

/// Rectangular sampling grid over `(x, y)` = (position, velocity).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub x_range: (f64, f64),
    pub y_range: (f64, f64),
    pub resolution: f64,
}

impl Default for Grid {
    fn default() -> Self {
        Self { x_range: (-6.0, 6.0), y_range: (-6.0, 6.0), resolution: 1e-2 }
    }
}

impl Grid {
    pub fn validate(&self) -> Result<(), GridError> {
        for &(lo, hi) in &[self.x_range, self.y_range] {
            if !(lo.is_finite() && hi.is_finite() && hi > lo) {
                return Err(GridError::BadRange(lo, hi));
            }
        }
        if !(self.resolution.is_finite() && self.resolution > 0.0) {
            return Err(GridError::BadResolution(self.resolution));
        }
        if self.x_range.1 < self.resolution {
            return Err(GridError::NoPositiveX);
        }
        Ok(())
    }

    /// Integer multiples of the resolution inside `[lo, hi]`, so that 0 and
    /// values like 1.0 are hit exactly.
    fn axis(&self, (lo, hi): (f64, f64)) -> Vec<f64> {
        let r = self.resolution;
        let first = (lo / r - 1e-9).ceil() as i64;
        let last = (hi / r + 1e-9).floor() as i64;
        (first..=last).map(|k| k as f64 * r).collect()
    }

    pub fn xs(&self) -> Vec<f64> {
        self.axis(self.x_range)
    }

    pub fn ys(&self) -> Vec<f64> {
        self.axis(self.y_range)
    }

    /// Nonnegative magnitudes `k·resolution` up to the positive x edge.
    fn magnitudes(&self) -> Vec<f64> {
        self.axis((0.0, self.x_range.1))
    }

    pub fn refined(&self) -> Grid {
        Grid { resolution: self.resolution / 2.0, ..*self }
    }
}

/// A named hypothesis with its first sampled counterexample, if any.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Witness {
    pub condition: String,
    /// `(x, y)` of the counterexample; `y` is NaN where the condition only
    /// involves `x`.
    pub sample: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClsReport {
    pub psi_sign_ok: bool,
    pub psi_primitive_divergence_ok: bool,
    pub phi00: f64,
    pub phi00_negative: bool,
    /// Smallest sampled `x0` with `φ(x, y) ≥ 0` for all sampled `|x| ≥ x0`.
    pub x0: Option<f64>,
    /// `max(0, −min φ)` over `|x| ≤ x0`.
    pub m: Option<f64>,
    /// First scanned `x1` where `∫_{x0}^{x1} φ(x, y(x)) dx ≥ 10·M·x0` holds
    /// for every test function.
    pub x1: Option<f64>,
    pub integral_bound_ok: bool,
    pub witnesses: Vec<Witness>,
    pub grid: Grid,
}

impl ClsReport {
    pub fn all_ok(&self) -> bool {
        self.psi_sign_ok
            && self.psi_primitive_divergence_ok
            && self.phi00_negative
            && self.x0.is_some()
            && self.m.is_some()
            && self.integral_bound_ok
    }

    pub fn to_text(&self) -> String {
        let opt = |v: Option<f64>| v.map_or_else(|| "none".to_string(), |v| format!("{v:.7}"));
        let mut s = String::new();
        let _ = writeln!(s, "cls_psi_sign_ok: {}", self.psi_sign_ok);
        let _ = writeln!(s, "cls_psi_primitive_divergence_ok: {}", self.psi_primitive_divergence_ok);
        let _ = writeln!(s, "cls_phi00: {:.7}", self.phi00);
        let _ = writeln!(s, "cls_phi00_negative: {}", self.phi00_negative);
        let _ = writeln!(s, "cls_x0: {}", opt(self.x0));
        let _ = writeln!(s, "cls_M: {}", opt(self.m));
        let _ = writeln!(s, "cls_x1: {}", opt(self.x1));
        let _ = writeln!(s, "cls_integral_bound_ok: {}", self.integral_bound_ok);
        for w in &self.witnesses {
            if let Some((x, y)) = w.sample {
                let _ = writeln!(s, "cls_counterexample: {} fails at x={x}, y={y}", w.condition);
            }
        }
        let _ = writeln!(s, "cls_all_ok: {}", self.all_ok());
        s
    }
}

/// `Ψ(edge) ≥ 2·Ψ(edge/2)`: the primitive grows at least linearly over the
/// outer half of the range.
pub const PRIMITIVE_GROWTH_RATIO: f64 = 2.0;

/// Columnwise minimum of `φ(±m, y)` over sampled `y`, for each magnitude `m`.
fn column_minima(sys: &GeneralizedLienard, grid: &Grid) -> Vec<(f64, f64, f64)> {
    let ys = grid.ys();
    let (lo, hi) = grid.x_range;
    grid.magnitudes()
        .into_iter()
        .map(|m| {
            let mut worst = (f64::INFINITY, m, 0.0);
            for x in [m, -m] {
                if x < lo - 1e-12 || x > hi + 1e-12 {
                    continue;
                }
                for &y in &ys {
                    let v = sys.phi(x, y);
                    if v < worst.0 {
                        worst = (v, x, y);
                    }
                }
            }
            worst
        })
        .collect()
}

/// `φ(x, y) ≥ 0` at every sample with `|x| ≥ x0`.
pub fn nonnegative_beyond(sys: &GeneralizedLienard, grid: &Grid, x0: f64) -> bool {
    column_minima(sys, grid)
        .iter()
        .zip(grid.magnitudes())
        .filter(|(_, m)| *m >= x0 - 1e-12)
        .all(|((v, _, _), _)| *v >= 0.0)
}

/// `φ(x, y) ≥ −M` at every sample with `|x| ≤ x0`.
pub fn bounded_below_within(sys: &GeneralizedLienard, grid: &Grid, x0: f64, m: f64) -> bool {
    column_minima(sys, grid)
        .iter()
        .zip(grid.magnitudes())
        .filter(|(_, mag)| *mag <= x0 + 1e-12)
        .all(|((v, _, _), _)| *v >= -m)
}

/// Decreasing positive test functions `y(x)` on `[x0, x_end]`.
fn test_functions(grid: &Grid, x0: f64) -> Vec<Box<dyn Fn(f64) -> f64>> {
    let positives: Vec<f64> = grid.ys().into_iter().filter(|&y| y > 0.0).collect();
    let mut levels: Vec<f64> = Vec::new();
    if !positives.is_empty() {
        let stride = (positives.len() / 24).max(1);
        levels.extend(positives.iter().step_by(stride));
        let last = *positives.last().unwrap();
        if levels.last() != Some(&last) {
            levels.push(last);
        }
    }
    let span = 2.0 * (grid.x_range.1 - x0).max(grid.resolution);
    let mut family: Vec<Box<dyn Fn(f64) -> f64>> = Vec::new();
    for c in levels {
        family.push(Box::new(move |_x| c));
        family.push(Box::new(move |x| c * (1.0 - (x - x0) / span)));
        family.push(Box::new(move |x| c * (-(x - x0)).exp()));
    }
    family
}

/// Numerical check of the C_LS hypotheses on `grid`.
pub fn check_cls(sys: &GeneralizedLienard, grid: &Grid) -> Result<ClsReport, GridError> {
    grid.validate()?;
    let xs = grid.xs();
    let mut witnesses = Vec::new();

    // x·ψ(x) > 0 for x ≠ 0
    let sign_violation = xs.iter().copied().find(|&x| x != 0.0 && !(x * sys.psi(x) > 0.0));
    witnesses.push(Witness { condition: "x*psi(x) > 0".into(), sample: sign_violation.map(|x| (x, f64::NAN)) });
    let psi_sign_ok = sign_violation.is_none();

    // Ψ increasing away from 0 and growing at least linearly at both edges
    let psi = |s: f64| sys.psi(s);
    let primitive = |x: f64| simpson_fn(psi, 0.0, x, 2000);
    let mut divergence_violation = None;
    for edge in [grid.x_range.1, grid.x_range.0] {
        if edge == 0.0 {
            continue;
        }
        let (far, near) = (primitive(edge), primitive(edge / PRIMITIVE_GROWTH_RATIO));
        if !(near > 0.0 && far >= PRIMITIVE_GROWTH_RATIO * near * (1.0 - 1e-9)) {
            divergence_violation.get_or_insert((edge, f64::NAN));
        }
    }
    let r = grid.resolution;
    for w in xs.windows(2) {
        // Ψ(b) − Ψ(a) over one cell must have the sign of the outward direction
        let inc = simpson_fn(psi, w[0], w[1], 2);
        let outward = if w[0] >= 0.0 { inc > 0.0 } else if w[1] <= 0.0 { inc < 0.0 } else { true };
        if !outward {
            divergence_violation.get_or_insert((w[0] + 0.5 * r, f64::NAN));
            break;
        }
    }
    witnesses.push(Witness { condition: "Psi increasing and unbounded".into(), sample: divergence_violation });
    let psi_primitive_divergence_ok = divergence_violation.is_none();

    let phi00 = sys.phi(0.0, 0.0);
    let phi00_negative = phi00 < 0.0;
    witnesses.push(Witness {
        condition: "phi(0,0) < 0".into(),
        sample: (!phi00_negative).then_some((0.0, 0.0)),
    });

    // x0: suffix scan of columnwise minima
    let cols = column_minima(sys, grid);
    let mags = grid.magnitudes();
    let mut x0_index = None;
    for i in (0..cols.len()).rev() {
        if cols[i].0 >= 0.0 {
            x0_index = Some(i);
        } else {
            break;
        }
    }
    let x0 = x0_index.map(|i| mags[i]);
    witnesses.push(Witness {
        condition: "phi >= 0 for |x| >= x0".into(),
        sample: if x0.is_none() { cols.last().map(|c| (c.1, c.2)) } else { None },
    });

    let m = x0_index.map(|i| cols[..=i].iter().map(|c| c.0).fold(f64::INFINITY, f64::min)).map(|min| (-min).max(0.0));

    // x1 scan
    let (x1, integral_bound_ok) = match (x0, m) {
        (Some(x0), Some(m)) => scan_x1(sys, grid, x0, m),
        _ => (None, false),
    };
    witnesses.push(Witness {
        condition: "integral of phi over [x0, x1] >= 10*M*x0".into(),
        sample: (!integral_bound_ok).then_some((grid.x_range.1, f64::NAN)),
    });

    Ok(ClsReport {
        psi_sign_ok,
        psi_primitive_divergence_ok,
        phi00,
        phi00_negative,
        x0,
        m,
        x1,
        integral_bound_ok,
        witnesses,
        grid: *grid,
    })
}

fn scan_x1(sys: &GeneralizedLienard, grid: &Grid, x0: f64, m: f64) -> (Option<f64>, bool) {
    let target = 10.0 * m * x0;
    let nodes: Vec<f64> = grid.magnitudes().into_iter().filter(|&x| x >= x0 - 1e-12).collect();
    if nodes.len() < 2 {
        return (None, false);
    }
    let mut x1: f64 = nodes[1];
    for y in test_functions(grid, x0) {
        let mut h = 0.0;
        let mut hit = None;
        for w in nodes.windows(2) {
            h += simpson_fn(|x| sys.phi(x, y(x)), w[0], w[1], 2);
            if h >= target {
                hit = Some(w[1]);
                break;
            }
        }
        match hit {
            Some(x) => x1 = x1.max(x),
            None => return (None, false),
        }
    }
    (Some(x1), true)
}

/// `x1 = 1 + 60^{1/3}`: solves `(x1 − 1)³/6 = 10·M·x0` with `x0 = M = 1`.
pub fn cls_example_bound() -> f64 {
    1.0 + 60f64.cbrt()
}

/// `∫₁^{x1} φ(x, y) dx` for the example damping at constant `y`, in closed form.
pub fn example_damping_integral(x1: f64, y: f64) -> f64 {
    let prim = |x: f64| 2.0 / 3.0 * x * x * x + x * x * y + x * (y * y - 1.0);
    prim(x1) - prim(1.0)
}

/// `(x1 − 1)³/6`, the lower bound of the example damping integral.
pub fn example_integral_lower_bound(x1: f64) -> f64 {
    (x1 - 1.0).powi(3) / 6.0
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeCastroReport {
    pub psi_is_identity: bool,
    /// `φ` nondecreasing along every sampled ray from the origin.
    pub phi_monotone_ok: bool,
    /// Up to [`MAX_REPORTED`] ray violations `(x, y, x', y')` with
    /// `φ(x', y') < φ(x, y)` and `(x', y')` further out on the ray.
    pub violations: Vec<(f64, f64, f64, f64)>,
    /// Stronger, informational: `φ` nondecreasing in `|x|` and in `|y|`
    /// separately within each quadrant.
    pub componentwise_monotone: bool,
    pub componentwise_violations: Vec<(f64, f64, f64, f64)>,
    pub psi_identity_witness: Option<f64>,
}

impl DeCastroReport {
    pub fn all_ok(&self) -> bool {
        self.psi_is_identity && self.phi_monotone_ok
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "decastro_psi_is_identity: {}", self.psi_is_identity);
        let _ = writeln!(s, "decastro_phi_monotone_ok: {}", self.phi_monotone_ok);
        let _ = writeln!(s, "decastro_ray_violations: {}", self.violations.len());
        if let Some(v) = self.violations.first() {
            let _ = writeln!(s, "decastro_ray_witness: phi({}, {}) > phi({}, {})", v.0, v.1, v.2, v.3);
        }
        let _ = writeln!(s, "decastro_componentwise_monotone: {}", self.componentwise_monotone);
        if let Some(v) = self.componentwise_violations.first() {
            let _ = writeln!(s, "decastro_componentwise_witness: phi({}, {}) > phi({}, {})", v.0, v.1, v.2, v.3);
        }
        let _ = writeln!(s, "decastro_all_ok: {}", self.all_ok());
        s
    }
}

pub const MAX_REPORTED: usize = 20;
/// Number of sampled ray directions.
pub const RAY_COUNT: usize = 720;
/// Allowed decrease (relative, floored at 1) before a step counts as a
/// violation.
const MONOTONE_SLACK: f64 = 1e-12;

fn decreases(before: f64, after: f64) -> bool {
    after < before - MONOTONE_SLACK * before.abs().max(1.0)
}

/// Numerical check of the De Castro hypotheses on `grid`.
pub fn check_de_castro(sys: &GeneralizedLienard, grid: &Grid) -> Result<DeCastroReport, GridError> {
    grid.validate()?;
    let xs = grid.xs();
    let ys = grid.ys();

    let psi_identity_witness = xs.iter().copied().find(|&x| (sys.psi(x) - x).abs() > 1e-12);

    // rays from the origin, stepped by the grid resolution until they leave
    // the box
    let (xlo, xhi) = grid.x_range;
    let (ylo, yhi) = grid.y_range;
    let inside = |x: f64, y: f64| x >= xlo && x <= xhi && y >= ylo && y <= yhi;
    let mut violations = Vec::new();
    let mut ray_ok = true;
    for k in 0..RAY_COUNT {
        let theta = 2.0 * std::f64::consts::PI * k as f64 / RAY_COUNT as f64;
        let (dx, dy) = (theta.cos(), theta.sin());
        let mut prev = (0.0, 0.0, sys.phi(0.0, 0.0));
        let mut j = 1;
        loop {
            let r = j as f64 * grid.resolution;
            let (x, y) = (r * dx, r * dy);
            if !inside(x, y) {
                break;
            }
            let v = sys.phi(x, y);
            if decreases(prev.2, v) {
                ray_ok = false;
                if violations.len() < MAX_REPORTED {
                    violations.push((prev.0, prev.1, x, y));
                }
            }
            prev = (x, y, v);
            j += 1;
        }
    }

    // componentwise: neighbours one grid step further from each axis
    let mut componentwise_violations = Vec::new();
    let mut componentwise_monotone = true;
    for (i, &x) in xs.iter().enumerate() {
        for (j, &y) in ys.iter().enumerate() {
            let v = sys.phi(x, y);
            let x_out = if x > 0.0 { xs.get(i + 1) } else if x < 0.0 { i.checked_sub(1).map(|k| &xs[k]) } else { None };
            let y_out = if y > 0.0 { ys.get(j + 1) } else if y < 0.0 { j.checked_sub(1).map(|k| &ys[k]) } else { None };
            for (nx, ny) in [(x_out.copied(), Some(y)), (Some(x), y_out.copied())] {
                if let (Some(nx), Some(ny)) = (nx, ny) {
                    if decreases(v, sys.phi(nx, ny)) {
                        componentwise_monotone = false;
                        if componentwise_violations.len() < MAX_REPORTED {
                            componentwise_violations.push((x, y, nx, ny));
                        }
                    }
                }
            }
        }
    }

    Ok(DeCastroReport {
        psi_is_identity: psi_identity_witness.is_none(),
        phi_monotone_ok: ray_ok,
        violations,
        componentwise_monotone,
        componentwise_violations,
        psi_identity_witness,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::systems::example_system;

    fn small_grid() -> Grid {
        Grid { x_range: (-3.0, 3.0), y_range: (-3.0, 3.0), resolution: 0.05 }
    }

    #[test]
    fn grid_axes_hit_exact_values() {
        let g = Grid::default();
        let xs = g.xs();
        assert_eq!(xs.len(), 1201);
        assert!(xs.contains(&0.0));
        assert!(xs.contains(&1.0));
        assert_eq!(*xs.first().unwrap(), -6.0);
        assert_eq!(*xs.last().unwrap(), 6.0);
    }

    #[test]
    fn grid_validation() {
        assert!(Grid { resolution: 0.0, ..Grid::default() }.validate().is_err());
        assert!(Grid { x_range: (1.0, -1.0), ..Grid::default() }.validate().is_err());
        assert!(Grid { x_range: (-2.0, 0.0), ..Grid::default() }.validate().is_err());
        assert!(check_cls(&example_system(), &Grid { resolution: f64::NAN, ..Grid::default() }).is_err());
    }

    #[test]
    fn harmonic_fails_phi00() {
        let r = check_cls(&GeneralizedLienard::harmonic(), &small_grid()).unwrap();
        assert!(!r.phi00_negative);
        assert_eq!(r.phi00, 0.0);
        assert!(!r.all_ok());
        assert!(r.psi_sign_ok);
    }

    #[test]
    fn wrong_sign_psi_has_witness() {
        let sys = GeneralizedLienard::new("bad", |u, v| u * u + v * v - 1.0, |u| -u);
        let r = check_cls(&sys, &small_grid()).unwrap();
        assert!(!r.psi_sign_ok);
        assert!(r.witnesses[0].sample.is_some());
    }

    #[test]
    fn bounded_primitive_fails_divergence() {
        let sys = GeneralizedLienard::new("sat", |u, v| u * u + v * v - 1.0, |u| u * (-u * u).exp());
        let r = check_cls(&sys, &small_grid()).unwrap();
        assert!(r.psi_sign_ok);
        assert!(!r.psi_primitive_divergence_ok);
    }

    #[test]
    fn example_bound_arithmetic() {
        let x1 = cls_example_bound();
        assert_eq!(x1, 1.0 + 60f64.cbrt());
        assert!((x1 - 4.914_867_641_168_864).abs() < 1e-14);
        assert!((example_integral_lower_bound(x1) - 10.0).abs() < 1e-12);
        // at y = 0 the closed form dominates the bound
        assert!(example_damping_integral(x1, 0.0) >= 10.0);
        let quad = simpson_fn(|x| 2.0 * x * x - 1.0, 1.0, x1, 200);
        assert!((quad - example_damping_integral(x1, 0.0)).abs() < 1e-10);
    }

    #[test]
    fn de_castro_example_and_counterexamples() {
        let g = small_grid();
        let r = check_de_castro(&example_system(), &g).unwrap();
        assert!(r.psi_is_identity && r.phi_monotone_ok, "{}", r.to_text());
        // the componentwise reading fails: phi(1, 0) = 1 > phi(1, -0.5) = 0.25
        assert!(!r.componentwise_monotone);

        let vdp = check_de_castro(&GeneralizedLienard::van_der_pol(1.0), &g).unwrap();
        assert!(vdp.all_ok());
        assert!(vdp.componentwise_monotone);

        let bad = GeneralizedLienard::new("neg", |u, _| -u * u, |u| u);
        let r = check_de_castro(&bad, &g).unwrap();
        assert!(!r.phi_monotone_ok);
        assert!(!r.violations.is_empty());

        let not_identity = GeneralizedLienard::new("cubic", |u, v| u * u + v * v - 1.0, |u| u + u * u * u);
        let r = check_de_castro(&not_identity, &g).unwrap();
        assert!(!r.psi_is_identity);
        assert!(r.psi_identity_witness.is_some());
    }
}
