//! Dense 2×2 real matrices.

use std::fmt;
use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};

use crate::systems::State;

/// Row-major 2×2 matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Matrix2 {
    pub m11: f64,
    pub m12: f64,
    pub m21: f64,
    pub m22: f64,
}

/// Eigenvalues of a 2×2 matrix.
///
/// Complex pairs are reported by their (common) modulus in both slots with
/// `complex` set, since the callers here only care about magnitudes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Eigen2 {
    pub lambda1: f64,
    pub lambda2: f64,
    pub complex: bool,
}

impl Matrix2 {
    pub const IDENTITY: Matrix2 = Matrix2::new(1.0, 0.0, 0.0, 1.0);
    pub const ZERO: Matrix2 = Matrix2::new(0.0, 0.0, 0.0, 0.0);

    pub const fn new(m11: f64, m12: f64, m21: f64, m22: f64) -> Self {
        Self { m11, m12, m21, m22 }
    }

    pub const fn diag(d1: f64, d2: f64) -> Self {
        Self::new(d1, 0.0, 0.0, d2)
    }

    /// Builds the matrix whose columns are `c1` and `c2`.
    pub fn from_columns(c1: State, c2: State) -> Self {
        Self::new(c1.x1, c2.x1, c1.x2, c2.x2)
    }

    pub fn column(&self, j: usize) -> State {
        match j {
            0 => State::new(self.m11, self.m21),
            1 => State::new(self.m12, self.m22),
            _ => panic!("column index {j} out of range for a 2x2 matrix"),
        }
    }

    pub fn det(&self) -> f64 {
        self.m11 * self.m22 - self.m12 * self.m21
    }

    pub fn trace(&self) -> f64 {
        self.m11 + self.m22
    }

    pub fn scale(&self, s: f64) -> Self {
        Self::new(self.m11 * s, self.m12 * s, self.m21 * s, self.m22 * s)
    }

    pub fn mul_vec(&self, v: State) -> State {
        State::new(
            self.m11 * v.x1 + self.m12 * v.x2,
            self.m21 * v.x1 + self.m22 * v.x2,
        )
    }

    pub fn is_finite(&self) -> bool {
        self.m11.is_finite() && self.m12.is_finite() && self.m21.is_finite() && self.m22.is_finite()
    }

    pub fn max_abs_diff(&self, other: &Matrix2) -> f64 {
        (self.m11 - other.m11)
            .abs()
            .max((self.m12 - other.m12).abs())
            .max((self.m21 - other.m21).abs())
            .max((self.m22 - other.m22).abs())
    }

    /// Closed-form eigenvalues, ordered so that `lambda1 >= lambda2` in the
    /// real case.
    pub fn eigenvalues(&self) -> Eigen2 {
        let half_tr = 0.5 * self.trace();
        let det = self.det();
        let disc = half_tr * half_tr - det;
        if disc >= 0.0 {
            let root = disc.sqrt();
            // Avoid cancellation in the smaller root.
            let big = if half_tr >= 0.0 { half_tr + root } else { half_tr - root };
            let small = if big != 0.0 { det / big } else { half_tr - root };
            let (l1, l2) = if big >= small { (big, small) } else { (small, big) };
            Eigen2 { lambda1: l1, lambda2: l2, complex: false }
        } else {
            let modulus = det.abs().sqrt();
            Eigen2 { lambda1: modulus, lambda2: modulus, complex: true }
        }
    }
}

impl Add for Matrix2 {
    type Output = Matrix2;
    fn add(self, o: Matrix2) -> Matrix2 {
        Matrix2::new(self.m11 + o.m11, self.m12 + o.m12, self.m21 + o.m21, self.m22 + o.m22)
    }
}

impl Sub for Matrix2 {
    type Output = Matrix2;
    fn sub(self, o: Matrix2) -> Matrix2 {
        Matrix2::new(self.m11 - o.m11, self.m12 - o.m12, self.m21 - o.m21, self.m22 - o.m22)
    }
}

impl Mul for Matrix2 {
    type Output = Matrix2;
    fn mul(self, o: Matrix2) -> Matrix2 {
        Matrix2::new(
            self.m11 * o.m11 + self.m12 * o.m21,
            self.m11 * o.m12 + self.m12 * o.m22,
            self.m21 * o.m11 + self.m22 * o.m21,
            self.m21 * o.m12 + self.m22 * o.m22,
        )
    }
}

impl fmt::Display for Matrix2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[[{}, {}], [{}, {}]]", self.m11, self.m12, self.m21, self.m22)
    }
}
