//! Fixed-size 2×2 complex matrices and two-component spinors.
//!
//! Every operator in the 1D model acts on one node's spinor at a time, so
//! a heap-free `[[Complex64; 2]; 2]` wrapper covers all the algebra needed
//! by the solvers (mode propagators, pointwise flows, block eliminations).

use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;

pub type C64 = Complex64;

/// One node value `(φ1, φ2)`.
pub type Spinor = [C64; 2];

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat2(pub [[C64; 2]; 2]);

impl Mat2 {
    pub const fn new(a: C64, b: C64, c: C64, d: C64) -> Self {
        Mat2([[a, b], [c, d]])
    }

    pub fn real(a: f64, b: f64, c: f64, d: f64) -> Self {
        Mat2::new(a.into(), b.into(), c.into(), d.into())
    }

    pub fn from_real(m: [[f64; 2]; 2]) -> Self {
        Mat2::real(m[0][0], m[0][1], m[1][0], m[1][1])
    }

    pub const fn zero() -> Self {
        Mat2([[ZERO, ZERO], [ZERO, ZERO]])
    }

    pub const fn identity() -> Self {
        Mat2([[ONE, ZERO], [ZERO, ONE]])
    }

    pub fn diag(a: C64, d: C64) -> Self {
        Mat2::new(a, ZERO, ZERO, d)
    }

    pub fn sigma1() -> Self {
        Mat2::new(ZERO, ONE, ONE, ZERO)
    }

    pub fn sigma2() -> Self {
        Mat2::new(ZERO, -I, I, ZERO)
    }

    pub fn sigma3() -> Self {
        Mat2::new(ONE, ZERO, ZERO, -ONE)
    }

    pub fn scale(self, s: C64) -> Self {
        let m = self.0;
        Mat2::new(m[0][0] * s, m[0][1] * s, m[1][0] * s, m[1][1] * s)
    }

    pub fn scale_re(self, s: f64) -> Self {
        self.scale(C64::new(s, 0.0))
    }

    pub fn adjoint(self) -> Self {
        let m = self.0;
        Mat2::new(m[0][0].conj(), m[1][0].conj(), m[0][1].conj(), m[1][1].conj())
    }

    pub fn transpose(self) -> Self {
        let m = self.0;
        Mat2::new(m[0][0], m[1][0], m[0][1], m[1][1])
    }

    pub fn det(self) -> C64 {
        let m = self.0;
        m[0][0] * m[1][1] - m[0][1] * m[1][0]
    }

    pub fn trace(self) -> C64 {
        self.0[0][0] + self.0[1][1]
    }

    /// `None` when the determinant underflows relative to the entries.
    pub fn inverse(self) -> Option<Self> {
        let det = self.det();
        let m = self.0;
        let scale = m.iter().flatten().map(|z| z.l1_norm()).fold(f64::MIN_POSITIVE, f64::max);
        if !(det.l1_norm() > 1e-300 * scale * scale) || !det.is_finite() {
            return None;
        }
        let inv = det.inv();
        Some(Mat2::new(m[1][1] * inv, -m[0][1] * inv, -m[1][0] * inv, m[0][0] * inv))
    }

    pub fn apply(&self, v: &Spinor) -> Spinor {
        let m = &self.0;
        [m[0][0] * v[0] + m[0][1] * v[1], m[1][0] * v[0] + m[1][1] * v[1]]
    }

    pub fn max_abs(self) -> f64 {
        self.0.iter().flatten().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn max_abs_diff(self, other: Mat2) -> f64 {
        (self - other).max_abs()
    }

    /// Largest singular value.
    pub fn spectral_norm(self) -> f64 {
        let g = self.adjoint() * self;
        let tr = g.trace().re;
        let det = g.det().re;
        let disc = (tr * tr - 4.0 * det).max(0.0).sqrt();
        (0.5 * (tr + disc)).max(0.0).sqrt()
    }

    pub fn is_hermitian(self, tol: f64) -> bool {
        self.max_abs_diff(self.adjoint()) <= tol
    }
}

impl Add for Mat2 {
    type Output = Mat2;
    fn add(self, o: Mat2) -> Mat2 {
        let (a, b) = (self.0, o.0);
        Mat2::new(a[0][0] + b[0][0], a[0][1] + b[0][1], a[1][0] + b[1][0], a[1][1] + b[1][1])
    }
}

impl Sub for Mat2 {
    type Output = Mat2;
    fn sub(self, o: Mat2) -> Mat2 {
        let (a, b) = (self.0, o.0);
        Mat2::new(a[0][0] - b[0][0], a[0][1] - b[0][1], a[1][0] - b[1][0], a[1][1] - b[1][1])
    }
}

impl Neg for Mat2 {
    type Output = Mat2;
    fn neg(self) -> Mat2 {
        self.scale_re(-1.0)
    }
}

impl Mul for Mat2 {
    type Output = Mat2;
    fn mul(self, o: Mat2) -> Mat2 {
        let (a, b) = (self.0, o.0);
        Mat2::new(
            a[0][0] * b[0][0] + a[0][1] * b[1][0],
            a[0][0] * b[0][1] + a[0][1] * b[1][1],
            a[1][0] * b[0][0] + a[1][1] * b[1][0],
            a[1][0] * b[0][1] + a[1][1] * b[1][1],
        )
    }
}

pub fn spinor_norm_sqr(v: &Spinor) -> f64 {
    v[0].norm_sqr() + v[1].norm_sqr()
}

/// `v* w`
pub fn inner(v: &Spinor, w: &Spinor) -> C64 {
    v[0].conj() * w[0] + v[1].conj() * w[1]
}

/// `v* σ3 v = |v1|² − |v2|²`
pub fn sigma3_form(v: &Spinor) -> f64 {
    v[0].norm_sqr() - v[1].norm_sqr()
}

/// `v* σ1 v = 2 Re(v̄1 v2)`
pub fn sigma1_form(v: &Spinor) -> f64 {
    2.0 * (v[0].conj() * v[1]).re
}
