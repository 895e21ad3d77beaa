//! Periodic block-tridiagonal systems with 2×2 blocks.
//!
//! Row `j` reads `L_j X_{j−1} + D_j X_j + U_j X_{j+1} = r_j` with indices
//! taken mod `n`. Rows `0..n−1` are eliminated by block Thomas with the
//! last unknown carried symbolically, `X_j = y_j + Z_j X_{n−1}`, and the
//! final row closes the corner.

use crate::error::{Error, Result};
use crate::linalg::{Mat2, Spinor, ZERO};

#[derive(Debug, Clone, PartialEq)]
pub struct CyclicBlockTridiag {
    pub lower: Vec<Mat2>,
    pub diag: Vec<Mat2>,
    pub upper: Vec<Mat2>,
}

fn sub(a: Spinor, b: Spinor) -> Spinor {
    [a[0] - b[0], a[1] - b[1]]
}

fn add(a: Spinor, b: Spinor) -> Spinor {
    [a[0] + b[0], a[1] + b[1]]
}

impl CyclicBlockTridiag {
    pub fn new(lower: Vec<Mat2>, diag: Vec<Mat2>, upper: Vec<Mat2>) -> Result<Self> {
        let n = diag.len();
        if n < 3 || lower.len() != n || upper.len() != n {
            return Err(Error::InvalidParameter(format!(
                "cyclic system needs n >= 3 rows with matching bands, got {}/{}/{}",
                lower.len(),
                n,
                upper.len()
            )));
        }
        Ok(CyclicBlockTridiag { lower, diag, upper })
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn apply(&self, x: &[Spinor]) -> Vec<Spinor> {
        let n = self.len();
        (0..n)
            .map(|j| {
                let lo = self.lower[j].apply(&x[(j + n - 1) % n]);
                let mid = self.diag[j].apply(&x[j]);
                let up = self.upper[j].apply(&x[(j + 1) % n]);
                add(add(lo, mid), up)
            })
            .collect()
    }

    pub fn solve(&self, rhs: &[Spinor]) -> Result<Vec<Spinor>> {
        let n = self.len();
        if rhs.len() != n {
            return Err(Error::InvalidParameter(format!("rhs has {} rows, system has {n}", rhs.len())));
        }
        let m = n - 1;
        let (l, d, u) = (&self.lower, &self.diag, &self.upper);

        // forward sweep over rows 0..m with two right-hand sides: r and the corner columns
        let mut cp = vec![Mat2::zero(); m];
        let mut yp = vec![[ZERO; 2]; m];
        let mut zp = vec![Mat2::zero(); m];
        let mut e = vec![Mat2::zero(); m];
        e[0] = -l[0];
        e[m - 1] = e[m - 1] - u[m - 1];
        for i in 0..m {
            let (s, ry, rz) = if i == 0 {
                (d[0], rhs[0], e[0])
            } else {
                (
                    d[i] - l[i] * cp[i - 1],
                    sub(rhs[i], l[i].apply(&yp[i - 1])),
                    e[i] - l[i] * zp[i - 1],
                )
            };
            let si = s.inverse().ok_or(Error::LinearSolveFailure { row: i })?;
            if i + 1 < m {
                cp[i] = si * u[i];
            }
            yp[i] = si.apply(&ry);
            zp[i] = si * rz;
        }
        for i in (0..m - 1).rev() {
            yp[i] = sub(yp[i], cp[i].apply(&yp[i + 1]));
            zp[i] = zp[i] - cp[i] * zp[i + 1];
        }

        let last = n - 1;
        let corner = d[last] + l[last] * zp[m - 1] + u[last] * zp[0];
        let r_last = sub(sub(rhs[last], l[last].apply(&yp[m - 1])), u[last].apply(&yp[0]));
        let x_last = corner.inverse().ok_or(Error::LinearSolveFailure { row: last })?.apply(&r_last);

        let mut x: Vec<Spinor> = (0..m).map(|j| add(yp[j], zp[j].apply(&x_last))).collect();
        x.push(x_last);
        if x.iter().any(|v| !(v[0].is_finite() && v[1].is_finite())) {
            return Err(Error::LinearSolveFailure { row: last });
        }
        Ok(x)
    }
}
