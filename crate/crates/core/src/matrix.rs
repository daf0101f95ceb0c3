//! Small dense square matrices (n <= 3) and their spectral norm.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::geometry::{Point, MAX_DIM};

#[derive(Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "Vec<Vec<f64>>", try_from = "Vec<Vec<f64>>")]
pub struct Matrix {
    dim: usize,
    m: [[f64; MAX_DIM]; MAX_DIM],
}

impl Matrix {
    pub fn zeros(dim: usize) -> Self {
        Self { dim, m: [[0.0; MAX_DIM]; MAX_DIM] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut out = Self::zeros(dim);
        for i in 0..dim {
            out.m[i][i] = 1.0;
        }
        out
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Option<Self> {
        let dim = rows.len();
        if !(2..=MAX_DIM).contains(&dim) || rows.iter().any(|r| r.len() != dim) {
            return None;
        }
        let mut out = Self::zeros(dim);
        for (i, row) in rows.iter().enumerate() {
            out.m[i][..dim].copy_from_slice(row);
        }
        Some(out)
    }

    /// Outer product u v^T.
    pub fn outer(u: &Point, v: &Point) -> Self {
        let dim = u.dim();
        let mut out = Self::zeros(dim);
        for i in 0..dim {
            for j in 0..dim {
                out.m[i][j] = u.get(i) * v.get(j);
            }
        }
        out
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.m[i][j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.m[i][j] = v;
    }

    pub fn scale(mut self, s: f64) -> Self {
        self.m.iter_mut().flatten().for_each(|v| *v *= s);
        self
    }

    pub fn add(mut self, other: &Matrix) -> Self {
        for i in 0..self.dim {
            for j in 0..self.dim {
                self.m[i][j] += other.m[i][j];
            }
        }
        self
    }

    pub fn transpose(&self) -> Self {
        let mut out = Self::zeros(self.dim);
        for i in 0..self.dim {
            for j in 0..self.dim {
                out.m[i][j] = self.m[j][i];
            }
        }
        out
    }

    pub fn mul(&self, other: &Matrix) -> Self {
        let mut out = Self::zeros(self.dim);
        for i in 0..self.dim {
            for j in 0..self.dim {
                out.m[i][j] = (0..self.dim).map(|k| self.m[i][k] * other.m[k][j]).sum();
            }
        }
        out
    }

    pub fn apply(&self, x: &Point) -> Point {
        let mut c = [0.0; MAX_DIM];
        for (i, slot) in c.iter_mut().enumerate().take(self.dim) {
            *slot = (0..self.dim).map(|k| self.m[i][k] * x.get(k)).sum();
        }
        Point::from_array(c, self.dim)
    }

    pub fn det(&self) -> f64 {
        let m = &self.m;
        match self.dim {
            2 => m[0][0] * m[1][1] - m[0][1] * m[1][0],
            _ => {
                m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
                    - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
                    + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
            }
        }
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.m[i][i]).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.m.iter().flatten().all(|v| *v == 0.0)
    }

    pub fn max_abs(&self) -> f64 {
        self.m.iter().flatten().fold(0.0, |a, v| a.max(v.abs()))
    }

    /// Solve `self * x = b` by Cramer's rule; `None` when singular.
    pub fn solve(&self, b: &Point) -> Option<Point> {
        let d = self.det();
        if d == 0.0 || !d.is_finite() {
            return None;
        }
        let mut c = [0.0; MAX_DIM];
        for (col, slot) in c.iter_mut().enumerate().take(self.dim) {
            let mut mc = *self;
            for row in 0..self.dim {
                mc.m[row][col] = b.get(row);
            }
            *slot = mc.det() / d;
        }
        Some(Point::from_array(c, self.dim))
    }

    /// Largest eigenvalue of the symmetric matrix `self`.
    fn max_symmetric_eigenvalue(&self) -> f64 {
        let g = &self.m;
        match self.dim {
            2 => {
                let half_tr = 0.5 * (g[0][0] + g[1][1]);
                let half_gap = (0.25 * (g[0][0] - g[1][1]).powi(2) + g[0][1] * g[0][1]).sqrt();
                half_tr + half_gap
            }
            _ => {
                // Cyclic Jacobi rotations; accurate for clustered eigenvalues.
                let mut a = *g;
                for _ in 0..32 {
                    let off = a[0][1].abs() + a[0][2].abs() + a[1][2].abs();
                    let diag = a[0][0].abs() + a[1][1].abs() + a[2][2].abs();
                    if off <= 1e-300 || off <= f64::EPSILON * 1e-3 * diag {
                        break;
                    }
                    for (p, q) in [(0, 1), (0, 2), (1, 2)] {
                        if a[p][q] == 0.0 {
                            continue;
                        }
                        let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                        let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                        let t = if theta == 0.0 { 1.0 } else { t };
                        let c = 1.0 / (t * t + 1.0).sqrt();
                        let s = t * c;
                        for k in 0..3 {
                            let (akp, akq) = (a[k][p], a[k][q]);
                            a[k][p] = c * akp - s * akq;
                            a[k][q] = s * akp + c * akq;
                        }
                        for k in 0..3 {
                            let (apk, aqk) = (a[p][k], a[q][k]);
                            a[p][k] = c * apk - s * aqk;
                            a[q][k] = s * apk + c * aqk;
                        }
                    }
                }
                a[0][0].max(a[1][1]).max(a[2][2])
            }
        }
    }

    /// Spectral norm: square root of the top eigenvalue of the Gram matrix.
    pub fn operator_norm(&self) -> f64 {
        let gram = self.transpose().mul(self);
        gram.max_symmetric_eigenvalue().max(0.0).sqrt()
    }
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows: Vec<&[f64]> = (0..self.dim).map(|i| &self.m[i][..self.dim]).collect();
        write!(f, "{rows:?}")
    }
}

impl From<Matrix> for Vec<Vec<f64>> {
    fn from(m: Matrix) -> Self {
        (0..m.dim).map(|i| m.m[i][..m.dim].to_vec()).collect()
    }
}

impl TryFrom<Vec<Vec<f64>>> for Matrix {
    type Error = String;
    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self, String> {
        Matrix::from_rows(&rows).ok_or_else(|| "matrix must be square with 2 or 3 rows".to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, SVD};
    use proptest::prelude::*;

    fn svd_norm(m: &Matrix) -> f64 {
        let n = m.dim();
        let dm = DMatrix::from_fn(n, n, |i, j| m.get(i, j));
        SVD::new(dm, false, false).singular_values.max()
    }

    #[test]
    fn diagonal_norms() {
        let m = Matrix::from_rows(&[vec![3.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert_eq!(m.operator_norm(), 3.0);
        let m = Matrix::from_rows(&[vec![1.0, 0.0, 0.0], vec![0.0, -5.0, 0.0], vec![0.0, 0.0, 2.0]]).unwrap();
        assert_eq!(m.operator_norm(), 5.0);
        assert_eq!(Matrix::zeros(3).operator_norm(), 0.0);
    }

    #[test]
    fn solve_and_det() {
        let m = Matrix::from_rows(&[vec![2.0, 1.0, 0.0], vec![0.0, 3.0, 1.0], vec![1.0, 0.0, 4.0]]).unwrap();
        assert!((m.det() - 25.0).abs() < 1e-12);
        let b = Point::new(&[1.0, 2.0, 3.0]).unwrap();
        let x = m.solve(&b).unwrap();
        let back = m.apply(&x);
        assert!(back.distance(&b) < 1e-12);
        assert!(Matrix::zeros(2).solve(&Point::new(&[1.0, 1.0]).unwrap()).is_none());
    }

    proptest! {
        #[test]
        fn operator_norm_matches_svd(entries in proptest::collection::vec(-10.0f64..10.0, 9), n in 2usize..=3) {
            let rows: Vec<Vec<f64>> = (0..n).map(|i| entries[i * 3..i * 3 + n].to_vec()).collect();
            let m = Matrix::from_rows(&rows).unwrap();
            let ours = m.operator_norm();
            let oracle = svd_norm(&m);
            prop_assert!((ours - oracle).abs() <= 1e-10 * oracle.max(1.0), "{} vs {}", ours, oracle);
        }
    }
}
