//! Small dense linear algebra: row-major matrices for the discrete generator
//! and Cholesky solves for the (at most 8x8) Gram systems.

use std::fmt::Write as _;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Real> DenseMatrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// `out = self * x`.
    pub fn matvec_into(&self, x: &[T], out: &mut [T]) {
        assert_eq!(x.len(), self.cols, "matvec: dimension mismatch");
        assert_eq!(out.len(), self.rows, "matvec: output dimension mismatch");
        for (i, o) in out.iter_mut().enumerate() {
            let row = self.row(i);
            let mut acc = T::zero();
            for (a, b) in row.iter().zip(x) {
                acc += *a * *b;
            }
            *o = acc;
        }
    }

    /// `self · other`.
    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols(), other.rows());
        let (m, n) = (self.rows(), other.cols());
        let mut out = Self::zeros(m, n);
        for i in 0..m {
            let row = self.row(i);
            let dst = out.row_mut(i);
            for (l, a) in row.iter().enumerate() {
                if *a == T::zero() {
                    continue;
                }
                for (d, b) in dst.iter_mut().zip(other.row(l)) {
                    *d += *a * *b;
                }
            }
        }
        out
    }

    /// `self^e` by repeated squaring.
    pub fn pow(&self, mut e: usize) -> Self {
        let n = self.rows();
        let mut result = Self::from_fn(n, n, |i, j| if i == j { T::one() } else { T::zero() });
        let mut base = self.clone();
        while e > 0 {
            if e & 1 == 1 {
                result = result.matmul(&base);
            }
            e >>= 1;
            if e > 0 {
                base = base.matmul(&base);
            }
        }
        result
    }

    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.rows];
        self.matvec_into(x, &mut out);
        out
    }

    /// Row-major CSV, one matrix row per line, 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut s = String::with_capacity(self.rows * self.cols * 24);
        for i in 0..self.rows {
            for (j, v) in self.row(i).iter().enumerate() {
                if j > 0 {
                    s.push(',');
                }
                let _ = write!(s, "{:.16e}", v.as_f64());
            }
            s.push('\n');
        }
        s
    }

    /// Estimates the spectral radius by power iteration: the geometric mean
    /// growth of `‖A^m x‖` over the second half of `iterations` steps. Works
    /// for dominant complex pairs, where the Rayleigh quotient oscillates.
    pub fn spectral_radius_estimate(&self, iterations: usize) -> T {
        assert_eq!(self.rows, self.cols);
        let n = self.rows;
        // Deterministic, non-symmetric start vector.
        let mut x: Vec<T> = (0..n)
            .map(|i| T::one() + T::lit(((i * 7919) % 101) as f64 / 101.0))
            .collect();
        let mut y = vec![T::zero(); n];
        let burn_in = iterations / 2;
        let mut log_growth = T::zero();
        let mut counted = 0usize;
        for it in 0..iterations {
            let norm = x.iter().map(|v| *v * *v).sum::<T>().sqrt();
            if norm == T::zero() {
                return T::zero();
            }
            for v in x.iter_mut() {
                *v /= norm;
            }
            self.matvec_into(&x, &mut y);
            std::mem::swap(&mut x, &mut y);
            if it >= burn_in {
                let grown = x.iter().map(|v| *v * *v).sum::<T>().sqrt();
                if grown > T::zero() {
                    log_growth += grown.ln();
                    counted += 1;
                }
            }
        }
        if counted == 0 {
            return T::zero();
        }
        (log_growth / T::from_usize_lossy(counted)).exp()
    }
}

/// Cholesky factor `L` (lower triangular, row-major) of a symmetric positive
/// definite matrix given row-major as `a` (dimension `m`).
pub fn cholesky<T: Real>(a: &[T], m: usize) -> Result<Vec<T>> {
    let mut l = vec![T::zero(); m * m];
    for i in 0..m {
        for j in 0..=i {
            let mut sum = a[i * m + j];
            for k in 0..j {
                sum -= l[i * m + k] * l[j * m + k];
            }
            if i == j {
                if sum <= T::zero() {
                    return Err(Error::NotPositiveDefinite);
                }
                l[i * m + i] = sum.sqrt();
            } else {
                l[i * m + j] = sum / l[j * m + j];
            }
        }
    }
    Ok(l)
}

/// Solves `L Lᵀ x = b` given the Cholesky factor.
pub fn cholesky_solve<T: Real>(l: &[T], m: usize, b: &[T]) -> Vec<T> {
    let mut y = vec![T::zero(); m];
    for i in 0..m {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i * m + k] * y[k];
        }
        y[i] = s / l[i * m + i];
    }
    let mut x = vec![T::zero(); m];
    for i in (0..m).rev() {
        let mut s = y[i];
        for k in i + 1..m {
            s -= l[k * m + i] * x[k];
        }
        x[i] = s / l[i * m + i];
    }
    x
}

/// 2-norm condition number of a symmetric matrix (row-major), computed in
/// double precision.
pub fn symmetric_condition_number<T: Real>(a: &[T], m: usize) -> f64 {
    if m == 0 {
        return 1.0;
    }
    let mat = DMatrix::from_fn(m, m, |i, j| a[i * m + j].as_f64());
    let eig = SymmetricEigen::new(mat);
    let (lo, hi) = eig
        .eigenvalues
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), &e| {
            (lo.min(e.abs()), hi.max(e.abs()))
        });
    if lo == 0.0 {
        f64::INFINITY
    } else {
        hi / lo
    }
}
