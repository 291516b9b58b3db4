//! Dense row-major matrices and the Cholesky/triangular-solve kernels the
//! simulators and likelihoods are built on.  Sizes here are a few hundred at
//! most, so simple cache-friendly loops beat anything clever.

use super::NumericsError;

/// Dense row-major matrix of finite `f64` entries.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    /// Builds a matrix from row-major data; every entry must be finite.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, NumericsError> {
        if data.len() != rows * cols {
            return Err(NumericsError::Dimension {
                message: format!("{rows}x{cols} matrix needs {} entries, got {}", rows * cols, data.len()),
            });
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(NumericsError::NonFinite);
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    /// Builds an `n x n` matrix from a symmetric-friendly generator.
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Matrix { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        debug_assert!(i < self.rows && j < self.cols);
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i < self.rows && j < self.cols);
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// y = A x for a square or rectangular A.
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.cols);
        debug_assert_eq!(y.len(), self.rows);
        for (i, out) in y.iter_mut().enumerate() {
            *out = dot(self.row(i), x);
        }
    }

    fn check_symmetric(&self, func: &'static str) -> Result<(), NumericsError> {
        if self.rows != self.cols {
            return Err(NumericsError::Dimension {
                message: format!("{func} needs a square matrix, got {}x{}", self.rows, self.cols),
            });
        }
        let scale = self
            .data
            .iter()
            .fold(0.0f64, |acc, v| acc.max(v.abs()))
            .max(1.0);
        let tol = 1e-12 * scale;
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                if (self.get(i, j) - self.get(j, i)).abs() > tol {
                    return Err(NumericsError::NotSymmetric { tol });
                }
            }
        }
        Ok(())
    }
}

/// Unrolled dot product; the hot loop of every simulator and network pass.
#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let chunks = a.len() / 4;
    let (mut s0, mut s1, mut s2, mut s3) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for k in 0..chunks {
        let i = 4 * k;
        s0 = a[i].mul_add(b[i], s0);
        s1 = a[i + 1].mul_add(b[i + 1], s1);
        s2 = a[i + 2].mul_add(b[i + 2], s2);
        s3 = a[i + 3].mul_add(b[i + 3], s3);
    }
    let mut tail = 0.0;
    for i in 4 * chunks..a.len() {
        tail = a[i].mul_add(b[i], tail);
    }
    (s0 + s1) + (s2 + s3) + tail
}

/// Lower-triangular Cholesky factor of a symmetric positive definite matrix.
///
/// Fails with the 1-based pivot index on the first non-positive pivot.
pub fn cholesky(a: &Matrix) -> Result<Matrix, NumericsError> {
    a.check_symmetric("cholesky")?;
    let n = a.rows();
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut diag = a.get(j, j) - dot(&l.row(j)[..j], &l.row(j)[..j]);
        if diag <= 0.0 {
            return Err(NumericsError::NotPositiveDefinite { pivot: j + 1 });
        }
        diag = diag.sqrt();
        l.set(j, j, diag);
        for i in (j + 1)..n {
            let s = a.get(i, j) - dot(&l.row(i)[..j], &l.row(j)[..j]);
            l.set(i, j, s / diag);
        }
    }
    Ok(l)
}

/// Cholesky for positive *semi*-definite matrices: pivots within
/// `tol * diag` of zero produce a zero column instead of failing.  Needed by
/// simulators whose correlation matrices become singular at coincident
/// locations.
pub fn cholesky_psd(a: &Matrix, tol: f64) -> Result<Matrix, NumericsError> {
    a.check_symmetric("cholesky_psd")?;
    let n = a.rows();
    let scale = (0..n).fold(0.0f64, |acc, i| acc.max(a.get(i, i).abs())).max(1.0);
    let cut = tol * scale;
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let diag = a.get(j, j) - dot(&l.row(j)[..j], &l.row(j)[..j]);
        if diag < -cut {
            return Err(NumericsError::NotPositiveDefinite { pivot: j + 1 });
        }
        if diag <= cut {
            // Semi-definite direction; leave the column zero.
            continue;
        }
        let diag = diag.sqrt();
        l.set(j, j, diag);
        for i in (j + 1)..n {
            let s = a.get(i, j) - dot(&l.row(i)[..j], &l.row(j)[..j]);
            l.set(i, j, s / diag);
        }
    }
    Ok(l)
}

/// Solves L u = b for lower-triangular L.
pub fn forward_solve(l: &Matrix, b: &[f64]) -> Result<Vec<f64>, NumericsError> {
    let n = l.rows();
    if l.cols() != n || b.len() != n {
        return Err(NumericsError::Dimension {
            message: format!("forward_solve: L is {}x{}, b has {}", l.rows(), l.cols(), b.len()),
        });
    }
    let mut u = vec![0.0; n];
    for i in 0..n {
        let d = l.get(i, i);
        if d == 0.0 {
            return Err(NumericsError::SingularDiagonal { index: i });
        }
        u[i] = (b[i] - dot(&l.row(i)[..i], &u[..i])) / d;
    }
    Ok(u)
}
