//! Dense complex matrices and the numerical primitives the rest of the
//! crate is built on: Hermitian eigendecomposition, positive square roots,
//! singular values, span ranks and least squares. Everything is plain f64
//! pairs; matrices are row-major.

mod eig;
mod svd;

pub use eig::{herm_eig, op_norm, psd_inv_sqrt, psd_sqrt, EigDecomposition};
pub use svd::{least_squares, span_rank, svd, PinvSolver, Svd};

use crate::error::{Error, Result};
use num_complex::Complex64;
use std::fmt;
use std::ops::{Add, Index, Mul, Sub};

/// Shorthand for a complex scalar.
pub fn c64(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Numerical thresholds used throughout. `eq_tol` governs equality and
/// residual checks, `rank_tol` governs rank decisions relative to the
/// largest singular value.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Tolerance {
    pub eq_tol: f64,
    pub rank_tol: f64,
}

impl Tolerance {
    pub fn new(eq_tol: f64, rank_tol: f64) -> Result<Self> {
        if !(eq_tol > 0.0 && eq_tol < 1.0) {
            return Err(Error::InvalidTolerance("eq_tol must lie in (0, 1)"));
        }
        if !(rank_tol > 0.0 && rank_tol < 1.0) {
            return Err(Error::InvalidTolerance("rank_tol must lie in (0, 1)"));
        }
        Ok(Tolerance { eq_tol, rank_tol })
    }
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance {
            eq_tol: 1e-9,
            rank_tol: 1e-10,
        }
    }
}

/// Dense complex matrix, row-major. All entries are finite; the checked
/// constructors enforce this.
#[derive(Debug, Clone, PartialEq)]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<Complex64>,
}

impl CMatrix {
    pub fn new(rows: usize, cols: usize, entries: Vec<Complex64>) -> Result<Self> {
        if entries.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                context: "CMatrix::new",
                expected: format!("{} entries", rows * cols),
                got: format!("{}", entries.len()),
            });
        }
        if entries.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFiniteEntry);
        }
        Ok(CMatrix {
            rows,
            cols,
            entries,
        })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut entries = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                entries.push(f(i, j));
            }
        }
        CMatrix {
            rows,
            cols,
            entries,
        }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        CMatrix {
            rows,
            cols,
            entries: vec![Complex64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |i, j| {
            if i == j {
                c64(1.0, 0.0)
            } else {
                c64(0.0, 0.0)
            }
        })
    }

    /// Build from rows of real entries; convenient in tests.
    pub fn from_real_rows(rows: &[Vec<f64>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        assert!(rows.iter().all(|row| row.len() == c), "ragged rows");
        Self::from_fn(r, c, |i, j| c64(rows[i][j], 0.0))
    }

    pub fn from_diag(values: &[f64]) -> Self {
        let n = values.len();
        Self::from_fn(n, n, |i, j| {
            if i == j {
                c64(values[i], 0.0)
            } else {
                c64(0.0, 0.0)
            }
        })
    }

    /// Elementary matrix with a single 1 at (i, j).
    pub fn unit(rows: usize, cols: usize, i: usize, j: usize) -> Self {
        let mut m = Self::zeros(rows, cols);
        m.set(i, j, c64(1.0, 0.0));
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.rows == 0 || self.cols == 0
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.entries[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, value: Complex64) {
        self.entries[i * self.cols + j] = value;
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self.get(j, i).conj())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    pub fn conj(&self) -> Self {
        Self::from_fn(self.rows, self.cols, |i, j| self.get(i, j).conj())
    }

    pub fn scale(&self, factor: Complex64) -> Self {
        Self::from_fn(self.rows, self.cols, |i, j| self.get(i, j) * factor)
    }

    pub fn scale_re(&self, factor: f64) -> Self {
        self.scale(c64(factor, 0.0))
    }

    pub fn matmul(&self, other: &CMatrix) -> CMatrix {
        assert_eq!(
            self.cols, other.rows,
            "matmul shape mismatch: {}x{} * {}x{}",
            self.rows, self.cols, other.rows, other.cols
        );
        let mut out = CMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a.re == 0.0 && a.im == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    let v = out.get(i, j) + a * other.get(k, j);
                    out.set(i, j, v);
                }
            }
        }
        out
    }

    /// (A + A*)/2. Used to kill tolerance-level asymmetry before spectral work.
    pub fn hermitize(&self) -> CMatrix {
        assert!(self.is_square(), "hermitize needs a square matrix");
        Self::from_fn(self.rows, self.cols, |i, j| {
            (self.get(i, j) + self.get(j, i).conj()) * 0.5
        })
    }

    pub fn trace(&self) -> Complex64 {
        assert!(self.is_square(), "trace needs a square matrix");
        (0..self.rows).map(|i| self.get(i, i)).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.entries
            .iter()
            .map(|z| z.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Frobenius distance to another matrix of the same shape.
    pub fn dist(&self, other: &CMatrix) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    pub fn kron(&self, other: &CMatrix) -> CMatrix {
        CMatrix::from_fn(
            self.rows * other.rows,
            self.cols * other.cols,
            |i, j| {
                let (i1, i2) = (i / other.rows, i % other.rows);
                let (j1, j2) = (j / other.cols, j % other.cols);
                self.get(i1, j1) * other.get(i2, j2)
            },
        )
    }

    /// Column j as an n x 1 matrix.
    pub fn column(&self, j: usize) -> CMatrix {
        CMatrix::from_fn(self.rows, 1, |i, _| self.get(i, j))
    }

    /// Row-major flattening into a column vector.
    pub fn flattened(&self) -> CMatrix {
        CMatrix {
            rows: self.rows * self.cols,
            cols: 1,
            entries: self.entries.clone(),
        }
    }

    pub fn reshape(&self, rows: usize, cols: usize) -> CMatrix {
        assert_eq!(rows * cols, self.rows * self.cols, "reshape size mismatch");
        CMatrix {
            rows,
            cols,
            entries: self.entries.clone(),
        }
    }

    pub fn block(&self, row0: usize, col0: usize, rows: usize, cols: usize) -> CMatrix {
        assert!(row0 + rows <= self.rows && col0 + cols <= self.cols);
        CMatrix::from_fn(rows, cols, |i, j| self.get(row0 + i, col0 + j))
    }

    pub fn set_block(&mut self, row0: usize, col0: usize, block: &CMatrix) {
        assert!(row0 + block.rows <= self.rows && col0 + block.cols <= self.cols);
        for i in 0..block.rows {
            for j in 0..block.cols {
                self.set(row0 + i, col0 + j, block.get(i, j));
            }
        }
    }

    pub fn direct_sum(blocks: &[CMatrix]) -> CMatrix {
        let rows = blocks.iter().map(|b| b.rows).sum();
        let cols = blocks.iter().map(|b| b.cols).sum();
        let mut out = CMatrix::zeros(rows, cols);
        let (mut r, mut c) = (0, 0);
        for b in blocks {
            out.set_block(r, c, b);
            r += b.rows;
            c += b.cols;
        }
        out
    }

    pub fn hstack(parts: &[CMatrix]) -> CMatrix {
        assert!(!parts.is_empty(), "hstack of nothing");
        let rows = parts[0].rows;
        assert!(parts.iter().all(|p| p.rows == rows), "hstack row mismatch");
        let cols = parts.iter().map(|p| p.cols).sum();
        let mut out = CMatrix::zeros(rows, cols);
        let mut c = 0;
        for p in parts {
            out.set_block(0, c, p);
            c += p.cols;
        }
        out
    }

    pub fn is_hermitian(&self, tol: &Tolerance) -> bool {
        if !self.is_square() {
            return false;
        }
        self.dist(&self.adjoint()) <= tol.eq_tol * (1.0 + self.frobenius_norm())
    }
}

impl Index<(usize, usize)> for CMatrix {
    type Output = Complex64;
    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.entries[i * self.cols + j]
    }
}

impl Add for &CMatrix {
    type Output = CMatrix;
    fn add(self, other: &CMatrix) -> CMatrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        CMatrix::from_fn(self.rows, self.cols, |i, j| self.get(i, j) + other.get(i, j))
    }
}

impl Sub for &CMatrix {
    type Output = CMatrix;
    fn sub(self, other: &CMatrix) -> CMatrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        CMatrix::from_fn(self.rows, self.cols, |i, j| self.get(i, j) - other.get(i, j))
    }
}

impl Mul for &CMatrix {
    type Output = CMatrix;
    fn mul(self, other: &CMatrix) -> CMatrix {
        self.matmul(other)
    }
}

impl fmt::Display for CMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.rows {
            for j in 0..self.cols {
                let z = self.get(i, j);
                write!(f, "{:>12.5e}{:+.5e}i ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constructor_rejects_non_finite() {
        let err = CMatrix::new(1, 1, vec![c64(f64::NAN, 0.0)]);
        assert!(matches!(err, Err(Error::NonFiniteEntry)));
    }

    #[test]
    fn constructor_rejects_bad_length() {
        let err = CMatrix::new(2, 2, vec![c64(1.0, 0.0)]);
        assert!(err.is_err());
    }

    #[test]
    fn matmul_and_adjoint() {
        let a = CMatrix::from_fn(2, 3, |i, j| c64((i + j) as f64, 1.0));
        let b = CMatrix::from_fn(3, 2, |i, j| c64(i as f64, -(j as f64)));
        let ab = &a * &b;
        assert_eq!(ab.rows(), 2);
        assert_eq!(ab.cols(), 2);
        // (AB)* = B*A*
        assert!(ab.adjoint().dist(&(&b.adjoint() * &a.adjoint())) < 1e-14);
    }

    #[test]
    fn kron_identity_sizes() {
        let a = CMatrix::from_real_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]);
        let k = a.kron(&CMatrix::identity(3));
        assert_eq!(k.rows(), 6);
        assert_eq!(k.get(0, 0), c64(1.0, 0.0));
        assert_eq!(k.get(0, 3), c64(2.0, 0.0));
        assert_eq!(k.get(1, 1), c64(1.0, 0.0));
    }

    #[test]
    fn tolerance_validation() {
        assert!(Tolerance::new(1e-9, 1e-10).is_ok());
        assert!(Tolerance::new(0.0, 1e-10).is_err());
        assert!(Tolerance::new(1e-9, 1.5).is_err());
    }

    #[test]
    fn direct_sum_layout() {
        let a = CMatrix::identity(2);
        let b = CMatrix::from_real_rows(&[vec![5.0]]);
        let s = CMatrix::direct_sum(&[a, b]);
        assert_eq!(s.rows(), 3);
        assert_eq!(s.get(2, 2), c64(5.0, 0.0));
        assert_eq!(s.get(0, 2), c64(0.0, 0.0));
    }
}
