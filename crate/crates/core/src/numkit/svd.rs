//! Singular values by one-sided Jacobi (Hestenes) orthogonalization.
//! Small singular values come out with high relative accuracy, which is what
//! makes rank decisions at `rank_tol * sigma_max` honest; forming A*A first
//! would bury them in the eigensolver's absolute error floor.

use super::{c64, CMatrix, Tolerance};
use crate::error::{Error, Result};

const MAX_SWEEPS: usize = 60;

/// Thin singular value decomposition `a = u * diag(sigma) * v^*`.
/// `sigma` is sorted descending and has `a.cols()` entries; columns of `u`
/// beyond the rank are zero.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: CMatrix,
    pub sigma: Vec<f64>,
    pub v: CMatrix,
}

impl Svd {
    pub fn rank(&self, tol: &Tolerance) -> usize {
        let top = self.sigma.first().copied().unwrap_or(0.0);
        if top <= 0.0 {
            return 0;
        }
        self.sigma.iter().filter(|&&s| s > tol.rank_tol * top).count()
    }
}

pub fn svd(a: &CMatrix) -> Svd {
    let m = a.rows();
    let n = a.cols();
    let mut work = a.clone();
    let mut v = CMatrix::identity(n);
    if n > 1 && m > 0 {
        // Columns that drop to the rounding floor are converged zeros;
        // rotating them against each other only churns noise into v.
        let top_col = (0..n)
            .map(|j| (0..m).map(|k| work.get(k, j).norm_sqr()).sum::<f64>())
            .fold(0.0, f64::max);
        let floor = top_col * 1e-28;
        for _sweep in 0..MAX_SWEEPS {
            let mut rotated = false;
            for i in 0..n {
                for j in (i + 1)..n {
                    let mut g = c64(0.0, 0.0);
                    let mut ni = 0.0;
                    let mut nj = 0.0;
                    for k in 0..m {
                        let wi = work.get(k, i);
                        let wj = work.get(k, j);
                        g += wi.conj() * wj;
                        ni += wi.norm_sqr();
                        nj += wj.norm_sqr();
                    }
                    let abs_g = g.norm();
                    if ni <= floor || nj <= floor || abs_g <= 1e-15 * (ni * nj).sqrt() {
                        continue;
                    }
                    rotated = true;
                    let phase = g / abs_g;
                    let tau = (nj - ni) / (2.0 * abs_g);
                    let sign = if tau >= 0.0 { 1.0 } else { -1.0 };
                    let t = sign / (tau.abs() + (1.0 + tau * tau).sqrt());
                    let c = 1.0 / (1.0 + t * t).sqrt();
                    let s = t * c;
                    let cp = phase * c;
                    let sp = phase * s;
                    for k in 0..m {
                        let wi = work.get(k, i);
                        let wj = work.get(k, j);
                        work.set(k, i, wi * cp - wj * s);
                        work.set(k, j, wi * sp + wj * c);
                    }
                    for k in 0..n {
                        let vi = v.get(k, i);
                        let vj = v.get(k, j);
                        v.set(k, i, vi * cp - vj * s);
                        v.set(k, j, vi * sp + vj * c);
                    }
                }
            }
            if !rotated {
                break;
            }
        }
    }
    let mut sigma: Vec<f64> = (0..n)
        .map(|j| {
            (0..m)
                .map(|k| work.get(k, j).norm_sqr())
                .sum::<f64>()
                .sqrt()
        })
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| sigma[j].partial_cmp(&sigma[i]).unwrap());
    let sorted_sigma: Vec<f64> = order.iter().map(|&i| sigma[i]).collect();
    sigma = sorted_sigma;
    let mut u = CMatrix::zeros(m, n);
    for (col, &src) in order.iter().enumerate() {
        let s = sigma[col];
        if s > 0.0 {
            for k in 0..m {
                u.set(k, col, work.get(k, src) / s);
            }
        }
    }
    let v_sorted = CMatrix::from_fn(n, n, |i, j| v.get(i, order[j]));
    Svd {
        u,
        sigma,
        v: v_sorted,
    }
}

/// Rank and orthonormal basis of the span of a family of equally shaped
/// matrices, flattened to vectors. Rank counts singular values above
/// `rank_tol` times the largest.
pub fn span_rank(vectors: &[CMatrix], tol: &Tolerance) -> Result<(usize, Vec<CMatrix>)> {
    if vectors.is_empty() {
        return Err(Error::EmptyInput("span_rank needs at least one vector"));
    }
    let shape = (vectors[0].rows(), vectors[0].cols());
    for v in vectors {
        if (v.rows(), v.cols()) != shape {
            return Err(Error::DimensionMismatch {
                context: "span_rank",
                expected: format!("{}x{}", shape.0, shape.1),
                got: format!("{}x{}", v.rows(), v.cols()),
            });
        }
    }
    let dim = shape.0 * shape.1;
    let a = CMatrix::from_fn(dim, vectors.len(), |i, j| vectors[j].entries()[i]);
    let dec = svd(&a);
    let rank = dec.rank(tol);
    let basis = (0..rank)
        .map(|j| dec.u.column(j).reshape(shape.0, shape.1))
        .collect();
    Ok((rank, basis))
}

/// Minimum-norm least squares solution of `a x = b` (Frobenius objective,
/// multiple right-hand sides allowed). Returns the solution and the
/// residual `||a x - b||_F`; a residual well above zero signals an
/// inconsistent system.
pub fn least_squares(a: &CMatrix, b: &CMatrix) -> Result<(CMatrix, f64)> {
    PinvSolver::new(a, &Tolerance::default()).solve(b)
}

/// Cached pseudo-inverse of a fixed coefficient matrix, for repeated solves
/// against the same spanning family.
#[derive(Debug, Clone)]
pub struct PinvSolver {
    a: CMatrix,
    pinv: CMatrix,
    rank: usize,
    null_basis: Vec<CMatrix>,
}

impl PinvSolver {
    pub fn new(a: &CMatrix, tol: &Tolerance) -> Self {
        let dec = svd(a);
        let rank = dec.rank(tol);
        let n = a.cols();
        // pinv = V diag(1/sigma on the rank) U*
        let mut vs = CMatrix::zeros(n, n);
        for j in 0..rank {
            let inv = 1.0 / dec.sigma[j];
            for i in 0..n {
                let val = dec.v.get(i, j) * inv;
                vs.set(i, j, val);
            }
        }
        let pinv = vs.matmul(&dec.u.adjoint());
        let null_basis = (rank..n).map(|j| dec.v.column(j)).collect();
        PinvSolver {
            a: a.clone(),
            pinv,
            rank,
            null_basis,
        }
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    /// Orthonormal basis of the null space of the coefficient matrix.
    pub fn null_basis(&self) -> &[CMatrix] {
        &self.null_basis
    }

    pub fn solve(&self, b: &CMatrix) -> Result<(CMatrix, f64)> {
        if b.rows() != self.a.rows() {
            return Err(Error::DimensionMismatch {
                context: "least_squares",
                expected: format!("{} rows", self.a.rows()),
                got: format!("{}", b.rows()),
            });
        }
        let x = self.pinv.matmul(b);
        let residual = self.a.matmul(&x).dist(b);
        Ok((x, residual))
    }
}
