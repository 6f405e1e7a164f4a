//! Hermitian eigendecomposition by cyclic Jacobi rotations, plus the
//! spectral helpers built on it (positive square roots, operator norm).
//! Jacobi keeps the accumulated transform unitary to machine precision,
//! which is what downstream quotient constructions rely on.

use super::{c64, CMatrix, Tolerance};
use crate::error::{Error, Result};
use num_complex::Complex64;

const MAX_SWEEPS: usize = 80;

/// Eigendecomposition of a Hermitian matrix: `m = vectors * diag(values) * vectors^*`,
/// eigenvalues sorted in descending order, columns of `vectors` orthonormal.
#[derive(Debug, Clone)]
pub struct EigDecomposition {
    pub values: Vec<f64>,
    pub vectors: CMatrix,
}

/// Decompose a Hermitian matrix. Fails with `NotHermitian` when the input's
/// asymmetry exceeds `eq_tol * (1 + ||m||)`; smaller asymmetry is folded away
/// by hermitizing before iterating.
pub fn herm_eig(m: &CMatrix, tol: &Tolerance) -> Result<EigDecomposition> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch {
            context: "herm_eig",
            expected: "square matrix".into(),
            got: format!("{}x{}", m.rows(), m.cols()),
        });
    }
    let defect = m.dist(&m.adjoint());
    let limit = tol.eq_tol * (1.0 + m.frobenius_norm());
    if defect > limit {
        return Err(Error::NotHermitian { defect, limit });
    }
    Ok(eig_hermitized(m.hermitize()))
}

/// Jacobi iteration on an exactly Hermitian matrix. Internal entry point for
/// products of the form A*A which are Hermitian by construction.
pub(crate) fn eig_hermitized(mut a: CMatrix) -> EigDecomposition {
    let n = a.rows();
    let mut u = CMatrix::identity(n);
    if n > 1 {
        let scale = a.frobenius_norm().max(1.0);
        let target = f64::EPSILON * scale;
        for _sweep in 0..MAX_SWEEPS {
            if off_diagonal_norm(&a) <= target {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    let beta = a.get(p, q);
                    let abs_b = beta.norm();
                    if abs_b <= f64::EPSILON * scale * 1e-3 {
                        continue;
                    }
                    let phase = beta / abs_b;
                    let alpha = a.get(p, p).re;
                    let gamma = a.get(q, q).re;
                    let tau = (gamma - alpha) / (2.0 * abs_b);
                    let sign = if tau >= 0.0 { 1.0 } else { -1.0 };
                    let t = sign / (tau.abs() + (1.0 + tau * tau).sqrt());
                    let c = 1.0 / (1.0 + t * t).sqrt();
                    let s = t * c;
                    rotate(&mut a, &mut u, p, q, c, s, phase);
                }
            }
        }
    }
    // Diagonal is real by construction; gather and sort descending.
    let mut order: Vec<usize> = (0..n).collect();
    let diag: Vec<f64> = (0..n).map(|i| a.get(i, i).re).collect();
    order.sort_by(|&i, &j| diag[j].partial_cmp(&diag[i]).unwrap());
    let values: Vec<f64> = order.iter().map(|&i| diag[i]).collect();
    let vectors = CMatrix::from_fn(n, n, |i, j| u.get(i, order[j]));
    EigDecomposition { values, vectors }
}

/// Applies the unitary plane rotation R(p,q) with parameters (c, s, phase)
/// as A <- R* A R and U <- U R. R is the identity outside rows/cols p, q and
/// R[p][p] = c*phase, R[p][q] = s*phase, R[q][p] = -s, R[q][q] = c.
fn rotate(a: &mut CMatrix, u: &mut CMatrix, p: usize, q: usize, c: f64, s: f64, phase: Complex64) {
    let n = a.rows();
    let cp = phase * c;
    let sp = phase * s;
    // columns (A <- A R), same update for the accumulated unitary
    for i in 0..n {
        let aip = a.get(i, p);
        let aiq = a.get(i, q);
        a.set(i, p, aip * cp - aiq * s);
        a.set(i, q, aip * sp + aiq * c);
        let uip = u.get(i, p);
        let uiq = u.get(i, q);
        u.set(i, p, uip * cp - uiq * s);
        u.set(i, q, uip * sp + uiq * c);
    }
    // rows (A <- R* A)
    let cpc = phase.conj() * c;
    let spc = phase.conj() * s;
    for j in 0..n {
        let apj = a.get(p, j);
        let aqj = a.get(q, j);
        a.set(p, j, apj * cpc - aqj * s);
        a.set(q, j, apj * spc + aqj * c);
    }
    // The rotation annihilates (p,q) analytically; pin it and keep the
    // diagonal exactly real so drift never accumulates.
    a.set(p, q, c64(0.0, 0.0));
    a.set(q, p, c64(0.0, 0.0));
    let app = a.get(p, p);
    let aqq = a.get(q, q);
    a.set(p, p, c64(app.re, 0.0));
    a.set(q, q, c64(aqq.re, 0.0));
}

fn off_diagonal_norm(a: &CMatrix) -> f64 {
    let n = a.rows();
    let mut sum = 0.0;
    for p in 0..n {
        for q in (p + 1)..n {
            sum += 2.0 * a.get(p, q).norm_sqr();
        }
    }
    sum.sqrt()
}

/// Positive square root of a PSD matrix. Eigenvalues in
/// `[-eq_tol*(1+||m||), 0)` are clamped to zero; anything lower is an error.
pub fn psd_sqrt(m: &CMatrix, tol: &Tolerance) -> Result<CMatrix> {
    spectral_map(m, tol, f64::sqrt)
}

/// Inverse square root on the range of a PSD matrix (pseudo-inverse on the
/// kernel). Used to orthonormalize quotient bases.
pub fn psd_inv_sqrt(m: &CMatrix, tol: &Tolerance) -> Result<CMatrix> {
    let eig = checked_psd_eig(m, tol)?;
    let top = eig.values.first().copied().unwrap_or(0.0).max(0.0);
    let cut = tol.rank_tol * top;
    rebuild(&eig, |lambda| {
        if lambda > cut && lambda > 0.0 {
            1.0 / lambda.sqrt()
        } else {
            0.0
        }
    })
}

fn spectral_map(m: &CMatrix, tol: &Tolerance, f: impl Fn(f64) -> f64) -> Result<CMatrix> {
    let eig = checked_psd_eig(m, tol)?;
    // eigenvalues at the machine-noise floor are zeros in disguise; rounding
    // them keeps f from amplifying noise (sqrt turns 1e-16 into 1e-8)
    let top = eig.values.first().copied().unwrap_or(0.0).max(0.0);
    let floor = top * f64::EPSILON * (m.rows() as f64);
    rebuild(&eig, |lambda| {
        if lambda <= floor {
            f(0.0)
        } else {
            f(lambda)
        }
    })
}

fn checked_psd_eig(m: &CMatrix, tol: &Tolerance) -> Result<EigDecomposition> {
    let eig = herm_eig(m, tol)?;
    let scale = eig.values.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
    let limit = tol.eq_tol * (1.0 + scale);
    if let Some(&min) = eig.values.last() {
        if min < -limit {
            return Err(Error::NotPositive {
                min_eigenvalue: min,
                limit,
            });
        }
    }
    Ok(eig)
}

fn rebuild(eig: &EigDecomposition, f: impl Fn(f64) -> f64) -> Result<CMatrix> {
    let n = eig.values.len();
    let u = &eig.vectors;
    let mut scaled = u.clone();
    for j in 0..n {
        let fj = f(eig.values[j]);
        for i in 0..n {
            let v = scaled.get(i, j) * fj;
            scaled.set(i, j, v);
        }
    }
    // U f(D) U* is Hermitian; hermitize to flush rounding asymmetry.
    Ok(scaled.matmul(&u.adjoint()).hermitize())
}

/// Operator norm: the largest singular value, computed as
/// sqrt(max eigenvalue of M*M).
pub fn op_norm(m: &CMatrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    let gram = m.adjoint().matmul(m);
    let eig = eig_hermitized(gram);
    eig.values.first().copied().unwrap_or(0.0).max(0.0).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn tol() -> Tolerance {
        Tolerance::default()
    }

    fn random_hermitian(rng: &mut ChaCha8Rng, n: usize) -> CMatrix {
        let raw = CMatrix::from_fn(n, n, |_, _| {
            c64(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        });
        raw.hermitize()
    }

    fn reconstruct(eig: &EigDecomposition) -> CMatrix {
        let n = eig.values.len();
        let d = CMatrix::from_diag(&eig.values);
        let u = &eig.vectors;
        assert_eq!(u.rows(), n);
        u.matmul(&d).matmul(&u.adjoint())
    }

    #[test]
    fn herm_eig_diagonal_is_identity_basis() {
        let m = CMatrix::from_diag(&[3.0, 1.0]);
        let eig = herm_eig(&m, &tol()).unwrap();
        assert_eq!(eig.values, vec![3.0, 1.0]);
        assert!(eig.vectors.dist(&CMatrix::identity(2)) < 1e-12);
    }

    #[test]
    fn herm_eig_pauli_x() {
        let m = CMatrix::from_real_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]);
        let eig = herm_eig(&m, &tol()).unwrap();
        assert!((eig.values[0] - 1.0).abs() < 1e-14);
        assert!((eig.values[1] + 1.0).abs() < 1e-14);
        assert!(reconstruct(&eig).dist(&m) < 1e-14);
    }

    #[test]
    fn herm_eig_reconstructs_random_hermitian() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in [1, 2, 3, 6, 13] {
            let m = random_hermitian(&mut rng, n);
            let eig = herm_eig(&m, &tol()).unwrap();
            let scale = 1.0 + m.frobenius_norm();
            assert!(
                reconstruct(&eig).dist(&m) <= 1e-9 * scale,
                "reconstruction failed at n={n}"
            );
            let gram = eig.vectors.adjoint().matmul(&eig.vectors);
            assert!(gram.dist(&CMatrix::identity(n)) <= 1e-9);
            for w in eig.values.windows(2) {
                assert!(w[0] >= w[1]);
            }
        }
    }

    #[test]
    fn herm_eig_rejects_non_hermitian() {
        let m = CMatrix::from_real_rows(&[vec![0.0, 1.0], vec![0.0, 0.0]]);
        assert!(matches!(
            herm_eig(&m, &tol()),
            Err(Error::NotHermitian { .. })
        ));
    }

    #[test]
    fn psd_sqrt_diagonal() {
        let m = CMatrix::from_diag(&[4.0, 9.0]);
        let s = psd_sqrt(&m, &tol()).unwrap();
        assert!(s.dist(&CMatrix::from_diag(&[2.0, 3.0])) < 1e-12);
    }

    #[test]
    fn psd_sqrt_zero() {
        let s = psd_sqrt(&CMatrix::zeros(3, 3), &tol()).unwrap();
        assert!(s.dist(&CMatrix::zeros(3, 3)) == 0.0);
    }

    #[test]
    fn psd_sqrt_of_gram_squares_back() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let b = CMatrix::from_fn(5, 5, |_, _| {
            c64(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        });
        let m = b.adjoint().matmul(&b);
        let s = psd_sqrt(&m, &tol()).unwrap();
        let err = s.matmul(&s).dist(&m);
        assert!(err <= 1e-8 * (1.0 + m.frobenius_norm()), "residual {err}");
    }

    #[test]
    fn psd_sqrt_rejects_indefinite() {
        let m = CMatrix::from_diag(&[1.0, -1.0]);
        assert!(matches!(
            psd_sqrt(&m, &tol()),
            Err(Error::NotPositive { .. })
        ));
    }

    #[test]
    fn psd_inv_sqrt_inverts_on_range() {
        let m = CMatrix::from_diag(&[4.0, 0.0]);
        let isq = psd_inv_sqrt(&m, &tol()).unwrap();
        assert!(isq.dist(&CMatrix::from_diag(&[0.5, 0.0])) < 1e-12);
    }

    #[test]
    fn op_norm_examples() {
        assert!((op_norm(&CMatrix::identity(4)) - 1.0).abs() < 1e-12);
        assert!((op_norm(&CMatrix::from_diag(&[2.0, -5.0])) - 5.0).abs() < 1e-12);
        assert_eq!(op_norm(&CMatrix::zeros(0, 3)), 0.0);
    }

    #[test]
    fn op_norm_matches_gram_spectrum_on_rectangular() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = CMatrix::from_fn(4, 7, |_, _| {
            c64(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        });
        let gram = m.adjoint().matmul(&m);
        let top = herm_eig(&gram, &tol()).unwrap().values[0];
        assert!((op_norm(&m) - top.sqrt()).abs() <= 1e-10);
    }
}
