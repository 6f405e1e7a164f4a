//! Completely positive maps and their dilations: the Choi positivity test,
//! the minimal scalar Stinespring factorization phi(a) = V* theta(a) V, and
//! the module-level dilation Phi(x) = W* Psi(x) V with a full residual
//! certificate. CP maps are presented by Kraus operators against the
//! canonical representation or by raw basis images; both feed the same
//! machinery.

use crate::algebra::{AlgElement, CStarAlgebra, Representation};
use crate::error::{Error, Result};
use crate::module::{FinslerModule, ModuleElement};
use crate::numkit::{herm_eig, least_squares, op_norm, svd, CMatrix, Tolerance};
use crate::quasirep::QuasiRep;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone)]
pub struct CPMap {
    algebra: CStarAlgebra,
    dim_h: usize,
    images: Vec<CMatrix>,
    kraus: Option<Vec<CMatrix>>,
    tol: Tolerance,
}

impl CPMap {
    /// Kraus presentation: phi(a) = sum K_r pi(a) K_r* against the
    /// canonical representation pi on C^p.
    pub fn from_kraus(
        algebra: CStarAlgebra,
        kraus: Vec<CMatrix>,
        tol: Tolerance,
    ) -> Result<Self> {
        if kraus.is_empty() {
            return Err(Error::EmptyInput("need at least one Kraus operator"));
        }
        let p = algebra.canonical_dim();
        let dim_h = kraus[0].rows();
        for k in &kraus {
            if k.rows() != dim_h || k.cols() != p {
                return Err(Error::DimensionMismatch {
                    context: "Kraus operator",
                    expected: format!("{dim_h}x{p}"),
                    got: format!("{}x{}", k.rows(), k.cols()),
                });
            }
        }
        let canonical = Representation::canonical(&algebra);
        let images = canonical
            .basis_images()
            .iter()
            .map(|e| {
                let mut acc = CMatrix::zeros(dim_h, dim_h);
                for k in &kraus {
                    acc = &acc + &k.matmul(e).matmul(&k.adjoint());
                }
                acc
            })
            .collect();
        Ok(CPMap {
            algebra,
            dim_h,
            images,
            kraus: Some(kraus),
            tol,
        })
    }

    /// Raw basis images; only linearity and the adjoint relation are
    /// checked here, complete positivity is a separate question.
    pub fn from_images(
        algebra: CStarAlgebra,
        images: Vec<CMatrix>,
        tol: Tolerance,
    ) -> Result<Self> {
        if images.len() != algebra.dim() {
            return Err(Error::DimensionMismatch {
                context: "CP map images",
                expected: format!("{} images", algebra.dim()),
                got: format!("{}", images.len()),
            });
        }
        let dim_h = images.first().map(|m| m.rows()).unwrap_or(0);
        for img in &images {
            if img.rows() != dim_h || img.cols() != dim_h {
                return Err(Error::DimensionMismatch {
                    context: "CP map image",
                    expected: format!("{dim_h}x{dim_h}"),
                    got: format!("{}x{}", img.rows(), img.cols()),
                });
            }
        }
        let scale = 1.0 + images.iter().map(|m| m.frobenius_norm()).fold(0.0, f64::max);
        for (b, &nb) in algebra.block_dims().iter().enumerate() {
            for r in 0..nb {
                for s in 0..nb {
                    let lhs = images[algebra.basis_index(b, r, s)].adjoint();
                    let rhs = &images[algebra.basis_index(b, s, r)];
                    if lhs.dist(rhs) > tol.eq_tol * scale {
                        return Err(Error::InvalidMap(format!(
                            "adjoint relation phi(a*) = phi(a)* violated by {:.3e}",
                            lhs.dist(rhs)
                        )));
                    }
                }
            }
        }
        Ok(CPMap {
            algebra,
            dim_h,
            images,
            kraus: None,
            tol,
        })
    }

    /// View a representation as a CP map (every *-homomorphism is CP).
    pub fn from_representation(rep: &Representation, tol: Tolerance) -> Self {
        CPMap {
            algebra: rep.algebra().clone(),
            dim_h: rep.dim(),
            images: rep.basis_images(),
            kraus: None,
            tol,
        }
    }

    pub fn algebra(&self) -> &CStarAlgebra {
        &self.algebra
    }

    pub fn dim_h(&self) -> usize {
        self.dim_h
    }

    pub fn basis_images(&self) -> &[CMatrix] {
        &self.images
    }

    pub fn kraus(&self) -> Option<&[CMatrix]> {
        self.kraus.as_deref()
    }

    pub fn tol(&self) -> &Tolerance {
        &self.tol
    }

    pub fn apply(&self, a: &AlgElement) -> CMatrix {
        assert_eq!(a.algebra(), &self.algebra, "CP map applied to foreign element");
        let mut out = CMatrix::zeros(self.dim_h, self.dim_h);
        for (c, img) in a.coords().iter().zip(&self.images) {
            out = &out + &img.scale(*c);
        }
        out
    }

    pub fn unit_image(&self) -> CMatrix {
        self.apply(&self.algebra.unit())
    }
}

/// The Choi matrix: sum over in-block matrix-unit pairs of
/// E_ij (x) phi(E_ij) on C^p (x) C^dimH. Positive semidefinite iff the map
/// is completely positive.
pub fn choi(phi: &CPMap) -> CMatrix {
    let p = phi.algebra.canonical_dim();
    let offsets = phi.algebra.block_offsets();
    let n = p * phi.dim_h;
    let mut c = CMatrix::zeros(n, n);
    for (b, &nb) in phi.algebra.block_dims().iter().enumerate() {
        for r in 0..nb {
            for s in 0..nb {
                let img = &phi.images[phi.algebra.basis_index(b, r, s)];
                let mut unit = CMatrix::zeros(p, p);
                unit.set(offsets[b] + r, offsets[b] + s, crate::numkit::c64(1.0, 0.0));
                c = &c + &unit.kron(img);
            }
        }
    }
    c
}

fn choi_min_eigenvalue(phi: &CPMap) -> (f64, f64) {
    let c = choi(phi).hermitize();
    if c.rows() == 0 {
        return (0.0, 0.0);
    }
    let eig = herm_eig(&c, &phi.tol).expect("hermitized Choi");
    let top = eig
        .values
        .iter()
        .map(|v| v.abs())
        .fold(0.0, f64::max);
    (*eig.values.last().unwrap(), top)
}

pub fn is_completely_positive(phi: &CPMap) -> bool {
    let (min, top) = choi_min_eigenvalue(phi);
    min >= -phi.tol.eq_tol * (1.0 + top)
}

/// Minimal scalar Stinespring dilation.
#[derive(Debug, Clone)]
pub struct StinespringDilation {
    pub theta: Representation,
    pub v: CMatrix,
    pub dim_h_prime: usize,
    /// max over basis a of ||phi(a) - V* theta(a) V|| / (1 + ||a||)
    pub reconstruction_residual: f64,
    /// ||V*V - phi(1)||
    pub isometry_residual: f64,
}

/// Build the minimal Stinespring factorization phi(a) = V* theta(a) V.
/// H' is the quotient of A (x) C^dimH under the Gram
/// <a (x) h, b (x) h'> = <h, phi(a* b) h'>; theta acts by left
/// multiplication and V h is the class of 1 (x) h.
pub fn stinespring(phi: &CPMap) -> Result<StinespringDilation> {
    let tol = phi.tol;
    let (min_eig, top_eig) = choi_min_eigenvalue(phi);
    if min_eig < -tol.eq_tol * (1.0 + top_eig) {
        return Err(Error::NotCompletelyPositive {
            min_eigenvalue: min_eig,
        });
    }
    let algebra = phi.algebra.clone();
    let basis = algebra.basis_elements();
    let d = algebra.dim();
    let dim_h = phi.dim_h;
    let n = d * dim_h;

    let mut pair_images: Vec<Vec<CMatrix>> = Vec::with_capacity(d);
    for ea in &basis {
        let mut row = Vec::with_capacity(d);
        for eb in &basis {
            row.push(phi.apply(&ea.involution().mul(eb).expect("same algebra")));
        }
        pair_images.push(row);
    }
    let gram = CMatrix::from_fn(n, n, |row, col| {
        let (alpha, u) = (row / dim_h, row % dim_h);
        let (beta, v) = (col / dim_h, col % dim_h);
        pair_images[alpha][beta].get(u, v)
    });
    let eig = herm_eig(&gram.hermitize(), &tol)?;
    let top = eig.values.first().copied().unwrap_or(0.0).max(0.0);
    let min = eig.values.last().copied().unwrap_or(0.0);
    if min < -tol.eq_tol * (1.0 + top) {
        return Err(Error::GramNotPsd {
            min_eigenvalue: min,
        });
    }
    let kept: Vec<usize> = (0..n)
        .filter(|&i| eig.values[i] > tol.rank_tol * top)
        .collect();
    let dim_h_prime = kept.len();
    let q = CMatrix::from_fn(dim_h_prime, n, |i, j| {
        eig.vectors.get(j, kept[i]).conj() * eig.values[kept[i]].sqrt()
    });
    let q_plus = CMatrix::from_fn(n, dim_h_prime, |i, j| {
        eig.vectors.get(i, kept[j]) / eig.values[kept[j]].sqrt()
    });

    // theta by left multiplication pushed through the quotient
    let mut theta_images = Vec::with_capacity(d);
    for eg in &basis {
        let mut left = CMatrix::zeros(n, n);
        for (beta, eb) in basis.iter().enumerate() {
            let prod = eg.mul(eb).expect("same algebra");
            for (alpha, coeff) in prod.coords().iter().enumerate() {
                if coeff.norm_sqr() > 0.0 {
                    for u in 0..dim_h {
                        left.set(alpha * dim_h + u, beta * dim_h + u, *coeff);
                    }
                }
            }
        }
        theta_images.push(q.matmul(&left).matmul(&q_plus));
    }
    let theta = Representation::from_images(&algebra, &theta_images, &tol)?;

    // V h = class of 1 (x) h
    let unit_coords = algebra.unit().coords();
    let embed = CMatrix::from_fn(n, dim_h, |row, v| {
        let (alpha, u) = (row / dim_h, row % dim_h);
        if u == v {
            unit_coords[alpha]
        } else {
            crate::numkit::c64(0.0, 0.0)
        }
    });
    let v = q.matmul(&embed);

    let mut reconstruction_residual: f64 = 0.0;
    for (alpha, ea) in basis.iter().enumerate() {
        let rebuilt = v.adjoint().matmul(&theta.apply(ea)).matmul(&v);
        let res = rebuilt.dist(&phi.images[alpha]) / (1.0 + ea.norm());
        reconstruction_residual = reconstruction_residual.max(res);
    }
    let isometry_residual = v.adjoint().matmul(&v).dist(&phi.unit_image());

    Ok(StinespringDilation {
        theta,
        v,
        dim_h_prime,
        reconstruction_residual,
        isometry_residual,
    })
}

/// Named residuals of the module dilation certificate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DilationResiduals {
    pub scalar_dilation: f64,
    pub isometry_v: f64,
    pub module_reconstruction: f64,
    pub theta_morphism: f64,
    pub action_compat: f64,
    pub projection_w: f64,
    pub norm_bound_excess: f64,
}

#[derive(Debug, Clone)]
pub struct DilationCertificate {
    pub theta: Representation,
    pub v: CMatrix,
    /// dimK' x dimK, orthonormal rows spanning K' inside K
    pub w: CMatrix,
    /// one dilated image per generator
    pub psi: Vec<CMatrix>,
    pub dim_h_prime: usize,
    pub dim_k_prime: usize,
    pub residuals: DilationResiduals,
    pub valid: bool,
}

impl DilationCertificate {
    pub fn is_valid(tol: &Tolerance, r: &DilationResiduals) -> bool {
        let gate = 10.0 * tol.eq_tol;
        r.scalar_dilation <= gate
            && r.isometry_v <= gate
            && r.module_reconstruction <= gate
            && r.theta_morphism <= gate
            && r.action_compat <= gate
            && r.projection_w <= gate
            && r.norm_bound_excess <= tol.eq_tol
    }
}

fn apply_candidate(
    module: &FinslerModule,
    images: &[CMatrix],
    dim_k: usize,
    dim_h: usize,
    x: &ModuleElement,
) -> CMatrix {
    let coeffs = module.present(x);
    let mut out = CMatrix::zeros(dim_k, dim_h);
    for (c, img) in coeffs.iter().zip(images) {
        out = &out + &img.scale(*c);
    }
    out
}

/// Module Stinespring dilation for a candidate quasi-representation with a
/// completely positive phi. The two quasi-rep identities are the operative
/// precondition: they are exactly what makes Psi well-defined on the
/// spanning set {theta(a) V h}, so violations are rejected as
/// PreconditionFailed with the offending residual.
pub fn module_stinespring(
    module: &FinslerModule,
    phi: &CPMap,
    images: &[CMatrix],
) -> Result<DilationCertificate> {
    if phi.algebra() != module.algebra() {
        return Err(Error::AlgebraMismatch {
            left: module.algebra().to_string(),
            right: phi.algebra().to_string(),
        });
    }
    let tol = *module.tol();
    let gens = module.generators();
    let k = gens.len();
    if images.len() != k {
        return Err(Error::DimensionMismatch {
            context: "module dilation images",
            expected: format!("{k} images"),
            got: format!("{}", images.len()),
        });
    }
    let dim_h = phi.dim_h();
    let dim_k = images.first().map(|m| m.rows()).unwrap_or(0);
    for img in images {
        if img.rows() != dim_k || img.cols() != dim_h {
            return Err(Error::DimensionMismatch {
                context: "module dilation image",
                expected: format!("{dim_k}x{dim_h}"),
                got: format!("{}x{}", img.rows(), img.cols()),
            });
        }
    }

    // Theorem hypothesis: unital algebra map
    let unital_defect = phi.unit_image().dist(&CMatrix::identity(dim_h));
    if unital_defect > tol.eq_tol * (1.0 + dim_h as f64) {
        return Err(Error::PreconditionFailed {
            check: "phi is unital",
            residual: unital_defect,
        });
    }
    // squared quasi-rep identity on generator pairs decides it on the span
    let gen_elements: Vec<ModuleElement> = gens
        .iter()
        .map(|g| module.element(g.clone()).expect("generators span themselves"))
        .collect();
    for (i, gi) in gen_elements.iter().enumerate() {
        for (j, gj) in gen_elements.iter().enumerate() {
            let rhs = phi.apply(&module.inner_product(gi, gj)?);
            let lhs = images[i].adjoint().matmul(&images[j]);
            let res = lhs.dist(&rhs) / (1.0 + rhs.frobenius_norm());
            if res > 10.0 * tol.eq_tol {
                return Err(Error::PreconditionFailed {
                    check: "squared quasi-representation identity",
                    residual: res,
                });
            }
        }
    }
    // action identity on generators against basis elements
    let alg_basis = module.algebra().basis_elements();
    for (i, gi) in gen_elements.iter().enumerate() {
        for ea in &alg_basis {
            let moved = module.act(gi, ea)?;
            let lhs = apply_candidate(module, images, dim_k, dim_h, &moved);
            let rhs = images[i].matmul(&phi.apply(ea));
            let res = lhs.dist(&rhs) / (1.0 + rhs.frobenius_norm());
            if res > 10.0 * tol.eq_tol {
                return Err(Error::PreconditionFailed {
                    check: "action compatibility",
                    residual: res,
                });
            }
        }
    }

    let scalar = stinespring(phi)?;
    let dim_h_prime = scalar.dim_h_prime;

    // K' = span of Phi(E)H inside K, as orthonormal rows
    let (w, dim_k_prime) = if k == 0 || dim_k == 0 {
        (CMatrix::zeros(0, dim_k), 0)
    } else {
        let stacked = CMatrix::hstack(images);
        let dec = svd(&stacked);
        let rank = dec.rank(&tol);
        let w = CMatrix::from_fn(rank, dim_k, |i, j| dec.u.get(j, i).conj());
        (w, rank)
    };

    // spanning set {theta(e_alpha) V e_u} as columns
    let d = alg_basis.len();
    let mut span_cols = Vec::with_capacity(d);
    for ea in &alg_basis {
        span_cols.push(scalar.theta.apply(ea).matmul(&scalar.v));
    }
    let m = CMatrix::hstack(&span_cols);

    let psi_for = |x: &ModuleElement| -> Result<(CMatrix, f64)> {
        let phi_x = apply_candidate(module, images, dim_k, dim_h, x);
        let mut target_cols = Vec::with_capacity(d);
        for ea in &alg_basis {
            target_cols.push(w.matmul(&phi_x).matmul(&phi.apply(ea)));
        }
        let t = CMatrix::hstack(&target_cols);
        // solve X m = t for X, i.e. m* X* = t*
        let (x_adj, res) = least_squares(&m.adjoint(), &t.adjoint())?;
        Ok((x_adj.adjoint(), res))
    };

    let mut psi = Vec::with_capacity(k);
    for gi in &gen_elements {
        let (p, res) = psi_for(gi)?;
        if res > 10.0 * tol.eq_tol * (1.0 + op_norm(&p)) {
            return Err(Error::PreconditionFailed {
                check: "Psi well-defined on the spanning set",
                residual: res,
            });
        }
        psi.push(p);
    }

    let mut residuals = DilationResiduals {
        scalar_dilation: scalar.reconstruction_residual,
        isometry_v: scalar.isometry_residual,
        module_reconstruction: 0.0,
        theta_morphism: 0.0,
        action_compat: 0.0,
        projection_w: 0.0,
        norm_bound_excess: 0.0,
    };
    for (i, gi) in gen_elements.iter().enumerate() {
        let rebuilt = w.adjoint().matmul(&psi[i]).matmul(&scalar.v);
        residuals.module_reconstruction = residuals
            .module_reconstruction
            .max(rebuilt.dist(&images[i]));

        let lhs = psi[i].adjoint().matmul(&psi[i]);
        let rho_sq = module.inner_product(gi, gi)?;
        let rhs = scalar.theta.apply(&rho_sq);
        residuals.theta_morphism = residuals.theta_morphism.max(lhs.dist(&rhs));

        for ea in &alg_basis {
            let via_theta = psi[i].matmul(&scalar.theta.apply(ea));
            let moved = module.act(gi, ea)?;
            let (direct, _) = psi_for(&moved)?;
            residuals.action_compat = residuals.action_compat.max(via_theta.dist(&direct));
        }

        let excess = op_norm(&psi[i]) - module.module_norm(gi);
        residuals.norm_bound_excess = residuals.norm_bound_excess.max(excess.max(0.0));
    }
    residuals.projection_w = w
        .matmul(&w.adjoint())
        .dist(&CMatrix::identity(dim_k_prime));

    let valid = DilationCertificate::is_valid(&tol, &residuals);
    Ok(DilationCertificate {
        theta: scalar.theta,
        v: scalar.v,
        w,
        psi,
        dim_h_prime,
        dim_k_prime,
        residuals,
        valid,
    })
}

/// Dilate a quasi-representation built by the localization; its phi is a
/// genuine representation, hence CP.
pub fn module_stinespring_of(qr: &QuasiRep) -> Result<DilationCertificate> {
    let phi = CPMap::from_representation(qr.rep(), *qr.module().tol());
    module_stinespring(qr.module(), &phi, qr.images())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{gns, State};
    use crate::numkit::{c64, span_rank};
    use crate::quasirep::build_quasirep;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn tol() -> Tolerance {
        Tolerance::default()
    }

    fn identity_cp(n: usize) -> CPMap {
        let alg = CStarAlgebra::full_matrix_algebra(n);
        CPMap::from_representation(&Representation::canonical(&alg), tol())
    }

    fn transpose_cp() -> CPMap {
        let alg = CStarAlgebra::full_matrix_algebra(2);
        let rep = Representation::canonical(&alg);
        let images: Vec<CMatrix> = alg
            .basis_elements()
            .iter()
            .map(|e| rep.apply(e).transpose())
            .collect();
        CPMap::from_images(alg, images, tol()).unwrap()
    }

    fn random_kraus_cp(rng: &mut ChaCha8Rng, n: usize, m: usize, count: usize) -> CPMap {
        let alg = CStarAlgebra::full_matrix_algebra(n);
        let kraus: Vec<CMatrix> = (0..count)
            .map(|_| {
                CMatrix::from_fn(m, n, |_, _| {
                    c64(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
                })
            })
            .collect();
        CPMap::from_kraus(alg, kraus, tol()).unwrap()
    }

    #[test]
    fn choi_of_identity_is_maximally_entangled() {
        let phi = identity_cp(2);
        let c = choi(&phi);
        // oracle: vec(I) vec(I)* with vec(K)[(i,u)] = K[u,i]
        let vec_i = CMatrix::from_fn(4, 1, |row, _| {
            let (i, u) = (row / 2, row % 2);
            if i == u {
                c64(1.0, 0.0)
            } else {
                c64(0.0, 0.0)
            }
        });
        let oracle = vec_i.matmul(&vec_i.adjoint());
        assert!(c.dist(&oracle) <= 1e-12);
        assert!((c.trace().re - 2.0).abs() <= 1e-12);
        assert!(is_completely_positive(&phi));
    }

    #[test]
    fn choi_of_zero_is_zero() {
        let alg = CStarAlgebra::full_matrix_algebra(2);
        let images = vec![CMatrix::zeros(2, 2); 4];
        let phi = CPMap::from_images(alg, images, tol()).unwrap();
        assert!(choi(&phi).frobenius_norm() == 0.0);
        assert!(is_completely_positive(&phi));
    }

    #[test]
    fn transpose_choi_is_swap_with_eigenvalue_minus_one() {
        let phi = transpose_cp();
        let c = choi(&phi);
        // oracle: explicit SWAP assembly
        let mut swap = CMatrix::zeros(4, 4);
        for i in 0..2 {
            for j in 0..2 {
                swap.set(i * 2 + j, j * 2 + i, c64(1.0, 0.0));
            }
        }
        assert!(c.dist(&swap) <= 1e-12);
        let eig = herm_eig(&c.hermitize(), &tol()).unwrap();
        assert!((eig.values[0] - 1.0).abs() <= 1e-10);
        assert!((eig.values[3] + 1.0).abs() <= 1e-10);
        assert!(!is_completely_positive(&phi));
        assert!(matches!(
            stinespring(&phi),
            Err(Error::NotCompletelyPositive { .. })
        ));
    }

    #[test]
    fn kraus_choi_matches_vec_outer_products() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let phi = random_kraus_cp(&mut rng, 3, 2, 2);
        let c = choi(&phi);
        let mut oracle = CMatrix::zeros(6, 6);
        for k in phi.kraus().unwrap() {
            let vec_k = CMatrix::from_fn(6, 1, |row, _| {
                let (i, u) = (row / 2, row % 2);
                k.get(u, i)
            });
            oracle = &oracle + &vec_k.matmul(&vec_k.adjoint());
        }
        assert!(c.dist(&oracle) <= 1e-10);
        assert!(is_completely_positive(&phi));
    }

    #[test]
    fn convex_combination_of_cp_maps_is_cp() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p1 = random_kraus_cp(&mut rng, 2, 3, 2);
        let p2 = random_kraus_cp(&mut rng, 2, 3, 2);
        let alg = p1.algebra().clone();
        let mixed: Vec<CMatrix> = p1
            .basis_images()
            .iter()
            .zip(p2.basis_images())
            .map(|(a, b)| &a.scale_re(0.3) + &b.scale_re(0.7))
            .collect();
        let phi = CPMap::from_images(alg, mixed, tol()).unwrap();
        assert!(is_completely_positive(&phi));
    }

    #[test]
    fn stinespring_of_identity_is_trivial() {
        let phi = identity_cp(3);
        let dil = stinespring(&phi).unwrap();
        assert_eq!(dil.dim_h_prime, 3);
        assert!(dil.reconstruction_residual <= 1e-10);
        assert!(dil.isometry_residual <= 1e-10);
        // square isometry is unitary
        assert!(dil
            .v
            .matmul(&dil.v.adjoint())
            .dist(&CMatrix::identity(3)) <= 1e-9);
    }

    #[test]
    fn stinespring_of_pure_state_recovers_gns() {
        let alg = CStarAlgebra::full_matrix_algebra(2);
        let density = CMatrix::from_diag(&[1.0, 0.0]);
        let state = State::new(alg.clone(), vec![density.clone()], &tol()).unwrap();
        // dimH = 1 CP map a -> phi(a)
        let images: Vec<CMatrix> = alg
            .basis_elements()
            .iter()
            .map(|e| {
                CMatrix::new(1, 1, vec![state.value(e)]).unwrap()
            })
            .collect();
        let phi = CPMap::from_images(alg.clone(), images, tol()).unwrap();
        let dil = stinespring(&phi).unwrap();
        let (gns_rep, _) = gns(&state, &tol()).unwrap();
        assert_eq!(dil.dim_h_prime, gns_rep.dim());
        assert!(dil.reconstruction_residual <= 1e-9);
        // phi reconstructed from the factors on a random element
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = alg.random_element(&mut rng);
        let rebuilt = dil.v.adjoint().matmul(&dil.theta.apply(&a)).matmul(&dil.v);
        assert!(rebuilt.dist(&phi.apply(&a)) <= 1e-9);
    }

    #[test]
    fn stinespring_of_random_unital_kraus_maps() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for round in 0..5 {
            let n = 2 + (round % 3);
            let m = 2 + ((round + 1) % 3);
            let raw = random_kraus_cp(&mut rng, n, m, 3);
            // normalize to a unital map
            let s = raw.unit_image().hermitize();
            let s_inv_sqrt = crate::numkit::psd_inv_sqrt(&s, &tol()).unwrap();
            let kraus: Vec<CMatrix> = raw
                .kraus()
                .unwrap()
                .iter()
                .map(|k| s_inv_sqrt.matmul(k))
                .collect();
            let phi = CPMap::from_kraus(raw.algebra().clone(), kraus, tol()).unwrap();
            assert!(phi.unit_image().dist(&CMatrix::identity(m)) <= 1e-9);
            let dil = stinespring(&phi).unwrap();
            assert!(dil.reconstruction_residual <= 1e-8, "{}", dil.reconstruction_residual);
            assert!(dil.isometry_residual <= 1e-9);
            // minimality: theta(A) V H spans H'
            let cols: Vec<CMatrix> = phi
                .algebra()
                .basis_elements()
                .iter()
                .map(|e| dil.theta.apply(e).matmul(&dil.v))
                .flat_map(|m| (0..m.cols()).map(move |j| m.column(j)).collect::<Vec<_>>())
                .collect();
            let (rank, _) = span_rank(&cols, &tol()).unwrap();
            assert_eq!(rank, dil.dim_h_prime);
            // Gram-rank oracle for the dilation dimension
            let d = phi.algebra().dim();
            let basis = phi.algebra().basis_elements();
            let gram = CMatrix::from_fn(d * m, d * m, |row, col| {
                let (alpha, u) = (row / m, row % m);
                let (beta, v) = (col / m, col % m);
                phi.apply(&basis[alpha].involution().mul(&basis[beta]).unwrap())
                    .get(u, v)
            });
            assert_eq!(svd(&gram).rank(&tol()), dil.dim_h_prime);
        }
    }

    #[test]
    fn module_dilation_of_identity_inclusion() {
        let alg = CStarAlgebra::full_matrix_algebra(2);
        let rep = Representation::canonical(&alg);
        let gens = rep.basis_images();
        let module = FinslerModule::new(alg, rep.clone(), 2, gens, tol()).unwrap();
        let qr = build_quasirep(&module, &rep).unwrap();
        let cert = module_stinespring_of(&qr).unwrap();
        assert!(cert.valid, "{:?}", cert.residuals);
        assert_eq!(cert.dim_h_prime, 2);
        assert_eq!(cert.dim_k_prime, 2);
        let r = &cert.residuals;
        for res in [
            r.scalar_dilation,
            r.isometry_v,
            r.module_reconstruction,
            r.theta_morphism,
            r.action_compat,
            r.projection_w,
        ] {
            assert!(res <= 1e-10, "{:?}", cert.residuals);
        }
    }

    #[test]
    fn module_dilation_with_cp_non_homomorphism() {
        // corner module E = A P over M2+M2; phi acts as the identity on the
        // supporting block and as a genuine CP non-homomorphism on the
        // complementary one, so every certificate identity holds exactly
        // while phi itself is not multiplicative
        let alg = CStarAlgebra::new(vec![2, 2]).unwrap();
        let rep = Representation::canonical(&alg);
        let gens: Vec<CMatrix> = (0..2)
            .flat_map(|r| (0..2).map(move |s| (r, s)))
            .map(|(r, s)| rep.apply(&alg.basis_elements()[alg.basis_index(0, r, s)]))
            .collect();
        let module = FinslerModule::new(alg.clone(), rep.clone(), 4, gens.clone(), tol()).unwrap();

        // kappa(m) = (m + u m u*)/2 on the second block
        let u = CMatrix::from_fn(2, 2, |i, j| match (i, j) {
            (0, 1) => c64(1.0, 0.0),
            (1, 0) => c64(-1.0, 0.0),
            _ => c64(0.0, 0.0),
        });
        let mut images = Vec::new();
        for (b, &nb) in alg.block_dims().iter().enumerate() {
            for r in 0..nb {
                for s in 0..nb {
                    let mut unit2 = CMatrix::zeros(2, 2);
                    unit2.set(r, s, c64(1.0, 0.0));
                    let img = if b == 0 {
                        CMatrix::direct_sum(&[unit2, CMatrix::zeros(2, 2)])
                    } else {
                        let averaged = (&unit2 + &u.matmul(&unit2).matmul(&u.adjoint()))
                            .scale_re(0.5);
                        CMatrix::direct_sum(&[CMatrix::zeros(2, 2), averaged])
                    };
                    images.push(img);
                }
            }
        }
        let phi = CPMap::from_images(alg.clone(), images, tol()).unwrap();
        assert!(is_completely_positive(&phi));
        // phi is not multiplicative on the second block
        let e12 = &alg.basis_elements()[alg.basis_index(1, 0, 1)];
        let e21 = &alg.basis_elements()[alg.basis_index(1, 1, 0)];
        let prod = phi.apply(&e12.mul(e21).unwrap());
        let nonmult = phi.apply(e12).matmul(&phi.apply(e21));
        assert!(prod.dist(&nonmult) > 0.1);

        let cert = module_stinespring(&module, &phi, &gens).unwrap();
        assert!(cert.valid, "{:?}", cert.residuals);
        let r = &cert.residuals;
        assert!(r.module_reconstruction <= 1e-8);
        assert!(r.theta_morphism <= 1e-8);
        assert!(r.action_compat <= 1e-8);
    }

    #[test]
    fn averaged_phi_on_full_module_has_no_quasirep() {
        // phi(a) = (a + u a u*)/2 on E = A = M2 is unital CP but admits no
        // map satisfying both quasi-rep identities: squared-identity at the
        // unit forces Phi(1)*Phi(1) = I, and with the action identity that
        // makes phi multiplicative, which it is not. The natural candidate
        // (the localization images of the identity embedding) is rejected.
        let alg = CStarAlgebra::full_matrix_algebra(2);
        let rep = Representation::canonical(&alg);
        let gens = rep.basis_images();
        let module = FinslerModule::new(alg.clone(), rep.clone(), 2, gens.clone(), tol()).unwrap();
        let u = CMatrix::from_fn(2, 2, |i, j| match (i, j) {
            (0, 1) => c64(1.0, 0.0),
            (1, 0) => c64(-1.0, 0.0),
            _ => c64(0.0, 0.0),
        });
        let images: Vec<CMatrix> = alg
            .basis_elements()
            .iter()
            .map(|e| {
                let m = rep.apply(e);
                (&m + &u.matmul(&m).matmul(&u.adjoint())).scale_re(0.5)
            })
            .collect();
        let phi = CPMap::from_images(alg, images, tol()).unwrap();
        assert!(is_completely_positive(&phi));
        let err = module_stinespring(&module, &phi, &gens).unwrap_err();
        assert!(matches!(err, Error::PreconditionFailed { .. }));
    }

    #[test]
    fn perturbed_quasirep_is_rejected_with_large_residual() {
        let alg = CStarAlgebra::full_matrix_algebra(2);
        let rep = Representation::canonical(&alg);
        let gens = rep.basis_images();
        let module = FinslerModule::new(alg, rep.clone(), 2, gens, tol()).unwrap();
        let qr = build_quasirep(&module, &rep).unwrap();
        let mut images = qr.images().to_vec();
        let mut bump = CMatrix::zeros(images[0].rows(), images[0].cols());
        bump.set(0, 0, c64(1e-3, 0.0));
        images[0] = &images[0] + &bump;
        let phi = CPMap::from_representation(&rep, tol());
        match module_stinespring(qr.module(), &phi, &images) {
            Err(Error::PreconditionFailed { residual, .. }) => {
                assert!(residual > 1e-4, "residual {residual}");
            }
            other => panic!("expected PreconditionFailed, got {other:?}"),
        }
    }

    #[test]
    fn enlarging_generators_never_shrinks_k_prime() {
        let alg = CStarAlgebra::full_matrix_algebra(2);
        let rep = Representation::canonical(&alg);
        let gens = rep.basis_images();
        let module = FinslerModule::new(alg.clone(), rep.clone(), 2, gens.clone(), tol()).unwrap();
        let qr = build_quasirep(&module, &rep).unwrap();
        let small = module_stinespring_of(&qr).unwrap();

        let mut more = gens.clone();
        more.push(&gens[0] + &gens[3]);
        let bigger = FinslerModule::new(alg, rep.clone(), 2, more, tol()).unwrap();
        let qr2 = build_quasirep(&bigger, &rep).unwrap();
        let large = module_stinespring_of(&qr2).unwrap();
        assert!(large.dim_k_prime >= small.dim_k_prime);
        assert!(large.valid && small.valid);
    }

    #[test]
    fn zero_module_dilation_is_trivially_valid() {
        let alg = CStarAlgebra::full_matrix_algebra(2);
        let rep = Representation::canonical(&alg);
        let module = FinslerModule::new(alg, rep.clone(), 2, vec![], tol()).unwrap();
        let qr = build_quasirep(&module, &rep).unwrap();
        let cert = module_stinespring_of(&qr).unwrap();
        assert!(cert.valid);
        assert_eq!(cert.dim_k_prime, 0);
    }

    #[test]
    fn non_unital_phi_is_rejected_for_module_dilation() {
        let alg = CStarAlgebra::full_matrix_algebra(2);
        let rep = Representation::canonical(&alg);
        let gens = rep.basis_images();
        let module = FinslerModule::new(alg.clone(), rep.clone(), 2, gens.clone(), tol()).unwrap();
        let images: Vec<CMatrix> = alg
            .basis_elements()
            .iter()
            .map(|e| rep.apply(e).scale_re(0.5))
            .collect();
        let phi = CPMap::from_images(alg, images, tol()).unwrap();
        let err = module_stinespring(&module, &phi, &gens).unwrap_err();
        assert!(matches!(
            err,
            Error::PreconditionFailed {
                check: "phi is unital",
                ..
            }
        ));
    }
}
