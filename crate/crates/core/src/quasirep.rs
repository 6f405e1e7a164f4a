//! Quasi-representations of Finsler modules: maps Phi into B(H, K) with
//! (Phi(x)* Phi(x))^(1/2) = phi(rho(x)). The builder realizes K as the
//! localization of the module by phi, the smallest space carrying the
//! identity exactly; arbitrary candidate maps can also be wrapped and put
//! through the same verifier.

use crate::algebra::Representation;
use crate::error::{Error, Result};
use crate::module::{FinslerModule, ModuleElement};
use crate::numkit::{herm_eig, psd_sqrt, CMatrix, PinvSolver, Tolerance};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// The Finsler structure on rectangular operators: rho0(T) = (T* T)^(1/2).
pub fn rho0(t: &CMatrix, tol: &Tolerance) -> CMatrix {
    let gram = t.adjoint().matmul(t);
    psd_sqrt(&gram.hermitize(), tol).expect("T* T is positive semidefinite")
}

#[derive(Debug, Clone)]
pub struct QuasiRep {
    module: FinslerModule,
    rep: Representation,
    images: Vec<CMatrix>,
    dim_k: usize,
}

/// Sampled residuals of the two defining conditions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuasiRepReport {
    pub samples: usize,
    pub max_identity_residual: f64,
    pub max_action_residual: f64,
    pub pass: bool,
}

/// Construct the quasi-representation on the localization K of the module
/// by phi. The Gram matrix of the generator-basis pairs (g_i, e_s) under
/// <(i,s),(j,t)> = phi(<g_i, g_j>)[s,t] is quotiented by its null space;
/// Phi(g_i) is the corresponding column slice of the quotient map, which
/// gives Phi(x)* Phi(y) = phi(<x, y>) by construction.
pub fn build_quasirep(module: &FinslerModule, rep: &Representation) -> Result<QuasiRep> {
    if rep.algebra() != module.algebra() {
        return Err(Error::AlgebraMismatch {
            left: module.algebra().to_string(),
            right: rep.algebra().to_string(),
        });
    }
    let tol = *module.tol();
    let dim_h = rep.dim();
    let k = module.generators().len();

    // phi applied to all pairwise inner products
    let mut pair_images: Vec<Vec<CMatrix>> = Vec::with_capacity(k);
    let gen_elements: Vec<ModuleElement> = module
        .generators()
        .iter()
        .map(|g| module.element(g.clone()).expect("generators span themselves"))
        .collect();
    for gi in &gen_elements {
        let mut row = Vec::with_capacity(k);
        for gj in &gen_elements {
            row.push(rep.apply(&module.inner_product(gi, gj)?));
        }
        pair_images.push(row);
    }

    let n = k * dim_h;
    let gram = CMatrix::from_fn(n, n, |row, col| {
        let (i, s) = (row / dim_h, row % dim_h);
        let (j, t) = (col / dim_h, col % dim_h);
        pair_images[i][j].get(s, t)
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
    let dim_k = kept.len();
    // quotient map rows: sqrt(lambda) v*, an orthonormal basis of K
    let q = CMatrix::from_fn(dim_k, n, |i, j| {
        eig.vectors.get(j, kept[i]).conj() * eig.values[kept[i]].sqrt()
    });
    let images: Vec<CMatrix> = (0..k)
        .map(|i| q.block(0, i * dim_h, dim_k, dim_h))
        .collect();

    let qr = QuasiRep {
        module: module.clone(),
        rep: rep.clone(),
        images,
        dim_k,
    };
    let defect = qr.extension_defect()?;
    if defect > 10.0 * tol.eq_tol {
        return Err(Error::InvalidMap(format!(
            "extension rule not well-defined: null presentation maps to image of norm {defect:.3e}"
        )));
    }
    Ok(qr)
}

impl QuasiRep {
    /// Wrap candidate generator images without verifying the defining
    /// identities; verification is a separate, explicit step.
    pub fn from_images(
        module: &FinslerModule,
        rep: &Representation,
        images: Vec<CMatrix>,
    ) -> Result<QuasiRep> {
        if rep.algebra() != module.algebra() {
            return Err(Error::AlgebraMismatch {
                left: module.algebra().to_string(),
                right: rep.algebra().to_string(),
            });
        }
        if images.len() != module.generators().len() {
            return Err(Error::DimensionMismatch {
                context: "quasirep images",
                expected: format!("{} images", module.generators().len()),
                got: format!("{}", images.len()),
            });
        }
        let dim_k = images.first().map(|m| m.rows()).unwrap_or(0);
        for img in &images {
            if img.rows() != dim_k || img.cols() != rep.dim() {
                return Err(Error::DimensionMismatch {
                    context: "quasirep image",
                    expected: format!("{dim_k}x{}", rep.dim()),
                    got: format!("{}x{}", img.rows(), img.cols()),
                });
            }
        }
        Ok(QuasiRep {
            module: module.clone(),
            rep: rep.clone(),
            images,
            dim_k,
        })
    }

    pub fn module(&self) -> &FinslerModule {
        &self.module
    }

    pub fn rep(&self) -> &Representation {
        &self.rep
    }

    pub fn images(&self) -> &[CMatrix] {
        &self.images
    }

    pub fn dim_k(&self) -> usize {
        self.dim_k
    }

    pub fn dim_h(&self) -> usize {
        self.rep.dim()
    }

    /// Image of a module element through the extension rule: present x
    /// over the generators and push the coefficients through the images.
    pub fn apply(&self, x: &ModuleElement) -> CMatrix {
        let coeffs = self.module.present(x);
        let mut out = CMatrix::zeros(self.dim_k, self.rep.dim());
        for (c, img) in coeffs.iter().zip(&self.images) {
            out = &out + &img.scale(*c);
        }
        out
    }

    /// Largest image norm over the null space of the generator-basis
    /// presentation map: the obstruction to the extension rule being
    /// well-defined. Zero (up to tolerance) means any two presentations of
    /// the same element get the same image.
    pub fn extension_defect(&self) -> Result<f64> {
        let gens = self.module.generators();
        let alg_images = self.module.action_rep().basis_images();
        let d = alg_images.len();
        let k = gens.len();
        if k == 0 {
            return Ok(0.0);
        }
        let qp = self.module.ambient_rows() * self.module.action_dim();
        let pres = CMatrix::from_fn(qp, k * d, |row, col| {
            let (i, alpha) = (col / d, col % d);
            gens[i].matmul(&alg_images[alpha]).flattened().get(row, 0)
        });
        let solver = PinvSolver::new(&pres, self.module.tol());
        let phi_images: Vec<CMatrix> = self
            .module
            .algebra()
            .basis_elements()
            .iter()
            .map(|e| self.rep.apply(e))
            .collect();
        let mut defect: f64 = 0.0;
        for null_vec in solver.null_basis() {
            let mut t = CMatrix::zeros(self.dim_k, self.rep.dim());
            for col in 0..k * d {
                let (i, alpha) = (col / d, col % d);
                let c = null_vec.get(col, 0);
                t = &t + &self.images[i].matmul(&phi_images[alpha]).scale(c);
            }
            defect = defect.max(t.frobenius_norm());
        }
        Ok(defect)
    }

    /// Sample the defining conditions: (i) rho0(Phi(x)) = phi(rho(x)) and
    /// (ii) Phi(xa) = Phi(x) phi(a).
    pub fn verify(&self, sample_count: usize, seed: u64) -> Result<QuasiRepReport> {
        if sample_count == 0 {
            return Err(Error::EmptyInput("sample_count must be at least 1"));
        }
        let tol = self.module.tol();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut max_identity: f64 = 0.0;
        let mut max_action: f64 = 0.0;
        for _ in 0..sample_count {
            let x = self.module.random_element(&mut rng);
            let a = self.module.algebra().random_element(&mut rng);
            let phi_x = self.apply(&x);
            let lhs = rho0(&phi_x, tol);
            let rhs = self.rep.apply(&self.module.rho(&x)?);
            let x_norm = self.module.module_norm(&x);
            max_identity = max_identity.max(lhs.dist(&rhs) / (1.0 + x_norm));

            let xa = self.module.act(&x, &a)?;
            let action_lhs = self.apply(&xa);
            let action_rhs = phi_x.matmul(&self.rep.apply(&a));
            max_action = max_action
                .max(action_lhs.dist(&action_rhs) / (1.0 + x_norm * a.norm()));
        }
        Ok(QuasiRepReport {
            samples: sample_count,
            max_identity_residual: max_identity,
            max_action_residual: max_action,
            pass: max_identity <= 10.0 * tol.eq_tol && max_action <= 10.0 * tol.eq_tol,
        })
    }
}
