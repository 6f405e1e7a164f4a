//! Concrete Finsler modules: a span of rectangular generator matrices over
//! a faithfully represented C*-algebra, with the right action by matrix
//! multiplication and the map rho derived from inner products. Construction
//! validates action closure and that all pairwise inner products land in
//! the represented algebra; both are necessary and sufficient for the whole
//! span by bilinearity.

use crate::algebra::{AlgElement, CStarAlgebra, Representation};
use crate::error::{Error, Result};
use crate::numkit::{c64, op_norm, CMatrix, PinvSolver, Tolerance};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// An element of a Finsler module; operations live on the module so the
/// matrix stays plain data.
#[derive(Debug, Clone, PartialEq)]
pub struct ModuleElement {
    matrix: CMatrix,
}

impl ModuleElement {
    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }
}

#[derive(Debug, Clone)]
pub struct FinslerModule {
    algebra: CStarAlgebra,
    action_rep: Representation,
    ambient_rows: usize,
    generators: Vec<CMatrix>,
    tol: Tolerance,
    alg_images: Vec<CMatrix>,
    // least-squares preimages under pi, columns are flattened basis images
    alg_solver: PinvSolver,
    // presentation of elements in the generator span, columns are
    // flattened generators
    presentation: PinvSolver,
}

/// Result of sampling the defining axiom rho(xa)^2 = a* rho(x)^2 a.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinslerReport {
    pub samples: usize,
    pub max_residual: f64,
    pub pass: bool,
}

impl FinslerModule {
    pub fn new(
        algebra: CStarAlgebra,
        action_rep: Representation,
        ambient_rows: usize,
        generators: Vec<CMatrix>,
        tol: Tolerance,
    ) -> Result<Self> {
        if action_rep.algebra() != &algebra {
            return Err(Error::AlgebraMismatch {
                left: algebra.to_string(),
                right: action_rep.algebra().to_string(),
            });
        }
        if !action_rep.is_faithful() {
            return Err(Error::InvalidModule(
                "action representation must be faithful".into(),
            ));
        }
        let p = action_rep.dim();
        for (i, g) in generators.iter().enumerate() {
            if g.rows() != ambient_rows || g.cols() != p {
                return Err(Error::DimensionMismatch {
                    context: "module generator",
                    expected: format!("{ambient_rows}x{p} (generator {i})"),
                    got: format!("{}x{}", g.rows(), g.cols()),
                });
            }
        }

        let alg_images: Vec<CMatrix> = action_rep.basis_images();
        let d = algebra.dim();
        let alg_mat = CMatrix::from_fn(p * p, d, |i, j| alg_images[j].flattened().get(i, 0));
        let alg_solver = PinvSolver::new(&alg_mat, &tol);

        let k = generators.len();
        let pres_mat = CMatrix::from_fn(ambient_rows * p, k, |i, j| {
            generators[j].flattened().get(i, 0)
        });
        let presentation = PinvSolver::new(&pres_mat, &tol);

        let module = FinslerModule {
            algebra,
            action_rep,
            ambient_rows,
            generators,
            tol,
            alg_images,
            alg_solver,
            presentation,
        };

        // right action must stay inside the generator span
        for (i, g) in module.generators.iter().enumerate() {
            for (alpha, img) in module.alg_images.iter().enumerate() {
                let moved = g.matmul(img);
                let (_, res) = module
                    .presentation
                    .solve(&moved.flattened())
                    .expect("shape fixed above");
                if res > module.tol.eq_tol * (1.0 + moved.frobenius_norm()) {
                    return Err(Error::ActionNotClosed {
                        generator: i,
                        basis_index: alpha,
                        residual: res,
                    });
                }
            }
        }
        // pairwise products decide x*y in pi(A) for the whole span
        for gi in &module.generators {
            for gj in &module.generators {
                let prod = gi.adjoint().matmul(gj);
                let (_, res) = module
                    .alg_solver
                    .solve(&prod.flattened())
                    .expect("shape fixed above");
                if res > module.tol.eq_tol * (1.0 + prod.frobenius_norm()) {
                    return Err(Error::NotInAlgebra { residual: res });
                }
            }
        }
        Ok(module)
    }

    pub fn algebra(&self) -> &CStarAlgebra {
        &self.algebra
    }

    pub fn action_rep(&self) -> &Representation {
        &self.action_rep
    }

    pub fn generators(&self) -> &[CMatrix] {
        &self.generators
    }

    pub fn ambient_rows(&self) -> usize {
        self.ambient_rows
    }

    pub fn action_dim(&self) -> usize {
        self.action_rep.dim()
    }

    pub fn tol(&self) -> &Tolerance {
        &self.tol
    }

    /// Linear dimension of the generator span.
    pub fn span_dim(&self) -> usize {
        self.presentation.rank()
    }

    pub fn is_zero(&self) -> bool {
        self.span_dim() == 0
    }

    /// Wrap a matrix after checking it lies in the generator span.
    pub fn element(&self, matrix: CMatrix) -> Result<ModuleElement> {
        let p = self.action_rep.dim();
        if matrix.rows() != self.ambient_rows || matrix.cols() != p {
            return Err(Error::DimensionMismatch {
                context: "module element",
                expected: format!("{}x{p}", self.ambient_rows),
                got: format!("{}x{}", matrix.rows(), matrix.cols()),
            });
        }
        let (_, res) = self
            .presentation
            .solve(&matrix.flattened())
            .expect("shape checked above");
        if res > self.tol.eq_tol * (1.0 + matrix.frobenius_norm()) {
            return Err(Error::NotInModule { residual: res });
        }
        Ok(ModuleElement { matrix })
    }

    /// Minimum-norm coefficients of an element over the generators. Any
    /// two presentations differ by a null-space vector of the generator
    /// family, which downstream extension rules must annihilate.
    pub fn present(&self, x: &ModuleElement) -> Vec<Complex64> {
        let (c, _) = self
            .presentation
            .solve(&x.matrix.flattened())
            .expect("element shapes are validated");
        c.entries().to_vec()
    }

    /// Linear combination of the generators; in the span by construction.
    pub fn combine(&self, coeffs: &[Complex64]) -> ModuleElement {
        assert_eq!(coeffs.len(), self.generators.len(), "one coefficient per generator");
        let p = self.action_rep.dim();
        let mut m = CMatrix::zeros(self.ambient_rows, p);
        for (c, g) in coeffs.iter().zip(&self.generators) {
            m = &m + &g.scale(*c);
        }
        ModuleElement { matrix: m }
    }

    pub fn zero_element(&self) -> ModuleElement {
        ModuleElement {
            matrix: CMatrix::zeros(self.ambient_rows, self.action_rep.dim()),
        }
    }

    /// The right action x.a = x pi(a).
    pub fn act(&self, x: &ModuleElement, a: &AlgElement) -> Result<ModuleElement> {
        if a.algebra() != &self.algebra {
            return Err(Error::AlgebraMismatch {
                left: self.algebra.to_string(),
                right: a.algebra().to_string(),
            });
        }
        Ok(ModuleElement {
            matrix: x.matrix.matmul(&self.action_rep.apply(a)),
        })
    }

    /// The algebra-valued inner product: the preimage of x* y under pi.
    pub fn inner_product(&self, x: &ModuleElement, y: &ModuleElement) -> Result<AlgElement> {
        let prod = x.matrix.adjoint().matmul(&y.matrix);
        let (coords, res) = self
            .alg_solver
            .solve(&prod.flattened())
            .expect("element shapes are validated");
        if res > self.tol.eq_tol * (1.0 + prod.frobenius_norm()) {
            return Err(Error::NotInAlgebra { residual: res });
        }
        self.algebra.from_coords(coords.entries())
    }

    /// The unique positive b with pi(b)^2 = x* x.
    pub fn rho(&self, x: &ModuleElement) -> Result<AlgElement> {
        self.inner_product(x, x)?.psd_sqrt(&self.tol)
    }

    /// Module norm ||rho(x)||; equals the operator norm of the ambient
    /// matrix because the action representation is faithful.
    pub fn module_norm(&self, x: &ModuleElement) -> f64 {
        op_norm(&x.matrix)
    }

    /// Deterministic pseudo-random span element with coefficients in the
    /// complex unit square.
    pub fn random_element<R: Rng>(&self, rng: &mut R) -> ModuleElement {
        let coeffs: Vec<Complex64> = (0..self.generators.len())
            .map(|_| c64(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        self.combine(&coeffs)
    }

    fn random_alg<R: Rng>(&self, rng: &mut R) -> AlgElement {
        self.algebra.random_element(rng)
    }

    /// Sample the defining axiom rho(xa)^2 = a* rho(x)^2 a.
    pub fn verify_finsler_axiom(&self, sample_count: usize, seed: u64) -> Result<FinslerReport> {
        self.verify_axiom_impl(sample_count, seed, 0.0)
    }

    /// Negative-testing path: rho deliberately corrupted by adding
    /// `corruption` times the unit to the preimage of x* x before the
    /// square root. Any nonzero corruption on a nonzero module breaks the
    /// axiom; used to show the verifier rejects.
    pub fn verify_finsler_axiom_corrupted(
        &self,
        sample_count: usize,
        seed: u64,
        corruption: f64,
    ) -> Result<FinslerReport> {
        self.verify_axiom_impl(sample_count, seed, corruption)
    }

    fn corrupted_rho(&self, x: &ModuleElement, eps: f64) -> Result<AlgElement> {
        let base = self.inner_product(x, x)?;
        base.add(&self.algebra.unit().scale(c64(eps, 0.0)))?
            .psd_sqrt(&self.tol)
    }

    fn verify_axiom_impl(
        &self,
        sample_count: usize,
        seed: u64,
        corruption: f64,
    ) -> Result<FinslerReport> {
        if sample_count == 0 {
            return Err(Error::EmptyInput("sample_count must be at least 1"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut max_residual: f64 = 0.0;
        for _ in 0..sample_count {
            let x = self.random_element(&mut rng);
            let a = self.random_alg(&mut rng);
            let xa = self.act(&x, &a)?;
            let rho_xa = self.corrupted_rho(&xa, corruption)?;
            let rho_x = self.corrupted_rho(&x, corruption)?;
            let lhs = rho_xa.mul(&rho_xa)?;
            let rhs = a
                .involution()
                .mul(&rho_x.mul(&rho_x)?)?
                .mul(&a)?;
            let scale = 1.0 + a.norm().powi(2) * self.module_norm(&x).powi(2);
            let res = lhs.dist(&rhs) / scale;
            max_residual = max_residual.max(res);
        }
        Ok(FinslerReport {
            samples: sample_count,
            max_residual,
            pass: max_residual <= 10.0 * self.tol.eq_tol,
        })
    }

    /// Span dimension of {rho(x)^2} over random samples, grown until it
    /// stays flat for 3 dim(A) consecutive draws or fills the algebra.
    pub fn fullness_rank(&self) -> usize {
        let d = self.algebra.dim();
        let mut rng = ChaCha8Rng::seed_from_u64(0x5EED);
        let mut vectors: Vec<CMatrix> = Vec::new();
        let mut rank = 0usize;
        let mut stable = 0usize;
        while stable < 3 * d && rank < d {
            let x = self.random_element(&mut rng);
            // rho(x)^2 is the inner product itself, no square root needed
            let sq = match self.inner_product(&x, &x) {
                Ok(v) => v,
                Err(_) => break,
            };
            vectors.push(CMatrix::new(d, 1, sq.coords()).expect("coords are finite"));
            let new_rank = match crate::numkit::span_rank(&vectors, &self.tol) {
                Ok((r, basis)) => {
                    // keep only a basis so the Gram stays small
                    vectors = basis;
                    r
                }
                Err(_) => break,
            };
            if new_rank > rank {
                rank = new_rank;
                stable = 0;
            } else {
                stable += 1;
            }
        }
        rank
    }

    /// Fullness: the span of {rho(x)^2} is all of the algebra.
    pub fn is_full(&self) -> bool {
        self.fullness_rank() == self.algebra.dim()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::Representation;

    fn tol() -> Tolerance {
        Tolerance::default()
    }

    /// The algebra as a module over itself, generators the matrix units.
    fn algebra_as_module(alg: &CStarAlgebra) -> FinslerModule {
        let rep = Representation::canonical(alg);
        let p = rep.dim();
        let gens = rep.basis_images();
        FinslerModule::new(alg.clone(), rep, p, gens, tol()).unwrap()
    }

    /// E = A P over M2+M2 with P the central projection onto block one.
    fn corner_module() -> FinslerModule {
        let alg = CStarAlgebra::new(vec![2, 2]).unwrap();
        let rep = Representation::canonical(&alg);
        let gens: Vec<CMatrix> = (0..2)
            .flat_map(|r| (0..2).map(move |s| (r, s)))
            .map(|(r, s)| {
                let e = alg.basis_elements()[alg.basis_index(0, r, s)].clone();
                Representation::canonical(&alg).apply(&e)
            })
            .collect();
        FinslerModule::new(alg, rep, 4, gens, tol()).unwrap()
    }

    #[test]
    fn action_is_associative() {
        let alg = CStarAlgebra::full_matrix_algebra(2);
        let module = algebra_as_module(&alg);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..5 {
            let x = module.random_element(&mut rng);
            let a = module.random_alg(&mut rng);
            let b = module.random_alg(&mut rng);
            let left = module
                .act(&module.act(&x, &a).unwrap(), &b)
                .unwrap();
            let right = module.act(&x, &a.mul(&b).unwrap()).unwrap();
            assert!(left.matrix().dist(right.matrix()) <= 1e-12);
        }
    }

    #[test]
    fn action_by_unit_and_zero() {
        let alg = CStarAlgebra::full_matrix_algebra(2);
        let module = algebra_as_module(&alg);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = module.random_element(&mut rng);
        let moved = module.act(&x, &alg.unit()).unwrap();
        assert!(moved.matrix().dist(x.matrix()) <= 1e-13);
        let killed = module.act(&x, &alg.zero()).unwrap();
        assert!(killed.matrix().frobenius_norm() == 0.0);
    }

    #[test]
    fn rho_of_zero_is_zero() {
        let alg = CStarAlgebra::full_matrix_algebra(2);
        let module = algebra_as_module(&alg);
        let rho = module.rho(&module.zero_element()).unwrap();
        assert!(rho.frobenius_norm() <= 1e-12);
    }

    #[test]
    fn rho_on_algebra_module_is_abs() {
        // E = A with pi faithful: rho(a) = (a*a)^(1/2)
        let alg = CStarAlgebra::full_matrix_algebra(2);
        let module = algebra_as_module(&alg);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..5 {
            let a = module.random_alg(&mut rng);
            let x = module.element(module.action_rep().apply(&a)).unwrap();
            let rho = module.rho(&x).unwrap();
            let oracle = a.abs_sqrt(&tol()).unwrap();
            assert!(rho.dist(&oracle) <= 1e-8 * (1.0 + oracle.frobenius_norm()));
        }
    }

    #[test]
    fn rho_squares_back_to_x_star_x() {
        let alg = CStarAlgebra::new(vec![2, 2]).unwrap();
        let module = algebra_as_module(&alg);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..10 {
            let x = module.random_element(&mut rng);
            let rho = module.rho(&x).unwrap();
            let lhs = module
                .action_rep()
                .apply(&rho)
                .matmul(&module.action_rep().apply(&rho));
            let rhs = x.matrix().adjoint().matmul(x.matrix());
            assert!(lhs.dist(&rhs) <= 1e-8 * (1.0 + rhs.frobenius_norm()));
        }
    }

    #[test]
    fn finsler_axiom_on_matrix_algebra() {
        let alg = CStarAlgebra::full_matrix_algebra(2);
        let module = algebra_as_module(&alg);
        let report = module.verify_finsler_axiom(50, 7).unwrap();
        assert!(report.pass, "residual {}", report.max_residual);
        assert!(report.max_residual <= 1e-10);
    }

    #[test]
    fn finsler_axiom_on_corner_module() {
        let module = corner_module();
        let report = module.verify_finsler_axiom(50, 8).unwrap();
        assert!(report.pass, "residual {}", report.max_residual);
    }

    #[test]
    fn corrupted_rho_fails_axiom() {
        let alg = CStarAlgebra::full_matrix_algebra(2);
        let module = algebra_as_module(&alg);
        let report = module
            .verify_finsler_axiom_corrupted(50, 9, 1e-3)
            .unwrap();
        assert!(!report.pass);
        assert!(report.max_residual > 1e-5);
    }

    #[test]
    fn fullness_of_algebra_and_corner() {
        let alg = CStarAlgebra::new(vec![2, 2]).unwrap();
        assert!(algebra_as_module(&alg).is_full());
        let corner = corner_module();
        assert!(!corner.is_full());
        assert_eq!(corner.fullness_rank(), 4);
    }

    #[test]
    fn zero_module_is_not_full() {
        let alg = CStarAlgebra::full_matrix_algebra(2);
        let rep = Representation::canonical(&alg);
        let module = FinslerModule::new(alg, rep, 2, vec![], tol()).unwrap();
        assert!(!module.is_full());
        assert_eq!(module.span_dim(), 0);
        assert!(module.is_zero());
        let report = module.verify_finsler_axiom(10, 1).unwrap();
        assert!(report.pass);
    }

    #[test]
    fn module_norm_matches_singular_values() {
        let alg = CStarAlgebra::new(vec![2, 1]).unwrap();
        let module = algebra_as_module(&alg);
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for _ in 0..5 {
            let x = module.random_element(&mut rng);
            // oracle: norm through rho, the definition
            let rho = module.rho(&x).unwrap();
            assert!((module.module_norm(&x) - rho.norm()).abs() <= 1e-9);
        }
        assert_eq!(module.module_norm(&module.zero_element()), 0.0);
    }

    #[test]
    fn norm_of_isometric_generator_is_one() {
        let alg = CStarAlgebra::full_matrix_algebra(2);
        let module = algebra_as_module(&alg);
        let x = module.element(CMatrix::identity(2)).unwrap();
        assert!((module.module_norm(&x) - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn banach_module_inequality() {
        let alg = CStarAlgebra::full_matrix_algebra(3);
        let module = algebra_as_module(&alg);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10 {
            let x = module.random_element(&mut rng);
            let a = module.random_alg(&mut rng);
            let xa = module.act(&x, &a).unwrap();
            let bound =
                module.module_norm(&x) * op_norm(&module.action_rep().apply(&a)) + 1e-9;
            assert!(module.module_norm(&xa) <= bound);
        }
    }

    #[test]
    fn action_closure_violation_is_rejected() {
        let alg = CStarAlgebra::full_matrix_algebra(2);
        let rep = Representation::canonical(&alg);
        let gens = vec![CMatrix::from_diag(&[1.0, 0.0])];
        let err = FinslerModule::new(alg, rep, 2, gens, tol()).unwrap_err();
        assert!(matches!(err, Error::ActionNotClosed { .. }));
    }

    #[test]
    fn inner_products_outside_algebra_are_rejected() {
        // row vectors over the diagonal algebra close under the action but
        // have cross products outside it
        let alg = CStarAlgebra::new(vec![1, 1]).unwrap();
        let rep = Representation::canonical(&alg);
        let g1 = CMatrix::new(1, 2, vec![c64(1.0, 0.0), c64(0.0, 0.0)]).unwrap();
        let g2 = CMatrix::new(1, 2, vec![c64(0.0, 0.0), c64(1.0, 0.0)]).unwrap();
        let err = FinslerModule::new(alg, rep, 1, vec![g1, g2], tol()).unwrap_err();
        assert!(matches!(err, Error::NotInAlgebra { .. }));
    }

    #[test]
    fn foreign_elements_are_rejected() {
        let module = corner_module();
        // support in block two is outside E = A P
        let alg = module.algebra().clone();
        let stray = Representation::canonical(&alg)
            .apply(&alg.basis_elements()[alg.basis_index(1, 0, 0)]);
        let err = module.element(stray).unwrap_err();
        assert!(matches!(err, Error::NotInModule { .. }));
    }

    #[test]
    fn fullness_stable_under_redundant_generators() {
        let alg = CStarAlgebra::full_matrix_algebra(2);
        let rep = Representation::canonical(&alg);
        let mut gens = rep.basis_images();
        let extra = &gens[0] + &gens[3];
        gens.push(extra);
        let module = FinslerModule::new(alg.clone(), rep, 2, gens, tol()).unwrap();
        assert!(module.is_full());
        assert!(algebra_as_module(&alg).is_full());
    }

    #[test]
    fn row_vector_module_over_m2() {
        // E = C^2 as 1 x 2 rows over M2, inner product x* y
        let alg = CStarAlgebra::full_matrix_algebra(2);
        let rep = Representation::canonical(&alg);
        let g1 = CMatrix::new(1, 2, vec![c64(1.0, 0.0), c64(0.0, 0.0)]).unwrap();
        let g2 = CMatrix::new(1, 2, vec![c64(0.0, 0.0), c64(1.0, 0.0)]).unwrap();
        let module = FinslerModule::new(alg, rep, 1, vec![g1, g2], tol()).unwrap();
        assert_eq!(module.span_dim(), 2);
        let report = module.verify_finsler_axiom(30, 12).unwrap();
        assert!(report.pass);
        assert!(module.is_full());
    }
}
