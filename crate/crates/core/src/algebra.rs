//! Finite-dimensional C*-algebras as direct sums of full matrix blocks,
//! their elements, representations, states, the GNS construction and
//! commutant computations. Representations are stored as block
//! multiplicities plus an optional change of basis, so the *-homomorphism
//! property holds by construction; raw matrix images only enter through a
//! constructor that verifies and decomposes them.

use crate::error::{Error, Result};
use crate::numkit::{
    c64, herm_eig, op_norm, psd_sqrt, span_rank, svd, CMatrix, PinvSolver, Tolerance,
};
use num_complex::Complex64;
use std::fmt;

/// A finite direct sum of full matrix algebras, identified by its block sizes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CStarAlgebra {
    block_dims: Vec<usize>,
}

impl CStarAlgebra {
    pub fn new(block_dims: Vec<usize>) -> Result<Self> {
        if block_dims.is_empty() {
            return Err(Error::InvalidAlgebra("need at least one block"));
        }
        if block_dims.iter().any(|&n| n == 0) {
            return Err(Error::InvalidAlgebra("block dimensions must be positive"));
        }
        Ok(CStarAlgebra { block_dims })
    }

    pub fn full_matrix_algebra(n: usize) -> Self {
        CStarAlgebra::new(vec![n]).expect("positive dimension")
    }

    pub fn block_dims(&self) -> &[usize] {
        &self.block_dims
    }

    pub fn num_blocks(&self) -> usize {
        self.block_dims.len()
    }

    /// Linear dimension: sum of squared block sizes.
    pub fn dim(&self) -> usize {
        self.block_dims.iter().map(|n| n * n).sum()
    }

    /// Dimension of the defining (multiplicity one) representation space.
    pub fn canonical_dim(&self) -> usize {
        self.block_dims.iter().sum()
    }

    /// Start offset of each block inside the canonical representation space.
    pub fn block_offsets(&self) -> Vec<usize> {
        let mut offsets = Vec::with_capacity(self.block_dims.len());
        let mut acc = 0;
        for &n in &self.block_dims {
            offsets.push(acc);
            acc += n;
        }
        offsets
    }

    pub fn zero(&self) -> AlgElement {
        AlgElement {
            algebra: self.clone(),
            blocks: self.block_dims.iter().map(|&n| CMatrix::zeros(n, n)).collect(),
        }
    }

    pub fn unit(&self) -> AlgElement {
        AlgElement {
            algebra: self.clone(),
            blocks: self.block_dims.iter().map(|&n| CMatrix::identity(n)).collect(),
        }
    }

    /// Matrix units of every block, in coordinate order: block by block,
    /// row-major within the block.
    pub fn basis_elements(&self) -> Vec<AlgElement> {
        let mut out = Vec::with_capacity(self.dim());
        for (b, &n) in self.block_dims.iter().enumerate() {
            for r in 0..n {
                for s in 0..n {
                    let mut el = self.zero();
                    el.blocks[b].set(r, s, c64(1.0, 0.0));
                    out.push(el);
                }
            }
        }
        out
    }

    /// Flat coordinate index of the matrix unit (block, row, col).
    pub fn basis_index(&self, block: usize, row: usize, col: usize) -> usize {
        let mut idx = 0;
        for &n in &self.block_dims[..block] {
            idx += n * n;
        }
        idx + row * self.block_dims[block] + col
    }

    /// Central projection selecting one block.
    pub fn central_projection(&self, block: usize) -> AlgElement {
        let mut el = self.zero();
        let n = self.block_dims[block];
        el.blocks[block] = CMatrix::identity(n);
        el
    }

    /// Pseudo-random element with block entries in the complex unit square.
    pub fn random_element<R: rand::Rng>(&self, rng: &mut R) -> AlgElement {
        let blocks = self
            .block_dims
            .iter()
            .map(|&n| {
                CMatrix::from_fn(n, n, |_, _| {
                    c64(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
                })
            })
            .collect();
        AlgElement {
            algebra: self.clone(),
            blocks,
        }
    }

    pub fn element(&self, blocks: Vec<CMatrix>) -> Result<AlgElement> {
        if blocks.len() != self.block_dims.len() {
            return Err(Error::DimensionMismatch {
                context: "AlgElement",
                expected: format!("{} blocks", self.block_dims.len()),
                got: format!("{}", blocks.len()),
            });
        }
        for (b, m) in blocks.iter().enumerate() {
            let n = self.block_dims[b];
            if m.rows() != n || m.cols() != n {
                return Err(Error::DimensionMismatch {
                    context: "AlgElement block",
                    expected: format!("{n}x{n}"),
                    got: format!("{}x{}", m.rows(), m.cols()),
                });
            }
        }
        Ok(AlgElement {
            algebra: self.clone(),
            blocks,
        })
    }

    /// Element from flat coordinates in the matrix-unit basis.
    pub fn from_coords(&self, coords: &[Complex64]) -> Result<AlgElement> {
        if coords.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                context: "from_coords",
                expected: format!("{} coordinates", self.dim()),
                got: format!("{}", coords.len()),
            });
        }
        let mut blocks = Vec::with_capacity(self.block_dims.len());
        let mut at = 0;
        for &n in &self.block_dims {
            blocks.push(
                CMatrix::new(n, n, coords[at..at + n * n].to_vec())
                    .expect("finite coordinates"),
            );
            at += n * n;
        }
        Ok(AlgElement {
            algebra: self.clone(),
            blocks,
        })
    }
}

impl fmt::Display for CStarAlgebra {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.block_dims.iter().map(|n| format!("M{n}")).collect();
        write!(f, "{}", parts.join("+"))
    }
}

/// An element of a block direct-sum algebra, one matrix per block.
#[derive(Debug, Clone, PartialEq)]
pub struct AlgElement {
    algebra: CStarAlgebra,
    blocks: Vec<CMatrix>,
}

fn check_same(a: &AlgElement, b: &AlgElement) -> Result<()> {
    if a.algebra != b.algebra {
        return Err(Error::AlgebraMismatch {
            left: a.algebra.to_string(),
            right: b.algebra.to_string(),
        });
    }
    Ok(())
}

impl AlgElement {
    pub fn algebra(&self) -> &CStarAlgebra {
        &self.algebra
    }

    pub fn blocks(&self) -> &[CMatrix] {
        &self.blocks
    }

    pub fn block(&self, b: usize) -> &CMatrix {
        &self.blocks[b]
    }

    pub fn mul(&self, other: &AlgElement) -> Result<AlgElement> {
        check_same(self, other)?;
        let blocks = self
            .blocks
            .iter()
            .zip(&other.blocks)
            .map(|(x, y)| x.matmul(y))
            .collect();
        Ok(AlgElement {
            algebra: self.algebra.clone(),
            blocks,
        })
    }

    pub fn add(&self, other: &AlgElement) -> Result<AlgElement> {
        check_same(self, other)?;
        let blocks = self
            .blocks
            .iter()
            .zip(&other.blocks)
            .map(|(x, y)| x + y)
            .collect();
        Ok(AlgElement {
            algebra: self.algebra.clone(),
            blocks,
        })
    }

    pub fn sub(&self, other: &AlgElement) -> Result<AlgElement> {
        check_same(self, other)?;
        let blocks = self
            .blocks
            .iter()
            .zip(&other.blocks)
            .map(|(x, y)| x - y)
            .collect();
        Ok(AlgElement {
            algebra: self.algebra.clone(),
            blocks,
        })
    }

    /// The involution a -> a*.
    pub fn involution(&self) -> AlgElement {
        AlgElement {
            algebra: self.algebra.clone(),
            blocks: self.blocks.iter().map(|m| m.adjoint()).collect(),
        }
    }

    pub fn scale(&self, factor: Complex64) -> AlgElement {
        AlgElement {
            algebra: self.algebra.clone(),
            blocks: self.blocks.iter().map(|m| m.scale(factor)).collect(),
        }
    }

    pub fn hermitize(&self) -> AlgElement {
        AlgElement {
            algebra: self.algebra.clone(),
            blocks: self.blocks.iter().map(|m| m.hermitize()).collect(),
        }
    }

    /// C*-norm: the largest block operator norm.
    pub fn norm(&self) -> f64 {
        self.blocks.iter().map(op_norm).fold(0.0, f64::max)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.blocks
            .iter()
            .map(|m| m.frobenius_norm().powi(2))
            .sum::<f64>()
            .sqrt()
    }

    pub fn dist(&self, other: &AlgElement) -> f64 {
        self.blocks
            .iter()
            .zip(&other.blocks)
            .map(|(x, y)| x.dist(y).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    pub fn is_hermitian(&self, tol: &Tolerance) -> bool {
        self.dist(&self.involution()) <= tol.eq_tol * (1.0 + self.frobenius_norm())
    }

    /// Positivity: Hermitian and all block eigenvalues above
    /// `-eq_tol * (1 + ||a||)`.
    pub fn is_positive(&self, tol: &Tolerance) -> bool {
        if !self.is_hermitian(tol) {
            return false;
        }
        let limit = tol.eq_tol * (1.0 + self.norm());
        self.blocks.iter().all(|m| {
            if m.rows() == 0 {
                return true;
            }
            let eig = herm_eig(&m.hermitize(), tol).expect("hermitized");
            eig.values.last().copied().unwrap_or(0.0) >= -limit
        })
    }

    /// The absolute value (a* a)^(1/2).
    pub fn abs_sqrt(&self, tol: &Tolerance) -> Result<AlgElement> {
        self.involution().mul(self)?.psd_sqrt(tol)
    }

    /// Positive square root of a PSD element, blockwise.
    pub fn psd_sqrt(&self, tol: &Tolerance) -> Result<AlgElement> {
        let blocks = self
            .blocks
            .iter()
            .map(|m| psd_sqrt(&m.hermitize(), tol))
            .collect::<Result<Vec<_>>>()?;
        Ok(AlgElement {
            algebra: self.algebra.clone(),
            blocks,
        })
    }

    /// Flat coordinates in the matrix-unit basis (block entries, row-major).
    pub fn coords(&self) -> Vec<Complex64> {
        let mut out = Vec::with_capacity(self.algebra.dim());
        for m in &self.blocks {
            out.extend_from_slice(m.entries());
        }
        out
    }

    /// The element as one block-diagonal matrix on the canonical
    /// representation space.
    pub fn full_matrix(&self) -> CMatrix {
        CMatrix::direct_sum(&self.blocks)
    }

    pub fn trace(&self) -> Complex64 {
        self.blocks.iter().map(|m| m.trace()).sum()
    }
}

/// A *-representation, stored as one multiplicity per block together with an
/// optional change-of-basis unitary and an optional zero-padded summand. The
/// represented space is C^N with N = sum(multiplicity * block size) + padding;
/// on the padding every image is zero, so reps with padding are degenerate.
#[derive(Debug, Clone, PartialEq)]
pub struct Representation {
    algebra: CStarAlgebra,
    multiplicities: Vec<usize>,
    padding: usize,
    basis_unitary: Option<CMatrix>,
}

impl Representation {
    pub fn new(algebra: CStarAlgebra, multiplicities: Vec<usize>) -> Result<Self> {
        Self::with_details(algebra, multiplicities, 0, None, &Tolerance::default())
    }

    pub fn with_details(
        algebra: CStarAlgebra,
        multiplicities: Vec<usize>,
        padding: usize,
        basis_unitary: Option<CMatrix>,
        tol: &Tolerance,
    ) -> Result<Self> {
        if multiplicities.len() != algebra.num_blocks() {
            return Err(Error::InvalidRepresentation(format!(
                "expected {} multiplicities, got {}",
                algebra.num_blocks(),
                multiplicities.len()
            )));
        }
        let rep = Representation {
            algebra,
            multiplicities,
            padding,
            basis_unitary: None,
        };
        let n = rep.dim();
        if let Some(u) = basis_unitary {
            if u.rows() != n || u.cols() != n {
                return Err(Error::InvalidRepresentation(format!(
                    "basis unitary must be {n}x{n}, got {}x{}",
                    u.rows(),
                    u.cols()
                )));
            }
            let defect = u.adjoint().matmul(&u).dist(&CMatrix::identity(n));
            if defect > tol.eq_tol * (1.0 + n as f64) {
                return Err(Error::InvalidRepresentation(format!(
                    "basis matrix is not unitary: defect {defect:.3e}"
                )));
            }
            return Ok(Representation {
                basis_unitary: Some(u),
                ..rep
            });
        }
        Ok(rep)
    }

    /// The defining representation: every block with multiplicity one.
    pub fn canonical(algebra: &CStarAlgebra) -> Self {
        Representation {
            multiplicities: vec![1; algebra.num_blocks()],
            algebra: algebra.clone(),
            padding: 0,
            basis_unitary: None,
        }
    }

    pub fn algebra(&self) -> &CStarAlgebra {
        &self.algebra
    }

    pub fn multiplicities(&self) -> &[usize] {
        &self.multiplicities
    }

    pub fn padding(&self) -> usize {
        self.padding
    }

    pub fn dim(&self) -> usize {
        self.algebra
            .block_dims()
            .iter()
            .zip(&self.multiplicities)
            .map(|(&n, &m)| n * m)
            .sum::<usize>()
            + self.padding
    }

    /// Faithful iff every block appears; padding does not matter for
    /// faithfulness.
    pub fn is_faithful(&self) -> bool {
        self.multiplicities.iter().all(|&m| m >= 1)
    }

    /// Image of an element: U (directsum blocks kron I_m, plus zero padding) U*.
    pub fn apply(&self, a: &AlgElement) -> CMatrix {
        assert_eq!(
            a.algebra(),
            &self.algebra,
            "representation applied to foreign element"
        );
        let mut parts: Vec<CMatrix> = Vec::with_capacity(self.multiplicities.len() + 1);
        for (b, &m) in self.multiplicities.iter().enumerate() {
            if m == 0 {
                continue;
            }
            parts.push(a.block(b).kron(&CMatrix::identity(m)));
        }
        if self.padding > 0 {
            parts.push(CMatrix::zeros(self.padding, self.padding));
        }
        let core = if parts.is_empty() {
            CMatrix::zeros(0, 0)
        } else {
            CMatrix::direct_sum(&parts)
        };
        match &self.basis_unitary {
            None => core,
            Some(u) => u.matmul(&core).matmul(&u.adjoint()),
        }
    }

    /// Images of all matrix units, in coordinate order.
    pub fn basis_images(&self) -> Vec<CMatrix> {
        self.algebra
            .basis_elements()
            .iter()
            .map(|e| self.apply(e))
            .collect()
    }

    /// Accept raw matrix images of the matrix-unit basis, verify that they
    /// define a *-homomorphism, and decompose into multiplicities, padding
    /// and a change-of-basis unitary.
    pub fn from_images(
        algebra: &CStarAlgebra,
        images: &[CMatrix],
        tol: &Tolerance,
    ) -> Result<Representation> {
        let d = algebra.dim();
        if images.len() != d {
            return Err(Error::DimensionMismatch {
                context: "from_images",
                expected: format!("{d} images"),
                got: format!("{}", images.len()),
            });
        }
        let n = images.first().map(|m| m.rows()).unwrap_or(0);
        for img in images {
            if img.rows() != n || img.cols() != n {
                return Err(Error::DimensionMismatch {
                    context: "from_images",
                    expected: format!("{n}x{n}"),
                    got: format!("{}x{}", img.rows(), img.cols()),
                });
            }
        }
        let scale = 1.0 + images.iter().map(|m| m.frobenius_norm()).fold(0.0, f64::max);
        let limit = tol.eq_tol * scale * 10.0;

        // involution: image of E_rs* must be the adjoint image
        for (b, &nb) in algebra.block_dims().iter().enumerate() {
            for r in 0..nb {
                for s in 0..nb {
                    let lhs = images[algebra.basis_index(b, r, s)].adjoint();
                    let rhs = &images[algebra.basis_index(b, s, r)];
                    let res = lhs.dist(rhs);
                    if res > limit {
                        return Err(Error::NotAHomomorphism {
                            check: "involution",
                            residual: res,
                        });
                    }
                }
            }
        }
        // multiplicativity on matrix units decides it for the whole algebra
        let dims = algebra.block_dims().to_vec();
        for (b1, &n1) in dims.iter().enumerate() {
            for r in 0..n1 {
                for s in 0..n1 {
                    let x = &images[algebra.basis_index(b1, r, s)];
                    for (b2, &n2) in dims.iter().enumerate() {
                        for t in 0..n2 {
                            for u in 0..n2 {
                                let y = &images[algebra.basis_index(b2, t, u)];
                                let prod = x.matmul(y);
                                let expect = if b1 == b2 && s == t {
                                    images[algebra.basis_index(b1, r, u)].clone()
                                } else {
                                    CMatrix::zeros(n, n)
                                };
                                let res = prod.dist(&expect);
                                if res > limit {
                                    return Err(Error::NotAHomomorphism {
                                        check: "multiplicativity",
                                        residual: res,
                                    });
                                }
                            }
                        }
                    }
                }
            }
        }

        // Decompose. The image of each block's corner unit is a projection
        // whose rank is the multiplicity; its range vectors seed the basis.
        let mut multiplicities = Vec::with_capacity(dims.len());
        let mut columns: Vec<CMatrix> = Vec::new();
        for (b, &nb) in dims.iter().enumerate() {
            let corner = images[algebra.basis_index(b, 0, 0)].hermitize();
            let eig = herm_eig(&corner, tol)?;
            let mult = eig.values.iter().filter(|&&v| v > 0.5).count();
            for &v in &eig.values {
                if (v - v.round()).abs() > 1e-4 || v.round() < -0.1 || v.round() > 1.1 {
                    return Err(Error::NotAHomomorphism {
                        check: "corner projection spectrum",
                        residual: (v - v.round()).abs(),
                    });
                }
            }
            multiplicities.push(mult);
            // column order (r, t) -> r * mult + t matches block kron I_mult
            for r in 0..nb {
                let shift = &images[algebra.basis_index(b, r, 0)];
                for t in 0..mult {
                    columns.push(shift.matmul(&eig.vectors.column(t)));
                }
            }
        }
        let represented: usize = dims
            .iter()
            .zip(&multiplicities)
            .map(|(&nb, &m)| nb * m)
            .sum();
        let padding = n - represented;
        orthonormalize(&mut columns, 10.0 * f64::EPSILON);
        if columns.len() != represented {
            return Err(Error::NotAHomomorphism {
                check: "basis construction",
                residual: (represented as f64) - (columns.len() as f64),
            });
        }
        complete_basis(&mut columns, n);
        let u = CMatrix::from_fn(n, n, |i, j| columns[j].get(i, 0));

        let rep = Representation {
            algebra: algebra.clone(),
            multiplicities,
            padding,
            basis_unitary: Some(u),
        };
        // final gate: the stored form must reproduce every image
        for (alpha, img) in images.iter().enumerate() {
            let rebuilt = rep.apply(&algebra.basis_elements()[alpha]);
            let res = rebuilt.dist(img);
            if res > limit {
                return Err(Error::NotAHomomorphism {
                    check: "reconstruction",
                    residual: res,
                });
            }
        }
        Ok(rep)
    }

    /// Irreducibility of the representation: the commutant of the image is
    /// one dimensional.
    pub fn is_irreducible(&self, tol: &Tolerance) -> bool {
        let (dim, _) = commutant(self.dim(), &self.basis_images(), tol).expect("square images");
        dim == 1
    }

    /// Nondegeneracy: the images of the basis applied to coordinate vectors
    /// span the whole space.
    pub fn is_nondegenerate(&self, tol: &Tolerance) -> bool {
        let n = self.dim();
        if n == 0 {
            return true;
        }
        let stacked = CMatrix::hstack(&self.basis_images());
        svd(&stacked).rank(tol) == n
    }
}

/// Modified Gram-Schmidt in place; drops vectors that fall below `drop_tol`
/// relative to their original norm.
fn orthonormalize(columns: &mut Vec<CMatrix>, drop_tol: f64) {
    let mut kept: Vec<CMatrix> = Vec::with_capacity(columns.len());
    for col in columns.iter() {
        let mut v = col.clone();
        let orig = v.frobenius_norm().max(f64::MIN_POSITIVE);
        for basis in &kept {
            let ip = basis.adjoint().matmul(&v).get(0, 0);
            v = &v - &basis.scale(ip);
        }
        let nrm = v.frobenius_norm();
        if nrm > drop_tol * orig && nrm > 0.0 {
            kept.push(v.scale_re(1.0 / nrm));
        }
    }
    *columns = kept;
}

/// Extend an orthonormal family to an orthonormal basis of C^n using
/// standard basis vectors.
fn complete_basis(columns: &mut Vec<CMatrix>, n: usize) {
    let mut k = 0;
    while columns.len() < n && k < n {
        let mut v = CMatrix::zeros(n, 1);
        v.set(k, 0, c64(1.0, 0.0));
        for basis in columns.iter() {
            let ip = basis.adjoint().matmul(&v).get(0, 0);
            v = &v - &basis.scale(ip);
        }
        let nrm = v.frobenius_norm();
        if nrm > 0.25 {
            columns.push(v.scale_re(1.0 / nrm));
        }
        k += 1;
    }
    assert_eq!(columns.len(), n, "basis completion failed");
}

/// A state given by density blocks: positive, total trace one.
#[derive(Debug, Clone)]
pub struct State {
    algebra: CStarAlgebra,
    density: AlgElement,
}

impl State {
    pub fn new(algebra: CStarAlgebra, density_blocks: Vec<CMatrix>, tol: &Tolerance) -> Result<Self> {
        let density = algebra.element(density_blocks)?;
        if !density.is_positive(tol) {
            return Err(Error::InvalidState(
                "density blocks must be positive semidefinite".into(),
            ));
        }
        let tr = density.trace();
        if (tr.re - 1.0).abs() > tol.eq_tol || tr.im.abs() > tol.eq_tol {
            return Err(Error::InvalidState(format!(
                "total trace must be 1, got {:.12}+{:.3e}i",
                tr.re, tr.im
            )));
        }
        Ok(State {
            algebra,
            density: density.hermitize(),
        })
    }

    pub fn algebra(&self) -> &CStarAlgebra {
        &self.algebra
    }

    /// Evaluate the state: sum of tr(D_b a_b).
    pub fn value(&self, a: &AlgElement) -> Complex64 {
        assert_eq!(a.algebra(), &self.algebra);
        self.density
            .blocks()
            .iter()
            .zip(a.blocks())
            .map(|(d, ab)| d.matmul(ab).trace())
            .sum()
    }
}

/// GNS construction for a state: the cyclic representation on the quotient
/// of the algebra by the null space of `<a, b> = phi(a* b)`, together with
/// the cyclic vector. The representation acts on coordinates in which the
/// quotient basis is orthonormal.
pub fn gns(state: &State, tol: &Tolerance) -> Result<(Representation, CMatrix)> {
    let algebra = state.algebra().clone();
    let basis = algebra.basis_elements();
    let d = algebra.dim();
    let gram = CMatrix::from_fn(d, d, |i, j| {
        state.value(&basis[i].involution().mul(&basis[j]).expect("same algebra"))
    });
    let eig = herm_eig(&gram.hermitize(), tol)?;
    let top = eig.values.first().copied().unwrap_or(0.0).max(0.0);
    let min = eig.values.last().copied().unwrap_or(0.0);
    if min < -tol.eq_tol * (1.0 + top) {
        return Err(Error::NotPositive {
            min_eigenvalue: min,
            limit: tol.eq_tol * (1.0 + top),
        });
    }
    let kept: Vec<usize> = (0..d)
        .filter(|&i| eig.values[i] > tol.rank_tol * top)
        .collect();
    let dim_gns = kept.len();
    // quotient map: rows scaled eigenvectors; q q_plus = identity on the quotient
    let q = CMatrix::from_fn(dim_gns, d, |i, j| {
        eig.vectors.get(j, kept[i]).conj() * eig.values[kept[i]].sqrt()
    });
    let q_plus = CMatrix::from_fn(d, dim_gns, |i, j| {
        eig.vectors.get(i, kept[j]) / eig.values[kept[j]].sqrt()
    });

    // left multiplication in coordinates, then push through the quotient
    let mut images = Vec::with_capacity(d);
    for a in &basis {
        let mut left = CMatrix::zeros(d, d);
        for (beta, e) in basis.iter().enumerate() {
            let prod = a.mul(e).expect("same algebra");
            for (alpha, coord) in prod.coords().iter().enumerate() {
                left.set(alpha, beta, *coord);
            }
        }
        images.push(q.matmul(&left).matmul(&q_plus));
    }
    let rep = Representation::from_images(&algebra, &images, tol)?;
    let unit_coords = algebra.unit().coords();
    let unit_vec = CMatrix::new(d, 1, unit_coords).expect("finite");
    let omega = q.matmul(&unit_vec);
    Ok((rep, omega))
}

/// Commutant of a finite family of operators on C^n together with their
/// adjoints: all T with TX = XT and TX* = X*T. Returns the dimension and an
/// orthonormal basis (in the Frobenius inner product).
pub fn commutant(n: usize, ops: &[CMatrix], tol: &Tolerance) -> Result<(usize, Vec<CMatrix>)> {
    for x in ops {
        if x.rows() != n || x.cols() != n {
            return Err(Error::DimensionMismatch {
                context: "commutant",
                expected: format!("{n}x{n}"),
                got: format!("{}x{}", x.rows(), x.cols()),
            });
        }
    }
    let n2 = n * n;
    let vec_idx = |i: usize, j: usize| i * n + j;
    let mut rows: Vec<CMatrix> = Vec::new();
    for x in ops {
        for variant in [x.clone(), x.adjoint()] {
            // constraint TX - XT = 0, one row per matrix position
            let mut block = CMatrix::zeros(n2, n2);
            for i in 0..n {
                for j in 0..n {
                    let row = vec_idx(i, j);
                    for k in 0..n {
                        let v1 = block.get(row, vec_idx(i, k)) + variant.get(k, j);
                        block.set(row, vec_idx(i, k), v1);
                        let v2 = block.get(row, vec_idx(k, j)) - variant.get(i, k);
                        block.set(row, vec_idx(k, j), v2);
                    }
                }
            }
            rows.push(block);
        }
    }
    let system = if rows.is_empty() {
        CMatrix::zeros(0, n2)
    } else {
        let total: usize = rows.len() * n2;
        let mut m = CMatrix::zeros(total, n2);
        for (k, block) in rows.iter().enumerate() {
            m.set_block(k * n2, 0, block);
        }
        m
    };
    let solver = PinvSolver::new(&system, tol);
    let basis: Vec<CMatrix> = solver
        .null_basis()
        .iter()
        .map(|v| v.reshape(n, n))
        .collect();
    Ok((basis.len(), basis))
}

/// Rank of the span of images of basis elements applied to coordinate
/// vectors; used to quantify span defects for witnesses.
pub fn image_span_rank(images: &[CMatrix], tol: &Tolerance) -> Result<(usize, Vec<CMatrix>)> {
    if images.is_empty() {
        return Err(Error::EmptyInput("image_span_rank needs images"));
    }
    let cols: Vec<CMatrix> = images
        .iter()
        .flat_map(|m| (0..m.cols()).map(move |j| m.column(j)))
        .collect();
    span_rank(&cols, tol)
}
