//! Finite-dimensional workbench for Finsler modules over C*-algebras:
//! verify the defining norm axiom, construct quasi-representations by
//! localization, compute minimal dilations of completely positive module
//! maps, and decide nondegeneracy and irreducibility with explicit
//! witnesses. All algebras are finite direct sums of matrix algebras and
//! all checks produce residuals against explicit tolerances.

pub mod algebra;
pub mod dilation;
pub mod error;
pub mod module;
pub mod numkit;
pub mod quasirep;

pub use algebra::{AlgElement, CStarAlgebra, Representation, State};
pub use dilation::{
    choi, is_completely_positive, module_stinespring, module_stinespring_of, stinespring, CPMap,
    DilationCertificate, DilationResiduals, StinespringDilation,
};
pub use error::{Error, Result};
pub use module::{FinslerModule, ModuleElement};
pub use numkit::{CMatrix, Tolerance};
pub use quasirep::{build_quasirep, QuasiRep};
