//! Forward- and reverse-mode derivatives of the partial eigendecomposition
//! `A X = M X Λ`, `X^T M X = I` of a real symmetric pencil, including
//! pencils with repeated eigenvalues.
//!
//! The crate is organized bottom-up:
//!
//! - [`linop`]: matrix-free symmetric operators and a dense implementation.
//! - [`eigsolve`]: dense and iterative partial eigensolvers, degeneracy groups.
//! - [`sylvester`]: the projected shifted solves both derivative modes need.
//! - [`jvp`] / [`vjp`]: forward and reverse derivatives with validity checks.
//! - [`oracle`]: dense reference formulas and finite differences for testing.
//! - [`pencil`]: seeded generators for test pencils, tangents and cotangents.

mod dense;
pub mod eigsolve;
pub mod error;
pub mod jvp;
pub mod linop;
pub mod matfile;
pub mod oracle;
pub mod pencil;
pub mod sylvester;
pub mod vjp;

#[cfg(doctest)]
mod book;

pub use eigsolve::{build_degeneracy, eig_dense, eig_iterative, Degeneracy, DegeneracyTol, EigenResult, Which};
pub use error::{Error, Result};
pub use jvp::{jvp, JvpOptions, TangentInput, TangentOutput};
pub use linop::{check_symmetry, make_dense, DenseSymmetric, FnOperator, Identity, SpdOperator, SymmetricOperator};
pub use sylvester::{SolveOptions, SolverKind};
pub use vjp::{vjp, vjp_symmetrized, CotangentInput, CotangentOutput, VjpOptions};
