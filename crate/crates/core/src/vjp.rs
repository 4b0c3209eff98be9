//! Reverse-mode derivatives `(Λ̄, X̄) ↦ (Ā, M̄)`, the adjoint of [`crate::jvp`].
//!
//! ```text
//! A Ȳ − M Ȳ Λ = X̄ − M X [D ∘ (X^T X̄)]
//! V̄ = Ȳ − X [D ∘ (X^T M Ȳ)]
//! Ā = X Λ̄ X^T − V̄ X^T
//! M̄ = −X Λ Λ̄ X^T − ½ X [D ∘ (X^T X̄)] X^T + V̄ Λ X^T
//! ```
//!
//! `Ā` and `M̄` are raw (unsymmetrized) cotangents: `⟨Ā, A′⟩ + ⟨M̄, M′⟩`
//! equals `⟨Λ̄, Λ′⟩ + ⟨X̄, X′⟩` for every tangent. [`vjp_symmetrized`]
//! returns their symmetric parts, the gradient on the space of symmetric
//! matrices.

use nalgebra::{DMatrix, DVector};

use crate::eigsolve::EigenResult;
use crate::error::{Error, Result};
use crate::jvp::{Validity, DEFAULT_TOL_COND};
use crate::linop::{SpdOperator, SymmetricOperator};
use crate::sylvester::{project_rhs, SolveOptions, SylvesterProblem};

/// Sensitivities of a scalar loss with respect to the outputs.
#[derive(Debug, Clone)]
pub struct CotangentInput {
    /// Diagonal of `Λ̄`.
    pub lambda_bar: Vec<f64>,
    pub x_bar: DMatrix<f64>,
}

impl CotangentInput {
    pub fn eigenvalues_only(lambda_bar: Vec<f64>, n: usize) -> Self {
        let k = lambda_bar.len();
        Self { lambda_bar, x_bar: DMatrix::zeros(n, k) }
    }
}

#[derive(Debug, Clone)]
pub struct CotangentOutput {
    pub a_bar: DMatrix<f64>,
    pub m_bar: DMatrix<f64>,
    pub validity_defect: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct VjpOptions {
    pub solve: SolveOptions,
    pub tol_cond: f64,
    pub force: bool,
}

impl Default for VjpOptions {
    fn default() -> Self {
        Self { solve: SolveOptions::default(), tol_cond: DEFAULT_TOL_COND, force: false }
    }
}

fn check_dims(eig: &EigenResult, c: &CotangentInput) -> Result<()> {
    if c.lambda_bar.len() != eig.k() {
        return Err(Error::DimensionMismatch { expected: eig.k(), found: c.lambda_bar.len() });
    }
    if c.x_bar.shape() != eig.x.shape() {
        return Err(Error::DimensionMismatch { expected: eig.n(), found: c.x_bar.nrows() });
    }
    if c.lambda_bar.iter().chain(c.x_bar.iter()).any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("cotangent has non-finite entries".into()));
    }
    Ok(())
}

/// Measures `(D − I) ∘ (X^T X̄ − X̄^T X)`, relative to
/// `max(1, ‖X^T X̄‖_max)`.
pub fn check_backward_validity(eig: &EigenResult, c: &CotangentInput, tol_cond: f64) -> Validity {
    let g = eig.x.transpose() * &c.x_bar;
    let skew = &g - g.transpose();
    let defect = eig.degeneracy.off_diagonal_mask(&skew).amax();
    let scale = g.amax().max(1.0);
    Validity { ok: defect <= tol_cond * scale, defect }
}

pub fn vjp(
    a: &dyn SymmetricOperator,
    m: &SpdOperator<'_>,
    eig: &EigenResult,
    c: &CotangentInput,
    opts: &VjpOptions,
) -> Result<CotangentOutput> {
    check_dims(eig, c)?;
    let validity = check_backward_validity(eig, c, opts.tol_cond);
    if !validity.ok && !opts.force {
        return Err(Error::ValidityViolated { defect: validity.defect });
    }
    let x = &eig.x;
    let lambda = eig.lambda_matrix();
    let lambda_bar = DMatrix::from_diagonal(&DVector::from_column_slice(&c.lambda_bar));
    let xt = x.transpose();

    let mut a_bar = x * &lambda_bar * &xt;
    let mut m_bar = -(x * &lambda * &lambda_bar * &xt);
    if c.x_bar.iter().all(|&v| v == 0.0) {
        return Ok(CotangentOutput { a_bar, m_bar, validity_defect: validity.defect });
    }

    let rhs = project_rhs(&c.x_bar, x, m, &eig.degeneracy);
    let problem = SylvesterProblem::from_eigen(a, *m, eig, &rhs);
    let y_bar = opts.solve.solve(&problem)?.y;
    let mx = m.apply_block(x);
    let v_bar = &y_bar - x * eig.degeneracy.mask(&(mx.transpose() * &y_bar));

    let masked = eig.degeneracy.mask(&(&xt * &c.x_bar));
    a_bar -= &v_bar * &xt;
    m_bar -= x * masked * &xt * 0.5;
    m_bar += &v_bar * &lambda * &xt;
    Ok(CotangentOutput { a_bar, m_bar, validity_defect: validity.defect })
}

/// [`vjp`] followed by symmetrization of both outputs.
pub fn vjp_symmetrized(
    a: &dyn SymmetricOperator,
    m: &SpdOperator<'_>,
    eig: &EigenResult,
    c: &CotangentInput,
    opts: &VjpOptions,
) -> Result<CotangentOutput> {
    let raw = vjp(a, m, eig, c, opts)?;
    let sym = |g: DMatrix<f64>| (&g + g.transpose()) * 0.5;
    Ok(CotangentOutput {
        a_bar: sym(raw.a_bar),
        m_bar: sym(raw.m_bar),
        validity_defect: raw.validity_defect,
    })
}
