//! Forward-mode derivatives `(A′, M′) ↦ (Λ′, X′)`.
//!
//! For each retrieved pair, with `g` its degeneracy group and
//! `V′ = A′X − M′XΛ`:
//!
//! ```text
//! Λ′ = I ∘ (X^T V′)
//! A Y′ − M Y′ Λ = V′ − M X [I ∘ (X^T V′)]
//! X′ = −½ X [D ∘ (X^T M′ X)] − Y′ + X [D ∘ (X^T M Y′)]
//! ```
//!
//! The Sylvester system is solved columnwise with the right-hand side
//! projected against the whole group and the solution taken `M`-orthogonal
//! to the group. The result is finite only when the coupling
//! `(D − I) ∘ (X^T V′)` vanishes; [`check_forward_validity`] measures it.
//!
//! Inside a group the first term uses `D` rather than `I`: the derivative of
//! `X_g^T M X_g = I` fixes the symmetric part of the in-group coefficients to
//! `−½ X_g^T M′ X_g`, and the symmetric choice is the only one that keeps the
//! normalization and the group projector derivative exact when `M′`
//! couples members of a group. It coincides with `I ∘` whenever that block
//! is diagonal.

use nalgebra::DMatrix;

use crate::eigsolve::EigenResult;
use crate::error::{Error, Result};
use crate::linop::{check_symmetry, SpdOperator, SymmetricOperator};
use crate::sylvester::{project_rhs, SolveOptions, SylvesterProblem};

/// Default tolerance on the degeneracy validity defects.
pub const DEFAULT_TOL_COND: f64 = 1e-7;

/// Perturbation directions of the two matrices.
#[derive(Clone, Copy)]
pub struct TangentInput<'a> {
    pub a_prime: &'a dyn SymmetricOperator,
    pub m_prime: &'a dyn SymmetricOperator,
}

#[derive(Debug, Clone)]
pub struct TangentOutput {
    /// Diagonal of `Λ′`.
    pub lambda_prime: Vec<f64>,
    pub x_prime: DMatrix<f64>,
    pub validity_defect: f64,
}

/// Outcome of a degeneracy validity check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Validity {
    pub ok: bool,
    /// Max-abs entry of the masked coupling matrix.
    pub defect: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct JvpOptions {
    pub solve: SolveOptions,
    pub tol_cond: f64,
    /// Compute the projected answer even when the validity check fails.
    pub force: bool,
}

impl Default for JvpOptions {
    fn default() -> Self {
        Self { solve: SolveOptions::default(), tol_cond: DEFAULT_TOL_COND, force: false }
    }
}

fn check_dims(eig: &EigenResult, t: &TangentInput<'_>) -> Result<()> {
    let n = eig.n();
    for found in [t.a_prime.dim(), t.m_prime.dim()] {
        if found != n {
            return Err(Error::DimensionMismatch { expected: n, found });
        }
    }
    Ok(())
}

/// `V′ = A′X − M′XΛ`.
fn tangent_rhs(eig: &EigenResult, t: &TangentInput<'_>) -> DMatrix<f64> {
    t.a_prime.apply_block(&eig.x) - t.m_prime.apply_block(&eig.x) * eig.lambda_matrix()
}

/// Coupling matrix `X^T (A′X − M′XΛ)`.
pub fn forward_coupling(eig: &EigenResult, t: &TangentInput<'_>) -> DMatrix<f64> {
    eig.x.transpose() * tangent_rhs(eig, t)
}

/// Measures `(D − I) ∘ [X^T (A′X − M′XΛ)]`. Passes when the defect is at
/// most `tol_cond * max(1, ‖X^T (A′X − M′XΛ)‖_max)`.
pub fn check_forward_validity(eig: &EigenResult, t: &TangentInput<'_>, tol_cond: f64) -> Validity {
    let coupling = forward_coupling(eig, t);
    let defect = eig.degeneracy.off_diagonal_mask(&coupling).amax();
    let scale = coupling.amax().max(1.0);
    Validity { ok: defect <= tol_cond * scale, defect }
}

/// `λ′_j = x_j^T (A′ − λ_j M′) x_j`.
pub fn eigenvalue_jvp(eig: &EigenResult, t: &TangentInput<'_>) -> Result<Vec<f64>> {
    check_dims(eig, t)?;
    let v = tangent_rhs(eig, t);
    Ok((0..eig.k()).map(|j| eig.x.column(j).dot(&v.column(j))).collect())
}

/// Eigenvalue and eigenvector tangents through one batched Sylvester solve.
pub fn eigenvector_jvp(
    a: &dyn SymmetricOperator,
    m: &SpdOperator<'_>,
    eig: &EigenResult,
    t: &TangentInput<'_>,
    opts: &JvpOptions,
) -> Result<TangentOutput> {
    check_dims(eig, t)?;
    let validity = check_forward_validity(eig, t, opts.tol_cond);
    if !validity.ok && !opts.force {
        return Err(Error::ValidityViolated { defect: validity.defect });
    }
    let k = eig.k();
    let x = &eig.x;
    let v = tangent_rhs(eig, t);
    let coupling = x.transpose() * &v;
    let lambda_prime: Vec<f64> = (0..k).map(|j| coupling[(j, j)]).collect();

    let mx = m.apply_block(x);
    // V′ − M X [I ∘ (X^T V′)], then the full-group projection
    let mut rhs = v;
    for j in 0..k {
        rhs.column_mut(j).axpy(-coupling[(j, j)], &mx.column(j), 1.0);
    }
    let rhs = project_rhs(&rhs, x, m, &eig.degeneracy);
    let problem = SylvesterProblem::from_eigen(a, *m, eig, &rhs);
    let y = opts.solve.solve(&problem)?.y;

    let xt_mp_x = x.transpose() * t.m_prime.apply_block(x);
    let xt_m_y = mx.transpose() * &y;
    let x_prime = x * eig.degeneracy.mask(&xt_mp_x) * (-0.5) - &y + x * eig.degeneracy.mask(&xt_m_y);

    Ok(TangentOutput { lambda_prime, x_prime, validity_defect: validity.defect })
}

/// Single entry point: spot-checks tangent symmetry, then runs
/// [`eigenvector_jvp`].
pub fn jvp(
    a: &dyn SymmetricOperator,
    m: &SpdOperator<'_>,
    eig: &EigenResult,
    t: &TangentInput<'_>,
    opts: &JvpOptions,
) -> Result<TangentOutput> {
    check_dims(eig, t)?;
    for (name, op) in [("A′", t.a_prime), ("M′", t.m_prime)] {
        if !check_symmetry(op, 4, 1e-10) {
            return Err(Error::InvalidArgument(format!("tangent {name} is not symmetric")));
        }
    }
    eigenvector_jvp(a, m, eig, t, opts)
}

/// Derivative of the group projector `X_g X_g^T M` given the tangent of
/// the eigenvectors. Independent of the basis chosen inside the group.
pub fn group_projector_derivative(
    eig: &EigenResult,
    m: &dyn SymmetricOperator,
    m_prime: &dyn SymmetricOperator,
    x_prime: &DMatrix<f64>,
    group: &[usize],
) -> DMatrix<f64> {
    let xg = eig.x.select_columns(group);
    let xpg = x_prime.select_columns(group);
    let m_xg = m.apply_block(&xg);
    let m_xpg = m.apply_block(&xpg);
    let mp_xg = m_prime.apply_block(&xg);
    &xpg * m_xg.transpose() + &xg * m_xpg.transpose() + &xg * mp_xg.transpose()
}
