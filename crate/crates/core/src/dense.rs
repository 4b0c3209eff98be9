//! Small dense kernels shared by the eigensolvers, the Sylvester solvers and
//! the reference oracle.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};
use crate::linop::SymmetricOperator;

const EIGEN_EPS: f64 = f64::EPSILON;
const EIGEN_MAX_SWEEPS: usize = 10_000;

pub(crate) fn cholesky(m: &DMatrix<f64>) -> Result<Cholesky<f64, Dyn>> {
    Cholesky::new(m.clone()).ok_or(Error::NotPositiveDefinite)
}

/// Symmetric eigendecomposition with ascending eigenvalues.
pub(crate) fn eigh(h: &DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let sym = 0.5 * (h + h.transpose());
    let eig = sym
        .try_symmetric_eigen(EIGEN_EPS, EIGEN_MAX_SWEEPS)
        .ok_or(Error::ConvergenceFailure)?;
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = DMatrix::from_fn(h.nrows(), order.len(), |r, c| eig.eigenvectors[(r, order[c])]);
    Ok((vals, vecs))
}

/// Full solution of `A U = M U E` with `U^T M U = I`, eigenvalues ascending.
///
/// Reduces to a standard problem through the Cholesky factor `M = L L^T`.
pub(crate) fn generalized_eigh(a: &DMatrix<f64>, m: &DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let chol = cholesky(m)?;
    let l = chol.l();
    // C = L^{-1} A L^{-T}
    let left = l
        .solve_lower_triangular(a)
        .ok_or(Error::NotPositiveDefinite)?;
    let c = l
        .solve_lower_triangular(&left.transpose())
        .ok_or(Error::NotPositiveDefinite)?;
    let (vals, w) = eigh(&c)?;
    let u = l
        .transpose()
        .solve_upper_triangular(&w)
        .ok_or(Error::NotPositiveDefinite)?;
    Ok((vals, u))
}

/// Modified Gram-Schmidt in the `M` inner product over the listed columns,
/// run twice.
pub(crate) fn m_orthonormalize_columns(
    x: &mut DMatrix<f64>,
    m: &dyn SymmetricOperator,
    cols: &[usize],
) -> Result<()> {
    for _pass in 0..2 {
        let mut done: Vec<(usize, DVector<f64>)> = Vec::with_capacity(cols.len());
        for &j in cols {
            let mut v = x.column(j).into_owned();
            for (i, mi) in &done {
                let c = mi.dot(&v);
                v.axpy(-c, &x.column(*i).into_owned(), 1.0);
            }
            let mv = m.apply(&v);
            let nrm2 = v.dot(&mv);
            if !(nrm2 > 0.0) {
                return Err(Error::NotPositiveDefinite);
            }
            let s = nrm2.sqrt();
            x.set_column(j, &(v / s));
            done.push((j, mv / s));
        }
    }
    Ok(())
}

/// Flips each column so that its entry of largest magnitude is positive
/// (lowest index wins ties).
pub(crate) fn fix_sign_gauge(x: &mut DMatrix<f64>) {
    for mut col in x.column_iter_mut() {
        let mut best = 0;
        for i in 1..col.len() {
            if col[i].abs() > col[best].abs() {
                best = i;
            }
        }
        if col[best] < 0.0 {
            col.neg_mut();
        }
    }
}

/// Orthonormalizes the columns of `basis` in the `M` inner product by an
/// eigendecomposition of the Gram matrix, dropping directions whose Gram
/// eigenvalue falls below `drop * max`. `m_basis` must equal `M * basis`;
/// both are updated consistently.
pub(crate) fn svqb(
    basis: &DMatrix<f64>,
    m_basis: &DMatrix<f64>,
    drop: f64,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    if basis.ncols() == 0 {
        return Ok((basis.clone(), m_basis.clone()));
    }
    let gram = basis.transpose() * m_basis;
    let (vals, vecs) = eigh(&gram)?;
    let top = vals.last().copied().unwrap_or(0.0);
    if !(top > 0.0) {
        return Ok((DMatrix::zeros(basis.nrows(), 0), DMatrix::zeros(basis.nrows(), 0)));
    }
    let keep: Vec<usize> = (0..vals.len()).filter(|&i| vals[i] > drop * top).collect();
    let mut coef = DMatrix::zeros(vals.len(), keep.len());
    for (c, &i) in keep.iter().enumerate() {
        coef.set_column(c, &(vecs.column(i) / vals[i].sqrt()));
    }
    Ok((basis * &coef, m_basis * &coef))
}
