//! Dense reference implementations used to certify the solver-based paths.
//!
//! Everything here works from the complete spectrum `A U = M U E`,
//! `U^T M U = I`, and evaluates the derivative formulas as explicit sums
//! over eigenpairs. Nothing in this module calls the Sylvester solvers.
//! Finite differences of [`eig_dense`] provide a third, formula-free check.

use nalgebra::{DMatrix, DVector};

use crate::dense;
use crate::eigsolve::{eig_dense, EigenResult, Which};
use crate::error::{Error, Result};
use crate::jvp::{TangentInput, TangentOutput};
use crate::linop::{materialize, DenseSymmetric};
use crate::vjp::{CotangentInput, CotangentOutput};

/// Largest dimension the oracle accepts.
pub const MAX_DIM: usize = 200;

/// Relative gap below which a full-spectrum eigenvalue is treated as equal
/// to a retrieved one and left out of the sums.
pub const GROUP_TOL_REL: f64 = 1e-8;

/// Default finite-difference step.
pub const DEFAULT_STEP: f64 = 1e-5;

/// All `n` eigenpairs of a dense pencil.
#[derive(Debug, Clone)]
pub struct FullSpectrum {
    /// `n x n`, `M`-orthonormal columns.
    pub u: DMatrix<f64>,
    /// Ascending.
    pub e: Vec<f64>,
}

impl FullSpectrum {
    /// `(‖U^T M U − I‖_max, ‖U U^T − M^{-1}‖_max)`.
    pub fn invariant_defects(&self, m: &DenseSymmetric) -> Result<(f64, f64)> {
        let n = self.e.len();
        let ortho = (self.u.transpose() * m.entries() * &self.u - DMatrix::identity(n, n)).amax();
        let m_inv = dense::cholesky(m.entries())?.inverse();
        let completeness = (&self.u * self.u.transpose() - m_inv).amax();
        Ok((ortho, completeness))
    }

    fn group_tol(&self) -> f64 {
        GROUP_TOL_REL * self.e.iter().fold(0.0f64, |acc, v| acc.max(v.abs()))
    }

    /// Indices `i` with `|e_i − λ| > tol`.
    fn outside(&self, lambda: f64, tol: f64) -> impl Iterator<Item = usize> + '_ {
        (0..self.e.len()).filter(move |&i| (self.e[i] - lambda).abs() > tol)
    }
}

pub fn full_spectrum(a: &DenseSymmetric, m: &DenseSymmetric) -> Result<FullSpectrum> {
    let n = a.entries().nrows();
    if n > MAX_DIM {
        return Err(Error::InvalidArgument(format!("oracle is limited to n <= {MAX_DIM}, got {n}")));
    }
    if m.entries().nrows() != n {
        return Err(Error::DimensionMismatch { expected: n, found: m.entries().nrows() });
    }
    let (e, u) = dense::generalized_eigh(a.entries(), m.entries())?;
    Ok(FullSpectrum { u, e })
}

/// `(A − λM)^+ v = Σ_{|e_i − λ| > group_tol} u_i (u_i^T v) / (e_i − λ)`.
pub fn pseudo_inverse_apply(fs: &FullSpectrum, lambda: f64, v: &DVector<f64>, group_tol: f64) -> DVector<f64> {
    let mut out = DVector::zeros(v.len());
    for i in fs.outside(lambda, group_tol) {
        let c = fs.u.column(i).dot(v) / (fs.e[i] - lambda);
        out.axpy(c, &fs.u.column(i), 1.0);
    }
    out
}

fn dense_tangent(t: &TangentInput<'_>) -> (DMatrix<f64>, DMatrix<f64>) {
    (materialize(t.a_prime), materialize(t.m_prime))
}

/// Explicit series for `(Λ′, X′)`:
///
/// ```text
/// λ′_j = x_j^T (A′ − λ_j M′) x_j
/// x′_j = −½ Σ_{i∈g(j)} x_i x_i^T M′ x_j
///        + Σ_{e_i ≠ λ_j} u_i u_i^T (A′ − λ_j M′) x_j / (λ_j − e_i)
/// ```
pub fn jvp_series(
    fs: &FullSpectrum,
    eig: &EigenResult,
    t: &TangentInput<'_>,
    tol_cond: f64,
) -> Result<TangentOutput> {
    let (ap, mp) = dense_tangent(t);
    let k = eig.k();
    let n = eig.n();
    let tol = fs.group_tol();
    let mut lambda_prime = Vec::with_capacity(k);
    let mut x_prime = DMatrix::zeros(n, k);
    let mut defect = 0.0f64;
    let mut scale = 1.0f64;

    for j in 0..k {
        let lj = eig.lambdas[j];
        let xj = eig.x.column(j);
        let shifted = &ap * xj - &mp * xj * lj;
        lambda_prime.push(xj.dot(&shifted));

        let mut col = DVector::zeros(n);
        for &i in eig.degeneracy.group_of(j) {
            let xi = eig.x.column(i);
            let coupling = xi.dot(&shifted);
            scale = scale.max(coupling.abs());
            if i != j {
                defect = defect.max(coupling.abs());
            }
            col.axpy(-0.5 * xi.dot(&(&mp * xj)), &xi, 1.0);
        }
        for i in fs.outside(lj, tol) {
            let ui = fs.u.column(i);
            col.axpy(ui.dot(&shifted) / (lj - fs.e[i]), &ui, 1.0);
        }
        x_prime.set_column(j, &col);
    }
    if defect > tol_cond * scale {
        return Err(Error::ValidityViolated { defect });
    }
    Ok(TangentOutput { lambda_prime, x_prime, validity_defect: defect })
}

/// Explicit double sums for `(Ā, M̄)`:
///
/// ```text
/// Ā = Σ_j λ̄_j x_j x_j^T − Σ_j Σ_{e_i ≠ λ_j} u_i u_i^T x̄_j x_j^T / (e_i − λ_j)
/// M̄ = −Σ_j λ_j λ̄_j x_j x_j^T − ½ Σ_j Σ_{i∈g(j)} (x_i^T x̄_j) x_i x_j^T
///     + Σ_j λ_j Σ_{e_i ≠ λ_j} u_i u_i^T x̄_j x_j^T / (e_i − λ_j)
/// ```
pub fn vjp_series(fs: &FullSpectrum, eig: &EigenResult, c: &CotangentInput, tol_cond: f64) -> Result<CotangentOutput> {
    let k = eig.k();
    let n = eig.n();
    let tol = fs.group_tol();
    let mut a_bar = DMatrix::zeros(n, n);
    let mut m_bar = DMatrix::zeros(n, n);
    let mut defect = 0.0f64;
    let mut scale = 1.0f64;

    for j in 0..k {
        let lj = eig.lambdas[j];
        let xj = eig.x.column(j);
        let xbj = c.x_bar.column(j);
        a_bar += xj * xj.transpose() * c.lambda_bar[j];
        m_bar -= xj * xj.transpose() * (lj * c.lambda_bar[j]);
        for &i in eig.degeneracy.group_of(j) {
            let xi = eig.x.column(i);
            let g_ij = xi.dot(&xbj);
            scale = scale.max(g_ij.abs());
            if i != j {
                let g_ji = xj.dot(&c.x_bar.column(i));
                defect = defect.max((g_ij - g_ji).abs());
            }
            m_bar -= xi * xj.transpose() * (0.5 * g_ij);
        }
        for i in fs.outside(lj, tol) {
            let ui = fs.u.column(i);
            let term = ui * xj.transpose() * (ui.dot(&xbj) / (fs.e[i] - lj));
            a_bar -= &term;
            m_bar += term * lj;
        }
    }
    if defect > tol_cond * scale {
        return Err(Error::ValidityViolated { defect });
    }
    Ok(CotangentOutput { a_bar, m_bar, validity_defect: defect })
}

/// Finite-difference derivatives of one degenerate group.
#[derive(Debug, Clone)]
pub struct FdGroup {
    pub members: Vec<usize>,
    /// Derivative of `Σ_{j∈g} λ_j`.
    pub trace_derivative: f64,
    /// Derivative of `X_g X_g^T M`.
    pub projector_derivative: DMatrix<f64>,
}

/// Central-difference derivatives of [`eig_dense`].
#[derive(Debug, Clone)]
pub struct FdJvp {
    /// Differences of the sorted eigenvalues. Inside a degenerate group the
    /// individual entries mix branches; only the group trace is meaningful.
    pub lambda_prime: Vec<f64>,
    /// Sign-aligned eigenvector differences; `None` for members of
    /// degenerate groups.
    pub columns: Vec<Option<DVector<f64>>>,
    /// One entry per degenerate group.
    pub groups: Vec<FdGroup>,
}

fn perturbed(base: &DenseSymmetric, dir: &DMatrix<f64>, h: f64) -> Result<DenseSymmetric> {
    DenseSymmetric::new(base.entries() + dir * h)
}

/// Central differences at `±step` along `(A′, M′)`.
///
/// Eigenvector columns are sign-aligned with the unperturbed ones; members
/// of degenerate groups are compared through their group projector.
pub fn finite_difference_jvp(
    a: &DenseSymmetric,
    m: &DenseSymmetric,
    k: usize,
    which: Which,
    t: &TangentInput<'_>,
    step: f64,
) -> Result<FdJvp> {
    let (ap, mp) = dense_tangent(t);
    let base = eig_dense(a, m, k, which)?;
    let plus = eig_dense(&perturbed(a, &ap, step)?, &perturbed(m, &mp, step)?, k, which);
    let minus = eig_dense(&perturbed(a, &ap, -step)?, &perturbed(m, &mp, -step)?, k, which);
    // a group that stays degenerate at ±step is fine; retrieving it whole is
    // what matters, which eig_dense guarantees by rejecting boundary splits
    let (plus, minus) = (plus?, minus?);
    let mp_plus = m.entries() + &mp * step;
    let mp_minus = m.entries() - &mp * step;

    let lambda_prime: Vec<f64> = (0..k)
        .map(|j| (plus.lambdas[j] - minus.lambdas[j]) / (2.0 * step))
        .collect();

    let mut columns = Vec::with_capacity(k);
    let mbase = m.entries() * &base.x;
    for j in 0..k {
        if base.degeneracy.group_of(j).len() > 1 {
            columns.push(None);
            continue;
        }
        let align = |x: &DMatrix<f64>| -> Result<DVector<f64>> {
            let col = x.column(j).into_owned();
            let overlap = col.dot(&mbase.column(j));
            if overlap.abs() < 0.5 {
                return Err(Error::GaugeAlignmentFailed { column: j });
            }
            Ok(if overlap < 0.0 { -col } else { col })
        };
        let d = (align(&plus.x)? - align(&minus.x)?) / (2.0 * step);
        columns.push(Some(d));
    }

    let mut groups = Vec::new();
    for g in base.degeneracy.groups().iter().filter(|g| g.len() > 1) {
        check_cluster(&base, &plus, g)?;
        check_cluster(&base, &minus, g)?;
        let proj = |r: &EigenResult, mm: &DMatrix<f64>| {
            let xg = r.x.select_columns(g);
            &xg * xg.transpose() * mm
        };
        let projector_derivative = (proj(&plus, &mp_plus) - proj(&minus, &mp_minus)) / (2.0 * step);
        let trace_derivative = g.iter().map(|&j| lambda_prime[j]).sum();
        groups.push(FdGroup { members: g.clone(), trace_derivative, projector_derivative });
    }
    Ok(FdJvp { lambda_prime, columns, groups })
}

/// The perturbed eigenvalues at a group's positions must stay closer to the
/// group's eigenvalue than half the gap to any other retrieved eigenvalue.
fn check_cluster(base: &EigenResult, pert: &EigenResult, group: &[usize]) -> Result<()> {
    let center = base.lambdas[group[0]];
    let gap = (0..base.k())
        .filter(|j| !group.contains(j))
        .map(|j| (base.lambdas[j] - center).abs())
        .fold(f64::INFINITY, f64::min);
    let spread = group
        .iter()
        .map(|&j| (pert.lambdas[j] - center).abs())
        .fold(0.0f64, f64::max);
    if spread >= 0.5 * gap {
        return Err(Error::ClusterSplit { group: group.to_vec() });
    }
    Ok(())
}

/// Errors of a finite-difference comparison at `step` and `2 step`.
#[derive(Debug, Clone, Copy)]
pub struct FdComparison {
    /// Max relative eigenvalue error at `step`.
    pub lambda_rel_err: f64,
    /// Max-abs eigenvector (or projector) error at `step`.
    pub vector_err: f64,
    /// Same at `2 step`.
    pub vector_err_double: f64,
}

impl FdComparison {
    /// `err(2h) / err(h)`, about 4 for a second-order difference dominated
    /// by truncation error.
    pub fn richardson_factor(&self) -> f64 {
        self.vector_err_double / self.vector_err
    }
}

fn compare_once(analytic: &TangentOutput, eig: &EigenResult, m: &DenseSymmetric, mp: &DMatrix<f64>, fd: &FdJvp) -> (f64, f64) {
    let mut lambda_err = 0.0f64;
    for j in 0..eig.k() {
        if eig.degeneracy.group_of(j).len() == 1 {
            let scale = analytic.lambda_prime[j].abs().max(1e-300);
            lambda_err = lambda_err.max((fd.lambda_prime[j] - analytic.lambda_prime[j]).abs() / scale.max(1.0));
        }
    }
    let mut vec_err = 0.0f64;
    for (j, col) in fd.columns.iter().enumerate() {
        if let Some(col) = col {
            vec_err = vec_err.max((col - analytic.x_prime.column(j)).amax());
        }
    }
    let mp_op = DenseSymmetric::new(mp.clone()).expect("finite tangent");
    for g in &fd.groups {
        let trace: f64 = g.members.iter().map(|&j| analytic.lambda_prime[j]).sum();
        lambda_err = lambda_err.max((g.trace_derivative - trace).abs() / trace.abs().max(1.0));
        let pd = crate::jvp::group_projector_derivative(eig, m, &mp_op, &analytic.x_prime, &g.members);
        vec_err = vec_err.max((&g.projector_derivative - pd).amax());
    }
    (lambda_err, vec_err)
}

/// Compares an analytic tangent with central differences at `step` and
/// `2 step`. Eigenvalue errors are relative to `max(1, |λ′|)`.
pub fn compare_with_fd(
    a: &DenseSymmetric,
    m: &DenseSymmetric,
    eig: &EigenResult,
    t: &TangentInput<'_>,
    analytic: &TangentOutput,
    step: f64,
) -> Result<FdComparison> {
    let mp = materialize(t.m_prime);
    let fd = finite_difference_jvp(a, m, eig.k(), eig.which, t, step)?;
    let fd2 = finite_difference_jvp(a, m, eig.k(), eig.which, t, 2.0 * step)?;
    let (lambda_rel_err, vector_err) = compare_once(analytic, eig, m, &mp, &fd);
    let (_, vector_err_double) = compare_once(analytic, eig, m, &mp, &fd2);
    Ok(FdComparison { lambda_rel_err, vector_err, vector_err_double })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eigsolve::Which;
    use nalgebra::dmatrix;

    #[test]
    fn diagonal_spectrum() {
        let fs = full_spectrum(&DenseSymmetric::from_diagonal(&[1.0, 2.0, 3.0]).unwrap(), &DenseSymmetric::identity(3)).unwrap();
        assert_eq!(fs.e, vec![1.0, 2.0, 3.0]);
        assert!((fs.u.abs() - DMatrix::identity(3, 3)).amax() < 1e-15);
    }

    #[test]
    fn generalized_spectrum() {
        let a = DenseSymmetric::from_diagonal(&[2.0, 6.0]).unwrap();
        let m = DenseSymmetric::from_diagonal(&[1.0, 4.0]).unwrap();
        let fs = full_spectrum(&a, &m).unwrap();
        assert_eq!(fs.e, vec![1.5, 2.0]);
        assert!((fs.u.column(0).abs() - dmatrix![0.0; 0.5].column(0)).amax() < 1e-15);
        let (o, c) = fs.invariant_defects(&m).unwrap();
        assert!(o < 1e-15 && c < 1e-15);
    }

    #[test]
    fn pseudo_inverse_examples() {
        let fs = full_spectrum(&DenseSymmetric::from_diagonal(&[1.0, 2.0, 3.0]).unwrap(), &DenseSymmetric::identity(3)).unwrap();
        let y = pseudo_inverse_apply(&fs, 1.0, &DVector::from_vec(vec![0.0, 1.0, 0.0]), 1e-12);
        assert!((y - DVector::from_vec(vec![0.0, 1.0, 0.0])).amax() < 1e-15);
        let y = pseudo_inverse_apply(&fs, 1.0, &DVector::from_vec(vec![4.0, 0.0, 0.0]), 1e-12);
        assert_eq!(y.amax(), 0.0);
    }

    #[test]
    fn exactly_linear_eigenvalue_direction() {
        let a = DenseSymmetric::from_diagonal(&[1.0, 2.0, 3.0]).unwrap();
        let m = DenseSymmetric::identity(3);
        let id = DenseSymmetric::identity(3);
        let zero = DenseSymmetric::zeros(3);
        let fd = finite_difference_jvp(&a, &m, 2, Which::Smallest, &TangentInput { a_prime: &id, m_prime: &zero }, 1e-5).unwrap();
        for lp in fd.lambda_prime {
            assert!((lp - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn series_rejects_invalid_degenerate_tangent() {
        let a = DenseSymmetric::from_diagonal(&[2.0, 2.0, 5.0]).unwrap();
        let m = DenseSymmetric::identity(3);
        let eig = eig_dense(&a, &m, 2, Which::Smallest).unwrap();
        let fs = full_spectrum(&a, &m).unwrap();
        let c = DenseSymmetric::new(dmatrix![0.0, 1.0, 0.0; 1.0, 0.0, 0.0; 0.0, 0.0, 0.0]).unwrap();
        let zero = DenseSymmetric::zeros(3);
        let res = jvp_series(&fs, &eig, &TangentInput { a_prime: &c, m_prime: &zero }, 1e-7);
        assert!(matches!(res, Err(Error::ValidityViolated { .. })));
    }

    #[test]
    fn oracle_size_cap() {
        let big = DenseSymmetric::identity(MAX_DIM + 1);
        assert!(full_spectrum(&big, &big).is_err());
    }
}
