//! Projected shifted solves for `A Y − M Y Λ = B` with diagonal `Λ`.
//!
//! Because `Λ` is diagonal the equation splits into `k` independent systems
//! `(A − λ_j M) y_j = b_j`. Each shift is an eigenvalue of the pencil, so
//! every system is singular; its nullspace is spanned by the retrieved
//! eigenvectors of the degeneracy group of `λ_j`. Right-hand sides must be
//! orthogonal to that nullspace, and the solution is the representative that
//! is `M`-orthogonal to it.

mod minres;

use nalgebra::{DMatrix, DVector};

use crate::eigsolve::{Degeneracy, EigenResult};
use crate::error::{Error, Result};
use crate::linop::{materialize, SpdOperator, SymmetricOperator};

/// Default relative tolerance for solvability checks and iterative solves.
pub const DEFAULT_TOL: f64 = 1e-10;

/// One batch of shifted systems sharing `A`, `M` and an eigenblock.
pub struct SylvesterProblem<'a> {
    pub a: &'a dyn SymmetricOperator,
    pub m: SpdOperator<'a>,
    pub lambdas: &'a [f64],
    pub b: &'a DMatrix<f64>,
    /// `n x k`, `M`-orthonormal; supplies the nullspace of each shift.
    pub x: &'a DMatrix<f64>,
    pub degeneracy: &'a Degeneracy,
}

impl<'a> SylvesterProblem<'a> {
    pub fn from_eigen(
        a: &'a dyn SymmetricOperator,
        m: SpdOperator<'a>,
        eig: &'a EigenResult,
        b: &'a DMatrix<f64>,
    ) -> Self {
        Self { a, m, lambdas: &eig.lambdas, b, x: &eig.x, degeneracy: &eig.degeneracy }
    }

    fn validate(&self) -> Result<()> {
        let n = self.a.dim();
        let k = self.lambdas.len();
        for found in [self.m.dim(), self.b.nrows(), self.x.nrows()] {
            if found != n {
                return Err(Error::DimensionMismatch { expected: n, found });
            }
        }
        for found in [self.b.ncols(), self.x.ncols(), self.degeneracy.k()] {
            if found != k {
                return Err(Error::DimensionMismatch { expected: k, found });
            }
        }
        Ok(())
    }

    /// Per-column solvability defect `‖X_g^T b_j‖ / (‖b_j‖ ‖X_g‖_F)`.
    pub fn solvability_defects(&self) -> Vec<f64> {
        (0..self.lambdas.len())
            .map(|j| {
                let b = self.b.column(j);
                let bn = b.norm();
                if bn == 0.0 {
                    return 0.0;
                }
                let xg = self.x.select_columns(self.degeneracy.group_of(j));
                (xg.transpose() * b).norm() / (bn * xg.norm())
            })
            .collect()
    }

    fn check_solvable(&self, tol: f64) -> Result<()> {
        for (column, defect) in self.solvability_defects().into_iter().enumerate() {
            if defect > tol {
                return Err(Error::NotSolvable { column, defect });
            }
        }
        Ok(())
    }
}

/// Solution block with per-column diagnostics.
#[derive(Debug, Clone)]
pub struct SylvesterSolution {
    pub y: DMatrix<f64>,
    /// `‖(A − λ_j M) y_j − b_j‖ / ‖b_j‖` (zero for zero columns).
    pub residuals: Vec<f64>,
    pub iterations: Vec<usize>,
}

/// Removes from each column `b_j` its components along the nullspace of
/// `A − λ_j M`: `b_j − M X_g X_g^T b_j` with `g` the group of `j`.
pub fn project_rhs(
    b: &DMatrix<f64>,
    x: &DMatrix<f64>,
    m: &dyn SymmetricOperator,
    degeneracy: &Degeneracy,
) -> DMatrix<f64> {
    let mx = m.apply_block(x);
    let mut out = b.clone();
    for j in 0..b.ncols() {
        for &i in degeneracy.group_of(j) {
            let c = x.column(i).dot(&b.column(j));
            out.column_mut(j).axpy(-c, &mx.column(i), 1.0);
        }
    }
    out
}

/// `y − X_g X_g^T M y` for the group of column `j`.
fn remove_group_component(
    y: &mut DVector<f64>,
    x: &DMatrix<f64>,
    mx: &DMatrix<f64>,
    group: &[usize],
) {
    for &i in group {
        let c = mx.column(i).dot(y);
        y.axpy(-c, &x.column(i), 1.0);
    }
}

fn column_residual(
    a: &dyn SymmetricOperator,
    m: &dyn SymmetricOperator,
    lambda: f64,
    y: &DVector<f64>,
    b: &DVector<f64>,
) -> f64 {
    let bn = b.norm();
    if bn == 0.0 {
        return if y.norm() == 0.0 { 0.0 } else { f64::INFINITY };
    }
    (a.apply(y) - m.apply(y) * lambda - b).norm() / bn
}

/// Dense path: each column is solved through the bordered system
///
/// ```text
/// [ A − λ_j M   M X_g ] [ y ]   [ b_j ]
/// [ X_g^T M       0   ] [ μ ] = [  0  ]
/// ```
///
/// which is nonsingular exactly when `X_g` spans the nullspace of
/// `A − λ_j M`, and whose `y` is the `M`-orthogonal representative.
pub fn solve_dense(p: &SylvesterProblem<'_>, tol_solv: f64) -> Result<SylvesterSolution> {
    p.validate()?;
    p.check_solvable(tol_solv)?;
    let n = p.a.dim();
    let k = p.lambdas.len();
    let a = materialize(p.a);
    let m = materialize(&p.m);
    let mx = &m * p.x;
    let mut y = DMatrix::zeros(n, k);
    let mut residuals = vec![0.0; k];
    for j in 0..k {
        let b = p.b.column(j).into_owned();
        if b.norm() == 0.0 {
            continue;
        }
        let group = p.degeneracy.group_of(j);
        let g = group.len();
        let mut kkt = DMatrix::zeros(n + g, n + g);
        kkt.view_mut((0, 0), (n, n)).copy_from(&(&a - &m * p.lambdas[j]));
        for (c, &i) in group.iter().enumerate() {
            kkt.view_mut((0, n + c), (n, 1)).copy_from(&mx.column(i));
            kkt.view_mut((n + c, 0), (1, n)).copy_from(&mx.column(i).transpose());
        }
        let mut rhs = DVector::zeros(n + g);
        rhs.rows_mut(0, n).copy_from(&b);
        let sol = kkt.lu().solve(&rhs).ok_or(Error::NotSolvable { column: j, defect: f64::INFINITY })?;
        let mut yj = sol.rows(0, n).into_owned();
        remove_group_component(&mut yj, p.x, &mx, group);
        residuals[j] = column_residual(p.a, &p.m, p.lambdas[j], &yj, &b);
        y.set_column(j, &yj);
    }
    Ok(SylvesterSolution { y, residuals, iterations: vec![0; k] })
}

/// Matrix-free path: MINRES on the projected operator
/// `v ↦ Q (A − λ_j M) P v` with `P = I − X_g X_g^T M` and `Q = P^T`,
/// followed by a final `P` projection. Restarts from the current iterate
/// until the true residual meets `tol_solv` or `maxiter` total steps pass.
pub fn solve_iterative(p: &SylvesterProblem<'_>, maxiter: usize, tol_solv: f64) -> Result<SylvesterSolution> {
    p.validate()?;
    p.check_solvable(tol_solv)?;
    let n = p.a.dim();
    let k = p.lambdas.len();
    let mx = p.m.apply_block(p.x);
    let mut y = DMatrix::zeros(n, k);
    let mut residuals = vec![0.0; k];
    let mut iterations = vec![0; k];
    let mut failed: Option<usize> = None;

    for j in 0..k {
        let group = p.degeneracy.group_of(j);
        let lambda = p.lambdas[j];
        let project_range = |v: &mut DVector<f64>| {
            for &i in group {
                let c = p.x.column(i).dot(v);
                v.axpy(-c, &mx.column(i), 1.0);
            }
        };
        let op = |v: &DVector<f64>| {
            let mut pv = v.clone();
            remove_group_component(&mut pv, p.x, &mx, group);
            let mut out = p.a.apply(&pv) - p.m.apply(&pv) * lambda;
            project_range(&mut out);
            out
        };

        let mut b = p.b.column(j).into_owned();
        project_range(&mut b);
        let bn = b.norm();
        if bn == 0.0 {
            continue;
        }
        let mut yj = DVector::zeros(n);
        let mut r = b.clone();
        let mut used = 0;
        let mut res = 1.0;
        while used < maxiter {
            // aim well inside tol_solv: the solution error is the residual times the
            // inverse gap, and callers pair forward and reverse solves
            let out = minres::minres(op, &r, tol_solv * bn / r.norm() * 0.05, maxiter - used);
            used += out.iterations.max(1);
            yj += out.x;
            remove_group_component(&mut yj, p.x, &mx, group);
            r = &b - op(&yj);
            res = r.norm() / bn;
            if res <= tol_solv {
                break;
            }
        }
        residuals[j] = res;
        iterations[j] = used;
        if res > tol_solv && failed.is_none() {
            failed = Some(j);
        }
        y.set_column(j, &yj);
    }

    let sol = SylvesterSolution { y, residuals, iterations };
    match failed {
        Some(column) => Err(Error::SolveMaxIter {
            column,
            residual: sol.residuals[column],
            best: Box::new(sol),
        }),
        None => Ok(sol),
    }
}

/// Which Sylvester solver a derivative routine should use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SolverKind {
    #[default]
    Dense,
    Iterative,
}

/// Settings shared by the derivative routines for their Sylvester solves.
#[derive(Debug, Clone, Copy)]
pub struct SolveOptions {
    pub solver: SolverKind,
    pub tol_solv: f64,
    /// `None` selects `20 n`.
    pub maxiter: Option<usize>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { solver: SolverKind::Dense, tol_solv: DEFAULT_TOL, maxiter: None }
    }
}

impl SolveOptions {
    pub fn iterative() -> Self {
        Self { solver: SolverKind::Iterative, ..Self::default() }
    }

    pub(crate) fn solve(&self, p: &SylvesterProblem<'_>) -> Result<SylvesterSolution> {
        match self.solver {
            SolverKind::Dense => solve_dense(p, self.tol_solv),
            SolverKind::Iterative => {
                let maxiter = self.maxiter.unwrap_or(20 * p.a.dim());
                solve_iterative(p, maxiter, self.tol_solv)
            }
        }
    }
}
