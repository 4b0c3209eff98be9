//! Matrix-free block preconditioned conjugate-direction eigensolver
//! (LOBPCG family) with soft locking of converged pairs.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{check_k, finalize, DegeneracyTol, EigenResult, Which};
use crate::dense::{eigh, svqb};
use crate::error::{Error, Result};
use crate::linop::{Negated, SpdOperator, SymmetricOperator};

/// Gram eigenvalues below this fraction of the largest are discarded when
/// orthonormalizing the search basis.
const BASIS_DROP: f64 = 1e-13;

pub struct IterativeOptions<'a> {
    pub maxiter: usize,
    /// Relative residual `‖A x − λ M x‖ / (‖A x‖ + |λ| ‖M x‖)` at which a
    /// pair counts as converged.
    pub tol: f64,
    pub seed: u64,
    /// Extra guard vectors iterated alongside the `k` wanted ones.
    pub guard: usize,
    /// Applied to residuals; identity when `None`.
    pub preconditioner: Option<&'a dyn SymmetricOperator>,
    pub degeneracy: DegeneracyTol,
}

impl Default for IterativeOptions<'_> {
    fn default() -> Self {
        Self {
            maxiter: 2000,
            tol: 1e-11,
            seed: 0,
            guard: 2,
            preconditioner: None,
            degeneracy: DegeneracyTol::default(),
        }
    }
}

struct Block {
    x: DMatrix<f64>,
    ax: DMatrix<f64>,
    mx: DMatrix<f64>,
    lambdas: Vec<f64>,
}

/// Rayleigh-Ritz on an `M`-orthonormal basis, keeping the lowest `keep` pairs.
fn rayleigh_ritz(s: &DMatrix<f64>, a_s: &DMatrix<f64>, m_s: &DMatrix<f64>, keep: usize) -> Result<Block> {
    let h = s.transpose() * a_s;
    let (vals, vecs) = eigh(&h)?;
    let c = vecs.columns(0, keep).into_owned();
    Ok(Block {
        x: s * &c,
        ax: a_s * &c,
        mx: m_s * &c,
        lambdas: vals[..keep].to_vec(),
    })
}

fn relative_residuals(b: &Block, count: usize) -> (DMatrix<f64>, Vec<f64>) {
    let n = b.x.nrows();
    let mut r = DMatrix::zeros(n, count);
    let mut rel = Vec::with_capacity(count);
    for j in 0..count {
        let ax = b.ax.column(j);
        let mx = b.mx.column(j);
        let rj = ax - mx * b.lambdas[j];
        let scale = (ax.norm() + b.lambdas[j].abs() * mx.norm()).max(f64::MIN_POSITIVE);
        rel.push(rj.norm() / scale);
        r.set_column(j, &rj);
    }
    (r, rel)
}

/// Iterative partial eigensolver using only operator applications.
///
/// On hitting `maxiter` the best iterate is returned inside
/// [`Error::EigMaxIter`].
pub fn eig_iterative(
    a: &dyn SymmetricOperator,
    m: &SpdOperator<'_>,
    k: usize,
    which: Which,
    opts: &IterativeOptions<'_>,
) -> Result<EigenResult> {
    let n = a.dim();
    if m.dim() != n {
        return Err(Error::DimensionMismatch { expected: n, found: m.dim() });
    }
    check_k(n, k)?;
    let negated = Negated(a);
    let op: &dyn SymmetricOperator = match which {
        Which::Smallest => a,
        Which::Largest => &negated,
    };
    let width = (k + opts.guard).min(n);

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let x0 = DMatrix::from_fn(n, width, |_, _| StandardNormal.sample(&mut rng));
    let mx0 = m.apply_block(&x0);
    let (x0, mx0) = svqb(&x0, &mx0, BASIS_DROP)?;
    if x0.ncols() < width {
        return Err(Error::NotPositiveDefinite);
    }
    let ax0 = op.apply_block(&x0);
    let mut block = rayleigh_ritz(&x0, &ax0, &mx0, width)?;
    let mut prev: Option<DMatrix<f64>> = None;
    let mut worst = f64::INFINITY;

    for _iter in 0..opts.maxiter {
        let (r, rel) = relative_residuals(&block, width);
        worst = rel[..k].iter().fold(0.0f64, |acc, &v| acc.max(v));
        if worst <= opts.tol {
            return finish(block, k, m, which, opts.degeneracy);
        }
        // soft locking: converged wanted pairs stop generating directions,
        // guard vectors always do
        let active: Vec<usize> = (0..width).filter(|&j| j >= k || rel[j] > opts.tol).collect();
        let mut w = r.select_columns(&active);
        if let Some(t) = opts.preconditioner {
            w = t.apply_block(&w);
        }

        // conjugate directions of the still-active columns
        let extra = match prev.take() {
            Some(p) => {
                let cols: Vec<usize> = active.iter().copied().filter(|&j| j < p.ncols()).collect();
                concat(&w, &p.select_columns(&cols))
            }
            None => w,
        };

        // M-orthogonalize against the current block, then among themselves
        let mut extra = extra;
        let mut m_extra = m.apply_block(&extra);
        for _ in 0..2 {
            let c = block.x.transpose() * &m_extra;
            extra -= &block.x * &c;
            m_extra -= &block.mx * &c;
            let (q, mq) = svqb(&extra, &m_extra, BASIS_DROP)?;
            extra = q;
            m_extra = mq;
        }
        m_extra = m.apply_block(&extra);
        if extra.ncols() == 0 {
            // search space exhausted: the current block is exact in floating point
            return finish(block, k, m, which, opts.degeneracy);
        }
        let a_extra = op.apply_block(&extra);

        let s = concat(&block.x, &extra);
        let a_s = concat(&block.ax, &a_extra);
        let m_s = concat(&block.mx, &m_extra);
        let old = block.x.clone();
        let old_mx = block.mx.clone();
        block = rayleigh_ritz(&s, &a_s, &m_s, width)?;

        // P = (I - X_old X_old^T M) X_new
        let c = old_mx.transpose() * &block.x;
        let p = &block.x - &old * c;
        prev = Some(p);
    }

    let best = finish(block, k, m, which, opts.degeneracy)?;
    Err(Error::EigMaxIter {
        iterations: opts.maxiter,
        residual: worst,
        best: Box::new(best),
    })
}

fn concat(left: &DMatrix<f64>, right: &DMatrix<f64>) -> DMatrix<f64> {
    let (n, l) = left.shape();
    DMatrix::from_fn(n, l + right.ncols(), |i, j| if j < l { left[(i, j)] } else { right[(i, j - l)] })
}

fn finish(block: Block, k: usize, m: &SpdOperator<'_>, which: Which, tol: DegeneracyTol) -> Result<EigenResult> {
    let mut order: Vec<usize> = (0..k).collect();
    let mut lambdas: Vec<f64> = block.lambdas[..k].to_vec();
    if which == Which::Largest {
        for l in lambdas.iter_mut() {
            *l = -*l;
        }
        order.reverse();
        lambdas.reverse();
    }
    let x = block.x.select_columns(&order);
    finalize(x, lambdas, m, which, tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eigsolve::eig_dense;
    use crate::linop::{DenseSymmetric, FnOperator, Identity};
    use nalgebra::DVector;

    #[test]
    fn matrix_free_diagonal() {
        let a = FnOperator::new(10, |v: &DVector<f64>| DVector::from_fn(10, |i, _| (i + 1) as f64 * v[i]));
        let id = Identity(10);
        let m = SpdOperator::assume(&id);
        let r = eig_iterative(&a, &m, 3, Which::Smallest, &IterativeOptions::default()).unwrap();
        for (got, want) in r.lambdas.iter().zip([1.0, 2.0, 3.0]) {
            assert!((got - want).abs() < 1e-8, "{got} vs {want}");
        }
        assert!(r.relative_residual(&a, &m) < 1e-9);
    }

    #[test]
    fn largest_pairs() {
        let a = DenseSymmetric::from_diagonal(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0]).unwrap();
        let id = Identity(7);
        let m = SpdOperator::assume(&id);
        let r = eig_iterative(&a, &m, 2, Which::Largest, &IterativeOptions::default()).unwrap();
        assert!((r.lambdas[0] - 6.0).abs() < 1e-9 && (r.lambdas[1] - 7.0).abs() < 1e-9);
        let dense = eig_dense(&a, &DenseSymmetric::identity(7), 2, Which::Largest).unwrap();
        assert!((r.x.clone() - dense.x).amax() < 1e-6);
    }

    #[test]
    fn identity_pencil() {
        let id = Identity(5);
        let m = SpdOperator::assume(&id);
        let r = eig_iterative(&id, &m, 1, Which::Smallest, &IterativeOptions::default()).unwrap();
        assert!((r.lambdas[0] - 1.0).abs() < 1e-14);
        assert!(r.residual(&id, &m) < 1e-14);
        assert!((r.x.norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn maxiter_returns_best_iterate() {
        let a = DenseSymmetric::from_diagonal(&(1..=40).map(f64::from).collect::<Vec<_>>()).unwrap();
        let id = Identity(40);
        let m = SpdOperator::assume(&id);
        let opts = IterativeOptions { maxiter: 1, tol: 1e-14, ..Default::default() };
        match eig_iterative(&a, &m, 3, Which::Smallest, &opts) {
            Err(Error::EigMaxIter { best, residual, .. }) => {
                assert_eq!(best.k(), 3);
                assert!(residual > 1e-14);
            }
            other => panic!("expected EigMaxIter, got {other:?}"),
        }
    }
}
