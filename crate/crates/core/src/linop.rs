//! Matrix-free symmetric operators.
//!
//! Every solver in this crate talks to the matrices `A` and `M` only through
//! [`SymmetricOperator`], i.e. through matrix-vector products. A dense,
//! explicitly stored implementation is provided by [`DenseSymmetric`]; a
//! closure can be wrapped with [`FnOperator`].

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// A real symmetric linear map `R^n -> R^n` known through its action.
///
/// Implementations must be immutable: `apply` may be called concurrently
/// from several threads on distinct vectors.
pub trait SymmetricOperator: Send + Sync {
    fn dim(&self) -> usize;

    fn apply(&self, v: &DVector<f64>) -> DVector<f64>;

    /// Applies the operator to every column of an `n x m` block.
    fn apply_block(&self, block: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(block.nrows(), block.ncols());
        for (j, col) in block.column_iter().enumerate() {
            out.set_column(j, &self.apply(&col.into_owned()));
        }
        out
    }
}

/// Assembles the explicit matrix of an operator by applying it to the
/// identity.
pub fn materialize(op: &dyn SymmetricOperator) -> DMatrix<f64> {
    op.apply_block(&DMatrix::identity(op.dim(), op.dim()))
}

/// Dense, fully stored symmetric matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseSymmetric {
    entries: DMatrix<f64>,
}

/// Builds a [`DenseSymmetric`] from a square array, storing `(B + B^T) / 2`.
pub fn make_dense(entries: DMatrix<f64>) -> Result<DenseSymmetric> {
    DenseSymmetric::new(entries)
}

impl DenseSymmetric {
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        let (rows, cols) = entries.shape();
        if rows != cols {
            return Err(Error::NonSquare { rows, cols });
        }
        if rows == 0 {
            return Err(Error::InvalidArgument("matrix must be non-empty".into()));
        }
        for j in 0..cols {
            for i in 0..rows {
                if !entries[(i, j)].is_finite() {
                    return Err(Error::NonFinite { row: i, col: j });
                }
            }
        }
        let mut sym = entries;
        for j in 0..cols {
            for i in (j + 1)..rows {
                let avg = 0.5 * (sym[(i, j)] + sym[(j, i)]);
                sym[(i, j)] = avg;
                sym[(j, i)] = avg;
            }
        }
        Ok(Self { entries: sym })
    }

    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let n = rows.len();
        let mut m = DMatrix::zeros(n, n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::NonSquare { rows: n, cols: row.len() });
            }
            for (j, &v) in row.iter().enumerate() {
                m[(i, j)] = v;
            }
        }
        Self::new(m)
    }

    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        Self::new(DMatrix::from_diagonal(&DVector::from_column_slice(diag)))
    }

    pub fn identity(n: usize) -> Self {
        Self { entries: DMatrix::identity(n, n) }
    }

    pub fn zeros(n: usize) -> Self {
        Self { entries: DMatrix::zeros(n, n) }
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn into_entries(self) -> DMatrix<f64> {
        self.entries
    }
}

impl SymmetricOperator for DenseSymmetric {
    fn dim(&self) -> usize {
        self.entries.nrows()
    }

    fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        &self.entries * v
    }

    fn apply_block(&self, block: &DMatrix<f64>) -> DMatrix<f64> {
        &self.entries * block
    }
}

/// Operator defined by a closure computing the matrix-vector product.
///
/// Symmetry is the caller's promise; see [`check_symmetry`].
pub struct FnOperator<F> {
    dim: usize,
    f: F,
}

impl<F> FnOperator<F>
where
    F: Fn(&DVector<f64>) -> DVector<f64> + Send + Sync,
{
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F> SymmetricOperator for FnOperator<F>
where
    F: Fn(&DVector<f64>) -> DVector<f64> + Send + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        (self.f)(v)
    }
}

/// The identity map on `R^n`.
#[derive(Debug, Clone, Copy)]
pub struct Identity(pub usize);

impl SymmetricOperator for Identity {
    fn dim(&self) -> usize {
        self.0
    }

    fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        v.clone()
    }

    fn apply_block(&self, block: &DMatrix<f64>) -> DMatrix<f64> {
        block.clone()
    }
}

/// `-op`, used to turn a largest-k search into a smallest-k one.
pub(crate) struct Negated<'a>(pub &'a dyn SymmetricOperator);

impl SymmetricOperator for Negated<'_> {
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        -self.0.apply(v)
    }

    fn apply_block(&self, block: &DMatrix<f64>) -> DMatrix<f64> {
        -self.0.apply_block(block)
    }
}

/// A symmetric operator whose positive definiteness has been attested.
///
/// [`SpdOperator::attest`] spot-checks `<v, Mv> > 0` on random probes;
/// it cannot prove definiteness.
#[derive(Clone, Copy)]
pub struct SpdOperator<'a> {
    inner: &'a dyn SymmetricOperator,
}

impl<'a> SpdOperator<'a> {
    /// Wraps `op` after checking `<v, op v> > 0` for `trials` random vectors.
    pub fn attest(op: &'a dyn SymmetricOperator, trials: usize) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(0x0005_eed0_f5bd);
        for _ in 0..trials.max(1) {
            let v = random_vector(op.dim(), &mut rng);
            let q = v.dot(&op.apply(&v));
            if !(q > 0.0) {
                return Err(Error::NotPositiveDefinite);
            }
        }
        Ok(Self { inner: op })
    }

    /// Wraps `op` without any check.
    pub fn assume(op: &'a dyn SymmetricOperator) -> Self {
        Self { inner: op }
    }

    pub fn inner(&self) -> &'a dyn SymmetricOperator {
        self.inner
    }
}

impl SymmetricOperator for SpdOperator<'_> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        self.inner.apply(v)
    }

    fn apply_block(&self, block: &DMatrix<f64>) -> DMatrix<f64> {
        self.inner.apply_block(block)
    }
}

fn random_vector(n: usize, rng: &mut ChaCha8Rng) -> DVector<f64> {
    DVector::from_fn(n, |_, _| StandardNormal.sample(rng))
}

/// Probabilistic symmetry test: `|<u, op v> - <v, op u>| <= tol * |u| |v| * norm`
/// for `trials` random pairs, where `norm` is a running estimate of the
/// operator norm taken from the same probes.
pub fn check_symmetry(op: &dyn SymmetricOperator, trials: usize, tol: f64) -> bool {
    let n = op.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(0x0571_7a11);
    for _ in 0..trials.max(1) {
        let u = random_vector(n, &mut rng);
        let v = random_vector(n, &mut rng);
        let au = op.apply(&u);
        let av = op.apply(&v);
        if au.len() != n || av.len() != n {
            return false;
        }
        let (nu, nv) = (u.norm(), v.norm());
        let norm_est = (au.norm() / nu).max(av.norm() / nv).max(f64::MIN_POSITIVE);
        let lhs = u.dot(&av);
        let rhs = v.dot(&au);
        if !lhs.is_finite() || !rhs.is_finite() {
            return false;
        }
        if (lhs - rhs).abs() > tol * nu * nv * norm_est {
            return false;
        }
    }
    true
}
