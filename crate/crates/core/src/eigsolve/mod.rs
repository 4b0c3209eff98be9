//! Partial eigendecomposition of the symmetric pencil `A X = M X Λ` with
//! `X^T M X = I`, plus degeneracy detection.

mod lobpcg;

use nalgebra::DMatrix;

use crate::dense;
use crate::error::{Error, Result};
use crate::linop::{materialize, DenseSymmetric, SpdOperator, SymmetricOperator};

pub use lobpcg::{eig_iterative, IterativeOptions};

/// Which end of the spectrum to retrieve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Which {
    #[default]
    Smallest,
    Largest,
}

/// Tolerance used to decide that two eigenvalues are equal:
/// `|λ_i - λ_j| <= abs + rel * max_m |λ_m|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DegeneracyTol {
    pub rel: f64,
    pub abs: f64,
}

impl Default for DegeneracyTol {
    fn default() -> Self {
        Self { rel: 1e-8, abs: 0.0 }
    }
}

impl DegeneracyTol {
    fn threshold(&self, lambdas: &[f64]) -> f64 {
        let scale = lambdas.iter().fold(0.0f64, |acc, l| acc.max(l.abs()));
        self.abs + self.rel * scale
    }
}

/// Partition of the retrieved eigenpairs into classes of equal eigenvalue.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Degeneracy {
    groups: Vec<Vec<usize>>,
    group_of: Vec<usize>,
}

impl Degeneracy {
    /// Builds the partition from explicit groups. Each index in `0..k` must
    /// appear exactly once.
    pub fn from_groups(k: usize, mut groups: Vec<Vec<usize>>) -> Result<Self> {
        let mut group_of = vec![usize::MAX; k];
        groups.retain(|g| !g.is_empty());
        for g in groups.iter_mut() {
            g.sort_unstable();
        }
        groups.sort_by_key(|g| g[0]);
        for (gi, g) in groups.iter().enumerate() {
            for &i in g {
                if i >= k || group_of[i] != usize::MAX {
                    return Err(Error::InvalidArgument(format!("index {i} is not a valid group member")));
                }
                group_of[i] = gi;
            }
        }
        if group_of.contains(&usize::MAX) {
            return Err(Error::InvalidArgument("groups do not cover every index".into()));
        }
        Ok(Self { groups, group_of })
    }

    pub fn k(&self) -> usize {
        self.group_of.len()
    }

    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    /// Members of the group containing index `j` (including `j`).
    pub fn group_of(&self, j: usize) -> &[usize] {
        &self.groups[self.group_of[j]]
    }

    pub fn same_group(&self, i: usize, j: usize) -> bool {
        self.group_of[i] == self.group_of[j]
    }

    pub fn is_trivial(&self) -> bool {
        self.groups.len() == self.k()
    }

    /// The 0/1 degeneracy matrix `D`.
    pub fn matrix(&self) -> DMatrix<f64> {
        let k = self.k();
        DMatrix::from_fn(k, k, |i, j| if self.same_group(i, j) { 1.0 } else { 0.0 })
    }

    /// Elementwise product `D ∘ m`.
    pub fn mask(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| {
            if self.same_group(i, j) {
                m[(i, j)]
            } else {
                0.0
            }
        })
    }

    /// Elementwise product `(D - I) ∘ m`.
    pub fn off_diagonal_mask(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| {
            if i != j && self.same_group(i, j) {
                m[(i, j)]
            } else {
                0.0
            }
        })
    }
}

/// Groups eigenvalues whose gaps are within tolerance, closing the relation
/// transitively so that chains of close values merge into one group.
pub fn build_degeneracy(lambdas: &[f64], tol_rel: f64, tol_abs: f64) -> Degeneracy {
    let tol = DegeneracyTol { rel: tol_rel, abs: tol_abs };
    let thr = tol.threshold(lambdas);
    let mut order: Vec<usize> = (0..lambdas.len()).collect();
    order.sort_by(|&i, &j| lambdas[i].total_cmp(&lambdas[j]));
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for (pos, &i) in order.iter().enumerate() {
        let chained = pos > 0 && (lambdas[i] - lambdas[order[pos - 1]]).abs() <= thr;
        match groups.last_mut() {
            Some(g) if chained => g.push(i),
            _ => groups.push(vec![i]),
        }
    }
    Degeneracy::from_groups(lambdas.len(), groups).expect("groups partition 0..k")
}

/// `k` eigenpairs of a pencil with their degeneracy structure.
#[derive(Debug, Clone)]
pub struct EigenResult {
    /// `n x k`, `M`-orthonormal columns.
    pub x: DMatrix<f64>,
    /// Ascending.
    pub lambdas: Vec<f64>,
    pub degeneracy: Degeneracy,
    pub which: Which,
}

impl EigenResult {
    pub fn k(&self) -> usize {
        self.lambdas.len()
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn d_matrix(&self) -> DMatrix<f64> {
        self.degeneracy.matrix()
    }

    pub fn lambda_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&self.lambdas))
    }

    /// Columns of `X` belonging to the degeneracy group of pair `j`.
    pub fn group_block(&self, j: usize) -> DMatrix<f64> {
        self.x.select_columns(self.degeneracy.group_of(j))
    }

    /// `‖A X − M X Λ‖_F`.
    pub fn residual(&self, a: &dyn SymmetricOperator, m: &dyn SymmetricOperator) -> f64 {
        (a.apply_block(&self.x) - m.apply_block(&self.x) * self.lambda_matrix()).norm()
    }

    /// Residual relative to `max(‖A X‖_F, |λ|_max ‖M X‖_F)`.
    pub fn relative_residual(&self, a: &dyn SymmetricOperator, m: &dyn SymmetricOperator) -> f64 {
        let ax = a.apply_block(&self.x);
        let mx = m.apply_block(&self.x);
        let lmax = self.lambdas.iter().fold(0.0f64, |acc, l| acc.max(l.abs()));
        let scale = ax.norm().max(lmax * mx.norm()).max(f64::MIN_POSITIVE);
        (ax - mx * self.lambda_matrix()).norm() / scale
    }

    /// `‖X^T M X − I‖_max`.
    pub fn orthonormality_defect(&self, m: &dyn SymmetricOperator) -> f64 {
        let g = self.x.transpose() * m.apply_block(&self.x);
        (g - DMatrix::identity(self.k(), self.k())).amax()
    }
}

/// Applies the reproducible gauge: `M`-orthonormalizes each degenerate group
/// by modified Gram-Schmidt, then makes each column's largest entry positive.
pub(crate) fn finalize(
    mut x: DMatrix<f64>,
    lambdas: Vec<f64>,
    m: &dyn SymmetricOperator,
    which: Which,
    tol: DegeneracyTol,
) -> Result<EigenResult> {
    let degeneracy = build_degeneracy(&lambdas, tol.rel, tol.abs);
    for g in degeneracy.groups() {
        if g.len() > 1 {
            dense::m_orthonormalize_columns(&mut x, m, g)?;
        }
    }
    dense::fix_sign_gauge(&mut x);
    Ok(EigenResult { x, lambdas, degeneracy, which })
}

fn check_k(n: usize, k: usize) -> Result<()> {
    if k == 0 || k >= n {
        return Err(Error::InvalidArgument(format!("need 1 <= k < n, got k={k}, n={n}")));
    }
    Ok(())
}

/// Dense solver with the default degeneracy tolerance.
pub fn eig_dense(a: &DenseSymmetric, m: &DenseSymmetric, k: usize, which: Which) -> Result<EigenResult> {
    eig_dense_with(a, m, k, which, DegeneracyTol::default())
}

/// Dense solver: Cholesky reduction of the pencil followed by a full
/// symmetric eigendecomposition, keeping `k` pairs from the requested end.
///
/// Fails with [`Error::SplitDegeneracy`] when the boundary pair is
/// degenerate with the first excluded one.
pub fn eig_dense_with(
    a: &DenseSymmetric,
    m: &DenseSymmetric,
    k: usize,
    which: Which,
    tol: DegeneracyTol,
) -> Result<EigenResult> {
    let n = a.entries().nrows();
    if m.entries().nrows() != n {
        return Err(Error::DimensionMismatch { expected: n, found: m.entries().nrows() });
    }
    check_k(n, k)?;
    let (vals, u) = dense::generalized_eigh(a.entries(), m.entries())?;
    let picked: Vec<usize> = match which {
        Which::Smallest => (0..k).collect(),
        Which::Largest => (n - k..n).collect(),
    };
    let thr = tol.threshold(&vals);
    let (inside, outside) = match which {
        Which::Smallest => (k - 1, k),
        Which::Largest => (n - k, n - k - 1),
    };
    if (vals[inside] - vals[outside]).abs() <= thr {
        return Err(Error::SplitDegeneracy { index: inside });
    }
    let lambdas = picked.iter().map(|&i| vals[i]).collect();
    finalize(u.select_columns(&picked), lambdas, m, which, tol)
}

/// Convenience wrapper that materializes matrix-free operators and calls
/// [`eig_dense`].
pub fn eig_dense_operator(
    a: &dyn SymmetricOperator,
    m: &SpdOperator<'_>,
    k: usize,
    which: Which,
    tol: DegeneracyTol,
) -> Result<EigenResult> {
    let ad = DenseSymmetric::new(materialize(a))?;
    let md = DenseSymmetric::new(materialize(m))?;
    eig_dense_with(&ad, &md, k, which, tol)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag(d: &[f64]) -> DenseSymmetric {
        DenseSymmetric::from_diagonal(d).unwrap()
    }

    #[test]
    fn diagonal_smallest() {
        let r = eig_dense(&diag(&[1.0, 2.0, 3.0]), &DenseSymmetric::identity(3), 2, Which::Smallest).unwrap();
        assert_eq!(r.lambdas, vec![1.0, 2.0]);
        let expected = DMatrix::<f64>::identity(3, 3).columns(0, 2).into_owned();
        assert!((r.x.clone() - expected).amax() < 1e-15);
        assert!(r.degeneracy.is_trivial());
    }

    #[test]
    fn diagonal_largest_is_ascending() {
        let r = eig_dense(&diag(&[1.0, 2.0, 3.0]), &DenseSymmetric::identity(3), 2, Which::Largest).unwrap();
        assert_eq!(r.lambdas, vec![2.0, 3.0]);
        assert!((r.x[(1, 0)] - 1.0).abs() < 1e-15 && (r.x[(2, 1)] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn decoupled_generalized_pencil() {
        let r = eig_dense(&diag(&[2.0, 6.0]).clone(), &diag(&[1.0, 4.0]), 1, Which::Smallest).unwrap();
        assert!((r.lambdas[0] - 1.5).abs() < 1e-15);
        assert!((r.x[(1, 0)] - 0.5).abs() < 1e-15 && r.x[(0, 0)].abs() < 1e-15);
    }

    #[test]
    fn constructed_degeneracy() {
        let r = eig_dense(&diag(&[2.0, 2.0, 5.0]), &DenseSymmetric::identity(3), 2, Which::Smallest).unwrap();
        assert_eq!(r.lambdas, vec![2.0, 2.0]);
        assert_eq!(r.d_matrix(), DMatrix::from_element(2, 2, 1.0));
        assert!(r.orthonormality_defect(&DenseSymmetric::identity(3)) < 1e-15);
    }

    #[test]
    fn rejects_split_cluster_and_bad_k() {
        let a = diag(&[2.0, 2.0, 5.0]);
        let m = DenseSymmetric::identity(3);
        assert!(matches!(eig_dense(&a, &m, 1, Which::Smallest), Err(Error::SplitDegeneracy { .. })));
        assert!(eig_dense(&a, &m, 3, Which::Smallest).is_err());
        assert!(eig_dense(&a, &m, 0, Which::Smallest).is_err());
        assert!(matches!(
            eig_dense(&a, &diag(&[1.0, -1.0, 1.0]), 2, Which::Smallest),
            Err(Error::NotPositiveDefinite)
        ));
    }

    #[test]
    fn degeneracy_examples() {
        let d = build_degeneracy(&[2.0, 2.0, 5.0], 1e-8, 0.0);
        assert_eq!(d.groups(), &[vec![0, 1], vec![2]]);
        assert_eq!(
            d.matrix(),
            nalgebra::dmatrix![1.0, 1.0, 0.0; 1.0, 1.0, 0.0; 0.0, 0.0, 1.0]
        );
        assert_eq!(build_degeneracy(&[1.0, 2.0, 3.0], 1e-8, 0.0).matrix(), DMatrix::identity(3, 3));
        let chain = build_degeneracy(&[1.0, 1.0 + 1e-12, 1.0 + 2e-12], 0.0, 1e-11);
        assert_eq!(chain.groups(), &[vec![0, 1, 2]]);
        // chain that only closes transitively: 0-1 and 1-2 within 1.5e-12, 0-2 not
        let chain = build_degeneracy(&[1.0, 1.0 + 1.5e-12, 1.0 + 3e-12], 0.0, 2e-12);
        assert_eq!(chain.groups(), &[vec![0, 1, 2]]);
    }

    #[test]
    fn unsorted_input_groups() {
        let d = build_degeneracy(&[5.0, 2.0, 2.0], 1e-8, 0.0);
        assert_eq!(d.groups(), &[vec![0], vec![1, 2]]);
        assert!(d.same_group(1, 2) && !d.same_group(0, 1));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn degeneracy_is_an_equivalence(vals in proptest::collection::vec(-3i32..3, 1..8), scale in 0.0f64..1e-9) {
                let lambdas: Vec<f64> = vals.iter().enumerate().map(|(i, &v)| v as f64 + scale * i as f64).collect();
                let d = build_degeneracy(&lambdas, 1e-8, 0.0).matrix();
                let k = lambdas.len();
                for i in 0..k {
                    prop_assert_eq!(d[(i, i)], 1.0);
                    for j in 0..k {
                        prop_assert_eq!(d[(i, j)], d[(j, i)]);
                        for l in 0..k {
                            if d[(i, j)] == 1.0 && d[(j, l)] == 1.0 {
                                prop_assert_eq!(d[(i, l)], 1.0);
                            }
                        }
                    }
                }
            }
        }
    }
}
