//! Seeded generators for test pencils and for tangents and cotangents that
//! satisfy the degeneracy validity conditions.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::dense;
use crate::eigsolve::EigenResult;
use crate::error::{Error, Result};
use crate::linop::DenseSymmetric;
use crate::vjp::CotangentInput;

/// Kind of mass matrix to generate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MassKind {
    #[default]
    Identity,
    /// `Q diag(uniform[1, 2]) Q^T` with random orthogonal `Q`.
    RandomSpd,
}

fn gaussian<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

/// Haar-distributed orthogonal matrix (QR of a Gaussian matrix with the
/// signs of `R`'s diagonal folded into `Q`).
pub fn random_orthogonal<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DMatrix<f64> {
    let qr = gaussian(n, n, rng).qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

pub fn random_symmetric<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DenseSymmetric {
    let g = gaussian(n, n, rng);
    DenseSymmetric::new((&g + g.transpose()) * 0.5).expect("finite square")
}

pub fn random_spd<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DenseSymmetric {
    let q = random_orthogonal(n, rng);
    let d = DMatrix::from_fn(n, n, |i, j| if i == j { rng.random_range(1.0..2.0) } else { 0.0 });
    DenseSymmetric::new(&q * d * q.transpose()).expect("finite square")
}

/// Expands `(value, multiplicity)` pairs into a full ascending spectrum of
/// length `n`, filling the remainder with distinct values above the largest
/// requested one.
pub fn spectrum_from_multiplicities<R: Rng + ?Sized>(
    n: usize,
    spec: &[(f64, usize)],
    rng: &mut R,
) -> Result<Vec<f64>> {
    let total: usize = spec.iter().map(|&(_, mult)| mult).sum();
    if total > n {
        return Err(Error::InvalidArgument(format!("multiplicities sum to {total} > n = {n}")));
    }
    if spec.iter().any(|&(v, mult)| mult == 0 || !v.is_finite()) {
        return Err(Error::InvalidArgument("multiplicities must be positive and values finite".into()));
    }
    let mut values: Vec<f64> = spec.iter().flat_map(|&(v, mult)| std::iter::repeat_n(v, mult)).collect();
    let top = values.iter().fold(0.0f64, |acc, v| acc.max(*v));
    for i in 0..(n - total) {
        values.push(top + 1.0 + i as f64 + 0.5 * rng.random::<f64>());
    }
    values.sort_by(f64::total_cmp);
    Ok(values)
}

/// Pencil with prescribed eigenvalues: `A = L Q diag(e) Q^T L^T` where
/// `M = L L^T`, so that `L^{-1} A L^{-T}` has exactly the spectrum `e`.
pub fn pencil_with_spectrum<R: Rng + ?Sized>(
    spectrum: &[f64],
    mass: MassKind,
    rng: &mut R,
) -> Result<(DenseSymmetric, DenseSymmetric)> {
    let n = spectrum.len();
    let q = random_orthogonal(n, rng);
    let m = match mass {
        MassKind::Identity => DenseSymmetric::identity(n),
        MassKind::RandomSpd => random_spd(n, rng),
    };
    let core = &q * DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(spectrum)) * q.transpose();
    let a = match mass {
        MassKind::Identity => core,
        MassKind::RandomSpd => {
            let l = dense::cholesky(m.entries())?.l();
            &l * core * l.transpose()
        }
    };
    Ok((DenseSymmetric::new(a)?, m))
}

/// Random symmetric `(A′, M′)` with the in-group couplings of
/// `A′ − λ M′` removed, so the forward validity condition holds exactly
/// (to rounding). `M′` keeps its in-group couplings; `A′` absorbs the
/// correction.
pub fn valid_tangent<R: Rng + ?Sized>(
    eig: &EigenResult,
    m: &DenseSymmetric,
    perturb_mass: bool,
    rng: &mut R,
) -> (DenseSymmetric, DenseSymmetric) {
    let n = eig.n();
    let mut ap = random_symmetric(n, rng).into_entries();
    let mp = if perturb_mass {
        random_symmetric(n, rng).into_entries() * 0.25
    } else {
        DMatrix::zeros(n, n)
    };
    let mx = m.entries() * &eig.x;
    for g in eig.degeneracy.groups().iter().filter(|g| g.len() > 1) {
        let lambda = eig.lambdas[g[0]];
        for (a, &i) in g.iter().enumerate() {
            for &j in &g[a + 1..] {
                let xi = eig.x.column(i);
                let xj = eig.x.column(j);
                let c = xi.dot(&(&ap * xj)) - lambda * xi.dot(&(&mp * xj));
                let mi = mx.column(i);
                let mj = mx.column(j);
                ap -= (mi * mj.transpose() + mj * mi.transpose()) * c;
            }
        }
    }
    (
        DenseSymmetric::new(ap).expect("finite"),
        DenseSymmetric::new(mp).expect("finite"),
    )
}

/// Random `(Λ̄, X̄)` whose in-group block of `X^T X̄` is symmetric.
pub fn valid_cotangent<R: Rng + ?Sized>(eig: &EigenResult, m: &DenseSymmetric, rng: &mut R) -> CotangentInput {
    let (n, k) = (eig.n(), eig.k());
    let mut x_bar = gaussian(n, k, rng);
    let lambda_bar: Vec<f64> = (0..k).map(|_| StandardNormal.sample(rng)).collect();
    let mx = m.entries() * &eig.x;
    let g_full = eig.x.transpose() * &x_bar;
    for g in eig.degeneracy.groups().iter().filter(|g| g.len() > 1) {
        for &i in g {
            for &j in g {
                let skew = 0.5 * (g_full[(i, j)] - g_full[(j, i)]);
                x_bar.column_mut(j).axpy(-skew, &mx.column(i), 1.0);
            }
        }
    }
    CotangentInput { lambda_bar, x_bar }
}
