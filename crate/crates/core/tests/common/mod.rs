#![allow(dead_code)]

use eigengrad::pencil::{pencil_with_spectrum, random_spd, random_symmetric, spectrum_from_multiplicities, MassKind};
use eigengrad::{DenseSymmetric, EigenResult, Which};
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A named test pencil together with its dense eigenpairs.
pub struct Case {
    pub name: String,
    pub a: DenseSymmetric,
    pub m: DenseSymmetric,
    pub eig: EigenResult,
}

pub fn random_case(n: usize, k: usize, rng: &mut ChaCha8Rng) -> Case {
    let a = random_symmetric(n, rng);
    let m = random_spd(n, rng);
    let eig = eigengrad::eig_dense(&a, &m, k, Which::Smallest).unwrap();
    Case { name: format!("random {n}x{n} k={k}"), a, m, eig }
}

pub fn spectrum_case(n: usize, k: usize, spec: &[(f64, usize)], mass: MassKind, rng: &mut ChaCha8Rng) -> Case {
    let s = spectrum_from_multiplicities(n, spec, rng).unwrap();
    let (a, m) = pencil_with_spectrum(&s, mass, rng).unwrap();
    let eig = eigengrad::eig_dense(&a, &m, k, Which::Smallest).unwrap();
    Case { name: format!("{spec:?} n={n} k={k} {mass:?}"), a, m, eig }
}

/// The standard mix: generic pencils plus the two degenerate spectra, each
/// with identity and random mass.
pub fn standard_cases(seed: u64) -> Vec<Case> {
    let mut r = rng(seed);
    let mut out = vec![random_case(6, 3, &mut r), random_case(12, 4, &mut r)];
    for mass in [MassKind::Identity, MassKind::RandomSpd] {
        out.push(spectrum_case(3, 2, &[(2.0, 2), (5.0, 1)], mass, &mut r));
        out.push(spectrum_case(6, 4, &[(1.0, 3), (4.0, 1)], mass, &mut r));
        out.push(spectrum_case(10, 5, &[(1.0, 2), (3.0, 1), (6.0, 2)], mass, &mut r));
    }
    out
}

pub fn rel_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).amax() / a.amax().max(b.amax()).max(1e-300)
}
