mod common;

use common::{random_case, rng, standard_cases};
use eigengrad::oracle::{full_spectrum, pseudo_inverse_apply, GROUP_TOL_REL};
use eigengrad::sylvester::{project_rhs, solve_dense, solve_iterative, SylvesterProblem};
use eigengrad::{Error, SpdOperator};
use nalgebra::DMatrix;
use rand_distr::{Distribution, StandardNormal};

fn gaussian(n: usize, k: usize, r: &mut impl rand::Rng) -> DMatrix<f64> {
    DMatrix::from_fn(n, k, |_, _| StandardNormal.sample(r))
}

#[test]
fn dense_and_iterative_agree_with_pseudo_inverse() {
    for case in standard_cases(3) {
        let mut r = rng(9);
        let spd = SpdOperator::assume(&case.m);
        let b = project_rhs(&gaussian(case.eig.n(), case.eig.k(), &mut r), &case.eig.x, &case.m, &case.eig.degeneracy);
        let p = SylvesterProblem::from_eigen(&case.a, spd, &case.eig, &b);
        let dense = solve_dense(&p, 1e-10).unwrap();
        let iter = solve_iterative(&p, 20 * case.eig.n(), 1e-10).unwrap();
        let fs = full_spectrum(&case.a, &case.m).unwrap();
        for j in 0..case.eig.k() {
            let reference = pseudo_inverse_apply(&fs, case.eig.lambdas[j], &b.column(j).into_owned(), GROUP_TOL_REL);
            let scale = reference.amax().max(1.0);
            assert!((dense.y.column(j) - &reference).amax() <= 1e-9 * scale, "{} dense col {j}", case.name);
            assert!((iter.y.column(j) - &reference).amax() <= 1e-8 * scale, "{} iterative col {j}", case.name);
        }
        assert!(dense.residuals.iter().chain(&iter.residuals).all(|&res| res <= 1e-10));
    }
}

#[test]
fn solution_is_linear_in_rhs() {
    let mut r = rng(4);
    for case in standard_cases(4) {
        let spd = SpdOperator::assume(&case.m);
        let (n, k) = (case.eig.n(), case.eig.k());
        let proj = |b: DMatrix<f64>| project_rhs(&b, &case.eig.x, &case.m, &case.eig.degeneracy);
        let b1 = proj(gaussian(n, k, &mut r));
        let b2 = proj(gaussian(n, k, &mut r));
        let alpha = 2.5;
        let combo = &b1 + &b2 * alpha;
        let solve = |b: &DMatrix<f64>| solve_dense(&SylvesterProblem::from_eigen(&case.a, spd, &case.eig, b), 1e-10).unwrap().y;
        let lhs = solve(&combo);
        let rhs = solve(&b1) + solve(&b2) * alpha;
        assert!(common::rel_diff(&lhs, &rhs) < 1e-10, "{}", case.name);
    }
}

#[test]
fn iterative_hundred() {
    let mut r = rng(100);
    let case = random_case(100, 5, &mut r);
    let spd = SpdOperator::assume(&case.m);
    let b = project_rhs(&gaussian(100, 5, &mut r), &case.eig.x, &case.m, &case.eig.degeneracy);
    let p = SylvesterProblem::from_eigen(&case.a, spd, &case.eig, &b);
    let sol = solve_iterative(&p, 2000, 1e-10).unwrap();
    assert!(sol.residuals.iter().all(|&res| res <= 1e-10), "{:?}", sol.residuals);
    let dense = solve_dense(&p, 1e-10).unwrap();
    assert!(common::rel_diff(&sol.y, &dense.y) < 1e-8);
}

#[test]
fn unprojected_rhs_is_rejected() {
    let mut r = rng(8);
    let case = random_case(6, 2, &mut r);
    let spd = SpdOperator::assume(&case.m);
    let b = case.m.entries() * &case.eig.x;
    let p = SylvesterProblem::from_eigen(&case.a, spd, &case.eig, &b);
    assert!(matches!(solve_dense(&p, 1e-10), Err(Error::NotSolvable { .. })));
    assert!(matches!(solve_iterative(&p, 100, 1e-10), Err(Error::NotSolvable { .. })));
}

#[test]
fn iterative_budget_exhaustion_keeps_best_iterate() {
    let mut r = rng(12);
    let case = random_case(60, 3, &mut r);
    let spd = SpdOperator::assume(&case.m);
    let b = project_rhs(&gaussian(60, 3, &mut r), &case.eig.x, &case.m, &case.eig.degeneracy);
    let p = SylvesterProblem::from_eigen(&case.a, spd, &case.eig, &b);
    match solve_iterative(&p, 3, 1e-10) {
        Err(Error::SolveMaxIter { residual, best, .. }) => {
            assert!(residual > 1e-10 && residual.is_finite());
            assert_eq!(best.y.shape(), (60, 3));
        }
        other => panic!("expected SolveMaxIter, got {other:?}"),
    }
}
