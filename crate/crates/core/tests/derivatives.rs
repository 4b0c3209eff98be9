mod common;

use common::{random_case, rel_diff, rng, standard_cases, Case};
use eigengrad::jvp::TangentInput;
use eigengrad::oracle::{compare_with_fd, full_spectrum, jvp_series, vjp_series};
use eigengrad::pencil::{valid_cotangent, valid_tangent};
use eigengrad::{
    jvp, vjp, vjp_symmetrized, CotangentInput, DenseSymmetric, JvpOptions, SolveOptions, SpdOperator, VjpOptions,
};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn solver_options() -> [(JvpOptions, VjpOptions); 2] {
    let it = SolveOptions::iterative();
    [
        (JvpOptions::default(), VjpOptions::default()),
        (JvpOptions { solve: it, ..Default::default() }, VjpOptions { solve: it, ..Default::default() }),
    ]
}

fn pairing_gap(case: &Case, seed: u64, jo: &JvpOptions, vo: &VjpOptions, symmetrized: bool) -> f64 {
    let mut r = rng(seed);
    let spd = SpdOperator::assume(&case.m);
    let (ap, mp) = valid_tangent(&case.eig, &case.m, true, &mut r);
    let c = valid_cotangent(&case.eig, &case.m, &mut r);
    let fwd = jvp(&case.a, &spd, &case.eig, &TangentInput { a_prime: &ap, m_prime: &mp }, jo).unwrap();
    let back = if symmetrized {
        vjp_symmetrized(&case.a, &spd, &case.eig, &c, vo).unwrap()
    } else {
        vjp(&case.a, &spd, &case.eig, &c, vo).unwrap()
    };
    let lhs: f64 = c.lambda_bar.iter().zip(&fwd.lambda_prime).map(|(a, b)| a * b).sum::<f64>() + c.x_bar.dot(&fwd.x_prime);
    let rhs = back.a_bar.dot(ap.entries()) + back.m_bar.dot(mp.entries());
    (lhs - rhs).abs() / lhs.abs().max(rhs.abs()).max(1e-300)
}

#[test]
fn adjoint_pairing() {
    for case in standard_cases(21) {
        for (jo, vo) in solver_options() {
            for draw in 0..20 {
                let gap = pairing_gap(&case, draw, &jo, &vo, false);
                assert!(gap <= 1e-8, "{} {:?} draw {draw}: {gap:e}", case.name, jo.solve.solver);
            }
        }
    }
}

#[test]
fn symmetrized_cotangents_pair_with_symmetric_tangents() {
    for case in standard_cases(22) {
        for draw in 0..5 {
            let gap = pairing_gap(&case, draw, &JvpOptions::default(), &VjpOptions::default(), true);
            assert!(gap <= 1e-8, "{}: {gap:e}", case.name);
        }
    }
}

#[test]
fn forward_matches_series() {
    for case in standard_cases(23) {
        let fs = full_spectrum(&case.a, &case.m).unwrap();
        let spd = SpdOperator::assume(&case.m);
        let mut r = rng(1);
        for _ in 0..5 {
            let (ap, mp) = valid_tangent(&case.eig, &case.m, true, &mut r);
            let t = TangentInput { a_prime: &ap, m_prime: &mp };
            let out = jvp(&case.a, &spd, &case.eig, &t, &JvpOptions::default()).unwrap();
            let ser = jvp_series(&fs, &case.eig, &t, 1e-7).unwrap();
            assert!((&out.x_prime - &ser.x_prime).amax() <= 1e-8, "{}", case.name);
            for (x, y) in out.lambda_prime.iter().zip(&ser.lambda_prime) {
                assert!((x - y).abs() <= 1e-8);
            }
        }
    }
}

#[test]
fn backward_matches_series() {
    for case in standard_cases(24) {
        let fs = full_spectrum(&case.a, &case.m).unwrap();
        let spd = SpdOperator::assume(&case.m);
        let mut r = rng(2);
        for _ in 0..5 {
            let c = valid_cotangent(&case.eig, &case.m, &mut r);
            let out = vjp(&case.a, &spd, &case.eig, &c, &VjpOptions::default()).unwrap();
            let ser = vjp_series(&fs, &case.eig, &c, 1e-7).unwrap();
            assert!((&out.a_bar - &ser.a_bar).amax() <= 1e-8, "{}", case.name);
            assert!((&out.m_bar - &ser.m_bar).amax() <= 1e-8, "{}", case.name);
        }
    }
}

#[test]
fn forward_matches_finite_differences() {
    for seed in 0..10 {
        let mut r = rng(seed);
        let case = random_case(6, 3, &mut r);
        let spd = SpdOperator::assume(&case.m);
        let (ap, mp) = valid_tangent(&case.eig, &case.m, true, &mut r);
        let t = TangentInput { a_prime: &ap, m_prime: &mp };
        let out = jvp(&case.a, &spd, &case.eig, &t, &JvpOptions::default()).unwrap();
        let cmp = compare_with_fd(&case.a, &case.m, &case.eig, &t, &out, 1e-5).unwrap();
        assert!(cmp.lambda_rel_err <= 1e-7, "seed {seed}: {cmp:?}");
        assert!(cmp.vector_err <= 1e-6, "seed {seed}: {cmp:?}");
        let factor = cmp.richardson_factor();
        assert!((3.0..=5.0).contains(&factor), "seed {seed}: {factor}");
    }
}

#[test]
fn degenerate_projector_matches_finite_differences() {
    for case in standard_cases(25).into_iter().filter(|c| !c.eig.degeneracy.is_trivial()) {
        let spd = SpdOperator::assume(&case.m);
        let mut r = rng(3);
        for _ in 0..5 {
            let (ap, mp) = valid_tangent(&case.eig, &case.m, true, &mut r);
            let t = TangentInput { a_prime: &ap, m_prime: &mp };
            let out = jvp(&case.a, &spd, &case.eig, &t, &JvpOptions::default()).unwrap();
            let cmp = compare_with_fd(&case.a, &case.m, &case.eig, &t, &out, 1e-5).unwrap();
            assert!(cmp.vector_err <= 1e-6 && cmp.lambda_rel_err <= 1e-7, "{}: {cmp:?}", case.name);
        }
    }
}

/// `A′X + AX′ − M′XΛ − MX′Λ − MXΛ′ = 0` and `X′ᵀMX + XᵀM′X + XᵀMX′ = 0`.
#[test]
fn differentiated_invariants_hold() {
    for case in standard_cases(26) {
        let spd = SpdOperator::assume(&case.m);
        let mut r = rng(4);
        let (ap, mp) = valid_tangent(&case.eig, &case.m, true, &mut r);
        let t = TangentInput { a_prime: &ap, m_prime: &mp };
        let out = jvp(&case.a, &spd, &case.eig, &t, &JvpOptions::default()).unwrap();
        let (a, m, x, xp) = (case.a.entries(), case.m.entries(), &case.eig.x, &out.x_prime);
        let lam = case.eig.lambda_matrix();
        let lam_p = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(out.lambda_prime.clone()));
        let eq = ap.entries() * x + a * xp - mp.entries() * x * &lam - m * xp * &lam - m * x * lam_p;
        let norm = xp.transpose() * m * x + x.transpose() * mp.entries() * x + x.transpose() * m * xp;
        assert!(eq.amax() < 1e-9, "{}: {}", case.name, eq.amax());
        assert!(norm.amax() < 1e-10, "{}: {}", case.name, norm.amax());
    }
}

#[test]
fn eigenvalue_only_cotangent() {
    for case in standard_cases(27) {
        let spd = SpdOperator::assume(&case.m);
        let lambda_bar: Vec<f64> = (0..case.eig.k()).map(|j| 1.0 + j as f64).collect();
        let c = CotangentInput::eigenvalues_only(lambda_bar.clone(), case.eig.n());
        let out = vjp(&case.a, &spd, &case.eig, &c, &VjpOptions::default()).unwrap();
        let fs = full_spectrum(&case.a, &case.m).unwrap();
        let ser = vjp_series(&fs, &case.eig, &c, 1e-7).unwrap();
        assert!(rel_diff(&out.a_bar, &ser.a_bar) < 1e-12);
        assert!(rel_diff(&out.m_bar, &ser.m_bar) < 1e-12);
        // the gradient of Σ λ̄_j λ_j is Σ λ̄_j x_j x_jᵀ for A and its λ-weighted negative for M
        let mut expected = DMatrix::zeros(case.eig.n(), case.eig.n());
        for (j, lb) in lambda_bar.iter().enumerate() {
            let xj = case.eig.x.column(j);
            expected += xj * xj.transpose() * *lb;
        }
        assert!(rel_diff(&out.a_bar, &expected) < 1e-12);
    }
}

#[test]
fn trace_gradient_of_degenerate_group() {
    // Σ_{j∈g} λ_j is smooth even when the group is degenerate
    for case in standard_cases(28).into_iter().filter(|c| !c.eig.degeneracy.is_trivial()) {
        let spd = SpdOperator::assume(&case.m);
        let g = case.eig.degeneracy.groups().iter().find(|g| g.len() > 1).unwrap().clone();
        let lambda_bar: Vec<f64> = (0..case.eig.k()).map(|j| if g.contains(&j) { 1.0 } else { 0.0 }).collect();
        let c = CotangentInput::eigenvalues_only(lambda_bar, case.eig.n());
        let out = vjp(&case.a, &spd, &case.eig, &c, &VjpOptions::default()).unwrap();
        let mut r = rng(5);
        let (ap, mp) = valid_tangent(&case.eig, &case.m, true, &mut r);
        let t = TangentInput { a_prime: &ap, m_prime: &mp };
        let fd = eigengrad::oracle::finite_difference_jvp(&case.a, &case.m, case.eig.k(), case.eig.which, &t, 1e-5).unwrap();
        let trace_fd: f64 = g.iter().map(|&j| fd.lambda_prime[j]).sum();
        let trace_adj = out.a_bar.dot(ap.entries()) + out.m_bar.dot(mp.entries());
        assert!((trace_fd - trace_adj).abs() < 1e-7 * trace_adj.abs().max(1.0), "{}", case.name);
    }
}

fn scaled(op: &DenseSymmetric, s: f64) -> DMatrix<f64> {
    op.entries() * s
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn jvp_is_linear_in_the_tangent(seed in 0u64..1000, alpha in -3.0f64..3.0, beta in -3.0f64..3.0) {
        let cases = standard_cases(seed % 7);
        let case = &cases[(seed as usize) % cases.len()];
        let spd = SpdOperator::assume(&case.m);
        let mut r = rng(seed);
        let (a1, m1) = valid_tangent(&case.eig, &case.m, true, &mut r);
        let (a2, m2) = valid_tangent(&case.eig, &case.m, true, &mut r);
        let ac = DenseSymmetric::new(scaled(&a1, alpha) + scaled(&a2, beta)).unwrap();
        let mc = DenseSymmetric::new(scaled(&m1, alpha) + scaled(&m2, beta)).unwrap();
        let run = |a: &DenseSymmetric, m: &DenseSymmetric| {
            jvp(&case.a, &spd, &case.eig, &TangentInput { a_prime: a, m_prime: m }, &JvpOptions::default()).unwrap()
        };
        let (o1, o2, oc) = (run(&a1, &m1), run(&a2, &m2), run(&ac, &mc));
        let combo = &o1.x_prime * alpha + &o2.x_prime * beta;
        prop_assert!((&oc.x_prime - &combo).amax() <= 1e-9 * combo.amax().max(1.0));
    }
}
