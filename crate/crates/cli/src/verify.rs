//! Ordered verification checks on one pencil, and the built-in suite.

use eigengrad::eigsolve::IterativeOptions;
use eigengrad::jvp::{check_forward_validity, TangentInput, TangentOutput};
use eigengrad::oracle::{compare_with_fd, full_spectrum, jvp_series, vjp_series, MAX_DIM};
use eigengrad::pencil::{
    pencil_with_spectrum, random_spd, random_symmetric, spectrum_from_multiplicities, valid_cotangent, valid_tangent,
    MassKind,
};
use eigengrad::vjp::check_backward_validity;
use eigengrad::{
    eig_dense, eig_iterative, jvp, vjp, CotangentInput, CotangentOutput, DenseSymmetric, EigenResult, JvpOptions,
    SolveOptions, SolverKind, SpdOperator, VjpOptions, Which,
};
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::report::{Check, InstanceInfo};

pub const SYMMETRY_TOL: f64 = 1e-12;
pub const ORTHONORMALITY_TOL: f64 = 1e-10;
pub const DENSE_AGREEMENT_TOL: f64 = 1e-7;
pub const SERIES_TOL: f64 = 1e-8;
pub const FD_EIGENVALUE_TOL: f64 = 1e-7;
pub const FD_EIGENVECTOR_TOL: f64 = 1e-6;
pub const PAIRING_TOL: f64 = 1e-8;
/// Random tangent/cotangent draws per instance.
pub const DRAWS: usize = 20;
/// Draws that also go through the (more expensive) finite-difference check.
const FD_DRAWS: usize = 3;

#[derive(Debug, Clone, Copy)]
pub struct Settings {
    pub seed: u64,
    pub tol_eig: f64,
    pub tol_solv: f64,
    pub tol_cond: f64,
    pub fd_step: f64,
}

/// A pencil to verify, with optional user-supplied directions.
pub struct Instance {
    pub name: String,
    pub a: DenseSymmetric,
    pub m: DenseSymmetric,
    /// Matrices as read, before symmetrization, for the symmetry checks.
    pub raw: Vec<(&'static str, DMatrix<f64>)>,
    pub k: usize,
    pub which: Which,
    pub solver: SolverKind,
    pub tangent: Option<(DenseSymmetric, DenseSymmetric)>,
    pub cotangent: Option<CotangentInput>,
}

impl Instance {
    pub fn new(name: impl Into<String>, a: DenseSymmetric, m: DenseSymmetric, k: usize, solver: SolverKind) -> Self {
        let raw = vec![("A", a.entries().clone()), ("M", m.entries().clone())];
        Self { name: name.into(), a, m, raw, k, which: Which::Smallest, solver, tangent: None, cotangent: None }
    }

    pub fn info(&self) -> InstanceInfo {
        InstanceInfo {
            name: self.name.clone(),
            n: self.a.entries().nrows(),
            k: self.k,
            which: match self.which {
                Which::Smallest => "smallest",
                Which::Largest => "largest",
            },
            solver: match self.solver {
                SolverKind::Dense => "dense",
                SolverKind::Iterative => "iterative",
            },
        }
    }
}

/// The shipped suite: a diagonal pencil, a generic one, two exactly
/// degenerate spectra and a larger instance on the iterative path.
pub fn default_suite(seed: u64, solver: SolverKind) -> Vec<Instance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    let diag = DenseSymmetric::from_diagonal(&[1.0, 2.0, 3.0]).expect("finite");
    out.push(Instance::new("diag(1,2,3)", diag, DenseSymmetric::identity(3), 2, solver));

    out.push(Instance::new("random 6x6", random_symmetric(6, &mut rng), random_spd(6, &mut rng), 3, solver));

    for (name, n, k, spec) in [
        ("spectrum {2,2,5}", 3, 2, vec![(2.0, 2), (5.0, 1)]),
        ("spectrum {1,1,1,4,...}", 6, 4, vec![(1.0, 3), (4.0, 1)]),
    ] {
        let s = spectrum_from_multiplicities(n, &spec, &mut rng).expect("valid spec");
        let (a, m) = pencil_with_spectrum(&s, MassKind::RandomSpd, &mut rng).expect("valid spectrum");
        out.push(Instance::new(name, a, m, k, solver));
    }

    let (a, m) = (random_symmetric(100, &mut rng), random_spd(100, &mut rng));
    out.push(Instance::new("random 100x100 iterative", a, m, 4, SolverKind::Iterative));
    out
}

fn asymmetry(b: &DMatrix<f64>) -> f64 {
    (b - b.transpose()).amax() / b.amax().max(1.0)
}

fn solve_eig(inst: &Instance, s: &Settings) -> eigengrad::Result<EigenResult> {
    match inst.solver {
        SolverKind::Dense => eig_dense(&inst.a, &inst.m, inst.k, inst.which),
        SolverKind::Iterative => {
            let opts = IterativeOptions { seed: s.seed, ..Default::default() };
            eig_iterative(&inst.a, &SpdOperator::assume(&inst.m), inst.k, inst.which, &opts)
        }
    }
}

fn max_abs_diff(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}

/// Folds per-draw results into the worst measurement, or the first error.
fn worst<E: ToString>(values: impl IntoIterator<Item = Result<f64, E>>) -> Result<f64, String> {
    let mut acc = 0.0f64;
    for v in values {
        let v = v.map_err(|e| e.to_string())?;
        acc = if v.is_nan() { f64::NAN } else { acc.max(v) };
    }
    Ok(acc)
}

/// Runs every check on one instance in the fixed order. Failures of the
/// underlying computations become failed checks; checks that cannot run
/// without an earlier result are skipped.
pub fn run_instance(inst: &Instance, s: &Settings) -> Vec<Check> {
    let label = |check: &str| format!("{}: {check}", inst.name);
    let mut checks = Vec::new();
    let n = inst.a.entries().nrows();

    for (what, m) in &inst.raw {
        checks.push(Check::measure(label(&format!("symmetry {what}")), asymmetry(m), SYMMETRY_TOL));
    }

    let eig = match solve_eig(inst, s) {
        Ok(eig) => eig,
        Err(e) => {
            checks.push(Check::failed(label("eig residual"), s.tol_eig, &e));
            for name in [
                "eig orthonormality",
                "forward validity",
                "jvp vs series",
                "jvp vs finite differences (eigenvalues)",
                "jvp vs finite differences (eigenvectors)",
                "backward validity",
                "vjp vs series",
                "adjoint pairing",
            ] {
                checks.push(Check::skipped(label(name), 0.0, "eigensolve failed"));
            }
            return checks;
        }
    };
    checks.push(Check::measure(label("eig residual"), eig.relative_residual(&inst.a, &inst.m), s.tol_eig));
    checks.push(Check::measure(label("eig orthonormality"), eig.orthonormality_defect(&inst.m), ORTHONORMALITY_TOL));
    if inst.solver == SolverKind::Iterative && n <= MAX_DIM {
        let agreement = eig_dense(&inst.a, &inst.m, inst.k, inst.which).map(|d| {
            d.lambdas
                .iter()
                .zip(&eig.lambdas)
                .map(|(x, y)| (x - y).abs() / x.abs().max(1.0))
                .fold(0.0, f64::max)
        });
        checks.push(Check::from_result(label("eig agrees with dense"), agreement, DENSE_AGREEMENT_TOL));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(s.seed ^ 0x9e37_79b9_7f4a_7c15);
    let tangents: Vec<(DenseSymmetric, DenseSymmetric)> = match &inst.tangent {
        Some(t) => vec![t.clone()],
        None => (0..DRAWS).map(|_| valid_tangent(&eig, &inst.m, true, &mut rng)).collect(),
    };
    let cotangents: Vec<CotangentInput> = match &inst.cotangent {
        Some(c) => vec![c.clone()],
        None => (0..DRAWS).map(|_| valid_cotangent(&eig, &inst.m, &mut rng)).collect(),
    };

    let spd = SpdOperator::assume(&inst.m);
    let solve = SolveOptions { solver: inst.solver, tol_solv: s.tol_solv, maxiter: None };
    let jopts = JvpOptions { solve, tol_cond: s.tol_cond, force: false };
    let vopts = VjpOptions { solve, tol_cond: s.tol_cond, force: false };

    let forward_defect = tangents
        .iter()
        .map(|(ap, mp)| {
            let t = TangentInput { a_prime: ap, m_prime: mp };
            let v = check_forward_validity(&eig, &t, s.tol_cond);
            let scale = eigengrad::jvp::forward_coupling(&eig, &t).amax().max(1.0);
            v.defect / scale
        })
        .fold(0.0, f64::max);
    checks.push(Check::measure(label("forward validity"), forward_defect, s.tol_cond));

    let forward: Vec<eigengrad::Result<TangentOutput>> = tangents
        .iter()
        .map(|(ap, mp)| jvp(&inst.a, &spd, &eig, &TangentInput { a_prime: ap, m_prime: mp }, &jopts))
        .collect();

    let spectrum = (n <= MAX_DIM).then(|| full_spectrum(&inst.a, &inst.m));
    match &spectrum {
        None => checks.push(Check::skipped(label("jvp vs series"), SERIES_TOL, format!("n > {MAX_DIM}"))),
        Some(fs) => {
            let measured = worst(tangents.iter().zip(&forward).map(|((ap, mp), out)| {
                let fs = fs.as_ref().map_err(|e| e.to_string())?;
                let out = out.as_ref().map_err(|e| e.to_string())?;
                let t = TangentInput { a_prime: ap, m_prime: mp };
                let ser = jvp_series(fs, &eig, &t, s.tol_cond).map_err(|e| e.to_string())?;
                Ok::<_, String>(
                    (&out.x_prime - &ser.x_prime).amax().max(max_abs_diff(&out.lambda_prime, &ser.lambda_prime)),
                )
            }));
            checks.push(Check::from_result(label("jvp vs series"), measured, SERIES_TOL));
        }
    }

    if n <= MAX_DIM {
        let comparisons: Vec<Result<(f64, f64), String>> = tangents
            .iter()
            .zip(&forward)
            .take(FD_DRAWS)
            .map(|((ap, mp), out)| {
                let out = out.as_ref().map_err(|e| e.to_string())?;
                let t = TangentInput { a_prime: ap, m_prime: mp };
                let c = compare_with_fd(&inst.a, &inst.m, &eig, &t, out, s.fd_step).map_err(|e| e.to_string())?;
                Ok((c.lambda_rel_err, c.vector_err))
            })
            .collect();
        let lam = worst(comparisons.iter().map(|c| c.clone().map(|c| c.0)));
        let vec = worst(comparisons.iter().map(|c| c.clone().map(|c| c.1)));
        checks.push(Check::from_result(label("jvp vs finite differences (eigenvalues)"), lam, FD_EIGENVALUE_TOL));
        checks.push(Check::from_result(label("jvp vs finite differences (eigenvectors)"), vec, FD_EIGENVECTOR_TOL));
    } else {
        for name in ["jvp vs finite differences (eigenvalues)", "jvp vs finite differences (eigenvectors)"] {
            checks.push(Check::skipped(label(name), FD_EIGENVECTOR_TOL, format!("n > {MAX_DIM}")));
        }
    }

    let backward_defect = cotangents
        .iter()
        .map(|c| {
            let g = eig.x.transpose() * &c.x_bar;
            check_backward_validity(&eig, c, s.tol_cond).defect / g.amax().max(1.0)
        })
        .fold(0.0, f64::max);
    checks.push(Check::measure(label("backward validity"), backward_defect, s.tol_cond));

    let backward: Vec<eigengrad::Result<CotangentOutput>> =
        cotangents.iter().map(|c| vjp(&inst.a, &spd, &eig, c, &vopts)).collect();

    match &spectrum {
        None => checks.push(Check::skipped(label("vjp vs series"), SERIES_TOL, format!("n > {MAX_DIM}"))),
        Some(fs) => {
            let measured = worst(cotangents.iter().zip(&backward).map(|(c, out)| {
                let fs = fs.as_ref().map_err(|e| e.to_string())?;
                let out = out.as_ref().map_err(|e| e.to_string())?;
                let ser = vjp_series(fs, &eig, c, s.tol_cond).map_err(|e| e.to_string())?;
                Ok::<_, String>((&out.a_bar - &ser.a_bar).amax().max((&out.m_bar - &ser.m_bar).amax()))
            }));
            checks.push(Check::from_result(label("vjp vs series"), measured, SERIES_TOL));
        }
    }

    let pairs = tangents.len().max(cotangents.len());
    let measured = worst((0..pairs).map(|i| {
        let (ap, mp) = &tangents[i % tangents.len()];
        let c = &cotangents[i % cotangents.len()];
        let fwd = forward[i % forward.len()].as_ref().map_err(|e| e.to_string())?;
        let back = backward[i % backward.len()].as_ref().map_err(|e| e.to_string())?;
        let lhs = c.lambda_bar.iter().zip(&fwd.lambda_prime).map(|(a, b)| a * b).sum::<f64>() + c.x_bar.dot(&fwd.x_prime);
        let rhs = back.a_bar.dot(ap.entries()) + back.m_bar.dot(mp.entries());
        let scale = lhs.abs().max(rhs.abs());
        Ok::<_, String>(if scale == 0.0 { 0.0 } else { (lhs - rhs).abs() / scale })
    }));
    checks.push(Check::from_result(label("adjoint pairing"), measured, PAIRING_TOL));
    checks
}
