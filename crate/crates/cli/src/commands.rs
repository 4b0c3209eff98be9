//! `generate`, `jvp` and `vjp`, plus file loading shared with `verify`.

use std::fs;
use std::path::Path;

use eigengrad::matfile::{parse_mat, parse_symmat_entries, write_symmat};
use eigengrad::pencil::{pencil_with_spectrum, spectrum_from_multiplicities, MassKind};
use eigengrad::{
    eig_dense, eig_iterative, jvp, vjp, vjp_symmetrized, CotangentInput, DenseSymmetric, EigenResult, JvpOptions,
    SolveOptions, SolverKind, SpdOperator, TangentInput, VjpOptions, Which,
};
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::{check_dims, check_spec, CliError, CliResult};

pub fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_owned(), source })
}

pub fn write_text(path: &Path, text: &str) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|source| CliError::Io { path: dir.to_owned(), source })?;
    }
    fs::write(path, text).map_err(|source| CliError::Io { path: path.to_owned(), source })
}

/// Reads a `symmat` file, returning the raw entries and the symmetrized matrix.
pub fn load_symmat(path: &Path) -> CliResult<(DMatrix<f64>, DenseSymmetric)> {
    let input = |source| CliError::Input { path: path.to_owned(), source };
    let raw = parse_symmat_entries(&read_text(path)?).map_err(input)?;
    let sym = DenseSymmetric::new(raw.clone()).map_err(input)?;
    Ok((raw, sym))
}

pub fn load_mat(path: &Path) -> CliResult<DMatrix<f64>> {
    parse_mat(&read_text(path)?).map_err(|source| CliError::Input { path: path.to_owned(), source })
}

/// `A`, and `M` (identity when no path is given).
pub fn load_pencil(a: &Path, m: Option<&Path>) -> CliResult<(DenseSymmetric, DenseSymmetric)> {
    let (_, a_sym) = load_symmat(a)?;
    let n = a_sym.entries().nrows();
    let m_sym = match m {
        Some(p) => load_symmat(p)?.1,
        None => DenseSymmetric::identity(n),
    };
    if m_sym.entries().nrows() != n {
        return Err(CliError::Config(format!("A is {n}x{n} but M is {0}x{0}", m_sym.entries().nrows())));
    }
    Ok((a_sym, m_sym))
}

fn square_or_zero(path: Option<&Path>, n: usize) -> CliResult<DenseSymmetric> {
    let Some(p) = path else { return Ok(DenseSymmetric::zeros(n)) };
    let (_, m) = load_symmat(p)?;
    if m.entries().nrows() != n {
        return Err(CliError::Config(format!("{} is not {n}x{n}", p.display())));
    }
    Ok(m)
}

pub fn load_tangent(a_prime: Option<&Path>, m_prime: Option<&Path>, n: usize) -> CliResult<(DenseSymmetric, DenseSymmetric)> {
    Ok((square_or_zero(a_prime, n)?, square_or_zero(m_prime, n)?))
}

pub fn load_cotangent(lambda_bar: Option<&[f64]>, x_bar: Option<&Path>, n: usize, k: usize) -> CliResult<CotangentInput> {
    let lambda_bar = lambda_bar.map_or_else(|| vec![0.0; k], <[f64]>::to_vec);
    if lambda_bar.len() != k {
        return Err(CliError::Config(format!("--lambda-bar has {} entries, expected k = {k}", lambda_bar.len())));
    }
    let x_bar = match x_bar {
        Some(p) => load_mat(p)?,
        None => DMatrix::zeros(n, k),
    };
    if x_bar.shape() != (n, k) {
        return Err(CliError::Config(format!("X-bar is {:?}, expected ({n}, {k})", x_bar.shape())));
    }
    Ok(CotangentInput { lambda_bar, x_bar })
}

/// The seeded pencil that `generate` writes.
pub fn generated_pencil(n: usize, spec: &[(f64, usize)], mass: MassKind, seed: u64) -> CliResult<(DenseSymmetric, DenseSymmetric)> {
    if n < 2 {
        return Err(CliError::Config(format!("n must be at least 2, got {n}")));
    }
    check_spec(n, spec)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spectrum = spectrum_from_multiplicities(n, spec, &mut rng).map_err(|e| CliError::Config(e.to_string()))?;
    Ok(pencil_with_spectrum(&spectrum, mass, &mut rng)?)
}

pub fn generate(n: usize, spec: &[(f64, usize)], mass: MassKind, seed: u64, out: &Path) -> CliResult<()> {
    let (a, m) = generated_pencil(n, spec, mass, seed)?;
    write_text(&out.join("A.mat"), &write_symmat(&a))?;
    write_text(&out.join("M.mat"), &write_symmat(&m))?;
    Ok(())
}

pub struct Solve {
    pub k: usize,
    pub which: Which,
    pub solver: SolverKind,
    pub tol_solv: f64,
    pub tol_cond: f64,
    pub force: bool,
    pub seed: u64,
}

impl Solve {
    fn eig(&self, a: &DenseSymmetric, m: &DenseSymmetric) -> CliResult<EigenResult> {
        check_dims(a.entries().nrows(), self.k)?;
        Ok(match self.solver {
            SolverKind::Dense => eig_dense(a, m, self.k, self.which)?,
            SolverKind::Iterative => {
                let opts = eigengrad::eigsolve::IterativeOptions { seed: self.seed, ..Default::default() };
                eig_iterative(a, &SpdOperator::assume(m), self.k, self.which, &opts)?
            }
        })
    }

    fn solve_options(&self) -> SolveOptions {
        SolveOptions { solver: self.solver, tol_solv: self.tol_solv, maxiter: None }
    }
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

#[derive(Serialize)]
struct JvpReport {
    lambda: Vec<f64>,
    groups: Vec<Vec<usize>>,
    x: Vec<Vec<f64>>,
    lambda_prime: Vec<f64>,
    x_prime: Vec<Vec<f64>>,
    validity_defect: f64,
}

#[derive(Serialize)]
struct VjpReport {
    lambda: Vec<f64>,
    groups: Vec<Vec<usize>>,
    a_bar: Vec<Vec<f64>>,
    m_bar: Vec<Vec<f64>>,
    validity_defect: f64,
}

fn emit<T: Serialize>(value: &T, out: Option<&Path>, file: &str) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable");
    text.push('\n');
    match out {
        Some(dir) => write_text(&dir.join(file), &text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

pub fn run_jvp(
    pencil: (DenseSymmetric, DenseSymmetric),
    tangent: (DenseSymmetric, DenseSymmetric),
    solve: &Solve,
    out: Option<&Path>,
) -> CliResult<()> {
    let (a, m) = pencil;
    let eig = solve.eig(&a, &m)?;
    let opts = JvpOptions { solve: solve.solve_options(), tol_cond: solve.tol_cond, force: solve.force };
    let t = TangentInput { a_prime: &tangent.0, m_prime: &tangent.1 };
    let res = jvp(&a, &SpdOperator::assume(&m), &eig, &t, &opts)?;
    let report = JvpReport {
        lambda: eig.lambdas.clone(),
        groups: eig.degeneracy.groups().to_vec(),
        x: rows(&eig.x),
        lambda_prime: res.lambda_prime,
        x_prime: rows(&res.x_prime),
        validity_defect: res.validity_defect,
    };
    emit(&report, out, "jvp.json")
}

pub fn run_vjp(
    pencil: (DenseSymmetric, DenseSymmetric),
    cotangent: impl FnOnce(usize, usize) -> CliResult<CotangentInput>,
    symmetrize: bool,
    solve: &Solve,
    out: Option<&Path>,
) -> CliResult<()> {
    let (a, m) = pencil;
    let eig = solve.eig(&a, &m)?;
    let c = cotangent(eig.n(), eig.k())?;
    let opts = VjpOptions { solve: solve.solve_options(), tol_cond: solve.tol_cond, force: solve.force };
    let spd = SpdOperator::assume(&m);
    let res = if symmetrize { vjp_symmetrized(&a, &spd, &eig, &c, &opts)? } else { vjp(&a, &spd, &eig, &c, &opts)? };
    let report = VjpReport {
        lambda: eig.lambdas.clone(),
        groups: eig.degeneracy.groups().to_vec(),
        a_bar: rows(&res.a_bar),
        m_bar: rows(&res.m_bar),
        validity_defect: res.validity_defect,
    };
    emit(&report, out, "vjp.json")
}
