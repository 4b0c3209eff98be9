//! `eigengrad`: generate test pencils, differentiate eigendecompositions
//! and verify the derivatives from the command line.

mod commands;
mod config;
mod report;
mod verify;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use eigengrad::{SolverKind, Which};
use rayon::prelude::*;

use commands::{load_cotangent, load_pencil, load_symmat, load_tangent, Solve};
use config::{check_dims, check_spec, parse_degeneracy, parse_list, CliError, CliResult, MassArg, SolverArg, WhichArg};
use report::{Environment, Report};
use verify::{Instance, Settings};

#[derive(Parser)]
#[command(name = "eigengrad", version, about = "Derivatives of partial generalized symmetric eigendecompositions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a seeded test pencil as A.mat and M.mat.
    Generate(GenerateArgs),
    /// Forward-mode derivative of the k eigenpairs along (A', M').
    Jvp(JvpArgs),
    /// Reverse-mode derivative of the k eigenpairs for a cotangent.
    Vjp(VjpArgs),
    /// Run the verification checks and write a JSON report.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    n: usize,
    /// Prescribed eigenvalues with multiplicities, e.g. "2x2,5x1".
    #[arg(long, default_value = "")]
    degeneracy: String,
    #[arg(long, value_enum, default_value_t = MassArg::Identity)]
    mass: MassArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct PencilArgs {
    /// `symmat` file holding A.
    #[arg(long = "a")]
    a: PathBuf,
    /// `symmat` file holding M; identity when omitted.
    #[arg(long = "m")]
    m: Option<PathBuf>,
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long)]
    k: usize,
    #[arg(long, value_enum, default_value_t = WhichArg::Smallest)]
    which: WhichArg,
    #[arg(long, value_enum, default_value_t = SolverArg::Dense)]
    solver: SolverArg,
    #[arg(long, default_value_t = eigengrad::sylvester::DEFAULT_TOL)]
    tol_solv: f64,
    #[arg(long, default_value_t = eigengrad::jvp::DEFAULT_TOL_COND)]
    tol_cond: f64,
    /// Proceed even when the validity condition fails.
    #[arg(long)]
    force: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory; JSON goes to stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl SolveArgs {
    fn solve(&self) -> Solve {
        Solve {
            k: self.k,
            which: self.which.into(),
            solver: self.solver.into(),
            tol_solv: self.tol_solv,
            tol_cond: self.tol_cond,
            force: self.force,
            seed: self.seed,
        }
    }
}

#[derive(Args)]
struct JvpArgs {
    #[command(flatten)]
    pencil: PencilArgs,
    #[arg(long = "a-prime")]
    a_prime: Option<PathBuf>,
    #[arg(long = "m-prime")]
    m_prime: Option<PathBuf>,
    #[command(flatten)]
    solve: SolveArgs,
}

#[derive(Args)]
struct VjpArgs {
    #[command(flatten)]
    pencil: PencilArgs,
    /// Comma-separated eigenvalue cotangent; zeros when omitted.
    #[arg(long = "lambda-bar")]
    lambda_bar: Option<String>,
    /// `mat n k` file holding the eigenvector cotangent; zeros when omitted.
    #[arg(long = "x-bar")]
    x_bar: Option<PathBuf>,
    /// Return the symmetric parts of the gradients.
    #[arg(long)]
    symmetrize: bool,
    #[command(flatten)]
    solve: SolveArgs,
}

#[derive(Args)]
struct VerifyArgs {
    /// `symmat` file holding A. Without it, `--n` generates an instance,
    /// and with neither the built-in suite runs.
    #[arg(long = "a")]
    a: Option<PathBuf>,
    #[arg(long = "m")]
    m: Option<PathBuf>,
    /// Fixed tangent to verify instead of random valid draws.
    #[arg(long = "a-prime")]
    a_prime: Option<PathBuf>,
    #[arg(long = "m-prime")]
    m_prime: Option<PathBuf>,
    /// Fixed cotangent to verify instead of random valid draws.
    #[arg(long = "lambda-bar")]
    lambda_bar: Option<String>,
    #[arg(long = "x-bar")]
    x_bar: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, value_enum, default_value_t = WhichArg::Smallest)]
    which: WhichArg,
    #[arg(long, default_value = "")]
    degeneracy: String,
    #[arg(long, value_enum, default_value_t = MassArg::Random)]
    mass: MassArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = SolverArg::Dense)]
    solver: SolverArg,
    #[arg(long, default_value_t = 1e-9)]
    tol_eig: f64,
    #[arg(long, default_value_t = eigengrad::sylvester::DEFAULT_TOL)]
    tol_solv: f64,
    #[arg(long, default_value_t = eigengrad::jvp::DEFAULT_TOL_COND)]
    tol_cond: f64,
    #[arg(long, default_value_t = eigengrad::oracle::DEFAULT_STEP)]
    fd_step: f64,
    /// Worker threads for independent instances; the report is identical
    /// for any value.
    #[arg(long, default_value_t = 1)]
    threads: usize,
    /// Directory for report.json; the report goes to stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn positive(name: &str, v: f64) -> CliResult<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(CliError::Config(format!("--{name} must be positive, got {v}")))
    }
}

fn instances(args: &VerifyArgs) -> CliResult<Vec<Instance>> {
    let solver: SolverKind = args.solver.into();
    let which: Which = args.which.into();
    let k_for = |n: usize| -> CliResult<usize> {
        let k = args.k.ok_or_else(|| CliError::Config("--k is required for a single instance".into()))?;
        check_dims(n, k)?;
        Ok(k)
    };
    let mut inst = if let Some(a_path) = &args.a {
        let (raw_a, a) = load_symmat(a_path)?;
        let n = a.entries().nrows();
        let (raw_m, m) = match &args.m {
            Some(p) => load_symmat(p)?,
            None => (nalgebra::DMatrix::identity(n, n), eigengrad::DenseSymmetric::identity(n)),
        };
        if m.entries().nrows() != n {
            return Err(CliError::Config("A and M have different sizes".into()));
        }
        let mut inst = Instance::new(a_path.display().to_string(), a, m, k_for(n)?, solver);
        inst.raw = vec![("A", raw_a), ("M", raw_m)];
        inst
    } else if let Some(n) = args.n {
        let spec = parse_degeneracy(&args.degeneracy)?;
        check_spec(n, &spec)?;
        let k = k_for(n)?;
        let (a, m) = commands::generated_pencil(n, &spec, args.mass.into(), args.seed)?;
        Instance::new(format!("generated n={n} seed={}", args.seed), a, m, k, solver)
    } else {
        if args.a_prime.is_some() || args.m_prime.is_some() || args.x_bar.is_some() || args.lambda_bar.is_some() {
            return Err(CliError::Config("fixed directions need an instance (--a or --n)".into()));
        }
        return Ok(verify::default_suite(args.seed, solver));
    };
    inst.which = which;
    let n = inst.a.entries().nrows();
    if args.a_prime.is_some() || args.m_prime.is_some() {
        let mut read = |label: &'static str, path: &Option<PathBuf>| -> CliResult<eigengrad::DenseSymmetric> {
            let Some(p) = path else { return Ok(eigengrad::DenseSymmetric::zeros(n)) };
            let (raw, sym) = load_symmat(p)?;
            if raw.nrows() != n {
                return Err(CliError::Config(format!("{} is not {n}x{n}", p.display())));
            }
            inst.raw.push((label, raw));
            Ok(sym)
        };
        let ap = read("A'", &args.a_prime)?;
        let mp = read("M'", &args.m_prime)?;
        inst.tangent = Some((ap, mp));
    }
    if args.lambda_bar.is_some() || args.x_bar.is_some() {
        let lambda_bar = args.lambda_bar.as_deref().map(parse_list).transpose()?;
        inst.cotangent = Some(load_cotangent(lambda_bar.as_deref(), args.x_bar.as_deref(), n, inst.k)?);
    }
    Ok(vec![inst])
}

fn run_verify(args: &VerifyArgs) -> CliResult<bool> {
    for (name, v) in [("tol-eig", args.tol_eig), ("tol-solv", args.tol_solv), ("tol-cond", args.tol_cond), ("fd-step", args.fd_step)] {
        positive(name, v)?;
    }
    if args.threads == 0 {
        return Err(CliError::Config("--threads must be at least 1".into()));
    }
    let start = Instant::now();
    let suite = instances(args)?;
    let settings = Settings {
        seed: args.seed,
        tol_eig: args.tol_eig,
        tol_solv: args.tol_solv,
        tol_cond: args.tol_cond,
        fd_step: args.fd_step,
    };
    let per_instance: Vec<Vec<report::Check>> = if args.threads == 1 {
        suite.iter().map(|i| verify::run_instance(i, &settings)).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(args.threads)
            .build()
            .map_err(|e| CliError::Config(e.to_string()))?;
        pool.install(|| suite.par_iter().map(|i| verify::run_instance(i, &settings)).collect())
    };
    let env = Environment { seed: args.seed, instances: suite.iter().map(Instance::info).collect() };
    let report = Report::new(env, per_instance.into_iter().flatten().collect());
    eprint!("{}", report.summary());
    eprintln!(
        "{} in {:.2} s",
        if report.all_passed { "all checks passed" } else { "some checks FAILED" },
        start.elapsed().as_secs_f64()
    );
    match &args.out {
        Some(dir) => commands::write_text(&dir.join("report.json"), &report.to_json())?,
        None => print!("{}", report.to_json()),
    }
    Ok(report.all_passed)
}

fn run(cli: Cli) -> CliResult<bool> {
    match cli.command {
        Command::Generate(g) => {
            let spec = parse_degeneracy(&g.degeneracy)?;
            commands::generate(g.n, &spec, g.mass.into(), g.seed, &g.out)?;
            Ok(true)
        }
        Command::Jvp(j) => {
            let pencil = load_pencil(&j.pencil.a, j.pencil.m.as_deref())?;
            let n = pencil.0.entries().nrows();
            let tangent = load_tangent(j.a_prime.as_deref(), j.m_prime.as_deref(), n)?;
            commands::run_jvp(pencil, tangent, &j.solve.solve(), j.solve.out.as_deref())?;
            Ok(true)
        }
        Command::Vjp(v) => {
            let pencil = load_pencil(&v.pencil.a, v.pencil.m.as_deref())?;
            let lambda_bar = v.lambda_bar.as_deref().map(parse_list).transpose()?;
            let x_bar: Option<&Path> = v.x_bar.as_deref();
            let cot = |n, k| load_cotangent(lambda_bar.as_deref(), x_bar, n, k);
            commands::run_vjp(pencil, cot, v.symmetrize, &v.solve.solve(), v.solve.out.as_deref())?;
            Ok(true)
        }
        Command::Verify(v) => run_verify(&v),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
