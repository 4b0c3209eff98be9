//! Argument-level types shared by the subcommands.

use std::path::PathBuf;

use clap::ValueEnum;
use eigengrad::pencil::MassKind;
use eigengrad::{SolverKind, Which};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}: {source}", path.display())]
    Input { path: PathBuf, source: eigengrad::Error },
    #[error(transparent)]
    Compute(#[from] eigengrad::Error),
}

impl CliError {
    /// 2 for configuration and I/O problems, 1 for numerical failures.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Compute(_) => 1,
            _ => 2,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum WhichArg {
    Smallest,
    Largest,
}

impl From<WhichArg> for Which {
    fn from(w: WhichArg) -> Self {
        match w {
            WhichArg::Smallest => Which::Smallest,
            WhichArg::Largest => Which::Largest,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SolverArg {
    Dense,
    Iterative,
}

impl From<SolverArg> for SolverKind {
    fn from(s: SolverArg) -> Self {
        match s {
            SolverArg::Dense => SolverKind::Dense,
            SolverArg::Iterative => SolverKind::Iterative,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MassArg {
    Identity,
    Random,
}

impl From<MassArg> for MassKind {
    fn from(m: MassArg) -> Self {
        match m {
            MassArg::Identity => MassKind::Identity,
            MassArg::Random => MassKind::RandomSpd,
        }
    }
}

/// Parses `"2x2,5x1"` into `[(2.0, 2), (5.0, 1)]`.
pub fn parse_degeneracy(spec: &str) -> CliResult<Vec<(f64, usize)>> {
    let bad = |item: &str| CliError::Config(format!("degeneracy entry {item:?} is not <value>x<multiplicity>"));
    spec.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|item| {
            let (value, mult) = item.rsplit_once('x').ok_or_else(|| bad(item))?;
            let value: f64 = value.trim().parse().map_err(|_| bad(item))?;
            let mult: usize = mult.trim().parse().map_err(|_| bad(item))?;
            if mult == 0 || !value.is_finite() {
                return Err(bad(item));
            }
            Ok((value, mult))
        })
        .collect()
}

/// Parses a comma-separated list of reals.
pub fn parse_list(text: &str) -> CliResult<Vec<f64>> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|t| {
            t.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| CliError::Config(format!("{t:?} is not a finite number")))
        })
        .collect()
}

pub fn check_dims(n: usize, k: usize) -> CliResult<()> {
    if n < 2 {
        return Err(CliError::Config(format!("n must be at least 2, got {n}")));
    }
    if k == 0 || k >= n {
        return Err(CliError::Config(format!("k must satisfy 1 <= k < n, got k={k}, n={n}")));
    }
    Ok(())
}

pub fn check_spec(n: usize, spec: &[(f64, usize)]) -> CliResult<()> {
    let total: usize = spec.iter().map(|s| s.1).sum();
    if total > n {
        return Err(CliError::Config(format!("multiplicities sum to {total}, more than n = {n}")));
    }
    Ok(())
}
