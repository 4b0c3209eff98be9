use crate::eigsolve::EigenResult;
use crate::sylvester::SylvesterSolution;

/// Errors produced by the solvers and derivative routines.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("matrix is not square: {rows}x{cols}")]
    NonSquare { rows: usize, cols: usize },

    #[error("matrix contains a non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("operator is not positive definite")]
    NotPositiveDefinite,

    #[error("dense eigensolver failed to converge")]
    ConvergenceFailure,

    /// The retrieved block ends inside a degenerate cluster, so eigenvector
    /// derivatives of the retrieved columns are not defined.
    #[error("eigenvalue {index} is degenerate with the first excluded eigenvalue")]
    SplitDegeneracy { index: usize },

    #[error("eigensolver reached {iterations} iterations with residual {residual:e}")]
    EigMaxIter {
        iterations: usize,
        residual: f64,
        best: Box<EigenResult>,
    },

    #[error("linear solve for column {column} reached the iteration limit with residual {residual:e}")]
    SolveMaxIter {
        column: usize,
        residual: f64,
        best: Box<SylvesterSolution>,
    },

    #[error("right-hand side column {column} is not orthogonal to the nullspace (defect {defect:e})")]
    NotSolvable { column: usize, defect: f64 },

    #[error("degeneracy validity condition violated (defect {defect:e})")]
    ValidityViolated { defect: f64 },

    #[error("could not align eigenvector gauge for column {column}")]
    GaugeAlignmentFailed { column: usize },

    #[error("degenerate group {group:?} separates under the finite-difference perturbation")]
    ClusterSplit { group: Vec<usize> },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
