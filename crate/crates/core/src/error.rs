use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is {rows}x{cols}, expected square")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is not Hermitian: asymmetry {defect:.3e} exceeds tolerance")]
    NotHermitian { defect: f64 },
    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("{0} did not converge")]
    ConvergenceFailure(&'static str),
    #[error("singular matrix: {0}")]
    Singular(String),
    #[error("window [{lo}, {hi}] too small: {what}")]
    WindowTooSmall {
        lo: isize,
        hi: isize,
        what: &'static str,
    },
    #[error("window mismatch: {0}")]
    WindowMismatch(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("rank(R, S) = {rank}, expected {expected}")]
    RankDeficient { rank: usize, expected: usize },
    #[error("function violates the boundary conditions (residual {residual:.3e})")]
    NotInBoundarySet { residual: f64 },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("{what}: residual {residual:.3e} exceeds tolerance {tol:.1e}")]
    ToleranceFailure {
        what: &'static str,
        residual: f64,
        tol: f64,
    },
    #[error("operator does not map the admissible space into itself (residual {residual:.3e})")]
    ClosureFailure { residual: f64 },
    #[error("boundary conditions are not self-adjoint (defect {defect:.3e})")]
    NotSelfAdjoint { defect: f64 },
    #[error("function is not in the admissible space (residual {residual:.3e})")]
    NotAdmissible { residual: f64 },
    #[error("boundary conditions are not proper: r = {r} < 2d = {two_d}")]
    NotProper { r: usize, two_d: usize },
    #[error("leading coefficient vanishes at index {index}")]
    ZeroLeadingCoefficient { index: isize },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("schema version mismatch: found {found:?}, expected {expected:?}")]
    SchemaVersionMismatch { found: String, expected: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
