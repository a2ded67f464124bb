use thiserror::Error;

/// Coarse classification used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Validation,
    Solver,
    Io,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("negative shifted detuning: {0}")]
    NegativeDetuning(String),

    #[error("instability: ω₋² ≤ 0 (critical point of ω₋²=0 at G1 = {critical:.6}, got G1 = {g1:.6})")]
    Instability { g1: f64, critical: f64 },

    #[error("instability: quadratic form is not positive definite ({0})")]
    NotPositive(String),

    #[error("G1 = {g1:.6} is within 2% of the critical point of ω₋²=0 (G1_c = {critical:.6})")]
    CriticalGuard { g1: f64, critical: f64 },

    #[error("diagonalization residual {residual:.3e} exceeds {tol:.1e}: the mixing angle does not diagonalize the quadratic sector")]
    Residual { residual: f64, tol: f64 },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("unknown mode `{0}` (expected a2, B+ or B-)")]
    UnknownMode(String),

    #[error("solver did not converge: {0}")]
    NonConvergence(String),

    #[error("degenerate stationary subspace: {0}")]
    Degenerate(String),

    #[error("step size underflow at t = {0}")]
    StepUnderflow(f64),

    #[error("grid point {index} (x = {x}): {source}")]
    AtPoint {
        index: usize,
        x: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("config: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::NonConvergence(_) | Error::Degenerate(_) | Error::StepUnderflow(_) => {
                ErrorKind::Solver
            }
            Error::Io { .. } => ErrorKind::Io,
            Error::AtPoint { source, .. } => source.kind(),
            _ => ErrorKind::Validation,
        }
    }

    pub(crate) fn at_point(index: usize, x: f64, source: Error) -> Self {
        Error::AtPoint {
            index,
            x,
            source: Box::new(source),
        }
    }

    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
