use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parameter `{0}` must be strictly positive")]
    NonPositiveParam(String),
    #[error("parameter `{0}` must be non-negative")]
    NegativeParam(String),
    #[error("parameter `{0}` must be finite")]
    NonFiniteParam(String),
    #[error("production rate gamma > 0 requires a positive decay rate mu")]
    GammaWithoutDecay,
    #[error("table abscissae must be strictly increasing")]
    UnsortedTable,
    #[error("table must contain at least one sample")]
    EmptyTable,
    #[error("invalid setting: {0}")]
    InvalidSetting(String),

    #[error("no sign change for eigenvalue index {0} inside its bracket")]
    RootNotBracketed(usize),
    #[error("quadrature did not converge for mode {mode} ({which} integral)")]
    QuadratureNotConverged { mode: usize, which: &'static str },
    #[error("time {0} precedes the first sample of the exit trace")]
    TraceOutOfRange(f64),
    #[error("the Robin solution needs a resolved exit trace")]
    MissingExitTrace,
    #[error("heat kernel needs t > 0, got {0}")]
    NonPositiveTime(f64),
    #[error("half-line solution at x = 0 is the Dirichlet datum; evaluate G directly")]
    EvaluationAtBoundary,
    #[error("forcing does not decay backward in time; the large-t integral diverges")]
    UnboundedForcing,
    #[error("cell Peclet number {0:.3} exceeds 2; refine the grid")]
    CellPecletTooLarge(f64),
    #[error("tridiagonal solve hit a zero pivot")]
    LinearSolveFailure,
    #[error("steady boundary-value system is singular")]
    SingularSystem,

    #[error("unknown subcommand `{0}`")]
    UnknownSubcommand(String),
    #[error("config parse error at line {line}: {message}")]
    ConfigParse { line: usize, message: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Numerical failures map to CLI exit code 2, everything else to 1.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::RootNotBracketed(_)
                | Error::QuadratureNotConverged { .. }
                | Error::UnboundedForcing
                | Error::LinearSolveFailure
                | Error::SingularSystem
                | Error::CellPecletTooLarge(_)
        )
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
