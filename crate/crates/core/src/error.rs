use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Argument outside a function's mathematical domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// Pressure evaluation requested exactly at the center of a
    /// discontinuous absorber, where the radial solution has no limit.
    #[error("singular evaluation: {0}")]
    Singular(String),

    /// Scan configuration is neither of the two admissible layouts, or the
    /// phantom violates the support constraint of its layout.
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    /// A reconstruction method was requested for a geometry it does not
    /// admit, or one of its numerical preconditions fails.
    #[error("method refused: {0}")]
    MethodRefusal(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("header error: {0}")]
    Header(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Exit code the CLI maps this error to (2 = config, 3 = numerical refusal).
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Header(_) | Error::Io(_) | Error::ShapeMismatch(_) => 2,
            Error::Domain(_)
            | Error::Singular(_)
            | Error::InvalidGeometry(_)
            | Error::MethodRefusal(_) => 3,
        }
    }
}
