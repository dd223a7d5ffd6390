use thiserror::Error;

/// Errors raised across the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("input error: {0}")]
    Input(String),

    #[error("range error: {0}")]
    Range(String),

    #[error("constraint set is degenerate: columns {columns:?} are linearly dependent")]
    ConstraintDegeneracy { columns: Vec<usize> },

    #[error("interferer {index} has zero response at both reference microphones")]
    DegenerateInterferer { index: usize },

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
