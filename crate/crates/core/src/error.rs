use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("permittivity table is empty")]
    EmptyTable,

    #[error("permittivity table grid is not strictly increasing at index {0}")]
    NonMonotoneGrid(usize),

    #[error("singular point: {0}")]
    SingularPoint(String),

    #[error("singular matrix: {0}")]
    SingularMatrix(String),

    #[error("near-resonant combination (condition estimate {condition:.3e})")]
    NearResonance { condition: f64 },

    #[error("mask mismatch: {0}")]
    MaskMismatch(String),
}

pub type Result<T> = std::result::Result<T, Error>;
