use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Argument outside the domain of a function (e.g. `|y| > 1` for the binary mean rate).
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid disorder family: {0}")]
    Family(String),

    /// A model specification violates one of its invariants.
    #[error("invalid model: {0}")]
    Model(String),

    #[error("spec/realization mismatch: {0}")]
    Mismatch(String),

    #[error("dimension mismatch: expected {expected} coordinates, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("enumeration refused: {configs} configurations exceed the cap of 2^{max_n}")]
    EnumerationCap { configs: f64, max_n: u32 },

    #[error("realization too large: {entries} table entries")]
    TooLarge { entries: f64 },

    #[error("unbounded sublevel set: {0}")]
    Unbounded(String),

    #[error("invalid argument: {0}")]
    Argument(String),
}
