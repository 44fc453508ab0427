use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("{0} is not prime")]
    NotPrime(u64),
    #[error("precision must be at least 1, got {0}")]
    BadPrecision(u32),
    #[error("p^M too large for machine residues (p={p}, M={m})")]
    PrecisionOverflow { p: u64, m: u32 },
    #[error("operands disagree: {0}")]
    Mismatch(String),
    #[error("insufficient precision: {0}")]
    InsufficientPrecision(String),
    #[error("model validation failed: {0}")]
    Model(String),
    #[error("element not representable: {0}")]
    NotRepresentable(String),
    #[error("automorphism invalid: {0}")]
    Automorphism(String),
    #[error("subgroup invalid: {0}")]
    Subgroup(String),
    #[error("root does not exist at precision: {0}")]
    NoRoot(String),
    #[error("unsupported shape: {0}")]
    Shape(String),
    #[error("budget exceeded: {0}")]
    Budget(String),
    #[error("division by a series that vanishes mod F_W")]
    DivisionByZero,
    #[error("parse error: {0}")]
    Parse(String),
    #[error("config error at {path}: {msg}")]
    Config { path: String, msg: String },
}

pub type Result<T> = std::result::Result<T, Error>;
