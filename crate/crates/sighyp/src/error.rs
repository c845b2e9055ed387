use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("index out of range: {0}")]
    Range(String),
    #[error("tensor too large: {coeffs} coefficients exceeds the limit of {limit}")]
    TooLarge { coeffs: u128, limit: u128 },
    #[error("overflow guard: λ·length = {0:.3} > 700")]
    Overflow(f64),
    #[error("remainder bound invalid: |z| = {abs_z} ≥ 2(n+1) = {limit}")]
    BoundInvalid { abs_z: f64, limit: f64 },
    #[error("unsupported dimension d = {0}")]
    Dimension(usize),
    #[error("pole: denominator {which} = {value:e}")]
    Pole { which: &'static str, value: f64 },
    #[error("solver did not converge after {iters} iterations (residual {residual:e})")]
    NoConvergence { iters: usize, residual: f64 },
    #[error("path exceeded {0} steps without exiting")]
    NoExit(u64),
    #[error("config: {0}")]
    Config(String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("sign condition failed: {0}")]
    Sign(String),
}

pub type Result<T> = std::result::Result<T, Error>;
