use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The base shares a factor with the modulus, so no order exists.
    #[error("gcd({base}, {modulus}) = {factor}; {factor} is already a factor of {modulus}")]
    SharedFactor { modulus: u64, base: u64, factor: u64 },

    #[error("spectrum multiplicities sum to {found}, expected 2^{n_qubits} = {expected}")]
    Incomplete { n_qubits: u32, expected: u64, found: u64 },

    #[error("grid too coarse: {points_per_sigma:.2} points per sigma (need at least {required})")]
    GridTooCoarse { points_per_sigma: f64, required: f64 },

    #[error("grid [{lo}, {hi}] does not cover the mixture support [{need_lo}, {need_hi}]")]
    GridTooNarrow { lo: f64, hi: f64, need_lo: f64, need_hi: f64 },

    #[error("every posterior weight underflowed to zero at p_E = {0}")]
    PosteriorUnderflow(f64),

    #[error("{modulus} rejected by classical checks: {reason}")]
    Rejected { modulus: u64, reason: String },

    #[error("budget exhausted after {runs} runs over {bases} bases")]
    BudgetExhausted { runs: u64, bases: u64 },

    #[error("io: {0}")]
    Io(String),

    #[error("json: {0}")]
    Json(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Json(e.to_string())
    }
}
