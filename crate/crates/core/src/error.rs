use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("period mismatch: {0} vs {1}")]
    PeriodMismatch(usize, usize),

    #[error("moduli {0} and {1} are not coprime")]
    NotCoprime(u64, u64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("exhaustive search needs {needed} states, above the cap of {cap}; use random mode")]
    StateSpaceTooLarge { needed: u128, cap: u128 },

    #[error("no feasible parameters with p <= {max_p} and n <= {max_n}")]
    Infeasible { max_p: u64, max_n: u64 },

    #[error("scenario invalid: {0}")]
    InvalidScenario(String),

    #[error("malformed input: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
