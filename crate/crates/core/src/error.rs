use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A configuration, argument or parameter is malformed or out of range.
    #[error("invalid input: {0}")]
    Input(String),

    /// Exact enumeration would visit more configurations than allowed.
    #[error("configuration space has {count} states, above the enumeration cap of {cap}; use sampling instead")]
    Capacity { count: u128, cap: u64 },

    /// A probability ratio was requested against a zero-weight configuration.
    #[error("ratio undefined: denominator configuration has zero weight")]
    DivisionDomain,

    /// A move set proposed a value outside a site's domain.
    #[error("invalid move: {0}")]
    Move(String),

    /// An experiment specification is geometrically or physically inconsistent.
    #[error("invalid experiment spec: {0}")]
    Spec(String),

    /// Every configuration has zero weight, so nothing can be normalized.
    #[error("degenerate model: {0}")]
    Degenerate(String),

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    /// Short machine-readable tag, stable across versions.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Input(_) => "input",
            Error::Capacity { .. } => "capacity",
            Error::DivisionDomain => "division-domain",
            Error::Move(_) => "move",
            Error::Spec(_) => "spec",
            Error::Degenerate(_) => "degenerate",
            Error::Parse(_) => "parse",
        }
    }
}
