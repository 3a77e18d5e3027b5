use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("quadrature did not converge: estimate {estimate:e}, achieved error {achieved:e} (target {target:e})")]
    Quadrature { estimate: f64, achieved: f64, target: f64 },

    #[error("second moment diverges for this tail profile")]
    DivergentSecondMoment,

    #[error("validity range violated: {0}")]
    Validity(String),

    #[error("insufficient data: {0}")]
    Insufficient(String),

    #[error("no lower bound available in the {0} regime for this profile")]
    NoLowerBound(&'static str),

    #[error("malformed input: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;
