use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid outcome space: {0}")]
    InvalidOutcomeSpace(String),

    #[error("invalid contract: {0}")]
    InvalidContract(String),

    #[error("invalid belief: {0}")]
    InvalidBelief(String),

    #[error("contracts live on different outcome spaces: {0}")]
    MismatchedSpaces(String),

    #[error("operation requires a finite outcome space")]
    RequiresFiniteOutcomes,

    #[error("belief does not match the outcome space: {0}")]
    BeliefMismatch(String),

    #[error("invalid scoring rule parameters: {0}")]
    InvalidRule(String),

    #[error("report {report} is outside the report space: {reason}")]
    InvalidReport { report: String, reason: String },

    #[error("outcome {0} is outside the outcome space")]
    InvalidOutcome(String),

    #[error("invalid convex potential: {0}")]
    InvalidPotential(String),

    #[error("point {0} is outside the domain of the potential")]
    OutOfDomain(String),

    #[error("conjugate supremum diverges or cannot be bracketed: {0}")]
    DivergentConjugate(String),

    #[error("cost function is not differentiable at {point}; subgradients: {subgradients}")]
    Nondifferentiable { point: String, subgradients: String },

    #[error("bundle {0} is not in the share space")]
    NotInShareSpace(String),

    #[error("invalid market: {0}")]
    InvalidMarket(String),

    #[error("empty position")]
    EmptyPosition,

    #[error("extraction failed at the {step} step: {detail}")]
    Extraction { step: String, detail: String },

    #[error("invalid search configuration: {0}")]
    InvalidSearch(String),

    #[error("ledger error: {0}")]
    Ledger(String),
}

pub type Result<T> = std::result::Result<T, Error>;
