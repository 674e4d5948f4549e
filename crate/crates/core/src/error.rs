use thiserror::Error;

/// Errors raised by the solvers, the scenario loader and the sensitivity formulas.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("newton iteration did not converge after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("jacobian is singular (condition estimate {condition:.3e})")]
    SingularJacobian { condition: f64 },

    #[error("point is not on the feasibility boundary (|H| = {value:.3e})")]
    NotOnBoundary { value: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("scenario rejected: {0}")]
    ScenarioRejected(String),

    #[error("integration produced a non-finite state at t = {time}")]
    StepFailure { time: f64 },

    #[error("sustained fault trajectory never leaves the feasibility region within {horizon} s")]
    NoFeasibleExit { horizon: f64 },

    #[error("clearing at t = {time} is already unstable or infeasible")]
    BracketFailure { time: f64 },

    #[error("controlling equilibrium is not type 1 ({unstable} unstable eigenvalues)")]
    CuepNotType1 { unstable: usize },

    #[error("no boundary event found on the near-critical unstable trajectory: {0}")]
    Ambiguous(String),

    #[error("non-transversal crossing: denominator {denominator:.3e}")]
    NonTransversal { denominator: f64 },

    #[error("eigen decomposition failed: {0}")]
    EigenFailure(String),

    #[error("category changed across the finite-difference stencil ({minus} vs {plus})")]
    CategoryChanged { minus: u8, plus: u8 },

    #[error("region mapping supports only two-dimensional models (dim = {0})")]
    DimensionUnsupported(usize),

    #[error("scenario not found: {0}")]
    ScenarioNotFound(String),

    #[error("scenario parse error: {0}")]
    Parse(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// Stable variant name, printed by the CLI on the diagnostic stream.
    pub fn name(&self) -> &'static str {
        match self {
            Error::NoConvergence { .. } => "NoConvergence",
            Error::SingularJacobian { .. } => "SingularJacobian",
            Error::NotOnBoundary { .. } => "NotOnBoundary",
            Error::InvalidParameter(_) => "InvalidParameter",
            Error::DimensionMismatch(_) => "DimensionMismatch",
            Error::ScenarioRejected(_) => "ScenarioRejected",
            Error::StepFailure { .. } => "StepFailure",
            Error::NoFeasibleExit { .. } => "NoFeasibleExit",
            Error::BracketFailure { .. } => "BracketFailure",
            Error::CuepNotType1 { .. } => "CuepNotType1",
            Error::Ambiguous(_) => "Ambiguous",
            Error::NonTransversal { .. } => "NonTransversal",
            Error::EigenFailure(_) => "EigenFailure",
            Error::CategoryChanged { .. } => "CategoryChanged",
            Error::DimensionUnsupported(_) => "DimensionUnsupported",
            Error::ScenarioNotFound(_) => "ScenarioNotFound",
            Error::Parse(_) => "Parse",
            Error::Io(_) => "Io",
        }
    }

    /// True for errors caused by bad input files or arguments rather than the numerics.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::ScenarioNotFound(_) | Error::Parse(_) | Error::Io(_)
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
