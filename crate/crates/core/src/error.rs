use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{0} must be Hermitian")]
    NotHermitian(&'static str),

    #[error("step size underflow at t = {t}")]
    StepSizeUnderflow { t: f64 },

    #[error("non-finite derivative at t = {t}")]
    NonFiniteDerivative { t: f64 },

    #[error("quadrature did not converge for eta({k}, {kp})")]
    QuadratureFailed { k: usize, kp: usize },

    #[error("Matsubara frequency {m} coincides with the Drude decay rate")]
    MatsubaraPole { m: usize },

    #[error("path tensor needs {required} elements, budget is {budget}")]
    BudgetExceeded { required: u128, budget: u128 },

    #[error("Monte Carlo sample {index} failed: {source}")]
    SampleFailed {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
