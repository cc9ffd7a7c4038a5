use thiserror::Error;

/// Errors raised anywhere in the toolkit.
///
/// Variants split into validation failures (bad input, exit code 2) and
/// numerical failures (budget, contraction, eigensolver; exit code 1).
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfiguration(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid index: {0}")]
    InvalidIndex(String),

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("quadrature budget exhausted after {regions} regions (value {value:e}, error estimate {error_estimate:e})")]
    BudgetExhausted {
        value: f64,
        error_estimate: f64,
        regions: usize,
    },

    #[error("refinement failed to converge near a peak in chart {chart}")]
    NonIntegrableSingularity { chart: String },

    #[error("singular design matrix: {0}")]
    SingularDesign(String),

    #[error("ill-conditioned basis: Gram condition number {condition:e}")]
    IllConditionedBasis { condition: f64 },

    #[error("eigensolver failure: {0}")]
    Eigensolver(String),

    #[error("fixed point iteration is not contracting (ratio {ratio:.4} at step {step})")]
    NonContraction { step: usize, ratio: f64 },

    #[error("maximum iterations ({0}) reached without convergence")]
    MaxIterations(usize),

    #[error("line search failed after {0} halvings")]
    LineSearch(usize),

    #[error("{failed} of {total} verification checks failed")]
    VerificationFailed { failed: usize, total: usize },

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code for the CLI: 2 for validation, 1 for numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidConfiguration(_)
            | Error::Domain(_)
            | Error::InvalidIndex(_)
            | Error::Validation(_)
            | Error::Json(_)
            | Error::Io(_) => 2,
            _ => 1,
        }
    }

    /// Short machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidConfiguration(_) => "invalid_configuration",
            Error::Domain(_) => "domain",
            Error::InvalidIndex(_) => "invalid_index",
            Error::Validation(_) => "validation",
            Error::BudgetExhausted { .. } => "budget_exhausted",
            Error::NonIntegrableSingularity { .. } => "non_integrable_singularity",
            Error::SingularDesign(_) => "singular_design",
            Error::IllConditionedBasis { .. } => "ill_conditioned_basis",
            Error::Eigensolver(_) => "eigensolver",
            Error::NonContraction { .. } => "non_contraction",
            Error::MaxIterations(_) => "max_iterations",
            Error::LineSearch(_) => "line_search",
            Error::VerificationFailed { .. } => "verification_failed",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
