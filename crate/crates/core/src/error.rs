use thiserror::Error;

/// Errors raised by model construction, policy evaluation and the allocation solvers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: String,
        found: String,
    },

    #[error("{name} is not symmetric (max asymmetry {asymmetry:e})")]
    NotSymmetric { name: &'static str, asymmetry: f64 },

    #[error("{name} is not positive definite (smallest eigenvalue {min_eigenvalue:e})")]
    NotPositiveDefinite {
        name: &'static str,
        min_eigenvalue: f64,
    },

    #[error("{name} is not positive semidefinite (smallest eigenvalue {min_eigenvalue:e})")]
    NotPositiveSemidefinite {
        name: &'static str,
        min_eigenvalue: f64,
    },

    #[error("channel matrix H is rank deficient (singular value ratio {ratio:e})")]
    RankDeficient { ratio: f64 },

    #[error("channel dimension K = {k} is smaller than signal dimension N = {n}")]
    ChannelTooNarrow { k: usize, n: usize },

    #[error("{what} is numerically singular (condition number {condition:e})")]
    Singular { what: &'static str, condition: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("expected {expected} compressor choices, got {found}")]
    Arity { expected: usize, found: usize },

    #[error("model does not match the scalar-measurement specialization: {0}")]
    Specialization(String),

    #[error("degenerate state: {0}")]
    Degenerate(String),

    #[error("case selection failed: {0}")]
    CaseSelection(String),

    #[error("column {column} cannot be realized by a finite compressor (|c|^2 sigma_n^2 = {value})")]
    InfeasibleRecovery { column: usize, value: f64 },

    #[error("search needs {required} sequence evaluations, budget is {limit}")]
    SearchBudget { required: u128, limit: u128 },

    #[error("Jacobi eigensolver did not converge after {sweeps} sweeps")]
    NoConvergence { sweeps: usize },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Stable snake_case identifier for reports and exit diagnostics.
    pub fn name(&self) -> &'static str {
        match self {
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::NotSymmetric { .. } => "not_symmetric",
            Error::NotPositiveDefinite { .. } => "not_positive_definite",
            Error::NotPositiveSemidefinite { .. } => "not_positive_semidefinite",
            Error::RankDeficient { .. } => "rank_deficient",
            Error::ChannelTooNarrow { .. } => "channel_too_narrow",
            Error::Singular { .. } => "singular",
            Error::Domain(_) => "domain",
            Error::Arity { .. } => "arity",
            Error::Specialization(_) => "specialization",
            Error::Degenerate(_) => "degenerate",
            Error::CaseSelection(_) => "case_selection",
            Error::InfeasibleRecovery { .. } => "infeasible_recovery",
            Error::SearchBudget { .. } => "search_budget",
            Error::NoConvergence { .. } => "no_convergence",
        }
    }
}
