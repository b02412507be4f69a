use thiserror::Error;

pub type Result<T> = std::result::Result<T, BossError>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BossError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("no admissible cutoffs")]
    NoAdmissibleCutoffs,

    #[error("collinear design")]
    CollinearDesign,

    #[error("degenerate outcome")]
    DegenerateOutcome,

    #[error("fewer than 2 events")]
    TooFewEvents,

    #[error("infinite coefficient (monotone likelihood)")]
    InfiniteCoefficient,

    #[error("Cox fit did not converge in {iterations} iterations (last beta = {last_beta})")]
    NonConvergence { iterations: usize, last_beta: f64 },

    #[error("zero projected norm for design vector {0}")]
    ZeroProjectedNorm(usize),

    #[error("degenerate cutoff at position {0}")]
    DegenerateCutoff(usize),

    #[error("covariance is not positive semi-definite (smallest eigenvalue {0:e})")]
    NotPositiveSemiDefinite(f64),

    #[error("Cholesky factorization failed")]
    Cholesky,

    #[error("every cutoff failed to fit: {0}")]
    AllFitsFailed(String),

    #[error("no biomarkers could be joined to the clinical data")]
    NoJoinableBiomarkers,

    #[error("n_perm >= 1 required")]
    NoPermutations,

    #[error("{0}")]
    Io(String),
}

impl BossError {
    /// Stable short code used in batch result tables.
    pub fn code(&self) -> &'static str {
        match self {
            BossError::InvalidInput(_) => "invalid_input",
            BossError::NoAdmissibleCutoffs => "no_admissible_cutoffs",
            BossError::CollinearDesign => "collinear_design",
            BossError::DegenerateOutcome => "degenerate_outcome",
            BossError::TooFewEvents => "too_few_events",
            BossError::InfiniteCoefficient => "infinite_coefficient",
            BossError::NonConvergence { .. } => "non_convergence",
            BossError::ZeroProjectedNorm(_) => "zero_projected_norm",
            BossError::DegenerateCutoff(_) => "degenerate_cutoff",
            BossError::NotPositiveSemiDefinite(_) => "not_psd",
            BossError::Cholesky => "cholesky",
            BossError::AllFitsFailed(_) => "all_fits_failed",
            BossError::NoJoinableBiomarkers => "no_joinable_biomarkers",
            BossError::NoPermutations => "no_permutations",
            BossError::Io(_) => "io",
        }
    }

    /// True for problems with what the caller supplied, as opposed to
    /// numerical failures on otherwise valid input.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            BossError::InvalidInput(_)
                | BossError::NoAdmissibleCutoffs
                | BossError::NoJoinableBiomarkers
                | BossError::NoPermutations
                | BossError::Io(_)
        )
    }
}

impl From<std::io::Error> for BossError {
    fn from(e: std::io::Error) -> Self {
        BossError::Io(e.to_string())
    }
}

impl From<csv::Error> for BossError {
    fn from(e: csv::Error) -> Self {
        BossError::Io(e.to_string())
    }
}
