use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Failure modes shared by every stage of the pipeline.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("matrix is not symplectic: defect {defect:.3e} exceeds tolerance {tol:.1e}")]
    NotSymplectic { defect: f64, tol: f64 },

    #[error("Siegel upper half-space invariant violated: {0}")]
    NotSiegel(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("C Z + D is numerically singular (condition estimate {condition:.3e})")]
    Conditioning { condition: f64 },

    #[error("unknown model `{0}`")]
    UnknownModel(String),

    #[error("invalid parameter for model `{model}`: {reason}")]
    InvalidParameter { model: String, reason: String },

    #[error("step size underflow at t = {t}")]
    StepUnderflow { t: f64 },

    #[error("non-finite state at t = {t} (trajectory escape)")]
    NonFiniteState { t: f64 },

    #[error("step budget of {max_steps} exhausted at t = {t}")]
    StepBudget { t: f64, max_steps: usize },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("resolution error: {0}")]
    Resolution(String),

    #[error("ambiguous period candidates {candidates:?}")]
    AmbiguousPeriod { candidates: Vec<f64> },

    #[error("period required: {0}")]
    PeriodRequired(String),

    #[error("unsupported model: {0}")]
    UnsupportedModel(String),

    #[error("aliasing guard fired at t = {t}: {detail}")]
    Aliasing { t: f64, detail: String },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("coverage error: {0}")]
    Coverage(String),
}

impl Error {
    /// Short machine-readable name of the guard or check that fired.
    pub fn guard(&self) -> &'static str {
        match self {
            Error::InvalidDimension(_) => "dimension",
            Error::InvalidArgument(_) => "argument",
            Error::NotSymplectic { .. } => "symplecticity",
            Error::NotSiegel(_) => "siegel",
            Error::Domain(_) => "domain",
            Error::Conditioning { .. } => "conditioning",
            Error::UnknownModel(_) => "model-name",
            Error::InvalidParameter { .. } => "model-parameter",
            Error::StepUnderflow { .. } => "step-underflow",
            Error::NonFiniteState { .. } => "non-finite",
            Error::StepBudget { .. } => "step-budget",
            Error::InsufficientData(_) => "insufficient-data",
            Error::Resolution(_) => "resolution",
            Error::AmbiguousPeriod { .. } => "ambiguous-period",
            Error::PeriodRequired(_) => "period-required",
            Error::UnsupportedModel(_) => "unsupported-model",
            Error::Aliasing { .. } => "aliasing",
            Error::GridMismatch(_) => "grid-mismatch",
            Error::Coverage(_) => "coverage",
        }
    }

    /// True for errors caused by bad input rather than by a numerical guard.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidDimension(_)
                | Error::InvalidArgument(_)
                | Error::NotSymplectic { .. }
                | Error::NotSiegel(_)
                | Error::UnknownModel(_)
                | Error::InvalidParameter { .. }
                | Error::PeriodRequired(_)
                | Error::UnsupportedModel(_)
        )
    }
}
