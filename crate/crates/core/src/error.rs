use thiserror::Error;

#[derive(Debug, Error)]
pub enum TwinError {
    #[error("invalid argument: {0}")]
    Argument(String),

    #[error(
        "system is not underdamped at t_s = {t_s}: (1+dk)(1+dm) = {product} must exceed zeta0^2 = {zeta_sq}"
    )]
    Overdamped { t_s: f64, product: f64, zeta_sq: f64 },

    #[error("singular inversion: {0}")]
    SingularInversion(String),

    #[error("measurement outside the inversion domain: {0}")]
    Domain(String),

    #[error("covariance matrix is not positive definite (jitter reached {jitter:e})")]
    NotPositiveDefinite { jitter: f64 },

    #[error("mean basis is rank deficient for the training inputs")]
    SingularMeanBasis,

    #[error("hyperparameter optimization failed: {0}")]
    OptimizationFailed(String),

    #[error("model selection failed: all {0} candidate fits failed")]
    SelectionFailed(usize),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = TwinError> = std::result::Result<T, E>;
