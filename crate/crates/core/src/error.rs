use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid simplex weights: {0}")]
    InvalidWeights(String),

    #[error("invalid training model: {0}")]
    InvalidModel(String),

    #[error("support mismatch: {0}")]
    SupportMismatch(String),

    #[error("at least two classes are required, found {0}")]
    TooFewClasses(usize),

    #[error("operation requires {expected} classes, found {found}")]
    ClassCount { expected: usize, found: usize },

    #[error("reference class density is zero at bin `{bin}`; choose another reference class")]
    ZeroReferenceDensity { bin: String },

    #[error(
        "weights lie on the simplex boundary; run the existence checks before evaluating here"
    )]
    NotInterior,

    #[error("log argument is not positive at bin `{bin}`")]
    Domain { bin: String },

    #[error("not at stationary point: gradient norm {norm:e} exceeds tolerance {tolerance:e}")]
    NotStationary { norm: f64, tolerance: f64 },

    #[error("ratios carry no information: every density ratio equals 1 on the test support")]
    NoInformation,

    #[error("jacobian is numerically singular; consider reducing the number of modelled classes")]
    SingularJacobian,

    #[error("mixing matrix is singular; use the maximum-likelihood estimator instead")]
    SingularMixingMatrix,

    #[error("classifier has no power; prevalence unidentifiable")]
    NoDiscriminatoryPower,

    #[error("too many classes for exhaustive search: {0} (at most 4)")]
    SearchTooLarge(usize),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
