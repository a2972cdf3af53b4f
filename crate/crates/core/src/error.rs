use thiserror::Error;

/// Everything that can go wrong across the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("series needs at least {min} observations, got {got}")]
    SeriesTooShort { got: usize, min: usize },

    #[error("non-finite value at index {index}")]
    NonFiniteValue { index: usize },

    #[error("constant series: zero variance")]
    ConstantSeries,

    #[error("degenerate variance: sigma_hat is zero")]
    DegenerateVariance,

    #[error("block length {l} invalid for series of length {n}: need 1 <= l <= {max}")]
    BlockLengthOutOfRange { l: usize, n: usize, max: usize },

    #[error("autocorrelation {rho} outside (-1, 1)")]
    RhoOutOfRange { rho: f64 },

    #[error("probability {p} outside (0, 1)")]
    ProbabilityOutOfRange { p: f64 },

    #[error("time point {t} outside [0, 1]")]
    TimeOutOfRange { t: f64 },

    #[error("covariance spec not positive semidefinite: sigma12^2 = {sigma12_sq} exceeds sigma11*sigma22 = {product}")]
    NotPositiveSemidefinite { sigma12_sq: f64, product: f64 },

    #[error("covariance spec entries must be finite with sigma11 >= 0 and sigma22 >= 0")]
    InvalidCovarianceSpec,

    #[error("grid needs at least 2 points, got {got}")]
    GridTooSmall { got: usize },

    #[error("degrees of freedom must be at least 1, got {got}")]
    InvalidDegreesOfFreedom { got: u32 },

    #[error("shift height must be finite, got {mu}")]
    NonFiniteShift { mu: f64 },

    #[error("change index {tau} beyond series length {n}")]
    TauOutOfRange { tau: usize, n: usize },

    #[error("series of length {n} exceeds the brute-force guard of {max}")]
    BruteForceGuard { n: usize, max: usize },

    #[error("invalid experiment config: {0}")]
    InvalidConfig(String),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Malformed { path: String, message: String },
}
