use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error(
        "state is not normalizable: the momentum quadratic form is positive definite only when \
         gamma > delta (got delta = {delta}, gamma = {gamma})"
    )]
    NonNormalizable { delta: f64, gamma: f64 },

    #[error("matrix is too close to singular to invert (|det| = {det:e} < 1e-14)")]
    IllConditioned { det: f64 },

    #[error("covariance matrix is not a valid pure two-mode state: {0}")]
    InvalidCovariance(String),

    #[error("correlation {corr} is too close to +/-1 for a Cholesky factorization")]
    DegenerateCorrelation { corr: f64 },

    #[error("post-selection keeps only {kept_fraction:e} of the pairs (minimum 1e-12)")]
    EmptyPostSelection { kept_fraction: f64 },

    #[error("adaptive quadrature did not reach tolerance (estimate {value:e}, error {error:e})")]
    QuadratureFailed { value: f64, error: f64 },

    #[error("only {kept} events survived post-selection; at least {required} are required")]
    InsufficientCounts { kept: u64, required: u64 },

    #[error("lens inventory is empty")]
    EmptyInventory,

    #[error("no lens plan within {tolerance:e} rad of the target; best achievable deviation is {best_deviation:e} rad")]
    NoPlanWithinTolerance { best_deviation: f64, tolerance: f64 },

    #[error("target fidelity {target} is unreachable for r <= {r_max}; maximum achievable is {max_fidelity}")]
    TargetUnreachable { target: f64, r_max: f64, max_fidelity: f64 },

    #[error("fidelity is not monotone in r on [{lo}, {hi}]; bisection bracket rejected")]
    NonMonotone { lo: f64, hi: f64 },
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { name, reason: reason.into() }
    }
}
