use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Failure modes of the toolkit.
///
/// Numerical certificates that fail (non-admissible parameters, eigenvalues
/// inside a tolerance band) are reported as errors rather than silently
/// producing an integer.
#[derive(Clone, Debug, Error)]
pub enum Error {
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("function undefined at eigenvalue {eigenvalue:e}")]
    Domain { eigenvalue: f64 },

    #[error(
        "operator is not positive semidefinite: eigenvalue {eigenvalue:e} below -{tolerance:e}"
    )]
    Negativity { eigenvalue: f64, tolerance: f64 },

    #[error("operator is not invertible: eigenvalue {eigenvalue:e} within {threshold:e} of zero")]
    NotInvertible { eigenvalue: f64, threshold: f64 },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("quadrature did not converge: weight {coarse} vs {refined} after halving the step ({relative_change:.3e} relative)")]
    Resolution {
        coarse: f64,
        refined: f64,
        relative_change: f64,
    },

    #[error("pair (kappa={kappa}, rho={rho}) is not admissible: {violated}")]
    NotAdmissible {
        kappa: f64,
        rho: f64,
        violated: String,
    },

    #[error("truncation too small: admissibility needs rho >= {rho_min:.6}, the truncation resolves rho <= {rho_max:.6}")]
    TruncationTooSmall { rho_min: f64, rho_max: f64 },

    #[error("eigenvalue {eigenvalue:e} of D lies within {tolerance:e} of the spectral cut {cut}; shift rho")]
    SpectralCut {
        eigenvalue: f64,
        cut: f64,
        tolerance: f64,
    },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("internal consistency failure: {0}")]
    InternalConsistency(String),

    #[error("signature difference {difference} is odd; the legs do not define a class")]
    ClassInconsistency { difference: i64 },

    #[error("operator norm {norm} exceeds 1 + {tolerance:e}; not a contraction")]
    ContractionViolation { norm: f64, tolerance: f64 },

    #[error("spectral gap closes: min |E| = {min_gap:e} at momentum ({kx:.4}, {ky:.4})")]
    Gapless { min_gap: f64, kx: f64, ky: f64 },

    #[error("model generation failed: {0}")]
    Generation(String),

    #[error("no common admissible pair along the path: {0}")]
    NoCommonPair(String),

    #[error("linear algebra backend: {0}")]
    Linalg(String),

    #[error("parse error: {0}")]
    Parse(String),
}

impl From<ndarray_linalg::error::LinalgError> for Error {
    fn from(err: ndarray_linalg::error::LinalgError) -> Self {
        Error::Linalg(err.to_string())
    }
}
