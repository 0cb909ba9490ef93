use thiserror::Error;

/// Errors raised across the solver pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),
    #[error("mesh quality failure: minimum angle {min_angle:.2} deg below 20 deg")]
    MeshQualityFailure { min_angle: f64 },
    #[error("region does not fit inside the meshed domain: {0}")]
    RegionOutsideDomain(String),
    #[error("radii are not on a common geometric ladder: {0}")]
    NonNestedRadii(String),
    #[error("mesh format error at line {line}: {msg}")]
    MeshFormat { line: usize, msg: String },

    #[error("angular refraction model evaluated at the origin")]
    OriginSingularity,
    #[error("refraction index is non-positive (min sampled value {min_n})")]
    NonPositiveIndex { min_n: f64 },
    #[error("refraction model is not admissible: {0}")]
    InadmissibleRefraction(String),

    #[error("no free degrees of freedom after eliminating Dirichlet vertices")]
    EmptyFreeDofs,
    #[error("singular system: {0}")]
    SingularSystem(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("quadrature point at the origin")]
    OriginInDomain,
    #[error("sampling circle of radius {0} leaves the meshed domain")]
    CircleOutsideDomain(f64),

    #[error("special function argument out of domain: {0}")]
    DomainError(String),
    #[error("point at radius {radius} lies inside the obstacle of radius {r_hat}")]
    InsideObstacle { radius: f64, r_hat: f64 },

    #[error("reference field has zero norm; relative errors undefined")]
    ZeroReference,

    #[error("optimizer did not converge")]
    NotConverged,
    #[error("line search denominator {0:e} is not positive")]
    Stagnation(f64),
}

pub type Result<T> = std::result::Result<T, Error>;
