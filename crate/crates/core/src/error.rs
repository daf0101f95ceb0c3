use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("unsupported dimension {0}; expected 2 or 3")]
    UnsupportedDimension(usize),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid ring: need 0 < r_inner ({inner}) < r_outer ({outer})")]
    InvalidRing { inner: f64, outer: f64 },
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("did not converge: {0}")]
    NonConvergence(String),
    #[error("non-finite integrand value {value} at {location}")]
    NonFinite { value: f64, location: String },
    #[error("integral diverges: {0}")]
    Divergent(String),
    #[error("point {0} is a singular point of the mapping")]
    SingularPoint(String),
    #[error("mapping `{0}` does not map concentric spheres onto spheres")]
    NotSpherePreserving(String),
    #[error("multiplicity mismatch: declared {declared}, counted {counted}")]
    MultiplicityMismatch { declared: u32, counted: u32 },
    #[error("condition not applicable: {0}")]
    NotApplicable(String),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
