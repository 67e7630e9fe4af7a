use thiserror::Error;

/// Errors raised by the library operations.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum FieldError {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("point is {distance:e} from the boundary (tolerance {tolerance:e})")]
    NotOnBoundary { distance: f64, tolerance: f64 },

    #[error("boundary normal is ambiguous at this point")]
    AmbiguousNormal,

    #[error("domain carries no outward normal")]
    NoNormal,

    #[error("kelvin transform is singular at the inversion center")]
    SingularPoint,

    #[error("charges {first} and {second} coincide (distance {distance:e})")]
    CoincidentCharges {
        first: usize,
        second: usize,
        distance: f64,
    },

    #[error("charge {index} lies outside the domain (signed distance {distance:e})")]
    ChargeOutsideDomain { index: usize, distance: f64 },

    #[error("invalid charge configuration: {0}")]
    InvalidConfiguration(String),

    #[error("infeasible problem: {0}")]
    InfeasibleProblem(String),

    #[error("minimizer did not converge: projected gradient {gradient_norm:e} > {tolerance:e}")]
    NotConverged { gradient_norm: f64, tolerance: f64 },

    #[error("domain is not convex; Lagrange conditions do not apply")]
    NonConvexDomain,

    #[error("balls overlap: center distance {center_distance} <= R + r = {radius_sum}")]
    BallsOverlap {
        center_distance: f64,
        radius_sum: f64,
    },

    #[error("image series not converged after {terms} terms (tail {tail:e})")]
    SeriesNotConverged { terms: usize, tail: f64 },

    #[error("linear system is singular")]
    SingularSystem,

    #[error("point lies strictly inside a conductor")]
    InsideConductor,

    #[error("potential is singular at a point charge (charge {charge}){}", match .t { Some(t) => format!(" at t = {t}"), None => String::new() })]
    SingularEvaluation { charge: f64, t: Option<f64> },

    #[error("a source lies within {min_distance:e} of the integration sphere")]
    SourceOnSurface { min_distance: f64 },

    #[error("grid resolution {0} outside [8, 512]")]
    ResolutionOutOfRange(usize),

    #[error("zero field: e * H must be nonzero")]
    ZeroField,

    #[error("io error: {0}")]
    Io(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },
}

impl From<std::io::Error> for FieldError {
    fn from(err: std::io::Error) -> Self {
        FieldError::Io(err.to_string())
    }
}

pub type Result<T, E = FieldError> = std::result::Result<T, E>;
