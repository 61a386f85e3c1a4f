use thiserror::Error;

/// Errors raised by the numerical pipelines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),
    #[error("invalid deformation field: {0}")]
    InvalidField(String),
    #[error("quadrature error: {0}")]
    Quadrature(String),
    #[error("phase point too close to glancing: |zeta| = {zeta}, margin {margin}")]
    Glancing { zeta: f64, margin: f64 },
    #[error("geometry error: {0}")]
    Geometry(String),
    #[error("ray passes through a focus (|Z| = {0:e})")]
    FocalRay(f64),
    #[error("invariant curve error: {0}")]
    Curve(String),
    #[error("rotation number did not converge: {0}")]
    Rotation(String),
    #[error("no periodic family with rotation number {p}/{q}: {reason}")]
    NoSuchFamily { p: u32, q: u32, reason: String },
    #[error("eigenvalue completeness check failed: {0}")]
    Completeness(String),
    #[error("eigenvalue residual too large: {0}")]
    Accuracy(String),
    #[error("index {index} out of range (len {len})")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("boundary grid too coarse: {0}")]
    Resolution(String),
    #[error("cluster matching failed: {0}")]
    Matching(String),
    #[error("spectral cutoff too low: {0}")]
    Cutoff(String),
    #[error("spectral parameter collides with an eigenvalue: {0}")]
    Pole(String),
    #[error("moment extrapolation did not converge: {0}")]
    Moment(String),
    #[error("degenerate ratio: {0}")]
    DegenerateRatio(String),
    #[error("sequence is flat: no non-vanishing Taylor term")]
    Flat,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
