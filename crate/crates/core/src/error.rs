//! Error type shared by every module.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("point at r = {r} lies inside the excluded ball r <= {r_min}")]
    Domain { r: f64, r_min: f64 },
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("sample array has length {got}, grid expects {expected}")]
    Shape { expected: usize, got: usize },
    #[error("degenerate surface: {0}")]
    Degenerate(String),
    #[error("eigensolver did not converge: {0}")]
    Convergence(String),
    #[error("canonical partition band is empty")]
    Band,
    #[error("vector is not timelike (Minkowski norm^2 = {norm_sq})")]
    Causal { norm_sq: f64 },
    #[error("pseudo-center requires a surface centered at the identity")]
    Frame,
    #[error("pseudo-center failed to decrease after {halvings} step halvings (|Z| = {z_norm})")]
    Stall { halvings: usize, z_norm: f64 },
    #[error("surface is no longer a radial graph about the origin: {0}")]
    Regraph(String),
    #[error("Newton iteration cap {iterations} reached with residual {residual}")]
    MaxIterations { iterations: usize, residual: f64 },
    #[error("singular Jacobian: {0}")]
    SingularJacobian(String),
    #[error("continuation stalled at tau = {tau} with step {step}")]
    ContinuationStall { tau: f64, step: f64 },
    #[error("consecutive leaves intersect: {0}")]
    Overlap(String),
    #[error("normal geodesic missed the next leaf at node {node}")]
    Shoot { node: usize },
    #[error("value {value} outside the attainable range [{lo}, {hi})")]
    Range { value: f64, lo: f64, hi: f64 },
    #[error("invalid configuration: {0}")]
    Config(String),
}

impl Error {
    /// Stable class name used in CLI status files.
    pub fn class(&self) -> &'static str {
        match self {
            Error::Domain { .. } => "DomainError",
            Error::Numerical(_) => "NumericalError",
            Error::Shape { .. } => "ShapeError",
            Error::Degenerate(_) => "DegenerateError",
            Error::Convergence(_) => "ConvergenceError",
            Error::Band => "BandError",
            Error::Causal { .. } => "CausalError",
            Error::Frame => "FrameError",
            Error::Stall { .. } => "StallError",
            Error::Regraph(_) => "RegraphError",
            Error::MaxIterations { .. } => "MaxIterations",
            Error::SingularJacobian(_) => "SingularJacobian",
            Error::ContinuationStall { .. } => "ContinuationStall",
            Error::Overlap(_) => "OverlapError",
            Error::Shoot { .. } => "ShootError",
            Error::Range { .. } => "RangeError",
            Error::Config(_) => "ConfigError",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
