use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid profile: {0}")]
    InvalidProfile(String),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid options: {0}")]
    InvalidOptions(String),
    #[error("field length {found} does not match grid with {expected} nodes")]
    GridMismatch { expected: usize, found: usize },
    #[error("field is not planar (rank-1 residual {residual:.3e})")]
    NotPlanar { residual: f64 },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("profile class error: {0}")]
    Class(String),
    #[error("no bisection bracket for the initial slope in [{lo}, {hi}]")]
    Bracket { lo: f64, hi: f64 },
    #[error("tan(theta) is singular at node {index} (theta = {theta})")]
    TanSingularity { index: usize, theta: f64 },
    #[error("time step rejected after {halvings} halvings (dt = {dt:.3e})")]
    StepFailure { halvings: usize, dt: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
