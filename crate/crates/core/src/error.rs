use crate::multiindex::MultiIndex;
use thiserror::Error;

/// Errors raised by the numerical modules.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix is not positive definite at {point:?}")]
    NotPositiveDefinite { point: Vec<f64> },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("no real root for the eikonal coefficient at node {node}")]
    NoRealRoot { node: usize },

    #[error("basis factor vanishes at node {node}: it shares a coordinate with an earlier node")]
    DegenerateBasis { node: usize },

    #[error("enforcement of beta={beta} at node {node} is singular")]
    SingularEnforcement { beta: MultiIndex, node: usize },

    #[error("metric is not diagonal: entry ({i},{j}) is not the zero polynomial")]
    NotDiagonal { i: usize, j: usize },

    #[error("geodesic left the domain at t={t}")]
    LeftDomain { t: f64 },

    #[error("geodesic boundary value problem did not converge")]
    NoConvergence,

    #[error("diffusion coefficient is not positive at x={x}")]
    NonPositiveCoefficient { x: f64 },

    #[error("characteristic left the domain at {point:?}")]
    CharacteristicEscape { point: Vec<f64> },

    #[error("characteristic stalled before reaching the base point (distance {distance})")]
    StallNearBasePoint { distance: f64 },

    #[error("finite-difference stencil leaves the grid: {0}")]
    GridTooCoarse(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("invalid node set: {0}")]
    InvalidNodes(String),
}

pub type Result<T> = std::result::Result<T, Error>;
