use thiserror::Error;

/// Node coordinates `[i, j, k]` on the periodic grid, x index first.
pub type NodeCoord = [usize; 3];

#[derive(Debug, Error)]
pub enum Error {
    #[error("grid needs at least 4 nodes per axis, got {0}")]
    GridSize(usize),

    #[error("fields live on different grids ({0} vs {1} nodes per axis)")]
    GridMismatch(usize, usize),

    #[error("metric is not positive definite at node {node:?}")]
    Definiteness { node: NodeCoord },

    #[error("metric is not symmetric at node {node:?}")]
    Asymmetric { node: NodeCoord },

    #[error("non-finite value in field at node {node:?}")]
    NonFinite { node: NodeCoord },

    #[error("spinor is not of unit length at node {node:?} (|phi| = {norm})")]
    SpinorNorm { node: NodeCoord, norm: f64 },

    #[error("chart domain violated: g + h is not positive definite at node {node:?}")]
    ChartDomain { node: NodeCoord },

    #[error("invalid diffeomorphism at node {node:?}: {reason}")]
    Diffeo { node: NodeCoord, reason: String },

    #[error("flow aborted at t = {t}: {reason}")]
    FlowAbort { t: f64, reason: String },

    #[error("slice projection did not converge after {iterations} iterations (residual {residual:e})")]
    Slice { iterations: usize, residual: f64 },

    #[error("linear solve broke down: {0}")]
    LinearSolve(String),

    #[error("fit failed: {0}")]
    Fit(String),

    #[error("argument out of domain: {0}")]
    Domain(String),

    #[error("malformed snapshot: {0}")]
    Snapshot(String),

    #[error("malformed trace: {0}")]
    Trace(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
