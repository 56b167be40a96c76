//! Joint graph matching and two-way clustering through one convex
//! semidefinite relaxation.
//!
//! The pipeline runs: affinity construction ([`graph`]), nearest Kronecker
//! sum factorization ([`kpsvd`]), spectral embedding of every factor
//! ([`embedding`]), assembly of the joint conic program ([`model`]), solution
//! with [`jgmc_conic`], binarisation ([`rounding`]) and evaluation
//! ([`metrics`]). [`pipeline::solve_pair`] wires everything together.

pub mod datasets;
pub mod delaunay;
pub mod embedding;
pub mod graph;
pub mod kpsvd;
pub mod metrics;
pub mod model;
pub mod oracle;
pub mod pipeline;
pub mod rounding;

pub use graph::Graph;
pub use pipeline::{solve_pair, JointSolution, PipelineConfig};

use jgmc_conic::ConicError;

#[derive(Debug, thiserror::Error)]
pub enum CoreError {
    #[error("invalid graph: {0}")]
    InvalidGraph(String),
    #[error("graph has no coordinates")]
    MissingCoordinates,
    #[error("size mismatch: expected {expected}, found {found}")]
    SizeMismatch { expected: usize, found: usize },
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("instance of size {n} exceeds the enumeration cap {cap}")]
    TooLarge { n: usize, cap: usize },
    #[error("malformed input: {0}")]
    Parse(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Conic(#[from] ConicError),
}

pub type Result<T, E = CoreError> = std::result::Result<T, E>;
