//! Sparse conic programs over products of free, nonnegative and PSD cones,
//! with an operator-splitting (ADMM) solver and an independent KKT checker.

mod admm;
mod cone;
mod kkt;
mod problem;
mod settings;
mod sparse;

pub use admm::AdmmSolver;
pub use cone::{
    project_psd, project_psd_svec, smat, svec, svec_index, svec_len, svec_scale, ConeSpec, SYMMETRY_TOL,
};
pub use kkt::{verify_kkt, DualVector, KktResiduals};
pub use problem::ConicProgram;
pub use settings::SolverSettings;
pub use sparse::SparseMatrix;

use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum ConicError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("matrix is not symmetric at ({row}, {col})")]
    Asymmetric { row: usize, col: usize },
    #[error("problem data contains NaN or infinity")]
    NonFinite,
    #[error("invalid solver settings: {0}")]
    Settings(String),
    #[error("factorization of the linear system failed: {0}")]
    Factorization(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    Optimal,
    PrimalInfeasible,
    DualInfeasible,
    MaxIterations,
    TimeLimit,
    NumericalFailure,
}

impl SolveStatus {
    pub fn is_optimal(self) -> bool {
        self == SolveStatus::Optimal
    }
}

/// One row of the convergence trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iter: usize,
    pub primal: f64,
    pub dual: f64,
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub status: SolveStatus,
    pub iterations: usize,
    /// Primal objective `c'x + offset`.
    pub primal_objective: f64,
    /// Dual objective `b'y + offset`.
    pub dual_objective: f64,
    /// Residuals recomputed by [`verify_kkt`] at the returned point.
    pub residuals: KktResiduals,
    pub solve_seconds: f64,
    pub setup_seconds: f64,
    pub factorizations: usize,
    pub final_rho: f64,
    pub log: Vec<IterationRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub x: Vec<f64>,
    pub dual: DualVector,
    pub report: SolveReport,
}

/// Anything able to solve a [`ConicProgram`].
pub trait ConicSolver {
    fn solve(&self, problem: &ConicProgram, settings: &SolverSettings) -> Result<Solution, ConicError>;
}

/// Solves `problem` with the default ADMM backend.
pub fn solve(problem: &ConicProgram, settings: &SolverSettings) -> Result<Solution, ConicError> {
    AdmmSolver.solve(problem, settings)
}
