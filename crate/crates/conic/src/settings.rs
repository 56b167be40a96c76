use serde::{Deserialize, Serialize};

use crate::ConicError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverSettings {
    /// Relative primal feasibility tolerance.
    pub eps_primal: f64,
    /// Relative dual feasibility tolerance.
    pub eps_dual: f64,
    /// Relative duality gap tolerance.
    pub eps_gap: f64,
    /// Tolerance of the infeasibility certificates.
    pub eps_infeasible: f64,
    pub max_iters: usize,
    /// Over-relaxation parameter, in (0, 2).
    pub alpha: f64,
    /// Ruiz equilibration passes; 0 disables scaling.
    pub equilibration_iters: usize,
    /// Initial penalty for cone rows.
    pub rho: f64,
    /// Penalty multiplier applied to equality rows.
    pub rho_eq_scale: f64,
    /// Proximal regularisation of the linear step.
    pub sigma: f64,
    pub adaptive_rho: bool,
    /// Minimum number of iterations between penalty updates.
    pub adapt_interval: usize,
    /// Residuals are evaluated every `check_interval` iterations.
    pub check_interval: usize,
    /// Wall-clock limit in seconds.
    pub time_limit: Option<f64>,
    /// Record `(iter, primal, dual, gap)` at every residual check.
    pub record_log: bool,
    /// Reserved for randomised internals; the current method is deterministic.
    pub seed: u64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            eps_primal: 1e-6,
            eps_dual: 1e-6,
            eps_gap: 1e-6,
            eps_infeasible: 1e-8,
            max_iters: 100_000,
            alpha: 1.5,
            equilibration_iters: 10,
            rho: 0.1,
            rho_eq_scale: 1e3,
            sigma: 1e-6,
            adaptive_rho: true,
            adapt_interval: 40,
            check_interval: 10,
            time_limit: None,
            record_log: false,
            seed: 0,
        }
    }
}

impl SolverSettings {
    /// Looser profile (1e-4) for sweeps; rounding tolerates this accuracy.
    pub fn fast() -> Self {
        Self::with_tolerance(1e-4)
    }

    /// Default settings with all three tolerances set to `tol`.
    pub fn with_tolerance(tol: f64) -> Self {
        Self { eps_primal: tol, eps_dual: tol, eps_gap: tol, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), ConicError> {
        let tols = [self.eps_primal, self.eps_dual, self.eps_gap, self.eps_infeasible];
        if tols.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
            return Err(ConicError::Settings("tolerances must be positive".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 2.0) {
            return Err(ConicError::Settings(format!("over-relaxation {} not in (0, 2)", self.alpha)));
        }
        if !(self.rho > 0.0 && self.sigma > 0.0 && self.rho_eq_scale > 0.0) {
            return Err(ConicError::Settings("penalties must be positive".into()));
        }
        if self.check_interval == 0 {
            return Err(ConicError::Settings("check_interval must be at least 1".into()));
        }
        Ok(())
    }
}
