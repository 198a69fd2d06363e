use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Interior-point settings. Every field may be overridden from the `[solver]`
/// table of a network file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    /// Tolerance on the optimality error (stationarity, feasibility, complementarity).
    pub kkt_tolerance: f64,
    /// Separate, tighter tolerance on constraint violation.
    pub feasibility_tolerance: f64,
    pub max_iterations: usize,
    pub mu_init: f64,
    /// Barrier target the solver drives to before declaring optimality.
    pub mu_min: f64,
    pub mu_reduction: f64,
    /// Fraction-to-boundary parameter.
    pub tau: f64,
    /// First Hessian regularization tried when inertia is wrong.
    pub delta_init: f64,
    /// Inequality rows with scaled value below this are reported as binding.
    pub binding_threshold: f64,
    /// Number of deterministic starting points.
    pub seed_count: usize,
    /// Worker threads used for independent starts.
    pub jobs: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            kkt_tolerance: 1e-8,
            feasibility_tolerance: 1e-11,
            max_iterations: 500,
            mu_init: 0.1,
            mu_min: 1e-12,
            mu_reduction: 0.2,
            tau: 0.995,
            delta_init: 1e-8,
            binding_threshold: 1e-6,
            seed_count: 5,
            jobs: 1,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, msg: &str| Err(Error::validation(format!("solver.{field}"), msg));
        let pos = |v: f64| v.is_finite() && v > 0.0;
        if !pos(self.kkt_tolerance) {
            return bad("kkt_tolerance", "must be positive");
        }
        if !pos(self.feasibility_tolerance) {
            return bad("feasibility_tolerance", "must be positive");
        }
        if self.max_iterations == 0 {
            return bad("max_iterations", "must be at least 1");
        }
        if !pos(self.mu_init) || !pos(self.mu_min) || self.mu_min > self.mu_init {
            return bad("mu_init", "need 0 < mu_min <= mu_init");
        }
        if !(self.mu_reduction > 0.0 && self.mu_reduction < 1.0) {
            return bad("mu_reduction", "must lie in (0, 1)");
        }
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return bad("tau", "must lie in (0, 1)");
        }
        if !pos(self.delta_init) {
            return bad("delta_init", "must be positive");
        }
        if !pos(self.binding_threshold) {
            return bad("binding_threshold", "must be positive");
        }
        if self.seed_count == 0 {
            return bad("seed_count", "must be at least 1");
        }
        if self.jobs == 0 {
            return bad("jobs", "must be at least 1");
        }
        Ok(())
    }
}
