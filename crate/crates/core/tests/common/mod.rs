//! Helpers shared by the integration tests.
#![allow(dead_code)]

pub mod oracles;

use blendnet::nlp::VarKind;
use blendnet::AssembledProblem;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Central difference of a vector function; column `i` holds `d f / d x_i`.
pub fn central_jacobian(f: impl Fn(&[f64]) -> Vec<f64>, x: &[f64]) -> Vec<Vec<f64>> {
    let mut cols = Vec::with_capacity(x.len());
    let mut xp = x.to_vec();
    for i in 0..x.len() {
        let h = 1e-6 * x[i].abs().max(1.0);
        xp[i] = x[i] + h;
        let fp = f(&xp);
        xp[i] = x[i] - h;
        let fm = f(&xp);
        xp[i] = x[i];
        cols.push(fp.iter().zip(&fm).map(|(a, b)| (a - b) / (2.0 * h)).collect());
    }
    cols
}

pub fn central_gradient(f: impl Fn(&[f64]) -> f64, x: &[f64]) -> Vec<f64> {
    central_jacobian(|y| vec![f(y)], x)
        .into_iter()
        .map(|c| c[0])
        .collect()
}

/// Largest `|a - b| / max(1, |a|)` over matching entries.
pub fn max_rel_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, b)| (a - b).abs() / a.abs().max(1.0))
        .fold(0.0, f64::max)
}

/// Random point well inside the physical box, in scaled units.
pub fn random_interior_point(problem: &AssembledProblem, rng: &mut ChaCha8Rng) -> Vec<f64> {
    problem
        .layout
        .entries()
        .iter()
        .map(|(kind, _)| match kind {
            VarKind::Pressure => rng.random_range(0.4..1.6),
            VarKind::Gamma | VarKind::EdgeGamma => rng.random_range(0.01..0.99),
            VarKind::Boost => rng.random_range(1.01..1.6),
            VarKind::Flow => rng.random_range(0.05..3.0),
            VarKind::SupplyNg | VarKind::SupplyH2 | VarKind::Demand => rng.random_range(0.05..2.0),
        })
        .collect()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random multipliers: free for equalities, nonnegative for inequalities.
pub fn random_multipliers(problem: &AssembledProblem, rng: &mut ChaCha8Rng) -> (Vec<f64>, Vec<f64>) {
    let lam = (0..problem.n_eq()).map(|_| rng.random_range(-1.0..1.0)).collect();
    let z = (0..problem.n_ineq()).map(|_| rng.random_range(0.0..1.0)).collect();
    (lam, z)
}

/// Gradient of `obj_factor * (-J_EV) + lam·h - z·g`, the function whose Hessian
/// `lagrangian_hessian` returns, assembled from the analytic first derivatives.
pub fn lagrangian_gradient(
    problem: &AssembledProblem,
    x: &[f64],
    obj_factor: f64,
    lam: &[f64],
    z: &[f64],
) -> Vec<f64> {
    let mut grad: Vec<f64> = problem
        .objective_gradient(x)
        .iter()
        .map(|g| obj_factor / problem.obj_scale * g)
        .collect();
    for &(r, c, v) in &problem.equality_jacobian(x).entries {
        grad[c] += lam[r] * v;
    }
    for &(r, c, v) in &problem.inequality_jacobian(x).entries {
        grad[c] -= z[r] * v;
    }
    grad
}
