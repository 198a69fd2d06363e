//! Hand-evaluated reference values and finite-difference checks.

use blendnet::physics::{
    blend_calorific, blend_gravity, blend_kappa, carbon_offset, compressor_power, sound_speed_sq,
    weymouth_residual,
};
use blendnet::{AssembledProblem, GasConstants, Pipe};

use super::*;

/// Single-pipe P1 dimensions.
pub fn reference_pipe() -> Pipe {
    Pipe {
        id: "P1".into(),
        from: "J2".into(),
        to: "J3".into(),
        length: 47000.0,
        diameter: 0.12,
        area: std::f64::consts::PI * 0.12 * 0.12 / 4.0,
        friction: 0.01,
    }
}

fn rel(got: f64, expected: f64, scale: f64) -> f64 {
    (got - expected).abs() / scale.max(f64::MIN_POSITIVE)
}

/// `(label, relative error)` for every tabulated physics value, evaluated with
/// the default gas constants. Values were computed by hand from the closed forms.
pub fn physics_table_errors() -> Vec<(String, f64)> {
    let gc = GasConstants::default();
    let mut out = Vec::new();
    let mut push = |label: String, got: f64, expected: f64, scale: f64| {
        out.push((label, rel(got, expected, scale)));
    };
    let mixtures: [(&str, fn(f64, &GasConstants) -> blendnet::Result<f64>, &[(f64, f64)]); 4] = [
        (
            "a^2",
            sound_speed_sq,
            &[
                (0.0, 136900.0),
                (0.03, 168436.0),
                (0.1, 242020.0),
                (0.25, 399700.0),
                (0.5, 662500.0),
                (0.8, 977860.0),
                (1.0, 1188100.0),
            ],
        ),
        (
            "kappa",
            blend_kappa,
            &[(0.0, 1.304), (0.03, 1.30703), (0.1, 1.3141), (0.25, 1.32925), (0.5, 1.3545), (1.0, 1.405)],
        ),
        (
            "G",
            blend_gravity,
            &[
                (0.0, 0.5537),
                (0.03, 0.539177),
                (0.1, 0.50529),
                (0.25, 0.432675),
                (0.5, 0.31165),
                (0.8, 0.16642),
                (1.0, 0.0696),
            ],
        ),
        (
            "R",
            blend_calorific,
            &[
                (0.0, 44.2),
                (0.03, 47.128),
                (0.1, 53.96),
                (0.25, 68.6),
                (0.5, 93.0),
                (0.8, 122.28),
                (1.0, 141.8),
            ],
        ),
    ];
    for (name, f, cases) in mixtures {
        for &(g, expected) in cases {
            push(format!("{name}({g})"), f(g, &gc).unwrap(), expected, expected.abs());
        }
    }
    for ((a, phi, g), expected) in [
        ((1.2, 3.0, 0.0), 4540.508562571511),
        ((1.4, 2.5, 0.1), 8199.246630622727),
        ((1.1, 0.5, 0.5), 878.031078311521),
        ((2.0, 10.0, 1.0), 758312.1707369887),
        ((1.3123, 3.1674, 0.05), 7747.8034356466105),
    ] {
        push(format!("W({a}, {phi}, {g})"), compressor_power(a, phi, g, &gc).unwrap(), expected, expected);
    }
    for ((d, g), expected) in [
        ((3.0, 0.1), 2.3526395173454),
        ((2.2, 0.0616), 1.062765691302162),
        ((1.0, 1.0), 7.842131724484666),
        ((10.0, 0.25), 19.605329311211666),
        ((0.5, 0.5), 1.960532931121166),
    ] {
        push(format!("E({d}, {g})"), carbon_offset(d, g, &gc).unwrap(), expected, expected);
    }
    let pipe = reference_pipe();
    for ((p1, p2, phi, g), expected) in [
        ((6.5e6_f64, 1.0e6_f64, 3.0, 0.0), 3522517829288.5312),
        ((6.5e6, 3.0e6, 2.0, 0.1), 3606934550911.16),
        ((4.0e6, 4.5e6, -1.5, 0.05), 8803047428895.172),
        ((7.0e6, 2.0e6, 2.7, 1.0), -220211522785157.47),
        ((6.0e6, 5.0e6, 1.0, 0.2), 370409738867.9668),
    ] {
        // residuals are differences of squared pressures; measure against the larger one
        let scale = (p1 * p1).max(p2 * p2);
        let got = weymouth_residual(p1, p2, phi, g, &pipe, &gc).unwrap();
        push(format!("weymouth({p1}, {p2}, {phi}, {g})"), got, expected, scale);
    }
    out
}

/// Largest finite-difference errors over `points` random interior points:
/// `(objective gradient, constraint Jacobians, Lagrangian Hessian)`.
pub fn derivative_errors(problem: &AssembledProblem, seed: u64, points: usize) -> (f64, f64, f64) {
    let mut rng = rng(seed);
    let (mut eg, mut ej, mut eh) = (0.0_f64, 0.0_f64, 0.0_f64);
    for _ in 0..points {
        let x = random_interior_point(problem, &mut rng);
        let (lam, z) = random_multipliers(problem, &mut rng);
        eg = eg.max(max_rel_error(
            &problem.objective_gradient(&x),
            &central_gradient(|y| problem.objective(y), &x),
        ));
        ej = ej.max(matrix_error(
            &problem.equality_jacobian(&x).to_dense(),
            &central_jacobian(|y| problem.equality_residuals(y), &x),
        ));
        ej = ej.max(matrix_error(
            &problem.inequality_jacobian(&x).to_dense(),
            &central_jacobian(|y| problem.inequality_residuals(y), &x),
        ));
        let sigma = 0.7;
        eh = eh.max(matrix_error(
            &problem.lagrangian_hessian(&x, sigma, &lam, &z).to_dense(),
            &central_jacobian(|y| lagrangian_gradient(problem, y, sigma, &lam, &z), &x),
        ));
    }
    (eg, ej, eh)
}

/// Error of an analytic matrix against numeric columns.
pub fn matrix_error(analytic: &blendnet::linalg::DenseMatrix, numeric_cols: &[Vec<f64>]) -> f64 {
    let mut worst = 0.0_f64;
    for r in 0..analytic.nrows {
        let numeric: Vec<f64> = numeric_cols.iter().map(|c| c[r]).collect();
        worst = worst.max(max_rel_error(analytic.row(r), &numeric));
    }
    worst
}
