//! Interior-point solution of the assembled problem, with multi-start and warm start.

mod ipm;
mod options;

use std::collections::BTreeMap;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use options::SolverOptions;

use crate::error::{Error, Result};
use crate::network::GNodeKind;
use crate::nlp::{AssembledProblem, ConstraintKind, ConstraintRow, PhysicalPoint, VarKind};
use crate::physics;
use ipm::{Model, Start};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Optimal,
    MaxIterations,
    Infeasible,
    NumericalFailure,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Optimal => "optimal",
            Status::MaxIterations => "max_iterations",
            Status::Infeasible => "infeasible",
            Status::NumericalFailure => "numerical_failure",
        }
    }
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Multiplier of one constraint row in physical units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dual {
    pub id: String,
    /// Marginal change of `J_EV` per unit of the row's physical right-hand side.
    pub value: f64,
}

/// Locational prices at one junction [$/kg].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShadowPrice {
    pub ng: f64,
    pub h2: f64,
    /// `gamma * h2 + (1 - gamma) * ng`.
    pub blend: f64,
}

/// Scaled primal-dual state kept for warm starts and diagnostics.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScaledState {
    pub x: Vec<f64>,
    pub eq_multipliers: Vec<f64>,
    /// Problem inequality rows followed by simple-bound rows.
    pub ineq_multipliers: Vec<f64>,
    /// Values of the inequality rows (same order as the multipliers).
    pub ineq_values: Vec<f64>,
    pub ineq_ids: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Solution {
    pub status: Status,
    /// Economic value `J_EV` [$/s].
    pub objective: f64,
    pub primal: PhysicalPoint,
    pub eq_duals: Vec<Dual>,
    pub ineq_duals: Vec<Dual>,
    /// Ids of inequality rows whose scaled value is below the binding threshold.
    pub binding_set: Vec<String>,
    pub shadow_prices: BTreeMap<String, ShadowPrice>,
    pub iterations: usize,
    /// Infinity norm of the scaled Lagrangian gradient.
    pub kkt_residual: f64,
    /// Infinity norm of the scaled constraint violation.
    pub feasibility: f64,
    /// Largest `|multiplier * row value|` over inequality rows (scaled).
    pub complementarity: f64,
    /// Start that produced this solution: `None` for a warm start, else the seed index.
    pub seed: Option<usize>,
    #[serde(skip)]
    pub scaled: ScaledState,
}

impl Solution {
    pub fn is_optimal(&self) -> bool {
        self.status == Status::Optimal
    }

    /// Delivered energy of demand gNode `id` [MJ/s].
    pub fn delivered_energy(&self, problem: &AssembledProblem, id: &str) -> Result<f64> {
        let g = problem.network.gnode(id)?;
        let d = self.primal.demand.get(id).copied().ok_or_else(|| Error::UnknownId {
            kind: "demand",
            id: id.to_string(),
        })?;
        let gamma = self.primal.gamma[&g.junction].clamp(0.0, 1.0);
        Ok(d * physics::blend_calorific(gamma, &problem.gas_constants)?)
    }

    pub fn dual(&self, id: &str) -> Option<f64> {
        self.eq_duals
            .iter()
            .chain(&self.ineq_duals)
            .find(|d| d.id == id)
            .map(|d| d.value)
    }
}

/// Default interior starting point in scaled units: flat slack pressure, small
/// flows, mid-range concentrations, near-unit boosts and 10% market quantities.
pub fn initialize(problem: &AssembledProblem) -> Vec<f64> {
    let net = &problem.network;
    let gc = &problem.gas_constants;
    let sc = &problem.scaling;
    let sigma = net.reference_pressure() / sc.p0;
    let mut x = vec![0.0; problem.n()];
    for (i, (kind, id)) in problem.layout.entries().iter().enumerate() {
        x[i] = match kind {
            VarKind::Pressure => sigma,
            VarKind::Flow => 1e-3,
            VarKind::Gamma => {
                let j = net.junction(id).expect("layout ids exist");
                0.5 * (j.gamma_min + j.gamma_max)
            }
            VarKind::Boost => {
                let c = net.compressor(id).expect("layout ids exist");
                if c.alpha_max >= 1.002 {
                    1.0 + 1e-3
                } else {
                    0.5 * (1.0 + c.alpha_max)
                }
            }
            _ => 0.0,
        };
    }
    // edge concentrations and withdrawals depend on junction values
    for (i, (kind, id)) in problem.layout.entries().iter().enumerate() {
        match kind {
            VarKind::EdgeGamma => {
                let from = &net.pipe(id).expect("layout ids exist").from;
                x[i] = x[problem.layout.at(VarKind::Gamma, from)];
            }
            VarKind::Demand => {
                let g = net.gnode(id).expect("layout ids exist");
                let gamma = x[problem.layout.at(VarKind::Gamma, &g.junction)];
                let r = physics::blend_calorific_raw(gamma, gc);
                x[i] = match g.kind {
                    GNodeKind::DemandFixed => g.g_fixed.unwrap_or(0.0) / (r * sc.phi0),
                    _ => 0.1 * g.g_max.unwrap_or(0.0) / (r * sc.phi0),
                };
            }
            _ => {}
        }
    }
    // flows and supplies sized to carry the initial withdrawals
    let total: f64 = problem
        .layout
        .entries()
        .iter()
        .enumerate()
        .filter(|(_, (kind, _))| *kind == VarKind::Demand)
        .map(|(i, _)| x[i])
        .sum::<f64>()
        .max(1e-3);
    let supplies = net
        .gnodes
        .iter()
        .filter(|g| matches!(g.kind, GNodeKind::NgSupply | GNodeKind::H2Supply))
        .count()
        .max(1);
    for (i, (kind, id)) in problem.layout.entries().iter().enumerate() {
        match kind {
            VarKind::Flow => x[i] = total,
            VarKind::SupplyH2 | VarKind::SupplyNg => {
                let g = net.gnode(id).expect("layout ids exist");
                let share = total / supplies as f64;
                x[i] = g.s_max.map_or(share, |s| share.min(0.5 * s / sc.phi0));
            }
            _ => {}
        }
    }
    x
}

/// Randomized starting point.
fn perturbed_start(problem: &AssembledProblem, seed: u64) -> Vec<f64> {
    let net = &problem.network;
    let gc = &problem.gas_constants;
    let sc = &problem.scaling;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = initialize(problem);
    for (i, (kind, id)) in problem.layout.entries().iter().enumerate() {
        match kind {
            VarKind::Gamma => {
                let j = net.junction(id).expect("layout ids exist");
                x[i] = j.gamma_min + (j.gamma_max - j.gamma_min) * rng.random::<f64>();
            }
            VarKind::Flow => x[i] = rng.random_range(1e-3..0.3),
            VarKind::Boost => {
                let c = net.compressor(id).expect("layout ids exist");
                x[i] = 1.0 + (c.alpha_max - 1.0) * rng.random::<f64>();
            }
            VarKind::SupplyH2 | VarKind::SupplyNg => {
                let g = net.gnode(id).expect("layout ids exist");
                let cap = g.s_max.map_or(1.0, |s| s / sc.phi0);
                x[i] = cap * rng.random_range(0.02..0.5);
            }
            VarKind::Pressure => {
                let j = net.junction(id).expect("layout ids exist");
                x[i] = match j.slack_pressure {
                    Some(sigma) => sigma / sc.p0,
                    None => (x[i] * rng.random_range(0.9..1.1)).max(1.01 * j.p_min / sc.p0),
                };
            }
            _ => {}
        }
    }
    for (i, (kind, id)) in problem.layout.entries().iter().enumerate() {
        match kind {
            VarKind::EdgeGamma => {
                let from = &net.pipe(id).expect("layout ids exist").from;
                x[i] = x[problem.layout.at(VarKind::Gamma, from)];
            }
            VarKind::Demand => {
                let g = net.gnode(id).expect("layout ids exist");
                let gamma = x[problem.layout.at(VarKind::Gamma, &g.junction)];
                let r = physics::blend_calorific_raw(gamma, gc);
                x[i] = match g.kind {
                    GNodeKind::DemandFixed => g.g_fixed.unwrap_or(0.0) / (r * sc.phi0),
                    _ => g.g_max.unwrap_or(0.0) / (r * sc.phi0) * rng.random_range(0.02..0.9),
                };
            }
            _ => {}
        }
    }
    x
}

fn bound_row(model: &Model, k: usize) -> ConstraintRow {
    let b = &model.bounds[k];
    let (kind, var) = &model.problem.layout.entries()[b.var];
    ConstraintRow {
        kind: if b.upper {
            ConstraintKind::UpperBound
        } else {
            ConstraintKind::LowerBound
        },
        component: format!("{kind}:{var}"),
        scale: match kind {
            VarKind::Flow | VarKind::Demand | VarKind::SupplyH2 | VarKind::SupplyNg => {
                1.0 / model.problem.scaling.phi0
            }
            VarKind::Pressure => 1.0 / model.problem.scaling.p0,
            _ => 1.0,
        },
    }
}

fn build_solution(
    model: &Model,
    outcome: ipm::Outcome,
    seed: Option<usize>,
    opts: &SolverOptions,
) -> Solution {
    let p = model.problem;
    let it = &outcome.iterate;
    let c = p.obj_scale;
    let g = model.g(&it.x);
    let mut ineq_ids = Vec::with_capacity(g.len());
    let mut ineq_duals = Vec::with_capacity(g.len());
    let mut binding_set = Vec::new();
    let mut complementarity: f64 = 0.0;
    for (k, (&gk, &zk)) in g.iter().zip(&it.z).enumerate() {
        let row = if k < p.n_ineq() {
            p.ineq_rows[k].clone()
        } else {
            bound_row(model, k - p.n_ineq())
        };
        let id = row.id();
        let actual = if k < p.n_ineq() { gk - ipm::RELAX } else { gk };
        if actual <= opts.binding_threshold {
            binding_set.push(id.clone());
        }
        complementarity = complementarity.max((zk * gk).abs());
        ineq_duals.push(Dual {
            id: id.clone(),
            value: zk * row.scale / c,
        });
        ineq_ids.push(id);
    }
    binding_set.sort();
    let eq_duals: Vec<Dual> = p
        .eq_rows
        .iter()
        .zip(&it.lam)
        .map(|(row, &l)| Dual {
            id: row.id(),
            value: l * row.scale / c,
        })
        .collect();
    let primal = p.rescale_solution(&it.x);
    let mut shadow_prices = BTreeMap::new();
    for j in &p.network.junctions {
        let find = |kind: ConstraintKind| {
            let (_, r) = p
                .constraint_index(&format!("{kind}:{}", j.id))
                .expect("every junction has balance rows");
            eq_duals[r].value
        };
        let ng = find(ConstraintKind::BalanceNg);
        let h2 = find(ConstraintKind::BalanceH2);
        let gamma = primal.gamma[&j.id];
        shadow_prices.insert(
            j.id.clone(),
            ShadowPrice {
                ng,
                h2,
                blend: gamma * h2 + (1.0 - gamma) * ng,
            },
        );
    }
    Solution {
        status: outcome.status,
        objective: p.economic_value(&it.x),
        primal,
        eq_duals,
        ineq_duals,
        binding_set,
        shadow_prices,
        iterations: outcome.iterations,
        kkt_residual: outcome.stationarity,
        feasibility: outcome.feasibility,
        complementarity,
        seed,
        scaled: ScaledState {
            x: it.x.clone(),
            eq_multipliers: it.lam.clone(),
            ineq_multipliers: it.z.clone(),
            ineq_values: g,
            ineq_ids,
        },
    }
}

/// Concentration levels, as fractions of each junction's window, used by the
/// pinned starts.
const PIN_LEVELS: [f64; 4] = [0.0, 1.0, 0.5, 0.25];

/// Barrier parameter for starts that are already close to a local solution.
const WARM_MU: f64 = 1e-7;

/// Run one start. Seed 0 is the default initializer. Seeds 1 to 4 first solve
/// with every junction concentration pinned to a level of its window, then
/// release the pin; the problem is nonconvex in the blend and these starts reach
/// the local solutions at either end of it. Later seeds are randomized.
pub fn solve_from_seed(problem: &AssembledProblem, options: &SolverOptions, seed: usize) -> Solution {
    if let Some(&level) = seed.checked_sub(1).and_then(|k| PIN_LEVELS.get(k)) {
        if let Some(sol) = solve_pinned(problem, options, level, seed) {
            return sol;
        }
    }
    let model = Model::new(problem);
    let x = if seed == 0 {
        initialize(problem)
    } else {
        perturbed_start(problem, seed as u64)
    };
    let start = Start {
        x,
        lam: None,
        z: None,
        mu: options.mu_init,
        slack_floor: 1e-2,
    };
    let outcome = ipm::run(&model, start, options);
    build_solution(&model, outcome, Some(seed), options)
}

fn solve_pinned(
    problem: &AssembledProblem,
    options: &SolverOptions,
    level: f64,
    seed: usize,
) -> Option<Solution> {
    let mut net = problem.network.clone();
    let mut pinned = false;
    for j in &mut net.junctions {
        if j.gamma_max > j.gamma_min {
            let v = j.gamma_min + level * (j.gamma_max - j.gamma_min);
            j.gamma_min = v;
            j.gamma_max = v;
            pinned = true;
        }
    }
    if !pinned {
        return None;
    }
    let restricted = crate::nlp::assemble(&net, &problem.gas_constants, &problem.scaling).ok()?;
    let first = solve_from_seed(&restricted, options, 0);
    if !first.is_optimal() || first.scaled.x.len() != problem.n() {
        return None;
    }
    let lam = first.scaled.eq_multipliers.clone();
    let model = Model::new(problem);
    let start = Start {
        x: first.scaled.x.clone(),
        lam: (lam.len() == problem.n_eq()).then_some(lam),
        z: None,
        mu: WARM_MU,
        slack_floor: 10.0 * WARM_MU,
    };
    let outcome = ipm::run(&model, start, options);
    let mut sol = build_solution(&model, outcome, Some(seed), options);
    sol.iterations += first.iterations;
    Some(sol)
}

/// Run one start from a previous solution of a problem with the same layout.
pub fn solve_warm(problem: &AssembledProblem, options: &SolverOptions, previous: &Solution) -> Solution {
    let model = Model::new(problem);
    let prev = &previous.scaled;
    let compatible = prev.x.len() == problem.n()
        && prev.eq_multipliers.len() == problem.n_eq()
        && prev.ineq_multipliers.len() == model.mi();
    if !compatible {
        return solve_from_seed(problem, options, 0);
    }
    let mu = WARM_MU.max(options.mu_min);
    let start = Start {
        x: prev.x.clone(),
        lam: Some(prev.eq_multipliers.clone()),
        z: Some(prev.ineq_multipliers.clone()),
        mu,
        slack_floor: 10.0 * mu,
    };
    let outcome = ipm::run(&model, start, options);
    build_solution(&model, outcome, None, options)
}

fn better(a: &Solution, b: &Solution) -> bool {
    match (a.is_optimal(), b.is_optimal()) {
        (true, false) => true,
        (false, true) => false,
        (true, true) => a.objective > b.objective + 1e-12 * b.objective.abs().max(1.0),
        (false, false) => false,
    }
}

/// Solve with `options.seed_count` deterministic starts (plus the warm start when
/// given) and keep the best optimal objective. Ties keep the earliest start.
pub fn solve(
    problem: &AssembledProblem,
    options: &SolverOptions,
    warm_start: Option<&Solution>,
) -> Result<Solution> {
    options.validate()?;
    let mut runs: Vec<Option<usize>> = Vec::new();
    if warm_start.is_some() {
        runs.push(None);
    }
    runs.extend((0..options.seed_count).map(Some));
    let run = |r: &Option<usize>| match r {
        None => solve_warm(problem, options, warm_start.expect("warm run only with warm start")),
        Some(seed) => solve_from_seed(problem, options, *seed),
    };
    let results: Vec<Solution> = if options.jobs > 1 && runs.len() > 1 {
        let chunk = runs.len().div_ceil(options.jobs);
        std::thread::scope(|scope| {
            let handles: Vec<_> = runs
                .chunks(chunk)
                .map(|part| scope.spawn(move || part.iter().map(run).collect::<Vec<_>>()))
                .collect();
            handles
                .into_iter()
                .flat_map(|h| h.join().expect("solver thread panicked"))
                .collect()
        })
    } else {
        runs.iter().map(run).collect()
    };
    let mut best: Option<Solution> = None;
    for sol in results {
        log::debug!(
            "start {:?}: {} objective {:.12e} after {} iterations",
            sol.seed,
            sol.status,
            sol.objective,
            sol.iterations
        );
        best = match best {
            None => Some(sol),
            Some(b) if better(&sol, &b) => Some(sol),
            keep => keep,
        };
    }
    Ok(best.expect("at least one start"))
}

/// Per-junction `(ng, h2, blend)` prices of an optimal solution.
pub fn extract_shadow_prices(solution: &Solution) -> Result<BTreeMap<String, ShadowPrice>> {
    if !solution.is_optimal() {
        return Err(Error::NotOptimal(solution.status.to_string()));
    }
    Ok(solution.shadow_prices.clone())
}
