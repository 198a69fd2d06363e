//! Steady-state simulation with fixed controls.
//!
//! Supplies, withdrawals and boost ratios are given; squared pressures,
//! concentrations, flows, edge concentrations and the makeup flow of every
//! slack junction are unknown. The square system of nodal balances, pipe and
//! compressor relations, concentration continuity and slack pressures is solved
//! by damped Newton in scaled units.

use std::collections::{BTreeMap, VecDeque};

use log::debug;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{norm_inf, DenseMatrix, Lu};
use crate::network::{GNodeKind, Network};
use crate::nlp::ScalingConfig;
use crate::physics::GasConstants;
use crate::solver::Solution;

/// Lower floor on scaled squared pressure inside the line search.
pub const PRESSURE_SQ_FLOOR: f64 = 1e-12;
/// Scaled residual at which Newton stops.
pub const RESIDUAL_TOLERANCE: f64 = 1e-12;
/// Relative deviation accepted by [`crosscheck`].
pub const CROSSCHECK_TOLERANCE: f64 = 1e-6;
const MAX_ITERATIONS: usize = 100;

/// Fixed controls in physical units. Missing supplies and withdrawals are zero,
/// missing boost ratios are one.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControlAssignment {
    /// [kg/s] per NG supply gNode
    pub supply_ng: BTreeMap<String, f64>,
    /// [kg/s] per H2 supply gNode
    pub supply_h2: BTreeMap<String, f64>,
    /// [kg/s] per demand gNode
    pub demand: BTreeMap<String, f64>,
    /// per compressor
    pub alpha: BTreeMap<String, f64>,
}

impl ControlAssignment {
    /// Controls of an optimizer solution, clipped onto their domains since the
    /// solver may leave them a tolerance outside.
    pub fn from_solution(solution: &Solution) -> Self {
        let p = &solution.primal;
        let clip = |m: &BTreeMap<String, f64>, lo: f64| -> BTreeMap<String, f64> {
            m.iter().map(|(k, v)| (k.clone(), v.max(lo))).collect()
        };
        ControlAssignment {
            supply_ng: clip(&p.supply_ng, 0.0),
            supply_h2: clip(&p.supply_h2, 0.0),
            demand: clip(&p.demand, 0.0),
            alpha: clip(&p.alpha, 1.0),
        }
    }

    pub fn validate(&self, network: &Network) -> Result<()> {
        let check_gnode = |id: &str, kinds: &[GNodeKind], value: f64| -> Result<()> {
            let g = network.gnode(id)?;
            if !kinds.contains(&g.kind) {
                return Err(Error::validation(
                    id,
                    format!("control given for a {} gNode", g.kind.as_str()),
                ));
            }
            if !(value.is_finite() && value >= 0.0) {
                return Err(Error::validation(
                    id,
                    format!("control must be finite and nonnegative, got {value}"),
                ));
            }
            Ok(())
        };
        for (id, &v) in &self.supply_ng {
            check_gnode(id, &[GNodeKind::NgSupply], v)?;
        }
        for (id, &v) in &self.supply_h2 {
            check_gnode(id, &[GNodeKind::H2Supply], v)?;
        }
        for (id, &v) in &self.demand {
            check_gnode(id, &[GNodeKind::DemandOptimized, GNodeKind::DemandFixed], v)?;
        }
        for (id, &a) in &self.alpha {
            network.compressor(id)?;
            if !(a.is_finite() && a >= 1.0) {
                return Err(Error::validation(
                    id,
                    format!("boost ratio must be at least 1, got {a}"),
                ));
            }
        }
        Ok(())
    }
}

/// Converged physical state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationState {
    /// [Pa]
    pub pressure: BTreeMap<String, f64>,
    pub gamma: BTreeMap<String, f64>,
    /// [kg/s] per pipe and compressor
    pub flow: BTreeMap<String, f64>,
    pub gamma_edge: BTreeMap<String, f64>,
    /// Mass injected at each slack junction to close the balance [kg/s].
    pub makeup: BTreeMap<String, f64>,
    pub iterations: usize,
    /// Infinity norm of the scaled residual.
    pub residual: f64,
}

/// Scaled global balance identities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Conservation {
    /// `Σ injections + Σ makeup - Σ withdrawals`
    pub mass: f64,
    /// `Σ H2 injections + Σ γ·makeup - Σ γ·withdrawals`
    pub h2: f64,
}

impl Conservation {
    pub fn max_abs(&self) -> f64 {
        self.mass.abs().max(self.h2.abs())
    }
}

/// Global mass and H2 balance at a state given by junction concentrations,
/// controls and slack makeup flows (all physical), reported in scaled units.
pub fn conservation(
    network: &Network,
    scaling: &ScalingConfig,
    gamma: &BTreeMap<String, f64>,
    controls: &ControlAssignment,
    makeup: &BTreeMap<String, f64>,
) -> Conservation {
    let phi0 = scaling.phi0;
    let mut mass = 0.0;
    let mut h2 = 0.0;
    for g in &network.gnodes {
        let gj = gamma.get(&g.junction).copied().unwrap_or(0.0);
        match g.kind {
            GNodeKind::NgSupply => mass += controls.supply_ng.get(&g.id).copied().unwrap_or(0.0),
            GNodeKind::H2Supply => {
                let s = controls.supply_h2.get(&g.id).copied().unwrap_or(0.0);
                mass += s;
                h2 += s;
            }
            GNodeKind::DemandOptimized | GNodeKind::DemandFixed => {
                let d = controls.demand.get(&g.id).copied().unwrap_or(0.0);
                mass -= d;
                h2 -= gj * d;
            }
        }
    }
    for (j, &m) in makeup {
        mass += m;
        h2 += gamma.get(j).copied().unwrap_or(0.0) * m;
    }
    Conservation {
        mass: mass / phi0,
        h2: h2 / phi0,
    }
}

impl SimulationState {
    pub fn conservation(
        &self,
        network: &Network,
        scaling: &ScalingConfig,
        controls: &ControlAssignment,
    ) -> Conservation {
        conservation(network, scaling, &self.gamma, controls, &self.makeup)
    }
}

#[derive(Debug, Clone)]
struct Edge {
    id: String,
    from: usize,
    to: usize,
    /// Index among pipes, for pipes.
    pipe: Option<usize>,
    /// Pipe coefficient or squared boost ratio.
    coef: f64,
}

/// The square system in scaled unknowns
/// `[π_j, γ_j, φ_e, γ_p, m_k]` (junctions, junctions, edges, pipes, slacks).
struct System {
    junctions: Vec<String>,
    edges: Vec<Edge>,
    n_pipes: usize,
    /// Slack junction index and scaled squared slack pressure.
    slacks: Vec<(usize, f64)>,
    supply_ng: Vec<f64>,
    supply_h2: Vec<f64>,
    demand: Vec<f64>,
    v_ng: f64,
    v_slope: f64,
}

impl System {
    fn new(
        network: &Network,
        controls: &ControlAssignment,
        gc: &GasConstants,
        scaling: &ScalingConfig,
    ) -> Result<Self> {
        let mut junctions: Vec<String> = network.junctions.iter().map(|j| j.id.clone()).collect();
        junctions.sort();
        let jidx = |id: &str| junctions.binary_search_by(|j| j.as_str().cmp(id)).expect("validated");
        let mut pipes: Vec<_> = network.pipes.iter().collect();
        pipes.sort_by(|a, b| a.id.cmp(&b.id));
        let mut comps: Vec<_> = network.compressors.iter().collect();
        comps.sort_by(|a, b| a.id.cmp(&b.id));
        let mut edges = Vec::new();
        for (k, p) in pipes.iter().enumerate() {
            edges.push(Edge {
                id: p.id.clone(),
                from: jidx(&p.from),
                to: jidx(&p.to),
                pipe: Some(k),
                coef: scaling.pipe_coefficient(p.friction, p.length, p.diameter, p.area),
            });
        }
        for c in &comps {
            let a = controls.alpha.get(&c.id).copied().unwrap_or(1.0);
            edges.push(Edge {
                id: c.id.clone(),
                from: jidx(&c.from),
                to: jidx(&c.to),
                pipe: None,
                coef: a * a,
            });
        }
        let nj = junctions.len();
        let mut slacks = Vec::new();
        for (i, id) in junctions.iter().enumerate() {
            if let Some(sigma) = network.junction(id)?.slack_pressure {
                let s = sigma / scaling.p0;
                slacks.push((i, s * s));
            }
        }
        let (mut supply_ng, mut supply_h2, mut demand) =
            (vec![0.0; nj], vec![0.0; nj], vec![0.0; nj]);
        for g in &network.gnodes {
            let j = jidx(&g.junction);
            let get = |m: &BTreeMap<String, f64>| m.get(&g.id).copied().unwrap_or(0.0) / scaling.phi0;
            match g.kind {
                GNodeKind::NgSupply => supply_ng[j] += get(&controls.supply_ng),
                GNodeKind::H2Supply => supply_h2[j] += get(&controls.supply_h2),
                GNodeKind::DemandOptimized | GNodeKind::DemandFixed => {
                    demand[j] += get(&controls.demand)
                }
            }
        }
        Ok(System {
            junctions,
            edges,
            n_pipes: pipes.len(),
            slacks,
            supply_ng,
            supply_h2,
            demand,
            v_ng: gc.a_ng * gc.a_ng / scaling.a0_sq_ref,
            v_slope: (gc.a_h2 * gc.a_h2 - gc.a_ng * gc.a_ng) / scaling.a0_sq_ref,
        })
    }

    fn nj(&self) -> usize {
        self.junctions.len()
    }

    fn len(&self) -> usize {
        2 * self.nj() + self.edges.len() + self.n_pipes + self.slacks.len()
    }

    fn pi(&self, j: usize) -> usize {
        j
    }

    fn gamma(&self, j: usize) -> usize {
        self.nj() + j
    }

    fn flow(&self, e: usize) -> usize {
        2 * self.nj() + e
    }

    fn edge_gamma(&self, p: usize) -> usize {
        2 * self.nj() + self.edges.len() + p
    }

    fn makeup(&self, k: usize) -> usize {
        2 * self.nj() + self.edges.len() + self.n_pipes + k
    }

    /// Index of the concentration carried by edge `e` into its `to` junction.
    fn carried_gamma(&self, e: usize) -> usize {
        let edge = &self.edges[e];
        match edge.pipe {
            Some(p) => self.edge_gamma(p),
            None => self.gamma(edge.from),
        }
    }

    /// Residual and, when requested, the dense Jacobian.
    fn eval(&self, x: &[f64], jac: Option<&mut DenseMatrix>) -> Vec<f64> {
        let n = self.len();
        let nj = self.nj();
        let mut f = vec![0.0; n];
        let mut dummy = DenseMatrix::zeros(0, 0);
        let want = jac.is_some();
        let j = jac.unwrap_or(&mut dummy);
        if want {
            *j = DenseMatrix::zeros(n, n);
        }
        // rows: ng balances, h2 balances, weymouth, boost (edge order), continuity, slack
        for k in 0..nj {
            let gk = x[self.gamma(k)];
            let out = self.demand[k];
            f[k] += out * (1.0 - gk) - self.supply_ng[k];
            f[nj + k] += out * gk - self.supply_h2[k];
            if want {
                j[(k, self.gamma(k))] -= out;
                j[(nj + k, self.gamma(k))] += out;
            }
        }
        for (e, edge) in self.edges.iter().enumerate() {
            let phi = x[self.flow(e)];
            // outflow at `from` with the junction concentration
            let (a, ga) = (edge.from, self.gamma(edge.from));
            f[a] += phi * (1.0 - x[ga]);
            f[nj + a] += phi * x[ga];
            // inflow at `to` with the carried concentration
            let (b, gb) = (edge.to, self.carried_gamma(e));
            f[b] -= phi * (1.0 - x[gb]);
            f[nj + b] -= phi * x[gb];
            if want {
                let fe = self.flow(e);
                j[(a, fe)] += 1.0 - x[ga];
                j[(a, ga)] -= phi;
                j[(nj + a, fe)] += x[ga];
                j[(nj + a, ga)] += phi;
                j[(b, fe)] -= 1.0 - x[gb];
                j[(b, gb)] += phi;
                j[(nj + b, fe)] -= x[gb];
                j[(nj + b, gb)] -= phi;
            }
        }
        for (k, &(s, _)) in self.slacks.iter().enumerate() {
            let m = x[self.makeup(k)];
            let gs = x[self.gamma(s)];
            f[s] -= m * (1.0 - gs);
            f[nj + s] -= m * gs;
            if want {
                j[(s, self.makeup(k))] -= 1.0 - gs;
                j[(s, self.gamma(s))] += m;
                j[(nj + s, self.makeup(k))] -= gs;
                j[(nj + s, self.gamma(s))] -= m;
            }
        }
        let mut r = 2 * nj;
        for (e, edge) in self.edges.iter().enumerate() {
            let (pa, pb, fe) = (self.pi(edge.from), self.pi(edge.to), self.flow(e));
            let phi = x[fe];
            match edge.pipe {
                Some(p) => {
                    let ge = self.edge_gamma(p);
                    let v = self.v_ng + self.v_slope * x[ge];
                    f[r] = x[pa] - x[pb] - edge.coef * v * phi * phi.abs();
                    if want {
                        j[(r, pa)] = 1.0;
                        j[(r, pb)] = -1.0;
                        j[(r, fe)] = -2.0 * edge.coef * v * phi.abs();
                        j[(r, ge)] = -edge.coef * self.v_slope * phi * phi.abs();
                    }
                }
                None => {
                    f[r] = x[pb] - edge.coef * x[pa];
                    if want {
                        j[(r, pb)] = 1.0;
                        j[(r, pa)] = -edge.coef;
                    }
                }
            }
            r += 1;
        }
        for edge in &self.edges {
            if let Some(p) = edge.pipe {
                f[r] = x[self.gamma(edge.from)] - x[self.edge_gamma(p)];
                if want {
                    j[(r, self.gamma(edge.from))] = 1.0;
                    j[(r, self.edge_gamma(p))] = -1.0;
                }
                r += 1;
            }
        }
        for &(s, pi_s) in &self.slacks {
            f[r] = x[self.pi(s)] - pi_s;
            if want {
                j[(r, self.pi(s))] = 1.0;
            }
            r += 1;
        }
        debug_assert_eq!(r, n);
        f
    }

    /// Flat pressures propagated through compressors, spanning-tree flows and a
    /// uniform concentration from the injection ratio.
    fn initial_guess(&self) -> Vec<f64> {
        let nj = self.nj();
        let mut x = vec![0.0; self.len()];
        let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); nj];
        for (e, edge) in self.edges.iter().enumerate() {
            adj[edge.from].push((e, edge.to));
            adj[edge.to].push((e, edge.from));
        }
        let (root, root_pi) = self.slacks[0];
        let mut seen = vec![false; nj];
        let mut parent: Vec<Option<usize>> = vec![None; nj];
        let mut order = Vec::with_capacity(nj);
        let mut queue = VecDeque::from([root]);
        seen[root] = true;
        x[self.pi(root)] = root_pi;
        while let Some(a) = queue.pop_front() {
            order.push(a);
            for &(e, b) in &adj[a] {
                if seen[b] {
                    continue;
                }
                seen[b] = true;
                parent[b] = Some(e);
                let edge = &self.edges[e];
                x[self.pi(b)] = match (edge.pipe, edge.from == a) {
                    (Some(_), _) => x[self.pi(a)],
                    (None, true) => edge.coef * x[self.pi(a)],
                    (None, false) => x[self.pi(a)] / edge.coef,
                };
                queue.push_back(b);
            }
        }
        for &(s, pi_s) in &self.slacks {
            x[self.pi(s)] = pi_s;
        }
        // subtree net injections, leaves first
        let mut net: Vec<f64> = (0..nj)
            .map(|k| self.supply_ng[k] + self.supply_h2[k] - self.demand[k])
            .collect();
        for &b in order.iter().rev() {
            if let Some(e) = parent[b] {
                let edge = &self.edges[e];
                // flow from the parent side into the subtree of `b`
                let into = -net[b];
                x[self.flow(e)] = if edge.to == b { into } else { -into };
                let a = if edge.to == b { edge.from } else { edge.to };
                net[a] += net[b];
            }
        }
        x[self.makeup(0)] = -net[root];
        let ng: f64 = self.supply_ng.iter().sum();
        let h2: f64 = self.supply_h2.iter().sum();
        let gamma = if ng + h2 > 0.0 { h2 / (ng + h2) } else { 0.0 };
        for k in 0..nj {
            x[self.gamma(k)] = gamma;
        }
        for p in 0..self.n_pipes {
            x[self.edge_gamma(p)] = gamma;
        }
        x
    }

    fn floor_pressures(&self, x: &mut [f64]) -> bool {
        let mut active = false;
        for k in 0..self.nj() {
            let i = self.pi(k);
            if x[i] < PRESSURE_SQ_FLOOR {
                x[i] = PRESSURE_SQ_FLOOR;
                active = true;
            }
        }
        active
    }

    fn floored_junction(&self, x: &[f64]) -> Option<&str> {
        (0..self.nj())
            .find(|&k| x[self.pi(k)] <= PRESSURE_SQ_FLOOR)
            .map(|k| self.junctions[k].as_str())
    }
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

/// Newton step, falling back to regularized least squares when `J` is singular.
fn newton_step(jac: &DenseMatrix, f: &[f64]) -> Vec<f64> {
    let rhs: Vec<f64> = f.iter().map(|v| -v).collect();
    let lu = Lu::factor(jac, 1e-13 * jac.max_abs().max(1.0));
    if !lu.is_singular() {
        let dx = lu.solve(&rhs);
        if dx.iter().all(|v| v.is_finite()) {
            return dx;
        }
    }
    let n = jac.ncols;
    let mut normal = DenseMatrix::zeros(n, n);
    for r in 0..jac.nrows {
        let row = jac.row(r);
        for a in 0..n {
            if row[a] == 0.0 {
                continue;
            }
            for b in 0..n {
                normal[(a, b)] += row[a] * row[b];
            }
        }
    }
    let scale = (0..n).fold(0.0_f64, |m, i| m.max(normal[(i, i)])).max(1.0);
    for i in 0..n {
        normal[(i, i)] += 1e-12 * scale;
    }
    Lu::factor(&normal, 0.0).solve(&jac.tr_mul_vec(&rhs))
}

/// Solve the steady-state system for fixed controls.
pub fn simulate(
    network: &Network,
    controls: &ControlAssignment,
    gc: &GasConstants,
    scaling: &ScalingConfig,
) -> Result<SimulationState> {
    network.validate()?;
    gc.validate()?;
    controls.validate(network)?;
    let sys = System::new(network, controls, gc, scaling)?;
    let mut x = sys.initial_guess();
    let mut jac = DenseMatrix::zeros(0, 0);
    let mut f = sys.eval(&x, Some(&mut jac));
    let mut iterations = 0;
    loop {
        let res = norm_inf(&f);
        debug!("simulate iter {iterations:3} residual {res:.3e}");
        if res <= RESIDUAL_TOLERANCE {
            break;
        }
        if iterations == MAX_ITERATIONS {
            return fail(&sys, &x, iterations, res);
        }
        iterations += 1;
        let dx = newton_step(&jac, &f);
        let f_norm = norm2(&f);
        let mut t = 1.0;
        let accepted = loop {
            let mut xt: Vec<f64> = x.iter().zip(&dx).map(|(a, d)| a + t * d).collect();
            sys.floor_pressures(&mut xt);
            let ft = sys.eval(&xt, None);
            let nt = norm2(&ft);
            if nt.is_finite() && nt <= (1.0 - 1e-4 * t) * f_norm {
                break Some(xt);
            }
            t *= 0.5;
            if t < 1e-10 {
                break None;
            }
        };
        match accepted {
            Some(xt) => {
                x = xt;
                f = sys.eval(&x, Some(&mut jac));
            }
            None if res <= 1e-10 => break,
            None => return fail(&sys, &x, iterations, res),
        }
    }
    if let Some(j) = sys.floored_junction(&x) {
        return Err(Error::NegativePressure {
            junction: j.to_string(),
        });
    }
    Ok(state(&sys, &x, scaling, iterations, norm_inf(&f)))
}

fn fail<T>(sys: &System, x: &[f64], iterations: usize, residual: f64) -> Result<T> {
    match sys.floored_junction(x) {
        Some(j) => Err(Error::NegativePressure {
            junction: j.to_string(),
        }),
        None => Err(Error::NonConvergence {
            iterations,
            residual,
        }),
    }
}

fn state(
    sys: &System,
    x: &[f64],
    scaling: &ScalingConfig,
    iterations: usize,
    residual: f64,
) -> SimulationState {
    let mut s = SimulationState {
        pressure: BTreeMap::new(),
        gamma: BTreeMap::new(),
        flow: BTreeMap::new(),
        gamma_edge: BTreeMap::new(),
        makeup: BTreeMap::new(),
        iterations,
        residual,
    };
    for (k, id) in sys.junctions.iter().enumerate() {
        s.pressure
            .insert(id.clone(), x[sys.pi(k)].sqrt() * scaling.p0);
        s.gamma.insert(id.clone(), x[sys.gamma(k)]);
    }
    for (e, edge) in sys.edges.iter().enumerate() {
        s.flow.insert(edge.id.clone(), x[sys.flow(e)] * scaling.phi0);
        if let Some(p) = edge.pipe {
            s.gamma_edge.insert(edge.id.clone(), x[sys.edge_gamma(p)]);
        }
    }
    for (k, &(j, _)) in sys.slacks.iter().enumerate() {
        s.makeup
            .insert(sys.junctions[j].clone(), x[sys.makeup(k)] * scaling.phi0);
    }
    s
}

/// [`simulate`] with the gas constants and scaling of the network file.
pub fn simulate_network(network: &Network, controls: &ControlAssignment) -> Result<SimulationState> {
    let scaling = ScalingConfig::for_network(network)?;
    simulate(network, controls, &network.gas_constants, &scaling)
}

/// Relative deviation of one state variable between optimizer and simulator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Deviation {
    /// `kind:id`, e.g. `p:J3`.
    pub variable: String,
    pub solver: f64,
    pub simulated: f64,
    pub relative: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrosscheckReport {
    pub deviations: Vec<Deviation>,
    pub max_relative: f64,
    /// Variable with the largest deviation.
    pub worst: Option<String>,
    pub pass: bool,
}

/// `|a - b| / max(|a|, floor)`
fn relative(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(floor)
}

/// Simulate with the controls of an optimal solution and compare pressures,
/// concentrations and flows. Slack makeup flows are compared against zero.
pub fn crosscheck(
    solution: &Solution,
    network: &Network,
    gc: &GasConstants,
    scaling: &ScalingConfig,
) -> Result<CrosscheckReport> {
    if !solution.is_optimal() {
        return Err(Error::NotOptimal(solution.status.to_string()));
    }
    let controls = ControlAssignment::from_solution(solution);
    let sim = simulate(network, &controls, gc, scaling)?;
    let p = &solution.primal;
    let mut deviations = Vec::new();
    let mut compare = |kind: &str, solver: &BTreeMap<String, f64>, simulated: &BTreeMap<String, f64>, floor: f64| {
        for (id, &a) in solver {
            let b = simulated.get(id).copied().unwrap_or(f64::NAN);
            deviations.push(Deviation {
                variable: format!("{kind}:{id}"),
                solver: a,
                simulated: b,
                relative: relative(a, b, floor),
            });
        }
    };
    compare("p", &p.pressure, &sim.pressure, scaling.p0);
    compare("gamma", &p.gamma, &sim.gamma, 1.0);
    compare("phi", &p.flow, &sim.flow, scaling.phi0);
    compare("gamma_edge", &p.gamma_edge, &sim.gamma_edge, 1.0);
    let zero: BTreeMap<String, f64> = sim.makeup.keys().map(|k| (k.clone(), 0.0)).collect();
    compare("makeup", &zero, &sim.makeup, scaling.phi0);
    let (max_relative, worst) = deviations.iter().fold((0.0_f64, None), |(m, w), d| {
        if d.relative > m || d.relative.is_nan() {
            (if d.relative.is_nan() { f64::INFINITY } else { d.relative }, Some(d.variable.clone()))
        } else {
            (m, w)
        }
    });
    Ok(CrosscheckReport {
        pass: max_relative <= CROSSCHECK_TOLERANCE,
        deviations,
        max_relative,
        worst,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testnets;

    fn controls(pairs: &[(&str, &str, f64)]) -> ControlAssignment {
        let mut c = ControlAssignment::default();
        for &(kind, id, v) in pairs {
            let map = match kind {
                "ng" => &mut c.supply_ng,
                "h2" => &mut c.supply_h2,
                "d" => &mut c.demand,
                _ => &mut c.alpha,
            };
            map.insert(id.to_string(), v);
        }
        c
    }

    #[test]
    fn zero_controls_give_flat_pressure() {
        let net = testnets::single_pipe();
        let s = simulate_network(&net, &ControlAssignment::default()).unwrap();
        for p in s.pressure.values() {
            assert!((p - 5e6).abs() < 1e-6);
        }
        for f in s.flow.values() {
            assert!(f.abs() < 1e-12);
        }
    }

    #[test]
    fn makeup_absorbs_imbalance() {
        let net = testnets::single_pipe();
        let c = controls(&[("ng", "S1", 1.5), ("d", "D1", 2.0)]);
        let s = simulate_network(&net, &c).unwrap();
        assert!((s.makeup["J1"] - 0.5).abs() < 1e-9);
        assert!((s.flow["P1"] - 2.0).abs() < 1e-9);
    }

    #[test]
    fn rejects_wrong_kind_and_low_boost() {
        let net = testnets::single_pipe();
        let c = controls(&[("ng", "S2", 1.0)]);
        assert!(matches!(simulate_network(&net, &c), Err(Error::Validation { .. })));
        let c = controls(&[("alpha", "C1", 0.9)]);
        assert!(matches!(simulate_network(&net, &c), Err(Error::Validation { .. })));
    }

    #[test]
    fn excessive_withdrawal_reports_pressure() {
        let net = testnets::single_pipe();
        let c = controls(&[("ng", "S1", 60.0), ("d", "D1", 60.0)]);
        let err = simulate_network(&net, &c).unwrap_err();
        assert!(matches!(err, Error::NegativePressure { .. } | Error::NonConvergence { .. }));
    }

    #[test]
    fn optimal_solutions_pass_crosscheck() {
        for net in [testnets::single_pipe(), testnets::eight_node()] {
            let problem = crate::nlp::assemble_network(&net).unwrap();
            let sol = crate::solver::solve(&problem, &net.solver, None).unwrap();
            assert!(sol.is_optimal());
            let report = crosscheck(&sol, &net, &problem.gas_constants, &problem.scaling).unwrap();
            assert!(report.pass, "{report:?}");
        }
    }

    #[test]
    fn corrupted_pressure_is_named() {
        let net = testnets::single_pipe();
        let problem = crate::nlp::assemble_network(&net).unwrap();
        let mut sol = crate::solver::solve(&problem, &net.solver, None).unwrap();
        *sol.primal.pressure.get_mut("J3").unwrap() *= 1.01;
        let report = crosscheck(&sol, &net, &problem.gas_constants, &problem.scaling).unwrap();
        assert!(!report.pass);
        assert_eq!(report.worst.as_deref(), Some("p:J3"));
    }
}
