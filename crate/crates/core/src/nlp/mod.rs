//! The economic transport problem in non-dimensional form.
//!
//! maximize `J_EV` over supplies, withdrawals, boost ratios, flows, concentrations
//! and pressures, subject to nodal NG and H2 mass balances, pipe and compressor
//! relations, concentration continuity along pipes, slack pressures and
//! engineering / market limits. The solver minimizes `obj_scale * (-J_EV)`.

mod layout;
pub(crate) mod poly;
mod scaling;

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

pub use layout::{ConstraintKind, ConstraintRow, VarKind, VariableLayout};
pub use scaling::ScalingConfig;

use crate::error::{Error, Result};
use crate::linalg::SparseMatrix;
use crate::network::{EdgeKind, GNodeKind, Network};
use crate::physics::{self, GasConstants};
use poly::Polynomial;

pub const DEFAULT_OBJECTIVE_SCALE: f64 = 1e-2;

/// Physical-unit values of every decision variable, keyed by component id.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PhysicalPoint {
    /// [kg/s]
    pub supply_h2: BTreeMap<String, f64>,
    /// [kg/s]
    pub supply_ng: BTreeMap<String, f64>,
    /// [kg/s]
    pub demand: BTreeMap<String, f64>,
    pub alpha: BTreeMap<String, f64>,
    /// [kg/s]
    pub flow: BTreeMap<String, f64>,
    pub gamma_edge: BTreeMap<String, f64>,
    pub gamma: BTreeMap<String, f64>,
    /// [Pa]
    pub pressure: BTreeMap<String, f64>,
}

impl PhysicalPoint {
    pub fn map(&self, kind: VarKind) -> &BTreeMap<String, f64> {
        match kind {
            VarKind::SupplyH2 => &self.supply_h2,
            VarKind::SupplyNg => &self.supply_ng,
            VarKind::Demand => &self.demand,
            VarKind::Boost => &self.alpha,
            VarKind::Flow => &self.flow,
            VarKind::EdgeGamma => &self.gamma_edge,
            VarKind::Gamma => &self.gamma,
            VarKind::Pressure => &self.pressure,
        }
    }

    pub fn map_mut(&mut self, kind: VarKind) -> &mut BTreeMap<String, f64> {
        match kind {
            VarKind::SupplyH2 => &mut self.supply_h2,
            VarKind::SupplyNg => &mut self.supply_ng,
            VarKind::Demand => &mut self.demand,
            VarKind::Boost => &mut self.alpha,
            VarKind::Flow => &mut self.flow,
            VarKind::EdgeGamma => &mut self.gamma_edge,
            VarKind::Gamma => &mut self.gamma,
            VarKind::Pressure => &mut self.pressure,
        }
    }
}

#[derive(Debug, Clone)]
struct CompressorTerm {
    alpha: usize,
    flow: usize,
    gamma: usize,
    /// `eta * phi0`, so that the cost is `weight * W(alpha, phī, gamma)` in $/s.
    weight: f64,
}

/// Fully assembled, immutable optimization instance.
#[derive(Debug, Clone)]
pub struct AssembledProblem {
    pub network: Network,
    pub gas_constants: GasConstants,
    pub scaling: ScalingConfig,
    pub layout: VariableLayout,
    /// Multiplier applied to `-J_EV` in the minimized objective.
    pub obj_scale: f64,
    /// Scaled simple bounds (flows, withdrawals, edge concentrations).
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub eq_rows: Vec<ConstraintRow>,
    pub ineq_rows: Vec<ConstraintRow>,
    value: Polynomial,
    compressors: Vec<CompressorTerm>,
    eq: Vec<Polynomial>,
    ineq: Vec<Polynomial>,
    row_index: HashMap<String, (bool, usize)>,
}

fn require(value: Option<f64>, gnode: &str, field: &str) -> Result<f64> {
    value.ok_or_else(|| Error::Assembly {
        element: gnode.to_string(),
        message: format!("missing `{field}`"),
    })
}

/// Assemble with the scaling implied by the network file.
pub fn assemble_network(network: &Network) -> Result<AssembledProblem> {
    let scaling = ScalingConfig::for_network(network)?;
    assemble(network, &network.gas_constants, &scaling)
}

pub fn assemble(
    network: &Network,
    gc: &GasConstants,
    scaling: &ScalingConfig,
) -> Result<AssembledProblem> {
    network.validate()?;
    gc.validate()?;
    let layout = VariableLayout::new(network);
    let n = layout.len();
    let v = |kind, id: &str| layout.at(kind, id);
    let (p0, phi0) = (scaling.p0, scaling.phi0);
    let dr = gc.r_h2 - gc.r_ng;

    // objective: J_EV in $/s
    let mut value = Polynomial::default();
    for g in &network.gnodes {
        let gamma = v(VarKind::Gamma, &g.junction);
        match g.kind {
            GNodeKind::NgSupply | GNodeKind::H2Supply => {
                let price = require(g.offer_price, &g.id, "offer_price")?;
                let kind = if g.kind == GNodeKind::NgSupply {
                    VarKind::SupplyNg
                } else {
                    VarKind::SupplyH2
                };
                value.add(-price * phi0, &[v(kind, &g.id)]);
            }
            GNodeKind::DemandOptimized | GNodeKind::DemandFixed => {
                let bid = if g.kind == GNodeKind::DemandOptimized {
                    require(g.energy_bid_price, &g.id, "energy_bid_price")?
                } else {
                    g.energy_bid_price.unwrap_or(0.0)
                };
                let carbon = g.carbon_price.unwrap_or(0.0);
                let d = v(VarKind::Demand, &g.id);
                value.add(bid * phi0 * gc.r_ng, &[d]);
                value.add(
                    phi0 * (bid * dr + carbon * gc.carbon_offset_factor()),
                    &[d, gamma],
                );
            }
        }
    }
    let compressors = network
        .compressors
        .iter()
        .map(|c| CompressorTerm {
            alpha: v(VarKind::Boost, &c.id),
            flow: v(VarKind::Flow, &c.id),
            gamma: v(VarKind::Gamma, &c.from),
            weight: gc.eta * phi0,
        })
        .collect();

    let mut eq_rows = Vec::new();
    let mut eq = Vec::new();
    let mut push_eq = |kind, component: &str, scale: f64, p: Polynomial| {
        eq_rows.push(ConstraintRow {
            kind,
            component: component.to_string(),
            scale,
        });
        eq.push(p);
    };

    let mut junction_ids: Vec<&str> = network.junctions.iter().map(|j| j.id.as_str()).collect();
    junction_ids.sort_unstable();
    for &j in &junction_ids {
        let inc = network.incidence(j)?;
        let gj = v(VarKind::Gamma, j);
        let mut ng = Polynomial::default();
        let mut h2 = Polynomial::default();
        for e in &inc.outgoing {
            let f = v(VarKind::Flow, &e.id);
            ng.add(1.0, &[f]).add(-1.0, &[gj, f]);
            h2.add(1.0, &[gj, f]);
        }
        for e in &inc.incoming {
            let f = v(VarKind::Flow, &e.id);
            let ge = match e.kind {
                EdgeKind::Pipe => v(VarKind::EdgeGamma, &e.id),
                EdgeKind::Compressor => v(VarKind::Gamma, &network.compressor(&e.id)?.from),
            };
            ng.add(-1.0, &[f]).add(1.0, &[ge, f]);
            h2.add(-1.0, &[ge, f]);
        }
        for gid in &inc.gnodes {
            let g = network.gnode(gid)?;
            match g.kind {
                GNodeKind::NgSupply => {
                    ng.add(-1.0, &[v(VarKind::SupplyNg, gid)]);
                }
                GNodeKind::H2Supply => {
                    h2.add(-1.0, &[v(VarKind::SupplyH2, gid)]);
                }
                GNodeKind::DemandOptimized | GNodeKind::DemandFixed => {
                    let d = v(VarKind::Demand, gid);
                    ng.add(1.0, &[d]).add(-1.0, &[gj, d]);
                    h2.add(1.0, &[gj, d]);
                }
            }
        }
        push_eq(ConstraintKind::BalanceNg, j, 1.0 / phi0, ng);
        push_eq(ConstraintKind::BalanceH2, j, 1.0 / phi0, h2);
    }

    let v_ng = gc.a_ng * gc.a_ng / scaling.a0_sq_ref;
    let v_slope = (gc.a_h2 * gc.a_h2 - gc.a_ng * gc.a_ng) / scaling.a0_sq_ref;
    let mut pipes: Vec<_> = network.pipes.iter().collect();
    pipes.sort_by(|a, b| a.id.cmp(&b.id));
    for p in &pipes {
        let k = scaling.pipe_coefficient(p.friction, p.length, p.diameter, p.area);
        let (pi, pj) = (v(VarKind::Pressure, &p.from), v(VarKind::Pressure, &p.to));
        let (f, ge) = (v(VarKind::Flow, &p.id), v(VarKind::EdgeGamma, &p.id));
        let mut row = Polynomial::default();
        row.add(1.0, &[pi, pi])
            .add(-1.0, &[pj, pj])
            .add(-k * v_ng, &[f, f])
            .add(-k * v_slope, &[ge, f, f]);
        push_eq(ConstraintKind::Weymouth, &p.id, 1.0 / (p0 * p0), row);
    }
    let mut comps: Vec<_> = network.compressors.iter().collect();
    comps.sort_by(|a, b| a.id.cmp(&b.id));
    for c in &comps {
        let (pi, pj) = (v(VarKind::Pressure, &c.from), v(VarKind::Pressure, &c.to));
        let a = v(VarKind::Boost, &c.id);
        let mut row = Polynomial::default();
        row.add(1.0, &[pj, pj]).add(-1.0, &[a, a, pi, pi]);
        push_eq(ConstraintKind::Boost, &c.id, 1.0 / (p0 * p0), row);
    }
    for p in &pipes {
        let mut row = Polynomial::default();
        row.add(1.0, &[v(VarKind::Gamma, &p.from)])
            .add(-1.0, &[v(VarKind::EdgeGamma, &p.id)]);
        push_eq(ConstraintKind::Continuity, &p.id, 1.0, row);
    }
    for &j in &junction_ids {
        if let Some(sigma) = network.junction(j)?.slack_pressure {
            let mut row = Polynomial::constant(-sigma / p0);
            row.add(1.0, &[v(VarKind::Pressure, j)]);
            push_eq(ConstraintKind::Slack, j, 1.0 / p0, row);
        }
    }
    let mut gnodes: Vec<_> = network.gnodes.iter().collect();
    gnodes.sort_by(|a, b| a.id.cmp(&b.id));
    for g in gnodes.iter().filter(|g| g.kind == GNodeKind::DemandFixed) {
        let target = require(g.g_fixed, &g.id, "g_fixed")?;
        let (d, gamma) = (v(VarKind::Demand, &g.id), v(VarKind::Gamma, &g.junction));
        let mut row = Polynomial::constant(-target / phi0);
        row.add(gc.r_ng, &[d]).add(dr, &[d, gamma]);
        push_eq(ConstraintKind::FixedDemand, &g.id, 1.0 / phi0, row);
    }

    let mut ineq_rows = Vec::new();
    let mut ineq = Vec::new();
    let mut push_ineq = |kind, component: &str, scale: f64, p: Polynomial| {
        ineq_rows.push(ConstraintRow {
            kind,
            component: component.to_string(),
            scale,
        });
        ineq.push(p);
    };
    for &j in &junction_ids {
        let junction = network.junction(j)?;
        let (pv, gv) = (v(VarKind::Pressure, j), v(VarKind::Gamma, j));
        let mut row = Polynomial::constant(-junction.p_min / p0);
        row.add(1.0, &[pv]);
        push_ineq(ConstraintKind::PressureMin, j, 1.0 / p0, row);
        let mut row = Polynomial::constant(-junction.gamma_min);
        row.add(1.0, &[gv]);
        push_ineq(ConstraintKind::GammaMin, j, 1.0, row);
        let mut row = Polynomial::constant(junction.gamma_max);
        row.add(-1.0, &[gv]);
        push_ineq(ConstraintKind::GammaMax, j, 1.0, row);
    }
    for c in &comps {
        let a = v(VarKind::Boost, &c.id);
        let mut row = Polynomial::constant(c.p_discharge_max / p0);
        row.add(-1.0, &[a, v(VarKind::Pressure, &c.from)]);
        push_ineq(ConstraintKind::DischargeMax, &c.id, 1.0 / p0, row);
        let mut row = Polynomial::constant(-1.0);
        row.add(1.0, &[a]);
        push_ineq(ConstraintKind::AlphaMin, &c.id, 1.0, row);
        let mut row = Polynomial::constant(c.alpha_max);
        row.add(-1.0, &[a]);
        push_ineq(ConstraintKind::AlphaMax, &c.id, 1.0, row);
    }
    for g in gnodes.iter().filter(|g| g.kind.is_supply()) {
        let kind = if g.kind == GNodeKind::NgSupply {
            VarKind::SupplyNg
        } else {
            VarKind::SupplyH2
        };
        let s = v(kind, &g.id);
        let mut row = Polynomial::default();
        row.add(1.0, &[s]);
        push_ineq(ConstraintKind::SupplyMin, &g.id, 1.0 / phi0, row);
        if let Some(s_max) = g.s_max {
            let mut row = Polynomial::constant(s_max / phi0);
            row.add(-1.0, &[s]);
            push_ineq(ConstraintKind::SupplyMax, &g.id, 1.0 / phi0, row);
        }
    }
    for g in gnodes.iter().filter(|g| g.kind == GNodeKind::DemandOptimized) {
        let g_max = require(g.g_max, &g.id, "g_max")?;
        let (d, gamma) = (v(VarKind::Demand, &g.id), v(VarKind::Gamma, &g.junction));
        let mut row = Polynomial::constant(g_max / phi0);
        row.add(-gc.r_ng, &[d]).add(-dr, &[d, gamma]);
        push_ineq(ConstraintKind::EnergyMax, &g.id, 1.0 / phi0, row);
    }

    let mut lower = vec![f64::NEG_INFINITY; n];
    let mut upper = vec![f64::INFINITY; n];
    for (i, (kind, _)) in layout.entries().iter().enumerate() {
        match kind {
            VarKind::Flow | VarKind::Demand => lower[i] = 0.0,
            VarKind::EdgeGamma => {
                lower[i] = 0.0;
                upper[i] = 1.0;
            }
            _ => {}
        }
    }

    let mut row_index = HashMap::new();
    for (i, r) in eq_rows.iter().enumerate() {
        row_index.insert(r.id(), (true, i));
    }
    for (i, r) in ineq_rows.iter().enumerate() {
        row_index.insert(r.id(), (false, i));
    }

    Ok(AssembledProblem {
        network: network.clone(),
        gas_constants: *gc,
        scaling: *scaling,
        layout,
        obj_scale: DEFAULT_OBJECTIVE_SCALE,
        lower,
        upper,
        eq_rows,
        ineq_rows,
        value,
        compressors,
        eq,
        ineq,
        row_index,
    })
}

impl AssembledProblem {
    pub fn n(&self) -> usize {
        self.layout.len()
    }

    pub fn n_eq(&self) -> usize {
        self.eq.len()
    }

    pub fn n_ineq(&self) -> usize {
        self.ineq.len()
    }

    /// Row position of a constraint id such as `balance_ng:J3`; `true` marks equalities.
    pub fn constraint_index(&self, id: &str) -> Option<(bool, usize)> {
        self.row_index.get(id).copied()
    }

    /// Economic value `J_EV` [$/s] at a scaled point.
    pub fn economic_value(&self, x: &[f64]) -> f64 {
        let compression: f64 = self
            .compressors
            .iter()
            .map(|c| {
                c.weight
                    * physics::compressor_power_raw(x[c.alpha], x[c.flow], x[c.gamma], &self.gas_constants)
            })
            .sum();
        self.value.eval(x) - compression
    }

    /// Minimized objective `obj_scale * (-J_EV)`.
    pub fn objective(&self, x: &[f64]) -> f64 {
        -self.obj_scale * self.economic_value(x)
    }

    pub fn objective_gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.n()];
        self.value.gradient(x, -self.obj_scale, |i, v| g[i] += v);
        for c in &self.compressors {
            let (_, grad, _) = physics::compressor_power_derivatives(
                x[c.alpha],
                x[c.flow],
                x[c.gamma],
                &self.gas_constants,
            );
            let w = self.obj_scale * c.weight;
            g[c.alpha] += w * grad[0];
            g[c.flow] += w * grad[1];
            g[c.gamma] += w * grad[2];
        }
        g
    }

    pub fn equality_residuals(&self, x: &[f64]) -> Vec<f64> {
        self.eq.iter().map(|p| p.eval(x)).collect()
    }

    pub fn inequality_residuals(&self, x: &[f64]) -> Vec<f64> {
        self.ineq.iter().map(|p| p.eval(x)).collect()
    }

    fn jacobian(&self, rows: &[Polynomial], x: &[f64]) -> SparseMatrix {
        let mut m = SparseMatrix::new(rows.len(), self.n());
        for (r, p) in rows.iter().enumerate() {
            p.gradient(x, 1.0, |c, v| m.push(r, c, v));
        }
        m
    }

    pub fn equality_jacobian(&self, x: &[f64]) -> SparseMatrix {
        self.jacobian(&self.eq, x)
    }

    pub fn inequality_jacobian(&self, x: &[f64]) -> SparseMatrix {
        self.jacobian(&self.ineq, x)
    }

    /// Hessian of `obj_factor * (-J_EV) + eq_mult·h(x) - ineq_mult·g(x)`, both triangles.
    pub fn lagrangian_hessian(
        &self,
        x: &[f64],
        obj_factor: f64,
        eq_mult: &[f64],
        ineq_mult: &[f64],
    ) -> SparseMatrix {
        assert_eq!(eq_mult.len(), self.n_eq());
        assert_eq!(ineq_mult.len(), self.n_ineq());
        let n = self.n();
        let mut h = SparseMatrix::new(n, n);
        self.value.hessian(x, -obj_factor, |a, b, v| h.push(a, b, v));
        for c in &self.compressors {
            let (_, _, hess) = physics::compressor_power_derivatives(
                x[c.alpha],
                x[c.flow],
                x[c.gamma],
                &self.gas_constants,
            );
            let idx = [c.alpha, c.flow, c.gamma];
            let w = obj_factor * c.weight;
            for (a, row) in hess.iter().enumerate() {
                for (b, &val) in row.iter().enumerate() {
                    if val != 0.0 {
                        h.push(idx[a], idx[b], w * val);
                    }
                }
            }
        }
        for (p, &l) in self.eq.iter().zip(eq_mult) {
            if l != 0.0 {
                p.hessian(x, l, |a, b, v| h.push(a, b, v));
            }
        }
        for (p, &m) in self.ineq.iter().zip(ineq_mult) {
            if m != 0.0 {
                p.hessian(x, -m, |a, b, v| h.push(a, b, v));
            }
        }
        h
    }

    fn unit(&self, kind: VarKind) -> f64 {
        match kind {
            VarKind::SupplyH2 | VarKind::SupplyNg | VarKind::Demand | VarKind::Flow => {
                self.scaling.phi0
            }
            VarKind::Pressure => self.scaling.p0,
            VarKind::Boost | VarKind::EdgeGamma | VarKind::Gamma => 1.0,
        }
    }

    /// Physical-unit values of a scaled point.
    pub fn rescale_solution(&self, x: &[f64]) -> PhysicalPoint {
        let mut point = PhysicalPoint::default();
        for (i, (kind, id)) in self.layout.entries().iter().enumerate() {
            point
                .map_mut(*kind)
                .insert(id.clone(), x[i] * self.unit(*kind));
        }
        point
    }

    /// Scaled vector from physical values; missing entries are an error.
    pub fn scale_point(&self, point: &PhysicalPoint) -> Result<Vec<f64>> {
        self.layout
            .entries()
            .iter()
            .map(|(kind, id)| {
                point
                    .map(*kind)
                    .get(id)
                    .map(|v| v / self.unit(*kind))
                    .ok_or_else(|| Error::UnknownId {
                        kind: "variable",
                        id: format!("{kind}:{id}"),
                    })
            })
            .collect()
    }

    /// Variables touched by a row, in index order.
    pub fn row_variables(&self, equality: bool, row: usize) -> Vec<usize> {
        if equality {
            self.eq[row].variables()
        } else {
            self.ineq[row].variables()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testnets;

    #[test]
    fn single_pipe_counts() {
        let p = assemble_network(&testnets::single_pipe()).unwrap();
        assert_eq!(p.n(), 13);
        let names: Vec<String> = (0..p.n()).map(|i| p.layout.name(i)).collect();
        assert_eq!(
            names,
            [
                "s_h2:S2", "s_ng:S1", "d:D1", "alpha:C1", "phi:C1", "phi:P1", "gamma_edge:P1",
                "gamma:J1", "gamma:J2", "gamma:J3", "p:J1", "p:J2", "p:J3"
            ]
        );
        assert_eq!(p.n_eq(), 10);
        // 3 p_min, 6 gamma, 3 compressor, 4 supply, 1 energy
        assert_eq!(p.n_ineq(), 17);
    }

    #[test]
    fn slack_row_scaled() {
        let p = assemble_network(&testnets::single_pipe()).unwrap();
        let (eq, r) = p.constraint_index("slack:J1").unwrap();
        assert!(eq);
        let mut x = vec![0.5; p.n()];
        x[p.layout.at(VarKind::Pressure, "J1")] = 1.0;
        assert_eq!(p.equality_residuals(&x)[r], 0.0);
    }

    #[test]
    fn objective_arithmetic_example() {
        // one junction: NG supply 1 kg/s at $1/kg, demand 1 kg/s pure NG at $0.1/MJ
        let text = r#"
format_version = 1
[[junctions]]
id = "J1"
p_min = 1.0e6
gamma_min = 0.0
gamma_max = 1.0
slack_pressure = 2.0e6
"#;
        let mut net = crate::format::parse_network(text).unwrap();
        net.gnodes.push(crate::network::GNode {
            id: "S".into(),
            junction: "J1".into(),
            kind: GNodeKind::NgSupply,
            offer_price: Some(1.0),
            s_max: None,
            energy_bid_price: None,
            carbon_price: None,
            g_max: None,
            g_fixed: None,
        });
        let mut other = net.clone();
        other.gnodes[0].kind = GNodeKind::DemandOptimized;
        other.gnodes[0].offer_price = None;
        other.gnodes[0].energy_bid_price = Some(0.1);
        other.gnodes[0].g_max = Some(100.0);
        // separate junctions keep supply and demand apart
        other.junctions[0].id = "J2".into();
        other.gnodes[0].junction = "J2".into();
        other.gnodes[0].id = "D".into();
        net.junctions.push(other.junctions[0].clone());
        net.junctions[1].slack_pressure = None;
        net.gnodes.push(other.gnodes[0].clone());
        net.pipes.push(crate::network::Pipe {
            id: "P".into(),
            from: "J1".into(),
            to: "J2".into(),
            length: 100.0,
            diameter: 0.5,
            area: 0.2,
            friction: 0.01,
        });
        let p = assemble_network(&net).unwrap();
        let phi0 = p.scaling.phi0;
        let mut x = vec![0.0; p.n()];
        x[p.layout.at(VarKind::SupplyNg, "S")] = 1.0 / phi0;
        x[p.layout.at(VarKind::Demand, "D")] = 1.0 / phi0;
        assert!((p.economic_value(&x) - 3.42).abs() < 1e-12);
        assert!((p.objective(&x) + 0.0342).abs() < 1e-14);
        let zero = vec![0.0; p.n()];
        assert_eq!(p.economic_value(&zero), 0.0);
    }

    #[test]
    fn energy_row_arithmetic() {
        let mut net = testnets::single_pipe();
        net.gnode_mut("D1").unwrap().g_max = Some(140.0);
        let p = assemble_network(&net).unwrap();
        let phi0 = p.scaling.phi0;
        let mut x = vec![0.5; p.n()];
        x[p.layout.at(VarKind::Demand, "D1")] = 2.0 / phi0;
        x[p.layout.at(VarKind::Gamma, "J3")] = 0.1;
        let (_, r) = p.constraint_index("energy_max:D1").unwrap();
        let physical = p.inequality_residuals(&x)[r] / p.ineq_rows[r].scale;
        assert!((physical - 32.08).abs() < 1e-10);
    }

    #[test]
    fn pressure_min_active_at_boundary() {
        let mut net = testnets::single_pipe();
        net.junction_mut("J3").unwrap().p_min = 3e6;
        let p = assemble_network(&net).unwrap();
        let mut x = vec![1.0; p.n()];
        x[p.layout.at(VarKind::Pressure, "J3")] = 3e6 / p.scaling.p0;
        let (_, r) = p.constraint_index("p_min:J3").unwrap();
        assert!(p.inequality_residuals(&x)[r].abs() < 1e-15);
    }

    #[test]
    fn continuity_row_touches_two_variables() {
        let p = assemble_network(&testnets::eight_node()).unwrap();
        for (i, row) in p.eq_rows.iter().enumerate() {
            if row.kind == ConstraintKind::Continuity {
                assert_eq!(p.row_variables(true, i).len(), 2);
            }
        }
    }

    #[test]
    fn rescale_round_trip() {
        let p = assemble_network(&testnets::eight_node()).unwrap();
        let x: Vec<f64> = (0..p.n()).map(|i| 0.1 + 0.37 * i as f64).collect();
        let back = p.scale_point(&p.rescale_solution(&x)).unwrap();
        for (a, b) in x.iter().zip(&back) {
            assert!((a - b).abs() <= 1e-15 * a.abs());
        }
        let mut unit = vec![0.0; p.n()];
        unit[p.layout.at(VarKind::Flow, "P1")] = 1.0;
        assert_eq!(p.rescale_solution(&unit).flow["P1"], p.scaling.phi0);
    }

    #[test]
    fn supply_perturbation_moves_only_own_rows() {
        let p = assemble_network(&testnets::single_pipe()).unwrap();
        let mut x = vec![0.3; p.n()];
        x[p.layout.at(VarKind::Gamma, "J1")] = 0.0;
        let base = p.equality_residuals(&x);
        let delta = 1e-3;
        x[p.layout.at(VarKind::SupplyNg, "S1")] += delta;
        let moved = p.equality_residuals(&x);
        for (i, row) in p.eq_rows.iter().enumerate() {
            let change = moved[i] - base[i];
            if row.id() == "balance_ng:J1" {
                assert!((change + delta).abs() < 1e-15);
            } else {
                assert_eq!(change, 0.0, "{}", row.id());
            }
        }
    }
}
