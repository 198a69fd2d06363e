//! Network data model: junctions, pipes, compressors and gNodes (market participants).

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::physics::GasConstants;
use crate::solver::SolverOptions;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Junction {
    pub id: String,
    /// Minimum pressure [Pa].
    pub p_min: f64,
    pub gamma_min: f64,
    pub gamma_max: f64,
    /// Fixed pressure [Pa]; present only on slack junctions.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slack_pressure: Option<f64>,
}

impl Junction {
    pub fn is_slack(&self) -> bool {
        self.slack_pressure.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "PipeRecord")]
pub struct Pipe {
    pub id: String,
    pub from: String,
    pub to: String,
    /// [m]
    pub length: f64,
    /// [m]
    pub diameter: f64,
    /// Cross-section [m²]. Defaults to `pi D² / 4` when omitted from a file.
    pub area: f64,
    pub friction: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PipeRecord {
    id: String,
    from: String,
    to: String,
    length: f64,
    diameter: f64,
    area: Option<f64>,
    friction: f64,
}

impl From<PipeRecord> for Pipe {
    fn from(r: PipeRecord) -> Self {
        let area = r
            .area
            .unwrap_or(std::f64::consts::PI * r.diameter * r.diameter / 4.0);
        Pipe {
            id: r.id,
            from: r.from,
            to: r.to,
            length: r.length,
            diameter: r.diameter,
            area,
            friction: r.friction,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Compressor {
    pub id: String,
    pub from: String,
    pub to: String,
    pub alpha_max: f64,
    /// Maximum discharge pressure [Pa].
    pub p_discharge_max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GNodeKind {
    NgSupply,
    H2Supply,
    DemandOptimized,
    DemandFixed,
}

impl GNodeKind {
    pub fn is_supply(self) -> bool {
        matches!(self, GNodeKind::NgSupply | GNodeKind::H2Supply)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            GNodeKind::NgSupply => "ng_supply",
            GNodeKind::H2Supply => "h2_supply",
            GNodeKind::DemandOptimized => "demand_optimized",
            GNodeKind::DemandFixed => "demand_fixed",
        }
    }
}

/// A supplier or off-taker attached to a junction.
///
/// Which price and bound fields are required depends on `kind`; presence is
/// checked when the optimization problem is assembled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GNode {
    pub id: String,
    pub junction: String,
    pub kind: GNodeKind,
    /// Supply offer price [$/kg].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub offer_price: Option<f64>,
    /// Supply capacity [kg/s]; unbounded when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s_max: Option<f64>,
    /// Energy bid [$/MJ].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub energy_bid_price: Option<f64>,
    /// Value of avoided CO2 [$/kg].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub carbon_price: Option<f64>,
    /// Energy cap of an optimized demand [MJ/s].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g_max: Option<f64>,
    /// Energy delivery of a fixed demand [MJ/s].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g_fixed: Option<f64>,
}

/// Reference scales used to non-dimensionalize the problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScalingSettings {
    /// Pressure scale [Pa]; the largest slack pressure when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p0: Option<f64>,
    /// Length scale [m].
    pub l0: f64,
    /// Area scale [m²].
    pub area0: f64,
}

impl Default for ScalingSettings {
    fn default() -> Self {
        ScalingSettings {
            p0: None,
            l0: 5000.0,
            area0: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeKind {
    Pipe,
    Compressor,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EdgeRef {
    pub kind: EdgeKind,
    pub id: String,
}

/// Edges and gNodes touching one junction, each list sorted by id.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Incidence {
    /// Edges whose `to` end is the junction.
    pub incoming: Vec<EdgeRef>,
    /// Edges whose `from` end is the junction.
    pub outgoing: Vec<EdgeRef>,
    pub gnodes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub junctions: Vec<Junction>,
    #[serde(default)]
    pub pipes: Vec<Pipe>,
    #[serde(default)]
    pub compressors: Vec<Compressor>,
    #[serde(default)]
    pub gnodes: Vec<GNode>,
    #[serde(default)]
    pub gas_constants: GasConstants,
    #[serde(default)]
    pub scaling: ScalingSettings,
    #[serde(default)]
    pub solver: SolverOptions,
}

fn positive(element: &str, field: &str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::validation(
            element,
            format!("{field} must be finite and positive, got {value}"),
        ))
    }
}

fn nonnegative(element: &str, field: &str, value: Option<f64>) -> Result<()> {
    match value {
        Some(v) if !(v.is_finite() && v >= 0.0) => Err(Error::validation(
            element,
            format!("{field} must be finite and nonnegative, got {v}"),
        )),
        _ => Ok(()),
    }
}

impl Network {
    /// Check every structural and parameter invariant.
    pub fn validate(&self) -> Result<()> {
        self.gas_constants.validate()?;
        self.solver.validate()?;

        let mut junction_ids = BTreeSet::new();
        for j in &self.junctions {
            if !junction_ids.insert(j.id.as_str()) {
                return Err(Error::validation(&j.id, "duplicate junction id"));
            }
            positive(&j.id, "p_min", j.p_min)?;
            if !(0.0 <= j.gamma_min && j.gamma_min <= j.gamma_max && j.gamma_max <= 1.0) {
                return Err(Error::validation(
                    &j.id,
                    format!(
                        "need 0 <= gamma_min <= gamma_max <= 1, got [{}, {}]",
                        j.gamma_min, j.gamma_max
                    ),
                ));
            }
            if let Some(sigma) = j.slack_pressure {
                positive(&j.id, "slack_pressure", sigma)?;
                if sigma < j.p_min {
                    return Err(Error::validation(&j.id, "slack_pressure is below p_min"));
                }
            }
        }
        if self.junctions.is_empty() {
            return Err(Error::validation("junctions", "network has no junctions"));
        }
        if !self.junctions.iter().any(Junction::is_slack) {
            return Err(Error::validation(
                "junctions",
                "at least one slack junction (slack_pressure) is required",
            ));
        }

        let mut edge_ids = BTreeSet::new();
        let check_ends = |id: &str, from: &str, to: &str| -> Result<()> {
            for end in [from, to] {
                if !junction_ids.contains(end) {
                    return Err(Error::validation(id, format!("unknown junction `{end}`")));
                }
            }
            if from == to {
                return Err(Error::validation(id, "edge endpoints must differ"));
            }
            Ok(())
        };
        for p in &self.pipes {
            if !edge_ids.insert(p.id.as_str()) {
                return Err(Error::validation(&p.id, "duplicate edge id"));
            }
            check_ends(&p.id, &p.from, &p.to)?;
            positive(&p.id, "length", p.length)?;
            positive(&p.id, "diameter", p.diameter)?;
            positive(&p.id, "area", p.area)?;
            positive(&p.id, "friction", p.friction)?;
        }
        for c in &self.compressors {
            if !edge_ids.insert(c.id.as_str()) {
                return Err(Error::validation(&c.id, "duplicate edge id"));
            }
            check_ends(&c.id, &c.from, &c.to)?;
            if !(c.alpha_max.is_finite() && c.alpha_max >= 1.0) {
                return Err(Error::validation(&c.id, "alpha_max must be at least 1"));
            }
            positive(&c.id, "p_discharge_max", c.p_discharge_max)?;
        }

        let mut gnode_ids = BTreeSet::new();
        let mut junction_side: HashMap<&str, (bool, &str)> = HashMap::new();
        for g in &self.gnodes {
            if !gnode_ids.insert(g.id.as_str()) {
                return Err(Error::validation(&g.id, "duplicate gNode id"));
            }
            if !junction_ids.contains(g.junction.as_str()) {
                return Err(Error::validation(
                    &g.id,
                    format!("unknown junction `{}`", g.junction),
                ));
            }
            nonnegative(&g.id, "offer_price", g.offer_price)?;
            nonnegative(&g.id, "s_max", g.s_max)?;
            nonnegative(&g.id, "energy_bid_price", g.energy_bid_price)?;
            nonnegative(&g.id, "carbon_price", g.carbon_price)?;
            nonnegative(&g.id, "g_max", g.g_max)?;
            nonnegative(&g.id, "g_fixed", g.g_fixed)?;
            let supply = g.kind.is_supply();
            match junction_side.get(g.junction.as_str()) {
                Some(&(side, other)) if side != supply => {
                    return Err(Error::validation(
                        &g.id,
                        format!(
                            "junction `{}` mixes supply and withdrawal gNodes (`{other}`)",
                            g.junction
                        ),
                    ));
                }
                _ => {
                    junction_side.insert(&g.junction, (supply, &g.id));
                }
            }
        }

        self.check_connected()?;
        if let Some(p0) = self.scaling.p0 {
            positive("scaling", "p0", p0)?;
        }
        positive("scaling", "l0", self.scaling.l0)?;
        positive("scaling", "area0", self.scaling.area0)?;
        Ok(())
    }

    fn check_connected(&self) -> Result<()> {
        let mut adjacency: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
        for j in &self.junctions {
            adjacency.entry(&j.id).or_default();
        }
        for (from, to) in self.edges().map(|(_, _, f, t)| (f, t)) {
            adjacency.entry(from).or_default().push(to);
            adjacency.entry(to).or_default().push(from);
        }
        let start = self.junctions[0].id.as_str();
        let mut seen = BTreeSet::from([start]);
        let mut queue = VecDeque::from([start]);
        while let Some(j) = queue.pop_front() {
            for &k in &adjacency[j] {
                if seen.insert(k) {
                    queue.push_back(k);
                }
            }
        }
        if let Some(j) = self.junctions.iter().find(|j| !seen.contains(j.id.as_str())) {
            return Err(Error::validation(
                &j.id,
                format!("junction is not connected to `{start}`"),
            ));
        }
        Ok(())
    }

    /// All edges as `(kind, id, from, to)`, pipes first.
    pub fn edges(&self) -> impl Iterator<Item = (EdgeKind, &str, &str, &str)> {
        self.pipes
            .iter()
            .map(|p| (EdgeKind::Pipe, p.id.as_str(), p.from.as_str(), p.to.as_str()))
            .chain(self.compressors.iter().map(|c| {
                (
                    EdgeKind::Compressor,
                    c.id.as_str(),
                    c.from.as_str(),
                    c.to.as_str(),
                )
            }))
    }

    pub fn junction(&self, id: &str) -> Result<&Junction> {
        self.junctions
            .iter()
            .find(|j| j.id == id)
            .ok_or_else(|| Error::UnknownId {
                kind: "junction",
                id: id.to_string(),
            })
    }

    pub fn pipe(&self, id: &str) -> Result<&Pipe> {
        self.pipes
            .iter()
            .find(|p| p.id == id)
            .ok_or_else(|| Error::UnknownId {
                kind: "pipe",
                id: id.to_string(),
            })
    }

    pub fn compressor(&self, id: &str) -> Result<&Compressor> {
        self.compressors
            .iter()
            .find(|c| c.id == id)
            .ok_or_else(|| Error::UnknownId {
                kind: "compressor",
                id: id.to_string(),
            })
    }

    pub fn gnode(&self, id: &str) -> Result<&GNode> {
        self.gnodes
            .iter()
            .find(|g| g.id == id)
            .ok_or_else(|| Error::UnknownId {
                kind: "gnode",
                id: id.to_string(),
            })
    }

    pub fn gnode_mut(&mut self, id: &str) -> Result<&mut GNode> {
        self.gnodes
            .iter_mut()
            .find(|g| g.id == id)
            .ok_or_else(|| Error::UnknownId {
                kind: "gnode",
                id: id.to_string(),
            })
    }

    pub fn junction_mut(&mut self, id: &str) -> Result<&mut Junction> {
        self.junctions
            .iter_mut()
            .find(|j| j.id == id)
            .ok_or_else(|| Error::UnknownId {
                kind: "junction",
                id: id.to_string(),
            })
    }

    /// Edges entering and leaving junction `j`, and the gNodes attached to it.
    pub fn incidence(&self, j: &str) -> Result<Incidence> {
        self.junction(j)?;
        let mut inc = Incidence::default();
        for (kind, id, from, to) in self.edges() {
            let edge = EdgeRef {
                kind,
                id: id.to_string(),
            };
            if to == j {
                inc.incoming.push(edge.clone());
            }
            if from == j {
                inc.outgoing.push(edge);
            }
        }
        inc.incoming.sort_by(|a, b| a.id.cmp(&b.id));
        inc.outgoing.sort_by(|a, b| a.id.cmp(&b.id));
        inc.gnodes = self
            .gnodes
            .iter()
            .filter(|g| g.junction == j)
            .map(|g| g.id.clone())
            .collect();
        inc.gnodes.sort();
        Ok(inc)
    }

    /// The largest slack pressure, used as the default pressure scale.
    pub fn reference_pressure(&self) -> f64 {
        self.junctions
            .iter()
            .filter_map(|j| j.slack_pressure)
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testnets;

    #[test]
    fn single_pipe_incidence() {
        let net = testnets::single_pipe();
        let inc = net.incidence("J2").unwrap();
        assert_eq!(inc.incoming.len(), 1);
        assert_eq!(inc.incoming[0].id, "C1");
        assert_eq!(inc.outgoing[0].id, "P1");
        assert!(inc.gnodes.is_empty());
        assert!(matches!(
            net.incidence("J9"),
            Err(Error::UnknownId { kind: "junction", .. })
        ));
    }

    #[test]
    fn handshake_identity() {
        for net in [testnets::single_pipe(), testnets::eight_node()] {
            let incoming: usize = net
                .junctions
                .iter()
                .map(|j| net.incidence(&j.id).unwrap().incoming.len())
                .sum();
            let outgoing: usize = net
                .junctions
                .iter()
                .map(|j| net.incidence(&j.id).unwrap().outgoing.len())
                .sum();
            assert_eq!(incoming, net.pipes.len() + net.compressors.len());
            assert_eq!(outgoing, incoming);
        }
    }

    #[test]
    fn mixed_junction_rejected() {
        let mut net = testnets::single_pipe();
        net.gnodes.push(GNode {
            id: "D9".into(),
            junction: "J1".into(),
            kind: GNodeKind::DemandOptimized,
            offer_price: None,
            s_max: None,
            energy_bid_price: Some(0.01),
            carbon_price: None,
            g_max: Some(1.0),
            g_fixed: None,
        });
        let err = net.validate().unwrap_err();
        assert_eq!(err.element(), Some("D9"));
    }

    #[test]
    fn disconnected_rejected() {
        let mut net = testnets::single_pipe();
        net.junctions.push(Junction {
            id: "J4".into(),
            p_min: 1e6,
            gamma_min: 0.0,
            gamma_max: 1.0,
            slack_pressure: None,
        });
        assert_eq!(net.validate().unwrap_err().element(), Some("J4"));
    }

    #[test]
    fn bad_gamma_bounds_rejected() {
        let mut net = testnets::single_pipe();
        net.junctions[2].gamma_min = 0.5;
        net.junctions[2].gamma_max = 0.2;
        assert!(matches!(net.validate(), Err(Error::Validation { .. })));
    }

    #[test]
    fn edge_ids_shared_between_pipes_and_compressors() {
        let mut net = testnets::single_pipe();
        net.compressors[0].id = "P1".into();
        assert!(net.validate().is_err());
    }
}
