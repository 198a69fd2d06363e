//! Decision-variable ordering and constraint-row identities.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{GNodeKind, Network};

/// Variable kinds in their vector order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarKind {
    SupplyH2,
    SupplyNg,
    Demand,
    Boost,
    Flow,
    EdgeGamma,
    Gamma,
    Pressure,
}

impl VarKind {
    pub const ALL: [VarKind; 8] = [
        VarKind::SupplyH2,
        VarKind::SupplyNg,
        VarKind::Demand,
        VarKind::Boost,
        VarKind::Flow,
        VarKind::EdgeGamma,
        VarKind::Gamma,
        VarKind::Pressure,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            VarKind::SupplyH2 => "s_h2",
            VarKind::SupplyNg => "s_ng",
            VarKind::Demand => "d",
            VarKind::Boost => "alpha",
            VarKind::Flow => "phi",
            VarKind::EdgeGamma => "gamma_edge",
            VarKind::Gamma => "gamma",
            VarKind::Pressure => "p",
        }
    }
}

impl fmt::Display for VarKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Bijection between `(kind, component id)` and position in the variable vector.
/// Within a kind, components are ordered lexicographically by id.
#[derive(Debug, Clone, PartialEq)]
pub struct VariableLayout {
    entries: Vec<(VarKind, String)>,
    index: HashMap<(VarKind, String), usize>,
}

impl VariableLayout {
    pub fn new(network: &Network) -> Self {
        let sorted = |mut ids: Vec<String>| {
            ids.sort();
            ids
        };
        let gnodes_of = |kinds: &[GNodeKind]| {
            sorted(
                network
                    .gnodes
                    .iter()
                    .filter(|g| kinds.contains(&g.kind))
                    .map(|g| g.id.clone())
                    .collect(),
            )
        };
        let mut entries = Vec::new();
        for kind in VarKind::ALL {
            let ids = match kind {
                VarKind::SupplyH2 => gnodes_of(&[GNodeKind::H2Supply]),
                VarKind::SupplyNg => gnodes_of(&[GNodeKind::NgSupply]),
                VarKind::Demand => gnodes_of(&[GNodeKind::DemandOptimized, GNodeKind::DemandFixed]),
                VarKind::Boost => sorted(network.compressors.iter().map(|c| c.id.clone()).collect()),
                VarKind::Flow => sorted(network.edges().map(|e| e.1.to_string()).collect()),
                VarKind::EdgeGamma => sorted(network.pipes.iter().map(|p| p.id.clone()).collect()),
                VarKind::Gamma | VarKind::Pressure => {
                    sorted(network.junctions.iter().map(|j| j.id.clone()).collect())
                }
            };
            entries.extend(ids.into_iter().map(|id| (kind, id)));
        }
        let index = entries
            .iter()
            .enumerate()
            .map(|(i, e)| (e.clone(), i))
            .collect();
        VariableLayout { entries, index }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[(VarKind, String)] {
        &self.entries
    }

    pub fn index(&self, kind: VarKind, id: &str) -> Option<usize> {
        self.index.get(&(kind, id.to_string())).copied()
    }

    pub(crate) fn at(&self, kind: VarKind, id: &str) -> usize {
        self.index(kind, id)
            .unwrap_or_else(|| panic!("variable {kind}:{id} missing from layout"))
    }

    pub fn get(&self, kind: VarKind, id: &str) -> Result<usize> {
        self.index(kind, id).ok_or_else(|| Error::UnknownId {
            kind: "variable",
            id: format!("{kind}:{id}"),
        })
    }

    /// `kind:id` label of variable `i`.
    pub fn name(&self, i: usize) -> String {
        let (k, id) = &self.entries[i];
        format!("{k}:{id}")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintKind {
    // equalities
    BalanceNg,
    BalanceH2,
    Weymouth,
    Boost,
    Continuity,
    Slack,
    FixedDemand,
    // inequalities, g(x) >= 0
    PressureMin,
    GammaMin,
    GammaMax,
    DischargeMax,
    AlphaMin,
    AlphaMax,
    SupplyMin,
    SupplyMax,
    EnergyMax,
    // simple variable bounds added by the solver
    LowerBound,
    UpperBound,
}

impl ConstraintKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ConstraintKind::BalanceNg => "balance_ng",
            ConstraintKind::BalanceH2 => "balance_h2",
            ConstraintKind::Weymouth => "weymouth",
            ConstraintKind::Boost => "boost",
            ConstraintKind::Continuity => "continuity",
            ConstraintKind::Slack => "slack",
            ConstraintKind::FixedDemand => "fixed_demand",
            ConstraintKind::PressureMin => "p_min",
            ConstraintKind::GammaMin => "gamma_min",
            ConstraintKind::GammaMax => "gamma_max",
            ConstraintKind::DischargeMax => "p_discharge_max",
            ConstraintKind::AlphaMin => "alpha_min",
            ConstraintKind::AlphaMax => "alpha_max",
            ConstraintKind::SupplyMin => "supply_min",
            ConstraintKind::SupplyMax => "supply_max",
            ConstraintKind::EnergyMax => "energy_max",
            ConstraintKind::LowerBound => "lower_bound",
            ConstraintKind::UpperBound => "upper_bound",
        }
    }
}

impl fmt::Display for ConstraintKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Identity of one constraint row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintRow {
    pub kind: ConstraintKind,
    pub component: String,
    /// Derivative of the scaled row with respect to its physical counterpart;
    /// physical duals are `multiplier * scale / obj_scale`.
    pub scale: f64,
}

impl ConstraintRow {
    pub fn id(&self) -> String {
        format!("{}:{}", self.kind, self.component)
    }
}
