//! One-parameter sweeps over a network with warm-started solves and regime
//! transition detection from binding-set changes.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{GNodeKind, Network};
use crate::nlp::assemble_network;
use crate::solver::{solve, ShadowPrice, Solution, SolverOptions, Status};

/// Swept parameter. Several ids move together along the same value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SweepTarget {
    /// `g_max` [MJ/s] of optimized demand gNodes.
    DemandMax(Vec<String>),
    /// `gamma_min` of junctions.
    GammaMin(Vec<String>),
    /// `carbon_price` [$/kg] of demand gNodes.
    CarbonPrice(Vec<String>),
}

impl SweepTarget {
    pub fn name(&self) -> &'static str {
        match self {
            SweepTarget::DemandMax(_) => "demand_max",
            SweepTarget::GammaMin(_) => "gamma_min",
            SweepTarget::CarbonPrice(_) => "carbon_price",
        }
    }

    pub fn ids(&self) -> &[String] {
        match self {
            SweepTarget::DemandMax(ids) | SweepTarget::GammaMin(ids) | SweepTarget::CarbonPrice(ids) => ids,
        }
    }

    /// Set the parameter to `value` on every target id.
    pub fn apply(&self, network: &mut Network, value: f64) -> Result<()> {
        for id in self.ids() {
            match self {
                SweepTarget::DemandMax(_) => network.gnode_mut(id)?.g_max = Some(value),
                SweepTarget::GammaMin(_) => network.junction_mut(id)?.gamma_min = value,
                SweepTarget::CarbonPrice(_) => network.gnode_mut(id)?.carbon_price = Some(value),
            }
        }
        Ok(())
    }

    fn check(&self, network: &Network) -> Result<()> {
        if self.ids().is_empty() {
            return Err(Error::Sweep("target names no component".into()));
        }
        for id in self.ids() {
            match self {
                SweepTarget::DemandMax(_) => {
                    if network.gnode(id)?.kind != GNodeKind::DemandOptimized {
                        return Err(Error::Sweep(format!("`{id}` is not an optimized demand gNode")));
                    }
                }
                SweepTarget::CarbonPrice(_) => {
                    if network.gnode(id)?.kind.is_supply() {
                        return Err(Error::Sweep(format!("`{id}` is not a demand gNode")));
                    }
                }
                SweepTarget::GammaMin(_) => {
                    network.junction(id)?;
                }
            }
        }
        Ok(())
    }
}

impl fmt::Display for SweepTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.name(), self.ids().join(","))
    }
}

impl FromStr for SweepTarget {
    type Err = Error;

    /// `kind:id[,id...]`, e.g. `demand_max:D1,D2`.
    fn from_str(s: &str) -> Result<Self> {
        let (kind, ids) = s
            .split_once(':')
            .ok_or_else(|| Error::Sweep(format!("target `{s}` must look like kind:id")))?;
        let ids: Vec<String> = ids
            .split(',')
            .map(str::trim)
            .filter(|i| !i.is_empty())
            .map(String::from)
            .collect();
        if ids.is_empty() {
            return Err(Error::Sweep(format!("target `{s}` names no component")));
        }
        match kind {
            "demand_max" => Ok(SweepTarget::DemandMax(ids)),
            "gamma_min" => Ok(SweepTarget::GammaMin(ids)),
            "carbon_price" => Ok(SweepTarget::CarbonPrice(ids)),
            other => Err(Error::Sweep(format!(
                "unknown target kind `{other}` (expected demand_max, gamma_min or carbon_price)"
            ))),
        }
    }
}

impl Serialize for SweepTarget {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for SweepTarget {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub network: Network,
    pub target: SweepTarget,
    pub start: f64,
    pub stop: f64,
    pub step: f64,
    pub options: SolverOptions,
    /// Start each point from the previous optimal solution.
    pub warm_start: bool,
}

impl SweepSpec {
    pub fn new(network: Network, target: SweepTarget, start: f64, stop: f64, step: f64) -> Self {
        let options = network.solver.clone();
        SweepSpec {
            network,
            target,
            start,
            stop,
            step,
            options,
            warm_start: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.start.is_finite() && self.stop.is_finite() && self.step.is_finite()) {
            return Err(Error::Sweep("range values must be finite".into()));
        }
        if self.step <= 0.0 {
            return Err(Error::Sweep(format!("step must be positive, got {}", self.step)));
        }
        if self.start > self.stop {
            return Err(Error::Sweep(format!(
                "start {} exceeds stop {}",
                self.start, self.stop
            )));
        }
        self.options.validate()?;
        self.network.validate()?;
        self.target.check(&self.network)
    }

    /// Inclusive grid `start + i step`, truncated at `stop`.
    pub fn grid(&self) -> Vec<f64> {
        let count = ((self.stop - self.start) / self.step + 1e-9).floor() as usize + 1;
        (0..count).map(|i| self.start + i as f64 * self.step).collect()
    }
}

/// Summary of one solved grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: f64,
    pub status: Status,
    /// `J_EV` [$/s]
    pub objective: f64,
    /// Delivered energy per demand gNode [MJ/s].
    pub energy: BTreeMap<String, f64>,
    /// Withdrawal per demand gNode [kg/s].
    pub withdrawal: BTreeMap<String, f64>,
    /// Injection per supply gNode [kg/s].
    pub supply: BTreeMap<String, f64>,
    /// Concentration at each demand junction.
    pub gamma: BTreeMap<String, f64>,
    pub alpha: BTreeMap<String, f64>,
    /// Prices at each demand junction [$/kg].
    pub shadow_prices: BTreeMap<String, ShadowPrice>,
    pub binding_set: Vec<String>,
    pub iterations: usize,
}

/// Parameter midpoint where the binding set changes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub value: f64,
    /// Rows that become binding.
    pub entered: Vec<String>,
    /// Rows that stop binding.
    pub left: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub target: SweepTarget,
    pub rows: Vec<SweepRow>,
    pub transitions: Vec<Transition>,
}

impl SweepResult {
    /// Number of regions separated by the transitions.
    pub fn regions(&self) -> usize {
        if self.rows.is_empty() {
            0
        } else {
            self.transitions.len() + 1
        }
    }
}

fn summarize(network: &Network, value: f64, sol: &Solution) -> SweepRow {
    let mut row = SweepRow {
        value,
        status: sol.status,
        objective: sol.objective,
        energy: BTreeMap::new(),
        withdrawal: BTreeMap::new(),
        supply: BTreeMap::new(),
        gamma: BTreeMap::new(),
        alpha: sol.primal.alpha.clone(),
        shadow_prices: BTreeMap::new(),
        binding_set: sol.binding_set.clone(),
        iterations: sol.iterations,
    };
    let gc = &network.gas_constants;
    for g in &network.gnodes {
        if g.kind.is_supply() {
            let map = if g.kind == GNodeKind::NgSupply {
                &sol.primal.supply_ng
            } else {
                &sol.primal.supply_h2
            };
            row.supply.insert(g.id.clone(), map.get(&g.id).copied().unwrap_or(f64::NAN));
            continue;
        }
        let d = sol.primal.demand.get(&g.id).copied().unwrap_or(f64::NAN);
        let gamma = sol.primal.gamma.get(&g.junction).copied().unwrap_or(f64::NAN);
        let r = crate::physics::blend_calorific_raw(gamma.clamp(0.0, 1.0), gc);
        row.withdrawal.insert(g.id.clone(), d);
        row.energy.insert(g.id.clone(), d * r);
        row.gamma.insert(g.junction.clone(), gamma);
        let price = sol.shadow_prices.get(&g.junction).copied().unwrap_or(ShadowPrice {
            ng: f64::NAN,
            h2: f64::NAN,
            blend: f64::NAN,
        });
        row.shadow_prices.insert(g.junction.clone(), price);
    }
    row
}

fn solve_point(spec: &SweepSpec, value: f64, warm: Option<&Solution>) -> Result<(SweepRow, Solution)> {
    let mut net = spec.network.clone();
    spec.target.apply(&mut net, value)?;
    let problem = assemble_network(&net).map_err(|e| Error::Sweep(format!("at {value}: {e}")))?;
    let sol = solve(&problem, &spec.options, warm)?;
    Ok((summarize(&net, value, &sol), sol))
}

/// Solve every grid point. Non-optimal points are recorded, not fatal.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepResult> {
    spec.validate()?;
    let grid = spec.grid();
    // every grid point must give a valid network
    for &value in &grid {
        let mut net = spec.network.clone();
        spec.target.apply(&mut net, value)?;
        net.validate()
            .map_err(|e| Error::Sweep(format!("at {value}: {e}")))?;
    }
    let rows = if spec.warm_start {
        let mut rows = Vec::with_capacity(grid.len());
        let mut prev: Option<Solution> = None;
        for &value in &grid {
            let warm = prev.as_ref().filter(|s| s.is_optimal());
            let (row, sol) = solve_point(spec, value, warm)?;
            log::info!("{} = {value}: {} J {:.10e}", spec.target, row.status, row.objective);
            rows.push(row);
            prev = Some(sol);
        }
        rows
    } else {
        let jobs = spec.options.jobs.max(1);
        // seeds run sequentially inside each point; points are spread over threads
        let mut per_point = spec.clone();
        per_point.options.jobs = 1;
        let chunk = grid.len().div_ceil(jobs).max(1);
        let parts: Vec<Result<Vec<SweepRow>>> = std::thread::scope(|scope| {
            let handles: Vec<_> = grid
                .chunks(chunk)
                .map(|part| {
                    let spec = &per_point;
                    scope.spawn(move || {
                        part.iter()
                            .map(|&v| solve_point(spec, v, None).map(|(row, _)| row))
                            .collect::<Result<Vec<_>>>()
                    })
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("sweep thread panicked"))
                .collect()
        });
        let mut rows = Vec::with_capacity(grid.len());
        for part in parts {
            rows.extend(part?);
        }
        rows
    };
    let transitions = detect_transitions(&rows);
    Ok(SweepResult {
        target: spec.target.clone(),
        rows,
        transitions,
    })
}

/// Midpoints between consecutive rows whose binding sets differ.
pub fn detect_transitions(rows: &[SweepRow]) -> Vec<Transition> {
    rows.windows(2)
        .filter(|w| w[0].binding_set != w[1].binding_set)
        .map(|w| Transition {
            value: 0.5 * (w[0].value + w[1].value),
            entered: w[1]
                .binding_set
                .iter()
                .filter(|id| !w[0].binding_set.contains(id))
                .cloned()
                .collect(),
            left: w[0]
                .binding_set
                .iter()
                .filter(|id| !w[1].binding_set.contains(id))
                .cloned()
                .collect(),
        })
        .collect()
}

fn number(v: f64) -> String {
    // adding zero turns -0 into +0
    format!("{:.16e}", v + 0.0)
}

/// Column names in output order.
pub fn csv_header(result: &SweepResult) -> Vec<String> {
    let mut h = vec![result.target.name().to_string(), "status".into(), "objective".into()];
    if let Some(row) = result.rows.first() {
        for id in row.energy.keys() {
            h.push(format!("energy:{id}"));
            h.push(format!("withdrawal:{id}"));
        }
        for id in row.supply.keys() {
            h.push(format!("supply:{id}"));
        }
        for j in row.gamma.keys() {
            h.push(format!("gamma:{j}"));
            h.push(format!("shadow_price_ng:{j}"));
            h.push(format!("shadow_price_h2:{j}"));
            h.push(format!("shadow_price_blend:{j}"));
        }
        for c in row.alpha.keys() {
            h.push(format!("alpha:{c}"));
        }
    }
    h.push("binding_set".into());
    h
}

fn csv_record(row: &SweepRow) -> Vec<String> {
    let mut r = vec![number(row.value), row.status.to_string(), number(row.objective)];
    for (id, e) in &row.energy {
        r.push(number(*e));
        r.push(number(row.withdrawal[id]));
    }
    for s in row.supply.values() {
        r.push(number(*s));
    }
    for (j, g) in &row.gamma {
        let p = row.shadow_prices[j];
        r.push(number(*g));
        r.push(number(p.ng));
        r.push(number(p.h2));
        r.push(number(p.blend));
    }
    for a in row.alpha.values() {
        r.push(number(*a));
    }
    r.push(row.binding_set.join(";"));
    r
}

/// Write the result as CSV: one header line and one line per grid point.
pub fn write_csv<W: Write>(result: &SweepResult, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(csv_header(result))?;
    for row in &result.rows {
        w.write_record(csv_record(row))?;
    }
    w.flush()?;
    Ok(())
}

pub fn export_csv(result: &SweepResult, path: impl AsRef<Path>) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_csv(result, std::io::BufWriter::new(file))
}

pub fn write_json<W: Write>(result: &SweepResult, mut out: W) -> Result<()> {
    serde_json::to_writer_pretty(&mut out, result)?;
    out.write_all(b"\n")?;
    Ok(())
}

pub fn export_json(result: &SweepResult, path: impl AsRef<Path>) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_json(result, std::io::BufWriter::new(file))
}
