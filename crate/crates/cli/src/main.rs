//! `blendnet` command-line front end.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use blendnet::solver::ShadowPrice;
use blendnet::sweep;
use blendnet::{
    assemble_network, load_controls, load_network, simulate_network, solve, Error, GNodeKind,
    Network, SimulationState, Solution, SolverOptions, SweepResult, SweepSpec, SweepTarget,
};
use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Parser)]
#[command(name = "blendnet", version, about = "Hydrogen/natural-gas blend transport in pipeline networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Write results to this file instead of standard output
    #[arg(long, global = true)]
    output: Option<PathBuf>,

    /// Machine-readable output format; a text table when omitted
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,

    /// KKT tolerance of the optimizer
    #[arg(long, global = true)]
    tol: Option<f64>,

    /// Number of deterministic optimizer starts
    #[arg(long, global = true)]
    seed_count: Option<usize>,

    /// Worker threads for multi-start solves and cold sweeps
    #[arg(long, global = true)]
    jobs: Option<usize>,

    /// Log verbosity on standard error
    #[arg(long, global = true, value_enum, default_value_t = LogLevel::Warn)]
    log_level: LogLevel,
}

#[derive(Subcommand)]
enum Command {
    /// Check a network file and print a summary
    Validate {
        /// Network file; `.toml` is appended when the bare path does not exist
        network: PathBuf,
    },
    /// Solve the flow equations for fixed supplies, withdrawals and boost ratios
    Simulate {
        network: PathBuf,
        /// Control file with [supply_ng], [supply_h2], [demand] and [alpha] tables
        controls: PathBuf,
    },
    /// Compute the economic dispatch and its shadow prices
    Solve { network: PathBuf },
    /// Re-solve over a grid of one parameter
    Sweep {
        network: PathBuf,
        /// demand_max:<ids>, gamma_min:<ids> or carbon_price:<ids>, ids comma separated
        #[arg(long)]
        target: SweepTarget,
        /// Inclusive grid start:stop:step
        #[arg(long, value_parser = parse_range)]
        range: Range,
        /// Solve every point from scratch instead of from its predecessor
        #[arg(long)]
        cold: bool,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum LogLevel {
    Off,
    Error,
    Warn,
    Info,
    Debug,
    Trace,
}

impl LogLevel {
    fn filter(self) -> log::LevelFilter {
        match self {
            LogLevel::Off => log::LevelFilter::Off,
            LogLevel::Error => log::LevelFilter::Error,
            LogLevel::Warn => log::LevelFilter::Warn,
            LogLevel::Info => log::LevelFilter::Info,
            LogLevel::Debug => log::LevelFilter::Debug,
            LogLevel::Trace => log::LevelFilter::Trace,
        }
    }
}

#[derive(Clone, Copy, Debug)]
struct Range {
    start: f64,
    stop: f64,
    step: f64,
}

fn parse_range(s: &str) -> Result<Range, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let [start, stop, step] = parts[..] else {
        return Err(format!("expected start:stop:step, got `{s}`"));
    };
    let num = |t: &str| {
        t.trim()
            .parse::<f64>()
            .map_err(|_| format!("`{t}` is not a number"))
    };
    Ok(Range {
        start: num(start)?,
        stop: num(stop)?,
        step: num(step)?,
    })
}

#[derive(Serialize)]
struct ErrorRecord<'a> {
    code: &'a str,
    message: String,
    element: Option<&'a str>,
}

fn report(err: &Error) {
    let record = ErrorRecord {
        code: err.code(),
        message: err.to_string(),
        element: err.element(),
    };
    let line = serde_json::to_string(&record).expect("error record serializes");
    eprintln!("{line}");
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    env_logger::Builder::new()
        .filter_level(cli.log_level.filter())
        .format_timestamp(None)
        .init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            report(&e);
            ExitCode::from(1)
        }
    }
}

fn options(cli: &Cli, network: &Network) -> SolverOptions {
    let mut opts = network.solver;
    if let Some(tol) = cli.tol {
        opts.kkt_tolerance = tol;
    }
    if let Some(n) = cli.seed_count {
        opts.seed_count = n;
    }
    if let Some(j) = cli.jobs {
        opts.jobs = j;
    }
    opts
}

fn run(cli: &Cli) -> Result<(), Error> {
    let text = match &cli.command {
        Command::Validate { network } => {
            let net = load_network(network)?;
            render_validate(&net, cli.format)?
        }
        Command::Simulate { network, controls } => {
            let net = load_network(network)?;
            let controls = load_controls(controls)?;
            let state = simulate_network(&net, &controls)?;
            render_state(&net, &state, cli.format)?
        }
        Command::Solve { network } => {
            let net = load_network(network)?;
            let opts = options(cli, &net);
            let problem = assemble_network(&net)?;
            let sol = solve(&problem, &opts, None)?;
            if !sol.is_optimal() {
                return Err(Error::NotOptimal(sol.status.to_string()));
            }
            let report = SolveReport::new(&net, &problem, &sol)?;
            render_solve(&report, cli.format)?
        }
        Command::Sweep {
            network,
            target,
            range,
            cold,
        } => {
            let net = load_network(network)?;
            let opts = options(cli, &net);
            let mut spec = SweepSpec::new(net, target.clone(), range.start, range.stop, range.step);
            spec.options = opts;
            spec.warm_start = !cold;
            let result = blendnet::run_sweep(&spec)?;
            render_sweep(&result, cli.format)?
        }
    };
    emit(cli.output.as_deref(), text.as_bytes())
}

fn emit(path: Option<&Path>, bytes: &[u8]) -> Result<(), Error> {
    match path {
        Some(p) => std::fs::write(p, bytes)?,
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(bytes)?;
            out.flush()?;
        }
    }
    Ok(())
}

fn num(v: f64) -> String {
    // adding zero turns -0 into +0
    format!("{:.16e}", v + 0.0)
}

fn to_json<T: Serialize>(value: &T) -> Result<String, Error> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

fn csv_string(header: &[&str], rows: &[Vec<String>]) -> Result<String, Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

#[derive(Serialize)]
struct NetworkSummary {
    valid: bool,
    junctions: Vec<String>,
    slack_junctions: Vec<String>,
    pipes: Vec<String>,
    compressors: Vec<String>,
    gnodes: BTreeMap<String, &'static str>,
}

fn render_validate(net: &Network, format: Option<Format>) -> Result<String, Error> {
    let summary = NetworkSummary {
        valid: true,
        junctions: net.junctions.iter().map(|j| j.id.clone()).collect(),
        slack_junctions: net
            .junctions
            .iter()
            .filter(|j| j.is_slack())
            .map(|j| j.id.clone())
            .collect(),
        pipes: net.pipes.iter().map(|p| p.id.clone()).collect(),
        compressors: net.compressors.iter().map(|c| c.id.clone()).collect(),
        gnodes: net.gnodes.iter().map(|g| (g.id.clone(), g.kind.as_str())).collect(),
    };
    match format {
        Some(Format::Json) => to_json(&summary),
        Some(Format::Csv) => {
            let mut rows = Vec::new();
            for j in &net.junctions {
                let kind = if j.is_slack() { "slack_junction" } else { "junction" };
                rows.push(vec![kind.to_string(), j.id.clone()]);
            }
            rows.extend(net.pipes.iter().map(|p| vec!["pipe".into(), p.id.clone()]));
            rows.extend(net.compressors.iter().map(|c| vec!["compressor".into(), c.id.clone()]));
            rows.extend(net.gnodes.iter().map(|g| vec![g.kind.as_str().into(), g.id.clone()]));
            csv_string(&["kind", "id"], &rows)
        }
        None => {
            let mut s = String::new();
            writeln!(s, "network is valid").unwrap();
            writeln!(s, "  junctions    {:>3}  ({} slack)", summary.junctions.len(), summary.slack_junctions.len()).unwrap();
            writeln!(s, "  pipes        {:>3}", summary.pipes.len()).unwrap();
            writeln!(s, "  compressors  {:>3}", summary.compressors.len()).unwrap();
            writeln!(s, "  gnodes       {:>3}", summary.gnodes.len()).unwrap();
            Ok(s)
        }
    }
}

fn render_state(net: &Network, state: &SimulationState, format: Option<Format>) -> Result<String, Error> {
    match format {
        Some(Format::Json) => to_json(state),
        Some(Format::Csv) => {
            let mut rows = Vec::new();
            for j in &net.junctions {
                rows.push(vec![
                    "junction".into(),
                    j.id.clone(),
                    num(state.pressure[&j.id]),
                    num(state.gamma[&j.id]),
                    String::new(),
                ]);
            }
            for (id, flow) in &state.flow {
                let kind = if net.pipe(id).is_ok() { "pipe" } else { "compressor" };
                let gamma = state.gamma_edge.get(id).copied().unwrap_or_else(|| {
                    let c = net.compressor(id).expect("edge ids exist");
                    state.gamma[&c.from]
                });
                rows.push(vec![kind.into(), id.clone(), String::new(), num(gamma), num(*flow)]);
            }
            for (id, m) in &state.makeup {
                rows.push(vec!["makeup".into(), id.clone(), String::new(), num(state.gamma[id]), num(*m)]);
            }
            csv_string(&["kind", "id", "pressure", "gamma", "flow"], &rows)
        }
        None => {
            let mut s = String::new();
            writeln!(s, "converged in {} iterations, residual {:.2e}", state.iterations, state.residual).unwrap();
            writeln!(s).unwrap();
            writeln!(s, "{:<10} {:>14} {:>10}", "junction", "pressure [Pa]", "gamma").unwrap();
            for j in &net.junctions {
                writeln!(s, "{:<10} {:>14.1} {:>10.6}", j.id, state.pressure[&j.id], state.gamma[&j.id]).unwrap();
            }
            writeln!(s).unwrap();
            writeln!(s, "{:<10} {:>14}", "edge", "flow [kg/s]").unwrap();
            for (id, flow) in &state.flow {
                writeln!(s, "{:<10} {:>14.6}", id, flow).unwrap();
            }
            if !state.makeup.is_empty() {
                writeln!(s).unwrap();
                writeln!(s, "{:<10} {:>14}", "slack", "makeup [kg/s]").unwrap();
                for (id, m) in &state.makeup {
                    writeln!(s, "{:<10} {:>14.6}", id, m).unwrap();
                }
            }
            Ok(s)
        }
    }
}

#[derive(Serialize)]
struct Allocation {
    id: String,
    kind: &'static str,
    junction: String,
    /// [kg/s]
    mass_flow: f64,
    /// [MJ/s], demands only
    energy: Option<f64>,
}

#[derive(Serialize)]
struct JunctionReport {
    id: String,
    pressure: f64,
    gamma: f64,
    shadow_price: Option<ShadowPrice>,
}

#[derive(Serialize)]
struct SolveReport {
    status: String,
    objective: f64,
    iterations: usize,
    kkt_residual: f64,
    allocations: Vec<Allocation>,
    junctions: Vec<JunctionReport>,
    alpha: BTreeMap<String, f64>,
    binding_set: Vec<String>,
}

impl SolveReport {
    fn new(net: &Network, problem: &blendnet::AssembledProblem, sol: &Solution) -> Result<Self, Error> {
        let p = &sol.primal;
        let mut allocations = Vec::new();
        for g in &net.gnodes {
            let (mass_flow, energy) = match g.kind {
                GNodeKind::NgSupply => (p.supply_ng[&g.id], None),
                GNodeKind::H2Supply => (p.supply_h2[&g.id], None),
                GNodeKind::DemandOptimized | GNodeKind::DemandFixed => {
                    (p.demand[&g.id], Some(sol.delivered_energy(problem, &g.id)?))
                }
            };
            allocations.push(Allocation {
                id: g.id.clone(),
                kind: g.kind.as_str(),
                junction: g.junction.clone(),
                mass_flow,
                energy,
            });
        }
        let junctions = net
            .junctions
            .iter()
            .map(|j| JunctionReport {
                id: j.id.clone(),
                pressure: p.pressure[&j.id],
                gamma: p.gamma[&j.id],
                shadow_price: sol.shadow_prices.get(&j.id).copied(),
            })
            .collect();
        Ok(SolveReport {
            status: sol.status.to_string(),
            objective: sol.objective,
            iterations: sol.iterations,
            kkt_residual: sol.kkt_residual,
            allocations,
            junctions,
            alpha: p.alpha.clone(),
            binding_set: sol.binding_set.clone(),
        })
    }
}

fn render_solve(r: &SolveReport, format: Option<Format>) -> Result<String, Error> {
    match format {
        Some(Format::Json) => to_json(r),
        Some(Format::Csv) => {
            let mut rows = vec![
                vec!["objective".into(), String::new(), num(r.objective)],
                vec!["iterations".into(), String::new(), r.iterations.to_string()],
            ];
            for a in &r.allocations {
                rows.push(vec!["mass_flow".into(), a.id.clone(), num(a.mass_flow)]);
                if let Some(e) = a.energy {
                    rows.push(vec!["energy".into(), a.id.clone(), num(e)]);
                }
            }
            for j in &r.junctions {
                rows.push(vec!["pressure".into(), j.id.clone(), num(j.pressure)]);
                rows.push(vec!["gamma".into(), j.id.clone(), num(j.gamma)]);
                if let Some(sp) = j.shadow_price {
                    rows.push(vec!["shadow_price_ng".into(), j.id.clone(), num(sp.ng)]);
                    rows.push(vec!["shadow_price_h2".into(), j.id.clone(), num(sp.h2)]);
                    rows.push(vec!["shadow_price_blend".into(), j.id.clone(), num(sp.blend)]);
                }
            }
            for (id, a) in &r.alpha {
                rows.push(vec!["alpha".into(), id.clone(), num(*a)]);
            }
            for id in &r.binding_set {
                rows.push(vec!["binding".into(), id.clone(), String::new()]);
            }
            csv_string(&["quantity", "id", "value"], &rows)
        }
        None => {
            let mut s = String::new();
            writeln!(s, "status      {}", r.status).unwrap();
            writeln!(s, "objective   {:.6} $/s", r.objective).unwrap();
            writeln!(s, "iterations  {}", r.iterations).unwrap();
            writeln!(s).unwrap();
            writeln!(s, "{:<8} {:<17} {:<9} {:>12} {:>14}", "gnode", "kind", "junction", "flow [kg/s]", "energy [MJ/s]").unwrap();
            for a in &r.allocations {
                let energy = a.energy.map_or(String::new(), |e| format!("{e:.4}"));
                writeln!(s, "{:<8} {:<17} {:<9} {:>12.6} {:>14}", a.id, a.kind, a.junction, a.mass_flow, energy).unwrap();
            }
            writeln!(s).unwrap();
            writeln!(
                s,
                "{:<9} {:>14} {:>9} {:>11} {:>11} {:>12}",
                "junction", "pressure [Pa]", "gamma", "price NG", "price H2", "price blend"
            )
            .unwrap();
            for j in &r.junctions {
                let (ng, h2, blend) = j
                    .shadow_price
                    .map_or((String::new(), String::new(), String::new()), |sp| {
                        (format!("{:.6}", sp.ng), format!("{:.6}", sp.h2), format!("{:.6}", sp.blend))
                    });
                writeln!(
                    s,
                    "{:<9} {:>14.1} {:>9.6} {:>11} {:>11} {:>12}",
                    j.id, j.pressure, j.gamma, ng, h2, blend
                )
                .unwrap();
            }
            if !r.alpha.is_empty() {
                writeln!(s).unwrap();
                writeln!(s, "{:<10} {:>8}", "compressor", "alpha").unwrap();
                for (id, a) in &r.alpha {
                    writeln!(s, "{:<10} {:>8.5}", id, a).unwrap();
                }
            }
            writeln!(s).unwrap();
            writeln!(s, "binding: {}", r.binding_set.join(", ")).unwrap();
            Ok(s)
        }
    }
}

fn render_sweep(result: &SweepResult, format: Option<Format>) -> Result<String, Error> {
    let mut buf = Vec::new();
    match format {
        Some(Format::Json) => sweep::write_json(result, &mut buf)?,
        Some(Format::Csv) => sweep::write_csv(result, &mut buf)?,
        None => return Ok(sweep_table(result)),
    }
    Ok(String::from_utf8(buf).expect("sweep output is utf-8"))
}

fn sweep_table(result: &SweepResult) -> String {
    let mut s = String::new();
    let energies: Vec<&String> = result.rows.first().map_or(Vec::new(), |r| r.energy.keys().collect());
    let gammas: Vec<&String> = result.rows.first().map_or(Vec::new(), |r| r.gamma.keys().collect());
    write!(s, "{:>12} {:<17} {:>10}", result.target.name(), "status", "objective").unwrap();
    for id in &energies {
        write!(s, " {:>10}", format!("E {id}")).unwrap();
    }
    for id in &gammas {
        write!(s, " {:>9}", format!("gamma {id}")).unwrap();
    }
    writeln!(s).unwrap();
    for row in &result.rows {
        write!(s, "{:>12.6} {:<17} {:>10.6}", row.value, row.status.to_string(), row.objective).unwrap();
        for id in &energies {
            write!(s, " {:>10.4}", row.energy.get(*id).copied().unwrap_or(f64::NAN)).unwrap();
        }
        for id in &gammas {
            write!(s, " {:>9.5}", row.gamma.get(*id).copied().unwrap_or(f64::NAN)).unwrap();
        }
        writeln!(s).unwrap();
    }
    writeln!(s).unwrap();
    writeln!(s, "{} regions", result.regions()).unwrap();
    for t in &result.transitions {
        writeln!(
            s,
            "  transition near {:.6}: +[{}] -[{}]",
            t.value,
            t.entered.join(", "),
            t.left.join(", ")
        )
        .unwrap();
    }
    s
}
