//! Reading and writing network description files (TOML).
//!
//! ```toml
//! format_version = 1
//!
//! [[junctions]]
//! id = "J1"
//! p_min = 1.0e6
//! gamma_min = 0.0
//! gamma_max = 1.0
//! slack_pressure = 5.0e6
//!
//! [[pipes]]
//! id = "P1"
//! from = "J2"
//! to = "J3"
//! length = 47000.0
//! diameter = 0.12
//! friction = 0.01     # `area` defaults to pi D^2 / 4
//!
//! [[compressors]]
//! id = "C1"
//! from = "J1"
//! to = "J2"
//! alpha_max = 1.4
//! p_discharge_max = 7.5e6
//!
//! [[gnodes]]
//! id = "D1"
//! junction = "J3"
//! kind = "demand_optimized"   # ng_supply | h2_supply | demand_optimized | demand_fixed
//! energy_bid_price = 0.02
//! carbon_price = 0.0
//! g_max = 140.0
//! ```
//!
//! Optional tables `[gas_constants]`, `[scaling]` and `[solver]` override defaults.
//!
//! Control files for the simulator hold up to four tables of values keyed by id:
//!
//! ```toml
//! [supply_ng]
//! S1 = 3.0     # kg/s
//! [supply_h2]
//! S2 = 0.1
//! [demand]
//! D1 = 3.1
//! [alpha]
//! C1 = 1.2
//! ```

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::network::Network;
use crate::simulate::ControlAssignment;

pub const FORMAT_VERSION: i64 = 1;

/// Resolve a network path, trying a `.toml` suffix when the bare path is missing.
pub fn resolve_path(path: &Path) -> PathBuf {
    if path.exists() || path.extension().is_some() {
        return path.to_path_buf();
    }
    let with_ext = path.with_extension("toml");
    if with_ext.exists() {
        with_ext
    } else {
        path.to_path_buf()
    }
}

fn read(path: &Path) -> Result<String> {
    let path = resolve_path(path);
    std::fs::read_to_string(&path).map_err(|e| Error::File {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

pub fn load_network(path: impl AsRef<Path>) -> Result<Network> {
    parse_network(&read(path.as_ref())?)
}

pub fn parse_network(text: &str) -> Result<Network> {
    let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| {
        Error::Parse(e.message().to_string() + &span_suffix(text, e.span()))
    })?;
    match table.remove("format_version") {
        Some(toml::Value::Integer(FORMAT_VERSION)) => {}
        Some(v) => {
            return Err(Error::Parse(format!(
                "unsupported format_version {v}, expected {FORMAT_VERSION}"
            )))
        }
        None => return Err(Error::Parse("missing format_version".into())),
    }
    let network: Network = table
        .try_into()
        .map_err(|e: toml::de::Error| Error::Parse(e.message().to_string()))?;
    network.validate()?;
    Ok(network)
}

fn span_suffix(text: &str, span: Option<std::ops::Range<usize>>) -> String {
    match span {
        Some(r) => {
            let line = text[..r.start.min(text.len())].lines().count().max(1);
            format!(" (line {line})")
        }
        None => String::new(),
    }
}

pub fn parse_controls(text: &str) -> Result<ControlAssignment> {
    toml::from_str(text).map_err(|e: toml::de::Error| {
        Error::Parse(e.message().to_string() + &span_suffix(text, e.span()))
    })
}

pub fn load_controls(path: impl AsRef<Path>) -> Result<ControlAssignment> {
    parse_controls(&read(path.as_ref())?)
}

pub fn to_toml_string(network: &Network) -> Result<String> {
    let mut table = toml::Table::new();
    table.insert("format_version".into(), toml::Value::Integer(FORMAT_VERSION));
    let body = toml::Table::try_from(network)
        .map_err(|e| Error::Parse(format!("cannot serialize network: {e}")))?;
    table.extend(body);
    toml::to_string(&table).map_err(|e| Error::Parse(format!("cannot serialize network: {e}")))
}

pub fn save_network(network: &Network, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, to_toml_string(network)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testnets;

    #[test]
    fn round_trip_shipped_networks() {
        for net in [testnets::single_pipe(), testnets::eight_node()] {
            let text = to_toml_string(&net).unwrap();
            let back = parse_network(&text).unwrap();
            assert_eq!(net, back);
        }
    }

    #[test]
    fn controls_parse_and_reject_unknown_tables() {
        let c = parse_controls("[supply_ng]\nS1 = 1.5\n[alpha]\nC1 = 1.2\n").unwrap();
        assert_eq!(c.supply_ng["S1"], 1.5);
        assert_eq!(c.alpha["C1"], 1.2);
        assert!(c.demand.is_empty());
        assert!(matches!(parse_controls("[supply]\nS1 = 1.0\n"), Err(Error::Parse(_))));
    }

    #[test]
    fn missing_version_is_a_parse_error() {
        let err = parse_network("[[junctions]]\nid='J1'\np_min=1.0\ngamma_min=0.0\ngamma_max=1.0\n")
            .unwrap_err();
        assert!(matches!(err, Error::Parse(_)));
    }

    #[test]
    fn unknown_field_is_a_parse_error() {
        let text = testnets::SINGLE_PIPE_TOML.replace("friction = ", "fricton = ");
        assert!(matches!(parse_network(&text), Err(Error::Parse(_))));
    }

    #[test]
    fn no_slack_is_a_validation_error() {
        let text = testnets::SINGLE_PIPE_TOML.replace("slack_pressure = 5.0e6", "");
        assert!(matches!(
            parse_network(&text),
            Err(Error::Validation { .. })
        ));
    }

    #[test]
    fn area_defaults_to_circle() {
        let net = testnets::single_pipe();
        let p = &net.pipes[0];
        assert!((p.area - std::f64::consts::PI * p.diameter * p.diameter / 4.0).abs() < 1e-18);
    }
}
