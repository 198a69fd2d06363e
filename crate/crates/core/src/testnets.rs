//! The two reference networks shipped under `networks/`.

use crate::format::parse_network;
use crate::network::Network;

pub const SINGLE_PIPE_TOML: &str = include_str!("../../../networks/single_pipe.toml");
pub const EIGHT_NODE_TOML: &str = include_str!("../../../networks/eight_node.toml");

/// Slack supply junction, one compressor and one pipe feeding a single demand.
pub fn single_pipe() -> Network {
    parse_network(SINGLE_PIPE_TOML).expect("shipped single-pipe network is valid")
}

/// Eight junctions, five pipes, three compressors and two congested demand junctions.
pub fn eight_node() -> Network {
    parse_network(EIGHT_NODE_TOML).expect("shipped eight-node network is valid")
}
