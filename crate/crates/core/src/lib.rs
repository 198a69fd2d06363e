//! Steady-state transport of hydrogen / natural-gas blends in pipeline networks:
//! physical relations, economic dispatch with locational shadow prices, a
//! steady-state simulator and parameter sweeps.

pub mod error;
pub mod format;
pub mod linalg;
pub mod network;
pub mod nlp;
pub mod physics;
pub mod simulate;
pub mod solver;
pub mod sweep;
pub mod testnets;

pub use error::{Error, Result};
pub use format::{load_controls, load_network, parse_controls, parse_network, save_network};
pub use network::{Compressor, GNode, GNodeKind, Junction, Network, Pipe};
pub use nlp::{assemble, assemble_network, AssembledProblem, PhysicalPoint, ScalingConfig};
pub use physics::GasConstants;
pub use simulate::{crosscheck, simulate, simulate_network, ControlAssignment, SimulationState};
pub use solver::{solve, Solution, SolverOptions, Status};
pub use sweep::{run_sweep, SweepResult, SweepSpec, SweepTarget};
