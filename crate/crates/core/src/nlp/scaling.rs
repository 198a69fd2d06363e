//! Reference scales for the non-dimensional problem.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::Network;
use crate::physics::GasConstants;

/// Scaled quantities are `P / p0` for pressures and `phi / phi0` for mass flows,
/// supplies and withdrawals. Concentrations and boost ratios are not scaled.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingConfig {
    /// [Pa]
    pub p0: f64,
    /// [m]
    pub l0: f64,
    /// Squared reference wave speed [m²/s²].
    pub a0_sq_ref: f64,
    /// [m²]
    pub area0: f64,
    /// [kg/m³]
    pub rho0: f64,
    /// [m/s]
    pub u0: f64,
    /// [kg/s]
    pub phi0: f64,
}

impl ScalingConfig {
    /// Derive the dependent scales: `a0 = sqrt(a_ng a_h2)`, `u0 = ceil(a0) / 300`,
    /// `rho0 = p0 / a0²`, `phi0 = rho0 u0 area0`.
    pub fn new(p0: f64, l0: f64, area0: f64, gc: &GasConstants) -> Result<Self> {
        for (name, v) in [("p0", p0), ("l0", l0), ("area0", area0)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::validation(
                    "scaling",
                    format!("{name} must be finite and positive, got {v}"),
                ));
            }
        }
        let a0_sq_ref = gc.a_ng * gc.a_h2;
        let a0 = a0_sq_ref.sqrt();
        let u0 = a0.ceil() / 300.0;
        let rho0 = p0 / a0_sq_ref;
        Ok(ScalingConfig {
            p0,
            l0,
            a0_sq_ref,
            area0,
            rho0,
            u0,
            phi0: rho0 * u0 * area0,
        })
    }

    /// Scales implied by the network's `[scaling]` table and gas constants.
    pub fn for_network(network: &Network) -> Result<Self> {
        let p0 = network
            .scaling
            .p0
            .unwrap_or_else(|| network.reference_pressure());
        Self::new(
            p0,
            network.scaling.l0,
            network.scaling.area0,
            &network.gas_constants,
        )
    }

    /// Coefficient of `V̄ phī²` in the scaled pipe relation.
    pub fn pipe_coefficient(&self, friction: f64, length: f64, diameter: f64, area: f64) -> f64 {
        let l_bar = length / self.l0;
        let d_bar = diameter / self.l0;
        let a_bar = area / self.area0;
        friction * l_bar / (d_bar * a_bar * a_bar) * self.u0 * self.u0 / self.a0_sq_ref
    }
}
