//! Physical relations for a two-species (natural gas / hydrogen) ideal blend.
//!
//! All blend properties mix linearly in the hydrogen mass fraction `gamma`.
//! The public functions reject `gamma` outside `[0, 1]`; the `*_raw` variants
//! used by the optimizer evaluate the same affine expressions without the
//! domain check, since interior-point iterates are allowed to wander slightly
//! outside the physical box before convergence.
//!
//! Compressor power follows the aggregated station model
//! `W = 286.76 (kappa - 1) T / (G kappa) * (alpha^m - 1) * |phi|`,
//! `m = (kappa - 1) / kappa`, with `phi` in kg/s. The result is reported in kW
//! and the compression cost factor `eta` is expressed in $/(kW s); any unit
//! ambiguity of the 286.76 coefficient is carried by `eta`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::Pipe;

/// Leading coefficient of the compressor power relation.
pub const COMPRESSOR_POWER_COEFF: f64 = 286.76;

/// Species-level constants. Missing fields in a network file fall back to the defaults.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GasConstants {
    /// Natural gas wave speed [m/s].
    pub a_ng: f64,
    /// Hydrogen wave speed [m/s].
    pub a_h2: f64,
    pub kappa_ng: f64,
    pub kappa_h2: f64,
    /// Specific gravities.
    pub g_ng: f64,
    pub g_h2: f64,
    /// Calorific values [MJ/kg].
    pub r_ng: f64,
    pub r_h2: f64,
    /// CO2 to natural gas molecular weight ratio.
    pub zeta_ng: f64,
    /// Compressor suction temperature [K].
    pub t_suction: f64,
    /// Molar masses [kg/mol].
    pub m_ng: f64,
    pub m_h2: f64,
    /// Universal gas constant [J/(mol K)].
    pub r_universal: f64,
    /// Compression cost factor [$/(kW s)].
    pub eta: f64,
}

impl Default for GasConstants {
    fn default() -> Self {
        GasConstants {
            a_ng: 370.0,
            a_h2: 1090.0,
            kappa_ng: 1.304,
            kappa_h2: 1.405,
            g_ng: 0.5537,
            g_h2: 0.0696,
            r_ng: 44.2,
            r_h2: 141.8,
            zeta_ng: 44.0 / 18.0,
            t_suction: 288.7,
            m_ng: 0.01737,
            m_h2: 0.002016,
            r_universal: 8.314,
            eta: 0.13 / 3600.0,
        }
    }
}

impl GasConstants {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("a_ng", self.a_ng),
            ("a_h2", self.a_h2),
            ("kappa_ng", self.kappa_ng),
            ("kappa_h2", self.kappa_h2),
            ("g_ng", self.g_ng),
            ("g_h2", self.g_h2),
            ("r_ng", self.r_ng),
            ("r_h2", self.r_h2),
            ("zeta_ng", self.zeta_ng),
            ("t_suction", self.t_suction),
            ("m_ng", self.m_ng),
            ("m_h2", self.m_h2),
            ("r_universal", self.r_universal),
            ("eta", self.eta),
        ];
        for (name, value) in fields {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::validation(
                    format!("gas_constants.{name}"),
                    format!("must be finite and strictly positive, got {value}"),
                ));
            }
        }
        if self.a_h2 <= self.a_ng {
            return Err(Error::validation("gas_constants.a_h2", "must exceed a_ng"));
        }
        if self.r_h2 <= self.r_ng {
            return Err(Error::validation("gas_constants.r_h2", "must exceed r_ng"));
        }
        if self.kappa_ng <= 1.0 || self.kappa_h2 <= 1.0 {
            return Err(Error::validation(
                "gas_constants.kappa",
                "specific-heat ratios must exceed 1",
            ));
        }
        Ok(())
    }

    /// Avoided CO2 per kg of delivered hydrogen, `(R_H2 / R_NG) * zeta_NG`.
    pub fn carbon_offset_factor(&self) -> f64 {
        self.r_h2 / self.r_ng * self.zeta_ng
    }
}

fn check_fraction(gamma: f64) -> Result<()> {
    if (0.0..=1.0).contains(&gamma) {
        Ok(())
    } else {
        Err(Error::Domain {
            quantity: "gamma",
            value: gamma,
            domain: "[0, 1]",
        })
    }
}

#[inline]
fn mix(gamma: f64, h2: f64, ng: f64) -> f64 {
    gamma * h2 + (1.0 - gamma) * ng
}

#[inline]
pub(crate) fn sound_speed_sq_raw(gamma: f64, gc: &GasConstants) -> f64 {
    mix(gamma, gc.a_h2 * gc.a_h2, gc.a_ng * gc.a_ng)
}

#[inline]
pub(crate) fn blend_kappa_raw(gamma: f64, gc: &GasConstants) -> f64 {
    mix(gamma, gc.kappa_h2, gc.kappa_ng)
}

#[inline]
pub(crate) fn blend_gravity_raw(gamma: f64, gc: &GasConstants) -> f64 {
    mix(gamma, gc.g_h2, gc.g_ng)
}

#[inline]
pub(crate) fn blend_calorific_raw(gamma: f64, gc: &GasConstants) -> f64 {
    mix(gamma, gc.r_h2, gc.r_ng)
}

/// Squared wave speed of the blend [m²/s²].
pub fn sound_speed_sq(gamma: f64, gc: &GasConstants) -> Result<f64> {
    check_fraction(gamma)?;
    Ok(sound_speed_sq_raw(gamma, gc))
}

pub fn blend_kappa(gamma: f64, gc: &GasConstants) -> Result<f64> {
    check_fraction(gamma)?;
    Ok(blend_kappa_raw(gamma, gc))
}

pub fn blend_gravity(gamma: f64, gc: &GasConstants) -> Result<f64> {
    check_fraction(gamma)?;
    Ok(blend_gravity_raw(gamma, gc))
}

/// Energy density of the blend [MJ/kg].
pub fn blend_calorific(gamma: f64, gc: &GasConstants) -> Result<f64> {
    check_fraction(gamma)?;
    Ok(blend_calorific_raw(gamma, gc))
}

/// `lambda L / (D A²)` for a pipe, in physical units [1/m⁴].
pub fn pipe_resistance(pipe: &Pipe) -> f64 {
    pipe.friction * pipe.length / (pipe.diameter * pipe.area * pipe.area)
}

/// Residual of the Weymouth relation [Pa²]; zero when the pipe equation holds.
pub fn weymouth_residual(
    p_from: f64,
    p_to: f64,
    phi: f64,
    gamma: f64,
    pipe: &Pipe,
    gc: &GasConstants,
) -> Result<f64> {
    let v = sound_speed_sq(gamma, gc)?;
    Ok(p_from * p_from - p_to * p_to - pipe_resistance(pipe) * v * phi * phi.abs())
}

pub(crate) fn compressor_power_raw(alpha: f64, phi: f64, gamma: f64, gc: &GasConstants) -> f64 {
    let kappa = blend_kappa_raw(gamma, gc);
    let gravity = blend_gravity_raw(gamma, gc);
    let m = (kappa - 1.0) / kappa;
    COMPRESSOR_POWER_COEFF * (kappa - 1.0) * gc.t_suction / (gravity * kappa)
        * (alpha.powf(m) - 1.0)
        * phi.abs()
}

/// Compressor driving power [kW] for boost ratio `alpha` and mass flow `phi` [kg/s].
pub fn compressor_power(alpha: f64, phi: f64, gamma: f64, gc: &GasConstants) -> Result<f64> {
    check_fraction(gamma)?;
    if !(alpha >= 1.0) {
        return Err(Error::Domain {
            quantity: "alpha",
            value: alpha,
            domain: "[1, inf)",
        });
    }
    if !(phi >= 0.0) {
        return Err(Error::Domain {
            quantity: "phi",
            value: phi,
            domain: "[0, inf)",
        });
    }
    Ok(compressor_power_raw(alpha, phi, gamma, gc))
}

/// Avoided CO2 mass rate [kg/s] for a withdrawal `d` [kg/s] at hydrogen fraction `gamma`.
pub fn carbon_offset(d: f64, gamma: f64, gc: &GasConstants) -> Result<f64> {
    check_fraction(gamma)?;
    if !(d >= 0.0) {
        return Err(Error::Domain {
            quantity: "d",
            value: d,
            domain: "[0, inf)",
        });
    }
    Ok(d * gamma * gc.carbon_offset_factor())
}

/// Value, gradient and Hessian of the compressor power with respect to
/// `(alpha, phi, gamma)`, valid for `phi >= 0` and `alpha > 0`.
pub(crate) fn compressor_power_derivatives(
    alpha: f64,
    phi: f64,
    gamma: f64,
    gc: &GasConstants,
) -> (f64, [f64; 3], [[f64; 3]; 3]) {
    let lead = COMPRESSOR_POWER_COEFF * gc.t_suction;
    let kappa = blend_kappa_raw(gamma, gc);
    let dkappa = gc.kappa_h2 - gc.kappa_ng;
    let gravity = blend_gravity_raw(gamma, gc);
    let dgravity = gc.g_h2 - gc.g_ng;

    // m = 1 - 1/kappa
    let m = 1.0 - 1.0 / kappa;
    let dm = dkappa / (kappa * kappa);
    let ddm = -2.0 * dkappa * dkappa / (kappa * kappa * kappa);

    // q = m / G
    let inv_g = 1.0 / gravity;
    let dinv_g = -dgravity * inv_g * inv_g;
    let ddinv_g = 2.0 * dgravity * dgravity * inv_g * inv_g * inv_g;
    let q = m * inv_g;
    let dq = dm * inv_g + m * dinv_g;
    let ddq = ddm * inv_g + 2.0 * dm * dinv_g + m * ddinv_g;

    // e = alpha^m - 1
    let ln_a = alpha.ln();
    let a_m = alpha.powf(m);
    let e = a_m - 1.0;
    let e_a = m * a_m / alpha;
    let e_aa = m * (m - 1.0) * a_m / (alpha * alpha);
    let e_g = a_m * ln_a * dm;
    let e_gg = a_m * ln_a * ln_a * dm * dm + a_m * ln_a * ddm;
    let e_ag = dm * a_m / alpha * (1.0 + m * ln_a);

    let value = lead * q * e * phi;
    let grad = [
        lead * phi * q * e_a,
        lead * q * e,
        lead * phi * (dq * e + q * e_g),
    ];
    let h_aa = lead * phi * q * e_aa;
    let h_ap = lead * q * e_a;
    let h_ag = lead * phi * (dq * e_a + q * e_ag);
    let h_pg = lead * (dq * e + q * e_g);
    let h_gg = lead * phi * (ddq * e + 2.0 * dq * e_g + q * e_gg);
    let hess = [[h_aa, h_ap, h_ag], [h_ap, 0.0, h_pg], [h_ag, h_pg, h_gg]];
    (value, grad, hess)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gc() -> GasConstants {
        GasConstants::default()
    }

    #[test]
    fn sound_speed_endpoints() {
        assert_eq!(sound_speed_sq(0.0, &gc()).unwrap(), 136900.0);
        assert_eq!(sound_speed_sq(1.0, &gc()).unwrap(), 1188100.0);
        let v = sound_speed_sq(0.1, &gc()).unwrap();
        assert!((v - 242020.0).abs() < 1e-9);
    }

    #[test]
    fn out_of_range_fraction_is_rejected() {
        assert!(matches!(
            sound_speed_sq(1.2, &gc()),
            Err(Error::Domain { quantity: "gamma", .. })
        ));
        assert!(blend_kappa(-0.01, &gc()).is_err());
        assert!(blend_gravity(f64::NAN, &gc()).is_err());
        assert!(blend_calorific(1.0001, &gc()).is_err());
        assert!(carbon_offset(1.0, 2.0, &gc()).is_err());
        assert!(compressor_power(0.9, 1.0, 0.0, &gc()).is_err());
        assert!(compressor_power(1.1, -1.0, 0.0, &gc()).is_err());
    }

    #[test]
    fn blend_ratio_values() {
        assert_eq!(blend_kappa(0.0, &gc()).unwrap(), 1.304);
        assert_eq!(blend_gravity(0.0, &gc()).unwrap(), 0.5537);
        assert_eq!(blend_kappa(1.0, &gc()).unwrap(), 1.405);
        assert_eq!(blend_gravity(1.0, &gc()).unwrap(), 0.0696);
        assert!((blend_kappa(0.5, &gc()).unwrap() - 1.3545).abs() < 1e-15);
        assert!((blend_gravity(0.5, &gc()).unwrap() - 0.31165).abs() < 1e-15);
    }

    #[test]
    fn calorific_values() {
        assert_eq!(blend_calorific(0.0, &gc()).unwrap(), 44.2);
        assert_eq!(blend_calorific(1.0, &gc()).unwrap(), 141.8);
        assert!((blend_calorific(0.1, &gc()).unwrap() - 53.96).abs() < 1e-12);
    }

    #[test]
    fn carbon_offset_values() {
        assert_eq!(carbon_offset(3.0, 0.0, &gc()).unwrap(), 0.0);
        let e = carbon_offset(1.0, 0.1, &gc()).unwrap();
        assert!((e - 0.1 * 141.8 / 44.2 * 44.0 / 18.0).abs() < 1e-15);
        assert!((e - 0.7842).abs() < 1e-4);
        let e2 = carbon_offset(2.0, 0.1, &gc()).unwrap();
        assert!((e2 - 2.0 * e).abs() < 1e-15);
    }

    #[test]
    fn compressor_power_zero_cases() {
        assert_eq!(compressor_power(1.0, 75.0, 0.3, &gc()).unwrap(), 0.0);
        assert_eq!(compressor_power(1.4, 0.0, 0.3, &gc()).unwrap(), 0.0);
    }

    #[test]
    fn weymouth_zero_flow_and_sign() {
        let pipe = Pipe {
            id: "P".into(),
            from: "A".into(),
            to: "B".into(),
            length: 1000.0,
            diameter: 0.5,
            area: 0.2,
            friction: 0.01,
        };
        assert_eq!(weymouth_residual(4e6, 4e6, 0.0, 0.0, &pipe, &gc()).unwrap(), 0.0);
        assert!(weymouth_residual(4e6, 4e6, 10.0, 0.0, &pipe, &gc()).unwrap() < 0.0);
    }

    #[test]
    fn compressor_derivatives_match_finite_differences() {
        let g = gc();
        let point = [1.23, 2.7, 0.07];
        let f = |x: [f64; 3]| compressor_power_raw(x[0], x[1], x[2], &g);
        let (v, grad, hess) = compressor_power_derivatives(point[0], point[1], point[2], &g);
        assert!((v - f(point)).abs() <= 1e-12 * v.abs());
        for i in 0..3 {
            let h = 1e-6;
            let mut xp = point;
            let mut xm = point;
            xp[i] += h;
            xm[i] -= h;
            let fd = (f(xp) - f(xm)) / (2.0 * h);
            assert!((fd - grad[i]).abs() <= 1e-6 * fd.abs().max(1.0), "grad {i}");
            for j in 0..3 {
                let gp = compressor_power_derivatives(xp[0], xp[1], xp[2], &g).1[j];
                let gm = compressor_power_derivatives(xm[0], xm[1], xm[2], &g).1[j];
                let fd2 = (gp - gm) / (2.0 * h);
                assert!(
                    (fd2 - hess[i][j]).abs() <= 1e-5 * fd2.abs().max(1.0),
                    "hess {i}{j}: {fd2} vs {}",
                    hess[i][j]
                );
            }
        }
    }
}
