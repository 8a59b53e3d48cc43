//! Main-tower torsion about the vertical axis, driven by the thrust difference
//! of the two lateral rotors. The top rotor sits on the axis and contributes
//! no torsional moment.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TowerParams {
    /// Torsional inertia of the whole structure about z (kg m^2).
    #[serde(rename = "J_z")]
    pub j_z: f64,
    /// Torsional stiffness (N m/rad).
    pub k_z: f64,
    /// Torsional damping (N m s/rad).
    pub d_z: f64,
    /// Lever arm from the tower axis to the lateral rotor hubs (m).
    pub lever_r: f64,
}

impl TowerParams {
    pub fn validate(&self) -> Result<()> {
        for (key, value) in [
            ("J_z", self.j_z),
            ("k_z", self.k_z),
            ("d_z", self.d_z),
            ("lever_r", self.lever_r),
        ] {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::param(key, format!("must be positive, got {value}")));
            }
        }
        Ok(())
    }

    pub fn natural_frequency(&self) -> f64 {
        (self.k_z / self.j_z).sqrt()
    }

    pub fn damping_ratio(&self) -> f64 {
        self.d_z / (2.0 * (self.k_z * self.j_z).sqrt())
    }

    /// Static torsion per newton of thrust difference, `r / k_z`.
    pub fn static_gain(&self) -> f64 {
        self.lever_r / self.k_z
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TowerState {
    pub phi_z: f64,
    pub phi_z_dot: f64,
}

impl TowerState {
    pub fn energy(&self, params: &TowerParams) -> f64 {
        0.5 * params.j_z * self.phi_z_dot * self.phi_z_dot
            + 0.5 * params.k_z * self.phi_z * self.phi_z
    }
}

/// `d/dt (phi_z, phi_z_dot)` under the thrusts of rotors 2 and 3.
pub fn tower_derivative(state: &TowerState, f_t2: f64, f_t3: f64, params: &TowerParams) -> [f64; 2] {
    let moment = params.lever_r * (f_t3 - f_t2);
    [
        state.phi_z_dot,
        (-params.k_z * state.phi_z - params.d_z * state.phi_z_dot + moment) / params.j_z,
    ]
}

/// Root-mean-square torsion angle over a window of samples.
pub fn tower_base_load_metric(phi_z: &[f64]) -> Result<f64> {
    if phi_z.is_empty() {
        return Err(Error::EmptyWindow);
    }
    let sum_sq: f64 = phi_z.iter().map(|p| p * p).sum();
    Ok((sum_sq / phi_z.len() as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn params() -> TowerParams {
        TowerParams {
            j_z: 5.0e9,
            k_z: 4.9e10,
            d_z: 6.3e8,
            lever_r: 70.0,
        }
    }

    #[test]
    fn symmetric_thrust_is_stationary() {
        let d = tower_derivative(&TowerState::default(), 4.0e5, 4.0e5, &params());
        assert_eq!(d, [0.0, 0.0]);
    }

    #[test]
    fn static_deflection_balances_moment() {
        let p = params();
        let df = 2.0e4;
        let s = TowerState {
            phi_z: p.lever_r * df / p.k_z,
            phi_z_dot: 0.0,
        };
        let d = tower_derivative(&s, 1.0e5, 1.0e5 + df, &p);
        assert_eq!(d[0], 0.0);
        assert!(d[1].abs() < 1e-15);
    }

    #[test]
    fn rms_examples() {
        assert!((tower_base_load_metric(&[-0.3; 17]).unwrap() - 0.3).abs() < 1e-15);
        assert_eq!(tower_base_load_metric(&[0.0; 5]).unwrap(), 0.0);
        let n = 1000;
        let a = 2.5;
        let sine: Vec<f64> = (0..n)
            .map(|k| a * (2.0 * PI * 3.0 * k as f64 / n as f64).sin())
            .collect();
        let rms = tower_base_load_metric(&sine).unwrap();
        assert!((rms - a / 2f64.sqrt()).abs() < 1e-12);
        assert!(matches!(tower_base_load_metric(&[]), Err(Error::EmptyWindow)));
    }

    #[test]
    fn validation_names_key() {
        let mut p = params();
        p.k_z = -1.0;
        assert!(p.validate().unwrap_err().to_string().contains("k_z"));
    }
}
