//! Per-rotor structural, drive-train and pitch-actuator model.
//!
//! State layout (8 entries):
//! `[y_a, y_b, delta_theta_s, y_a_dot, y_b_dot, omega_r, omega_g, beta]`.
//! The drive-train is carried in the reduced torsion coordinate
//! `delta_theta_s = n_g theta_r - theta_g`, so the rotor and generator rows of
//! the stiffness and damping matrices collapse to torques proportional to
//! `delta_theta_s` and `n_g omega_r - omega_g`.

use std::f64::consts::FRAC_PI_2;
use std::sync::Arc;

use nalgebra::{Matrix2, Matrix4, SMatrix, SVector, Vector2};
use serde::{Deserialize, Serialize};

use crate::aero::Aerodynamics;
use crate::error::{Error, Result};

pub const STATE_DIM: usize = 8;
pub type StateVector = SVector<f64, STATE_DIM>;
pub type StateJacobian = SMatrix<f64, STATE_DIM, STATE_DIM>;

/// Physical constants of one rotor-generator unit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RotorUnitParams {
    /// Pitch actuator time constant (s).
    pub tau_beta: f64,
    /// Effective rotor-arm mass (kg).
    pub m_a: f64,
    /// Effective blade mass (kg).
    pub m_b: f64,
    pub n_blades: u32,
    #[serde(rename = "J_r")]
    pub j_r: f64,
    #[serde(rename = "J_g")]
    pub j_g: f64,
    pub k_a: f64,
    pub k_b: f64,
    /// Drive-train stiffness, high-speed-shaft referred (N m/rad).
    #[serde(rename = "k_S")]
    pub k_s: f64,
    pub d_a: f64,
    pub d_b: f64,
    #[serde(rename = "d_S")]
    pub d_s: f64,
    pub n_g: f64,
}

impl RotorUnitParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("tau_beta", self.tau_beta),
            ("m_a", self.m_a),
            ("m_b", self.m_b),
            ("J_r", self.j_r),
            ("J_g", self.j_g),
            ("k_a", self.k_a),
            ("k_b", self.k_b),
            ("k_S", self.k_s),
            ("d_a", self.d_a),
            ("d_b", self.d_b),
            ("d_S", self.d_s),
            ("n_g", self.n_g),
        ];
        for (key, value) in positive {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::param(key, format!("must be positive, got {value}")));
            }
        }
        if self.n_blades < 1 {
            return Err(Error::param("n_blades", "must be at least 1"));
        }
        Ok(())
    }

    /// Rigid-shaft inertia referred to the rotor, `J_r + n_g^2 J_g`.
    pub fn lumped_inertia(&self) -> f64 {
        self.j_r + self.n_g * self.n_g * self.j_g
    }

    fn nb(&self) -> f64 {
        self.n_blades as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RotorUnitState {
    pub y_a: f64,
    pub y_b: f64,
    pub delta_theta_s: f64,
    pub y_a_dot: f64,
    pub y_b_dot: f64,
    pub omega_r: f64,
    pub omega_g: f64,
    /// Pitch angle (rad).
    pub beta: f64,
}

impl RotorUnitState {
    pub fn to_vector(&self) -> StateVector {
        StateVector::from([
            self.y_a,
            self.y_b,
            self.delta_theta_s,
            self.y_a_dot,
            self.y_b_dot,
            self.omega_r,
            self.omega_g,
            self.beta,
        ])
    }

    pub fn from_slice(x: &[f64]) -> Self {
        Self {
            y_a: x[0],
            y_b: x[1],
            delta_theta_s: x[2],
            y_a_dot: x[3],
            y_b_dot: x[4],
            omega_r: x[5],
            omega_g: x[6],
            beta: x[7],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.to_vector().iter().all(|x| x.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RotorUnitInput {
    /// Generator torque command (N m).
    pub t_g: f64,
    /// Pitch reference (rad).
    pub beta_ref: f64,
}

/// Mass, stiffness and damping matrices over `(y_a, y_b, theta_r, theta_g)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StructuralMatrices {
    pub mass: Matrix4<f64>,
    pub stiffness: Matrix4<f64>,
    pub damping: Matrix4<f64>,
}

pub fn assemble_matrices(params: &RotorUnitParams) -> Result<StructuralMatrices> {
    params.validate()?;
    let nmb = params.nb() * params.m_b;
    let (ks, ds, ng) = (params.k_s, params.d_s, params.n_g);
    #[rustfmt::skip]
    let mass = Matrix4::new(
        params.m_a + nmb, nmb, 0.0, 0.0,
        nmb, nmb, 0.0, 0.0,
        0.0, 0.0, params.j_r, 0.0,
        0.0, 0.0, 0.0, params.j_g,
    );
    #[rustfmt::skip]
    let stiffness = Matrix4::new(
        params.k_a, 0.0, 0.0, 0.0,
        0.0, params.nb() * params.k_b, 0.0, 0.0,
        0.0, 0.0, ks * ng * ng, -ks * ng,
        0.0, 0.0, -ks * ng, ks,
    );
    #[rustfmt::skip]
    let damping = Matrix4::new(
        params.d_a, 0.0, 0.0, 0.0,
        0.0, params.nb() * params.d_b, 0.0, 0.0,
        0.0, 0.0, ds * ng * ng, -ds * ng,
        0.0, 0.0, -ds * ng, ds,
    );
    if mass.cholesky().is_none() {
        return Err(Error::param("m_a", "mass matrix is not positive definite"));
    }
    Ok(StructuralMatrices {
        mass,
        stiffness,
        damping,
    })
}

/// Electrical power of a lossless generator.
pub fn generator_power(t_g: f64, omega_g: f64) -> f64 {
    t_g * omega_g
}

/// One rotor-generator unit: parameters, shared aerodynamics and the cached
/// inverse of the arm/blade mass block.
#[derive(Debug, Clone)]
pub struct RotorModel {
    pub params: RotorUnitParams,
    pub aero: Arc<Aerodynamics>,
    arm_mass_inv: Matrix2<f64>,
}

impl RotorModel {
    pub fn new(params: RotorUnitParams, aero: Arc<Aerodynamics>) -> Result<Self> {
        let m = assemble_matrices(&params)?;
        let arm_mass_inv = m
            .mass
            .fixed_view::<2, 2>(0, 0)
            .into_owned()
            .try_inverse()
            .ok_or_else(|| Error::param("m_b", "arm/blade mass block is singular"))?;
        Ok(Self {
            params,
            aero,
            arm_mass_inv,
        })
    }

    /// Aerodynamic (torque, thrust) with forcing frozen at zero below the
    /// wind floor.
    pub fn aero_forcing(&self, v: f64, omega_r: f64, beta: f64) -> (f64, f64) {
        match self.aero.loads(v, omega_r, beta) {
            Ok(l) => (l.torque, l.thrust),
            Err(_) => (0.0, 0.0),
        }
    }

    pub fn derivative(&self, x: &RotorUnitState, u: &RotorUnitInput, v: f64) -> StateVector {
        let (torque, thrust) = self.aero_forcing(v, x.omega_r, x.beta);
        self.derivative_with_forcing(x, u, torque, thrust)
    }

    /// Right-hand side with externally supplied aerodynamic torque and thrust.
    pub fn derivative_with_forcing(
        &self,
        x: &RotorUnitState,
        u: &RotorUnitInput,
        torque: f64,
        thrust: f64,
    ) -> StateVector {
        let p = &self.params;
        let nb = p.nb();
        let restoring = Vector2::new(
            p.k_a * x.y_a + p.d_a * x.y_a_dot,
            nb * p.k_b * x.y_b + nb * p.d_b * x.y_b_dot,
        );
        let accel = -(self.arm_mass_inv * restoring);
        let slip = p.n_g * x.omega_r - x.omega_g;
        let shaft = p.k_s * x.delta_theta_s + p.d_s * slip;
        StateVector::from([
            x.y_a_dot,
            x.y_b_dot,
            slip,
            accel[0],
            accel[1] + thrust / (nb * p.m_b),
            (torque - p.n_g * shaft) / p.j_r,
            (shaft - u.t_g) / p.j_g,
            (u.beta_ref - x.beta) / p.tau_beta,
        ])
    }

    /// Analytic Jacobian of [`Self::derivative`] with respect to the state.
    pub fn jacobian(&self, x: &RotorUnitState, v: f64) -> StateJacobian {
        let p = &self.params;
        let nb = p.nb();
        let mut j = StateJacobian::zeros();
        j[(0, 3)] = 1.0;
        j[(1, 4)] = 1.0;
        j[(2, 5)] = p.n_g;
        j[(2, 6)] = -1.0;
        let minv = &self.arm_mass_inv;
        let k = [p.k_a, nb * p.k_b];
        let d = [p.d_a, nb * p.d_b];
        for r in 0..2 {
            for c in 0..2 {
                j[(3 + r, c)] = -minv[(r, c)] * k[c];
                j[(3 + r, 3 + c)] = -minv[(r, c)] * d[c];
            }
        }
        // drive train
        j[(5, 2)] = -p.n_g * p.k_s / p.j_r;
        j[(5, 5)] = -p.n_g * p.d_s * p.n_g / p.j_r;
        j[(5, 6)] = p.n_g * p.d_s / p.j_r;
        j[(6, 2)] = p.k_s / p.j_g;
        j[(6, 5)] = p.d_s * p.n_g / p.j_g;
        j[(6, 6)] = -p.d_s / p.j_g;
        j[(7, 7)] = -1.0 / p.tau_beta;
        if let Ok(l) = self.aero.loads(v, x.omega_r, x.beta) {
            j[(4, 5)] += l.dthrust_domega / (nb * p.m_b);
            j[(4, 7)] += l.dthrust_dbeta / (nb * p.m_b);
            j[(5, 5)] += l.dtorque_domega / p.j_r;
            j[(5, 7)] += l.dtorque_dbeta / p.j_r;
        }
        j
    }

    /// Kinetic plus elastic energy of the structure and drive train.
    pub fn mechanical_energy(&self, x: &RotorUnitState) -> f64 {
        let p = &self.params;
        let nmb = p.nb() * p.m_b;
        let kinetic = 0.5 * (p.m_a + nmb) * x.y_a_dot * x.y_a_dot
            + nmb * x.y_a_dot * x.y_b_dot
            + 0.5 * nmb * x.y_b_dot * x.y_b_dot
            + 0.5 * p.j_r * x.omega_r * x.omega_r
            + 0.5 * p.j_g * x.omega_g * x.omega_g;
        let elastic = 0.5 * p.k_a * x.y_a * x.y_a
            + 0.5 * p.nb() * p.k_b * x.y_b * x.y_b
            + 0.5 * p.k_s * x.delta_theta_s * x.delta_theta_s;
        kinetic + elastic
    }

    /// Static operating point at wind `v`, rotor speed `omega_r` and pitch
    /// `beta` (rad): deflections, shaft torsion and generator torque that make
    /// every state derivative vanish.
    pub fn equilibrium(
        &self,
        v: f64,
        omega_r: f64,
        beta: f64,
    ) -> Result<(RotorUnitState, RotorUnitInput)> {
        if !(0.0..=FRAC_PI_2).contains(&beta) {
            return Err(Error::NoEquilibrium(format!(
                "pitch {beta} rad outside [0, pi/2]"
            )));
        }
        let p = &self.params;
        let loads = self
            .aero
            .loads(v, omega_r, beta)
            .map_err(|e| Error::NoEquilibrium(e.to_string()))?;
        if loads.torque < 0.0 {
            return Err(Error::NoEquilibrium(format!(
                "aerodynamic torque {:.3e} N m is negative at v = {v} m/s, omega_r = {omega_r} rad/s",
                loads.torque
            )));
        }
        let state = RotorUnitState {
            y_a: loads.thrust / p.k_a,
            y_b: loads.thrust / (p.nb() * p.k_b),
            delta_theta_s: loads.torque / (p.k_s * p.n_g),
            y_a_dot: 0.0,
            y_b_dot: 0.0,
            omega_r,
            omega_g: p.n_g * omega_r,
            beta,
        };
        let input = RotorUnitInput {
            t_g: loads.torque / p.n_g,
            beta_ref: beta,
        };
        Ok((state, input))
    }

    /// Pitch angle (rad) at which the rotor delivers `power` at speed
    /// `omega_r` in wind `v`. Searches the lowest pitch root on [0, pi/2].
    pub fn operating_pitch(&self, v: f64, omega_r: f64, power: f64) -> Result<f64> {
        let residual = |beta: f64| -> Result<f64> {
            Ok(self
                .aero
                .torque(v, omega_r, beta)
                .map_err(|e| Error::NoEquilibrium(e.to_string()))?
                * omega_r
                - power)
        };
        let r0 = residual(0.0)?;
        if r0 < 0.0 {
            return Err(Error::NoEquilibrium(format!(
                "{:.4e} W not available at v = {v} m/s (maximum {:.4e} W at zero pitch)",
                power,
                r0 + power
            )));
        }
        if r0 == 0.0 {
            return Ok(0.0);
        }
        let steps = 180;
        let step = FRAC_PI_2 / steps as f64;
        let mut lo = 0.0;
        for k in 1..=steps {
            let hi = k as f64 * step;
            if residual(hi)? <= 0.0 {
                let mut hi = hi;
                for _ in 0..100 {
                    let mid = 0.5 * (lo + hi);
                    if residual(mid)? > 0.0 {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                    if hi - lo < 1e-14 {
                        break;
                    }
                }
                return Ok(0.5 * (lo + hi));
            }
            lo = hi;
        }
        Err(Error::NoEquilibrium(format!(
            "power {power:.4e} W exceeds output at full feather for v = {v} m/s"
        )))
    }
}

/// Free-function form of [`RotorModel::derivative`].
pub fn state_derivative(
    state: &RotorUnitState,
    input: &RotorUnitInput,
    v: f64,
    model: &RotorModel,
) -> StateVector {
    model.derivative(state, input, v)
}

/// Free-function form of [`RotorModel::equilibrium`].
pub fn equilibrium_find(
    v: f64,
    target_omega_r: f64,
    beta: f64,
    model: &RotorModel,
) -> Result<(RotorUnitState, RotorUnitInput)> {
    model.equilibrium(v, target_omega_r, beta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aero::{AeroConstants, AeroMaps};
    use crate::config::Config;

    fn model() -> RotorModel {
        Config::default_5mw().rotor_model().unwrap()
    }

    #[test]
    fn matrices_match_layout() {
        let p = Config::default_5mw().rotor;
        let m = assemble_matrices(&p).unwrap();
        let nmb = p.n_blades as f64 * p.m_b;
        assert_eq!(m.mass[(0, 0)], p.m_a + nmb);
        assert_eq!(m.mass[(0, 1)], nmb);
        assert_eq!(m.mass[(1, 0)], nmb);
        assert_eq!(m.stiffness[(2, 2)], p.k_s * p.n_g * p.n_g);
        assert_eq!(m.stiffness[(2, 3)], -p.k_s * p.n_g);
        assert_eq!(m.stiffness[(3, 2)], -p.k_s * p.n_g);
        assert_eq!(m.stiffness[(3, 3)], p.k_s);
        assert_eq!(m.damping[(2, 3)], -p.d_s * p.n_g);
        assert_eq!(m.mass, m.mass.transpose());
    }

    #[test]
    fn mass_conditioning_grows_as_blade_mass_vanishes() {
        let mut p = Config::default_5mw().rotor;
        let mut last = 0.0;
        for eps in [1e2, 1e0, 1e-2, 1e-4] {
            p.m_b = eps;
            let m = assemble_matrices(&p).unwrap().mass;
            let eig = m.symmetric_eigenvalues();
            let cond = eig.max() / eig.min();
            assert!(cond > last);
            last = cond;
        }
        p.m_b = 0.0;
        assert!(assemble_matrices(&p).is_err());
    }

    #[test]
    fn unforced_equilibrium_is_stationary() {
        let m = model();
        let d = m.derivative(&RotorUnitState::default(), &RotorUnitInput::default(), 0.05);
        assert_eq!(d, StateVector::zeros());
    }

    #[test]
    fn synchronous_shafts_have_no_torsion_rate() {
        let m = model();
        let x = RotorUnitState {
            omega_r: 1.0,
            omega_g: m.params.n_g,
            ..Default::default()
        };
        let d = m.derivative(&x, &RotorUnitInput::default(), 0.0);
        assert_eq!(d[2], 0.0);
    }

    #[test]
    fn pitch_first_order_lag() {
        let mut m = model();
        m.params.tau_beta = 1.0;
        let u = RotorUnitInput {
            t_g: 0.0,
            beta_ref: 0.1,
        };
        let d = m.derivative(&RotorUnitState::default(), &u, 0.0);
        assert!((d[7] - 0.1).abs() < 1e-15);
    }

    #[test]
    fn generator_power_product() {
        assert_eq!(generator_power(0.0, 123.0), 0.0);
        assert_eq!(generator_power(100.0, 10.0), 1000.0);
        assert_eq!(generator_power(5.0e4, 0.0), 0.0);
    }

    #[test]
    fn reduced_rows_match_full_matrices() {
        // Drive-train rows in reduced coordinates equal -M^-1 (K q + D qdot)
        // of the four-coordinate model under delta_theta_s = n_g theta_r - theta_g.
        let m = model();
        let mats = assemble_matrices(&m.params).unwrap();
        let (theta_r, theta_g) = (0.3, 0.3 * m.params.n_g - 0.002);
        let x = RotorUnitState {
            y_a: 0.2,
            y_b: -0.1,
            delta_theta_s: m.params.n_g * theta_r - theta_g,
            y_a_dot: 0.05,
            y_b_dot: 0.3,
            omega_r: 1.1,
            omega_g: 1.1 * m.params.n_g + 0.4,
            beta: 0.0,
        };
        let q = nalgebra::Vector4::new(x.y_a, x.y_b, theta_r, theta_g);
        let qd = nalgebra::Vector4::new(x.y_a_dot, x.y_b_dot, x.omega_r, x.omega_g);
        let full = -(mats.mass.try_inverse().unwrap() * (mats.stiffness * q + mats.damping * qd));
        let d = m.derivative_with_forcing(&x, &RotorUnitInput::default(), 0.0, 0.0);
        for (row, col) in [(3, 0), (4, 1), (5, 2), (6, 3)] {
            let scale = full[col].abs().max(1e-12);
            assert!((d[row] - full[col]).abs() <= 1e-9 * scale, "row {row}");
        }
    }

    #[test]
    fn equilibrium_is_stationary_and_balanced() {
        let m = model();
        let beta = m.operating_pitch(16.0, 1.2671, 5.0e6).unwrap();
        let (x, u) = m.equilibrium(16.0, 1.2671, beta).unwrap();
        let d = m.derivative(&x, &u, 16.0);
        assert!(d.amax() < 1e-9, "{d}");
        let loads = m.aero.loads(16.0, 1.2671, beta).unwrap();
        assert!((m.params.k_a * x.y_a - loads.thrust).abs() <= 1e-9 * loads.thrust);
        assert!((u.t_g - loads.torque / m.params.n_g).abs() <= 1e-12 * u.t_g);
        assert!((generator_power(u.t_g, x.omega_g) - 5.0e6).abs() < 1e-3);
    }

    #[test]
    fn equilibrium_rejects_negative_torque() {
        let m = model();
        // deep feather at high tip speed ratio brakes the rotor
        assert!(matches!(
            m.equilibrium(5.0, 2.0, 1.4),
            Err(Error::NoEquilibrium(_))
        ));
        assert!(m.equilibrium(0.01, 1.0, 0.0).is_err());
        assert!(m.operating_pitch(6.0, 1.2671, 5.0e6).is_err());
    }

    #[test]
    fn derivative_is_affine_in_inputs() {
        let m = model();
        let (x, _) = m.equilibrium(14.0, 1.2, 0.1).unwrap();
        let u1 = RotorUnitInput { t_g: 3.0e4, beta_ref: 0.05 };
        let u2 = RotorUnitInput { t_g: 1.0e4, beta_ref: 0.2 };
        let mix = RotorUnitInput {
            t_g: 0.25 * u1.t_g + 0.75 * u2.t_g,
            beta_ref: 0.25 * u1.beta_ref + 0.75 * u2.beta_ref,
        };
        let lhs = m.derivative(&x, &mix, 14.0);
        let rhs = m.derivative(&x, &u1, 14.0) * 0.25 + m.derivative(&x, &u2, 14.0) * 0.75;
        assert!((lhs - rhs).amax() < 1e-9);
    }

    #[test]
    fn aero_frozen_below_floor() {
        let consts = AeroConstants::new(1.225, 63.0).unwrap();
        let aero = Arc::new(Aerodynamics::new(consts, AeroMaps::surrogate()));
        let m = RotorModel::new(Config::default_5mw().rotor, aero).unwrap();
        assert_eq!(m.aero_forcing(0.1, 1.0, 0.0), (0.0, 0.0));
        assert_ne!(m.aero_forcing(0.2, 0.0, 0.0).1, f64::NAN);
    }
}
