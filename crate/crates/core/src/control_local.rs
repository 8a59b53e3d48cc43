//! Decentralized power-tracking controller of one rotor-generator unit.
//!
//! * Power path: generator torque from the power reference, `T_g = P_ref / omega_g`,
//!   slew-rate limited.
//! * Pitch path: blended state feedback plus integral action on the rotor
//!   speed error, around an equilibrium pitch feedforward,
//!   `beta_ref = beta_eq(v_hat, P_ref) - sum_j h_j(z) (K_x,j x_dev + k_I,j xi)`.
//! * Wind observer: a disturbance observer reconstructs the aerodynamic torque,
//!   and a Newton iteration inverts the torque map for the wind speed.

use std::f64::consts::FRAC_PI_2;
use std::path::Path;

use nalgebra::{DMatrix, Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::dynamics::RotorModel;
use crate::error::{Error, Result};
use crate::lqr::{self, spectral_abscissa};
use crate::reduced_model::{
    MembershipWeights, PremiseVector, ReducedModel, SectorDecomposition, VertexModel, N_VERTICES,
};

/// LQR weights on the integrator-augmented state `(omega_dev, beta_dev, xi)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignWeights {
    pub q_omega: f64,
    pub q_beta: f64,
    pub q_int: f64,
    pub r: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VertexGain {
    pub index: usize,
    /// Gains on `(omega_r - omega_rated, beta - beta_eq)`.
    pub k_x: [f64; 2],
    /// Gain on the speed-error integral.
    pub k_i: f64,
    /// Scheduling-term values of the vertex the gain was designed for.
    pub theta: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainSchedule {
    pub omega_rated: f64,
    pub p_rated: f64,
    pub vertex: Vec<VertexGain>,
}

/// Integrator-augmented vertex system `(A_aug, B_aug)`.
pub fn augmented_vertex(vertex: &VertexModel) -> (Matrix3<f64>, Vector3<f64>) {
    let a = &vertex.a;
    #[rustfmt::skip]
    let a_aug = Matrix3::new(
        a[(0, 0)], a[(0, 1)], 0.0,
        a[(1, 0)], a[(1, 1)], 0.0,
        vertex.c[0], vertex.c[1], 0.0,
    );
    (a_aug, Vector3::new(vertex.b[0], vertex.b[1], 0.0))
}

impl VertexGain {
    pub fn row(&self) -> nalgebra::RowVector3<f64> {
        nalgebra::RowVector3::new(self.k_x[0], self.k_x[1], self.k_i)
    }
}

/// Closed-loop matrix `A_aug - B_aug K` of one vertex.
pub fn closed_loop(vertex: &VertexModel, gain: &VertexGain) -> Matrix3<f64> {
    let (a, b) = augmented_vertex(vertex);
    a - b * gain.row()
}

/// Per-vertex LQR design on the integrator-augmented vertex models.
pub fn synthesize_gains(
    vertices: &[VertexModel; N_VERTICES],
    weights: &DesignWeights,
    omega_rated: f64,
    p_rated: f64,
) -> Result<GainSchedule> {
    let q = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
        weights.q_omega,
        weights.q_beta,
        weights.q_int,
    ]));
    let r = DMatrix::from_element(1, 1, weights.r);
    let mut gains = Vec::with_capacity(N_VERTICES);
    for v in vertices {
        let (a, b) = augmented_vertex(v);
        let a = DMatrix::from_iterator(3, 3, a.iter().copied());
        let b = DMatrix::from_iterator(3, 1, b.iter().copied());
        let sol = lqr::lqr(&a, &b, &q, &r).map_err(|reason| Error::Synthesis {
            vertex: v.index,
            reason,
        })?;
        gains.push(VertexGain {
            index: v.index,
            k_x: [sol.gain[(0, 0)], sol.gain[(0, 1)]],
            k_i: sol.gain[(0, 2)],
            theta: v.theta,
        });
    }
    Ok(GainSchedule {
        omega_rated,
        p_rated,
        vertex: gains,
    })
}

impl GainSchedule {
    pub fn validate(&self, vertices: &[VertexModel; N_VERTICES]) -> Result<()> {
        if self.vertex.len() != N_VERTICES {
            return Err(Error::Config {
                key: "vertex".into(),
                reason: format!("expected {N_VERTICES} vertex gains, found {}", self.vertex.len()),
            });
        }
        for (g, v) in self.vertex.iter().zip(vertices) {
            if g.index != v.index {
                return Err(Error::Config {
                    key: "vertex.index".into(),
                    reason: format!("vertex order mismatch: {} vs {}", g.index, v.index),
                });
            }
            let abscissa = self.vertex_abscissa(v, g);
            if !(abscissa < 0.0) {
                return Err(Error::Synthesis {
                    vertex: v.index,
                    reason: format!("closed loop not Hurwitz (spectral abscissa {abscissa:.3e})"),
                });
            }
        }
        Ok(())
    }

    fn vertex_abscissa(&self, v: &VertexModel, g: &VertexGain) -> f64 {
        let cl = closed_loop(v, g);
        spectral_abscissa(&DMatrix::from_iterator(3, 3, cl.iter().copied()))
    }

    /// Closed-loop eigenvalues of every vertex, in vertex order.
    pub fn closed_loop_eigenvalues(
        &self,
        vertices: &[VertexModel; N_VERTICES],
    ) -> Vec<Vec<nalgebra::Complex<f64>>> {
        self.vertex
            .iter()
            .zip(vertices)
            .map(|(g, v)| closed_loop(v, g).complex_eigenvalues().iter().copied().collect())
            .collect()
    }

    /// Gain row blended with membership weights.
    pub fn blended_gain(&self, h: &MembershipWeights) -> [f64; 3] {
        let mut k = [0.0; 3];
        for (g, w) in self.vertex.iter().zip(h.h) {
            k[0] += w * g.k_x[0];
            k[1] += w * g.k_x[1];
            k[2] += w * g.k_i;
        }
        k
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("gain schedule serializes")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config {
            key: "gain schedule".into(),
            reason: e.to_string(),
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let header = "# Vertex gains. Pitch law:\n\
                      # beta_ref = beta_eq - sum_j h_j (k_x[0] (omega_r - omega_rated) + k_x[1] (beta - beta_eq) + k_i xi)\n";
        std::fs::write(path, format!("{header}{}", self.to_toml())).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        Self::from_toml(&text)
    }
}

/// Equilibrium pitch over wind speed and power setpoint at rated rotor speed.
#[derive(Debug, Clone, PartialEq)]
pub struct PitchFeedforward {
    v_grid: Vec<f64>,
    p_grid: Vec<f64>,
    beta: Vec<f64>,
}

impl PitchFeedforward {
    /// Tabulate `beta_eq` with the static rotor balance. Points where the
    /// requested power exceeds what the wind offers at zero pitch get zero.
    pub fn build(model: &RotorModel, omega_rated: f64, v_grid: Vec<f64>, p_grid: Vec<f64>) -> Self {
        let mut beta = Vec::with_capacity(v_grid.len() * p_grid.len());
        for &v in &v_grid {
            for &p in &p_grid {
                let b = model
                    .operating_pitch(v, omega_rated, p)
                    .and_then(|b| model.equilibrium(v, omega_rated, b).map(|(x, _)| x.beta))
                    .unwrap_or(0.0);
                beta.push(b);
            }
        }
        Self { v_grid, p_grid, beta }
    }

    pub fn lookup(&self, v: f64, p: f64) -> f64 {
        let locate = |g: &[f64], x: f64| -> (usize, f64) {
            let n = g.len();
            if n == 1 || x <= g[0] {
                return (0, 0.0);
            }
            if x >= g[n - 1] {
                return (n - 2, 1.0);
            }
            let i = g.partition_point(|&s| s <= x) - 1;
            (i, (x - g[i]) / (g[i + 1] - g[i]))
        };
        let (i, tv) = locate(&self.v_grid, v);
        let (j, tp) = locate(&self.p_grid, p);
        let np = self.p_grid.len();
        let at = |a: usize, b: usize| self.beta[a * np + b];
        let lo = (1.0 - tp) * at(i, j) + tp * at(i, j + 1);
        let hi = (1.0 - tp) * at(i + 1, j) + tp * at(i + 1, j + 1);
        (1.0 - tv) * lo + tv * hi
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObserverSettings {
    /// Double-pole location of the torque observer (rad/s).
    pub bandwidth: f64,
    /// Time constant of the wind-estimate low-pass (s).
    pub filter_tau: f64,
    pub newton_max_iter: usize,
}

/// Internal state of the wind-speed observer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObserverState {
    pub omega_hat: f64,
    pub torque_hat: f64,
    /// Unfiltered Newton solution from the last step.
    pub v_raw: f64,
    pub v_hat: f64,
    /// Set when the last Newton solve failed and the estimate was held.
    pub diverged: bool,
}

impl ObserverState {
    /// Start at the design wind speed with the torque the map gives there.
    pub fn new(model: &ReducedModel, v_design: f64, omega_r: f64, beta: f64) -> Self {
        let torque_hat = model.aero.torque(v_design, omega_r, beta).unwrap_or(0.0);
        Self {
            omega_hat: omega_r,
            torque_hat,
            v_raw: v_design,
            v_hat: v_design,
            diverged: false,
        }
    }
}

/// Solve `T_r(v, omega_r, beta) = torque` for `v` by Newton iteration on the
/// branch where torque rises with wind speed.
pub fn invert_torque(
    model: &ReducedModel,
    torque: f64,
    omega_r: f64,
    beta: f64,
    v_start: f64,
    max_iter: usize,
) -> Option<f64> {
    let floor = model.aero.wind_floor;
    let mut v = v_start.max(2.0 * floor);
    for _ in 0..max_iter {
        let loads = model.aero.loads(v, omega_r, beta).ok()?;
        let slope = loads.dtorque_dv;
        if !slope.is_finite() {
            return None;
        }
        if slope <= 0.0 {
            // past the torque peak: fall back toward the rising branch
            v = (0.8 * v).max(2.0 * floor);
            continue;
        }
        let step = (loads.torque - torque) / slope;
        let next = (v - step).clamp(2.0 * floor, 80.0);
        if (next - v).abs() <= 1e-13 * v.max(1.0) {
            return Some(next);
        }
        v = next;
    }
    None
}

/// One observer update from measured rotor speed, applied generator torque
/// and measured pitch. Returns the filtered wind estimate.
pub fn estimate_wind(
    omega_r: f64,
    t_g: f64,
    beta: f64,
    dt: f64,
    state: &mut ObserverState,
    model: &ReducedModel,
    settings: &ObserverSettings,
) -> f64 {
    let p = settings.bandwidth;
    let innov = omega_r - state.omega_hat;
    state.omega_hat += dt * ((state.torque_hat - model.n_g * t_g) / model.inertia + 2.0 * p * innov);
    state.torque_hat += dt * p * p * model.inertia * innov;
    match invert_torque(model, state.torque_hat, omega_r, beta, state.v_raw, settings.newton_max_iter) {
        Some(v) => {
            state.v_raw = v;
            state.diverged = false;
        }
        None => state.diverged = true,
    }
    state.v_hat += dt / (settings.filter_tau + dt) * (state.v_raw - state.v_hat);
    state.v_hat
}

/// Actuator limits and anti-windup settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlLimits {
    pub beta_min: f64,
    pub beta_max: f64,
    /// Pitch command rate limit (rad/s).
    pub beta_rate_max: f64,
    pub t_g_max: f64,
    /// Generator torque slew limit (N m/s).
    pub t_g_slew: f64,
    /// Speed floor in the torque inversion (rad/s).
    pub omega_floor: f64,
    /// Clamp on the speed-error integral (rad).
    pub integrator_limit: f64,
}

impl ControlLimits {
    pub fn validate(&self) -> Result<()> {
        let checks = [
            ("beta_rate_max_deg", self.beta_rate_max > 0.0),
            ("t_g_max", self.t_g_max > 0.0),
            ("t_g_slew", self.t_g_slew > 0.0),
            ("omega_floor", self.omega_floor > 0.0),
            ("integrator_limit", self.integrator_limit > 0.0),
            ("beta_min", self.beta_min >= 0.0 && self.beta_min < self.beta_max),
            ("beta_max", self.beta_max <= FRAC_PI_2),
        ];
        for (key, ok) in checks {
            if !ok {
                return Err(Error::param(key, "out of range"));
            }
        }
        Ok(())
    }
}

/// Everything a local controller needs that does not change at run time.
#[derive(Debug, Clone)]
pub struct LocalDesign {
    pub schedule: GainSchedule,
    pub decomposition: SectorDecomposition,
    pub feedforward: PitchFeedforward,
    pub limits: ControlLimits,
    pub observer: ObserverSettings,
    pub v_design: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalControllerState {
    /// Speed-error integral (rad).
    pub integrator: f64,
    pub beta_cmd_prev: f64,
    pub t_g_cmd_prev: f64,
    pub observer: ObserverState,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Measurement {
    pub omega_r: f64,
    pub omega_g: f64,
    pub beta: f64,
    pub p_g: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Commands {
    pub t_g: f64,
    pub beta_ref: f64,
}

/// Diagnostics of the last control step.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StepInfo {
    pub v_hat: f64,
    pub beta_eq: f64,
    pub pitch_saturated: bool,
    pub integrator_frozen: bool,
    pub observer_diverged: bool,
}

/// Torque that delivers `p_rated + delta_p_ref` at generator speed `omega_g`,
/// before slew limiting.
pub fn torque_target(design: &LocalDesign, delta_p_ref: f64, omega_g: f64) -> f64 {
    let p_ref = design.schedule.p_rated + delta_p_ref;
    (p_ref / omega_g.max(design.limits.omega_floor)).clamp(0.0, design.limits.t_g_max)
}

#[derive(Debug, Clone)]
pub struct LocalController<'a> {
    pub design: &'a LocalDesign,
    pub state: LocalControllerState,
    pub last: StepInfo,
}

impl<'a> LocalController<'a> {
    /// Controller initialized at the given operating point, with the wind
    /// estimate at the design wind speed.
    pub fn new(design: &'a LocalDesign, omega_r: f64, beta: f64, t_g: f64) -> Self {
        let observer = ObserverState::new(&design.decomposition.model, design.v_design, omega_r, beta);
        Self {
            design,
            state: LocalControllerState {
                integrator: 0.0,
                beta_cmd_prev: beta,
                t_g_cmd_prev: t_g,
                observer,
            },
            last: StepInfo::default(),
        }
    }

    /// One sampled control step. `v_known` bypasses the observer with a
    /// directly supplied wind speed.
    pub fn step(&mut self, meas: &Measurement, delta_p_ref: f64, dt: f64, v_known: Option<f64>) -> Commands {
        let d = self.design;
        let lim = &d.limits;
        let st = &mut self.state;

        let v_hat = match v_known {
            Some(v) => {
                st.observer.v_hat = v;
                v
            }
            None => estimate_wind(
                meas.omega_r,
                st.t_g_cmd_prev,
                meas.beta,
                dt,
                &mut st.observer,
                &d.decomposition.model,
                &d.observer,
            ),
        };

        // power path
        let target = torque_target(d, delta_p_ref, meas.omega_g);
        let max_step = lim.t_g_slew * dt;
        let t_g = target.clamp(st.t_g_cmd_prev - max_step, st.t_g_cmd_prev + max_step);

        // pitch path
        let p_ref = d.schedule.p_rated + delta_p_ref;
        let beta_eq = d.feedforward.lookup(v_hat, p_ref);
        let z = PremiseVector {
            omega_r: meas.omega_r,
            beta: meas.beta,
            v: v_hat,
            t_g,
        };
        let h = d
            .decomposition
            .membership(&z)
            .unwrap_or(MembershipWeights { h: [0.25; N_VERTICES] });
        let k = d.schedule.blended_gain(&h);
        let err = meas.omega_r - d.schedule.omega_rated;
        let x_dev = [err, meas.beta - beta_eq];

        let lo = lim.beta_min.max(st.beta_cmd_prev - lim.beta_rate_max * dt);
        let hi = lim.beta_max.min(st.beta_cmd_prev + lim.beta_rate_max * dt);
        let command = |xi: f64| beta_eq - (k[0] * x_dev[0] + k[1] * x_dev[1] + k[2] * xi);

        let xi_new = (st.integrator + err * dt).clamp(-lim.integrator_limit, lim.integrator_limit);
        let raw = command(xi_new);
        let sat = raw.clamp(lo, hi);
        // freeze integration when it would push further into saturation
        let push = -k[2] * (xi_new - st.integrator);
        let frozen = sat != raw && (raw - sat) * push > 0.0;
        if !frozen {
            st.integrator = xi_new;
        }
        let beta_ref = sat;

        st.beta_cmd_prev = beta_ref;
        st.t_g_cmd_prev = t_g;
        self.last = StepInfo {
            v_hat,
            beta_eq,
            pitch_saturated: sat != raw,
            integrator_frozen: frozen,
            observer_diverged: st.observer.diverged,
        };
        Commands { t_g, beta_ref }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Config;

    #[test]
    fn default_design_vertices_are_hurwitz() {
        let design = Config::default_5mw().local_design().unwrap();
        design.schedule.validate(&design.decomposition.vertices).unwrap();
        for eig in design.schedule.closed_loop_eigenvalues(&design.decomposition.vertices) {
            assert_eq!(eig.len(), 3);
            assert!(eig.iter().all(|l| l.re < 0.0));
        }
    }

    #[test]
    fn heavier_input_weight_shrinks_gains() {
        let cfg = Config::default_5mw();
        let design = cfg.local_design().unwrap();
        let mut w = cfg.local.weights;
        let base = synthesize_gains(&design.decomposition.vertices, &w, 1.0, 1.0).unwrap();
        w.r *= 100.0;
        let heavy = synthesize_gains(&design.decomposition.vertices, &w, 1.0, 1.0).unwrap();
        for (a, b) in base.vertex.iter().zip(&heavy.vertex) {
            let na = a.row().norm();
            let nb = b.row().norm();
            assert!(nb < na, "vertex {}: {nb} !< {na}", a.index);
        }
    }

    #[test]
    fn gain_file_round_trip() {
        let design = Config::default_5mw().local_design().unwrap();
        let back = GainSchedule::from_toml(&design.schedule.to_toml()).unwrap();
        assert_eq!(back, design.schedule);
    }

    #[test]
    fn newton_inverts_map_at_known_point() {
        let cfg = Config::default_5mw();
        let model = cfg.reduced_model().unwrap();
        for (v_true, omega, beta) in [(14.0, 1.2671, 0.12), (16.0, 1.2671, 0.28), (12.2, 1.3, 0.02)] {
            let loads = model.aero.loads(v_true, omega, beta).unwrap();
            assert!(loads.dtorque_dv > 0.0);
            let torque = loads.torque;
            let v = invert_torque(&model, torque, omega, beta, 11.4, 50).unwrap();
            assert!((v - v_true).abs() < 1e-8, "{v} vs {v_true}");
        }
    }

    #[test]
    fn observer_starts_at_design_speed() {
        let cfg = Config::default_5mw();
        let design = cfg.local_design().unwrap();
        let c = LocalController::new(&design, 1.2, 0.1, 4.0e4);
        assert_eq!(c.state.observer.v_hat, cfg.operation.v_design);
    }

    #[test]
    fn rated_point_commands() {
        let cfg = Config::default_5mw();
        let design = cfg.local_design().unwrap();
        let wr = design.schedule.omega_rated;
        let wg = wr * cfg.rotor.n_g;
        let rated_torque = design.schedule.p_rated / wg;
        assert_eq!(torque_target(&design, 0.0, wg), rated_torque);
        let reduced = torque_target(&design, -0.1 * design.schedule.p_rated, wg);
        assert!((reduced - 0.9 * rated_torque).abs() < 1e-9 * rated_torque);
        // zero-error case: pure feedforward
        let v = 15.0;
        let beta_eq = design.feedforward.lookup(v, design.schedule.p_rated);
        let mut c = LocalController::new(&design, wr, beta_eq, rated_torque);
        let meas = Measurement {
            omega_r: wr,
            omega_g: wg,
            beta: beta_eq,
            p_g: design.schedule.p_rated,
        };
        let cmd = c.step(&meas, 0.0, cfg.sim.control_period, Some(v));
        assert!((cmd.beta_ref - beta_eq).abs() < 1e-15);
        assert_eq!(cmd.t_g, rated_torque);
    }
}
