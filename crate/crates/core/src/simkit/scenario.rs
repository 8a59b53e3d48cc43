//! Coupled three-rotor plus tower simulation under sampled control.

use nalgebra::SVector;

use crate::control_central::{dispatch, rotor1_reference, CentralGains, MitigationController};
use crate::control_local::{LocalController, LocalDesign, Measurement};
use crate::dynamics::{generator_power, RotorModel, RotorUnitInput, RotorUnitParams, RotorUnitState, STATE_DIM};
use crate::error::{Error, Result};
use crate::simkit::integrate::rk4_step;
use crate::simkit::trace::{RotorRecord, SimTrace, TraceRow};
use crate::simkit::wind::{WindField, WindScenario};
use crate::tower::{tower_derivative, TowerParams, TowerState};

pub const N_ROTORS: usize = 3;
/// Three rotor states followed by the tower torsion angle and rate.
pub const PLANT_DIM: usize = N_ROTORS * STATE_DIM + 2;
pub type PlantVector = SVector<f64, PLANT_DIM>;

/// Piecewise-linear reference for the total power change, held constant
/// outside the breakpoints. Repeating a time gives a step.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerSchedule {
    points: Vec<(f64, f64)>,
}

impl PowerSchedule {
    pub fn new(points: Vec<(f64, f64)>) -> Self {
        assert!(!points.is_empty(), "power schedule needs a breakpoint");
        Self { points }
    }

    pub fn constant(value: f64) -> Self {
        Self::new(vec![(0.0, value)])
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn at(&self, t: f64) -> f64 {
        let p = &self.points;
        let idx = p.partition_point(|&(tb, _)| tb <= t);
        if idx == 0 {
            return p[0].1;
        }
        let (t0, v0) = p[idx - 1];
        match p.get(idx) {
            Some(&(t1, v1)) if t1 > t0 => v0 + (v1 - v0) * (t - t0) / (t1 - t0),
            _ => v0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let sorted = self.points.windows(2).all(|w| w[1].0 >= w[0].0);
        let finite = self.points.iter().all(|&(t, v)| t.is_finite() && v.is_finite());
        if sorted && finite {
            Ok(())
        } else {
            Err(Error::Config {
                key: "power schedule".into(),
                reason: "breakpoints must be finite and time-sorted".into(),
            })
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimConfig {
    pub dt: f64,
    pub control_period: f64,
    pub t_end: f64,
    pub mitigation_enable_time: f64,
    /// Master switch of the tower load mitigation.
    pub mitigation: bool,
    /// With `false` the local controllers receive the true wind speed.
    pub observer: bool,
    pub wind: WindScenario,
    /// Total power change of all three rotors (W).
    pub power: PowerSchedule,
    /// Fraction of the total power change assigned to rotors 2 and 3.
    pub share_23: f64,
    pub rotor: RotorUnitParams,
    pub tower: TowerParams,
    pub central: CentralGains,
    pub track_when_disabled: bool,
    pub omega_init: f64,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, reason: &str| Error::Config {
            key: key.into(),
            reason: reason.into(),
        };
        if !(self.dt > 0.0) {
            return Err(bad("sim.dt", "must be positive"));
        }
        if !(self.control_period >= self.dt) {
            return Err(bad("sim.control_period", "must be at least dt"));
        }
        let ratio = self.control_period / self.dt;
        if (ratio - ratio.round()).abs() > 1e-9 {
            return Err(bad("sim.control_period", "must be an integer multiple of dt"));
        }
        if !(self.t_end > 0.0) {
            return Err(bad("sim.t_end", "must be positive"));
        }
        if !(0.0..=1.0).contains(&self.share_23) {
            return Err(bad("central.share_23", "must lie in [0, 1]"));
        }
        self.wind.validate()?;
        self.power.validate()?;
        self.central.validate()?;
        self.tower.validate()
    }

    pub fn substeps(&self) -> usize {
        (self.control_period / self.dt).round() as usize
    }
}

/// Rotor `i` view of the plant vector.
pub fn rotor_state(x: &PlantVector, i: usize) -> RotorUnitState {
    RotorUnitState::from_slice(&x.as_slice()[i * STATE_DIM..(i + 1) * STATE_DIM])
}

pub fn tower_state(x: &PlantVector) -> TowerState {
    TowerState {
        phi_z: x[N_ROTORS * STATE_DIM],
        phi_z_dot: x[N_ROTORS * STATE_DIM + 1],
    }
}

/// Right-hand side of the coupled plant for held inputs and winds.
pub fn plant_derivative(
    x: &PlantVector,
    model: &RotorModel,
    tower: &TowerParams,
    inputs: &[RotorUnitInput; N_ROTORS],
    winds: &[f64; N_ROTORS],
) -> PlantVector {
    let mut dx = PlantVector::zeros();
    let mut thrust = [0.0; N_ROTORS];
    for i in 0..N_ROTORS {
        let s = rotor_state(x, i);
        let (torque, f_t) = model.aero_forcing(winds[i], s.omega_r, s.beta);
        thrust[i] = f_t;
        let d = model.derivative_with_forcing(&s, &inputs[i], torque, f_t);
        dx.fixed_rows_mut::<STATE_DIM>(i * STATE_DIM).copy_from(&d);
    }
    let dt = tower_derivative(&tower_state(x), thrust[1], thrust[2], tower);
    dx[N_ROTORS * STATE_DIM] = dt[0];
    dx[N_ROTORS * STATE_DIM + 1] = dt[1];
    dx
}

/// Steady operating point of one rotor at rated speed delivering
/// `p_rated + delta_p` in wind `v`. Falls back to minimum pitch when the wind
/// cannot supply that power.
fn initial_rotor(
    model: &RotorModel,
    design: &LocalDesign,
    v: f64,
    omega: f64,
    delta_p: f64,
) -> Result<(RotorUnitState, RotorUnitInput)> {
    let power = design.schedule.p_rated + delta_p;
    let beta = model
        .operating_pitch(v, omega, power)
        .unwrap_or(design.limits.beta_min)
        .clamp(design.limits.beta_min, design.limits.beta_max);
    model.equilibrium(v, omega, beta)
}

/// Run one scenario. Controllers act every `control_period` on the state at
/// that instant; commands and winds are held between samples.
pub fn run_scenario(config: &SimConfig, design: &LocalDesign) -> Result<SimTrace> {
    config.validate()?;
    let aero = design.decomposition.model.aero.clone();
    let model = RotorModel::new(config.rotor, aero)?;
    let mut field = WindField::new(config.wind.clone());
    let n_sub = config.substeps();
    let n_ctrl = (config.t_end / config.control_period + 1e-9).floor() as usize;

    let dp_total0 = config.power.at(0.0);
    let dp_23_0 = config.share_23 * dp_total0;
    let init_share = [rotor1_reference(dp_total0, dp_23_0), 0.5 * dp_23_0, 0.5 * dp_23_0];
    let mut x = PlantVector::zeros();
    let mut controllers = Vec::with_capacity(N_ROTORS);
    let winds0 = field.current(0.0);
    for i in 0..N_ROTORS {
        let (s, u) = initial_rotor(&model, design, winds0[i], config.omega_init, init_share[i])?;
        x.fixed_rows_mut::<STATE_DIM>(i * STATE_DIM).copy_from(&s.to_vector());
        controllers.push(LocalController::new(design, s.omega_r, s.beta, u.t_g));
    }
    let mut central = MitigationController::new(config.central, config.track_when_disabled);

    let mut trace = SimTrace {
        rows: Vec::with_capacity(n_ctrl + 1),
    };
    for k in 0..=n_ctrl {
        let t = k as f64 * config.control_period;
        let winds = field.current(t);
        let tower = tower_state(&x);

        let dp_total = config.power.at(t);
        let dp_23 = config.share_23 * dp_total;
        let enabled = config.mitigation && t >= config.mitigation_enable_time;
        let u_c = central.step(tower.phi_z_dot, config.control_period, enabled);
        let split = dispatch(u_c, dp_23)?;
        let refs = [
            rotor1_reference(dp_total, dp_23),
            split.delta_p_2_ref,
            split.delta_p_3_ref,
        ];

        let mut inputs = [RotorUnitInput::default(); N_ROTORS];
        let mut rotors = [RotorRecord::default(); N_ROTORS];
        for i in 0..N_ROTORS {
            let s = rotor_state(&x, i);
            let meas = Measurement {
                omega_r: s.omega_r,
                omega_g: s.omega_g,
                beta: s.beta,
                p_g: generator_power(controllers[i].state.t_g_cmd_prev, s.omega_g),
            };
            let v_known = (!config.observer).then_some(winds[i]);
            let cmd = controllers[i].step(&meas, refs[i], config.control_period, v_known);
            inputs[i] = RotorUnitInput {
                t_g: cmd.t_g,
                beta_ref: cmd.beta_ref,
            };
            rotors[i] = RotorRecord {
                v: winds[i],
                v_hat: controllers[i].last.v_hat,
                state: s,
                t_g: cmd.t_g,
                beta_ref: cmd.beta_ref,
                p_g: generator_power(cmd.t_g, s.omega_g),
                dp_ref: refs[i],
                thrust: model.aero_forcing(winds[i], s.omega_r, s.beta).1,
            };
        }
        trace.rows.push(TraceRow {
            t,
            rotors,
            phi_z: tower.phi_z,
            phi_z_dot: tower.phi_z_dot,
            u_c,
            dp_total_ref: dp_total,
            dp_23_ref: dp_23,
            mitigation_active: enabled,
        });
        if k == n_ctrl {
            break;
        }

        for s in 0..n_sub {
            let ts = t + s as f64 * config.dt;
            let w = field.current(ts);
            x = rk4_step(&x, ts, config.dt, |_, x| {
                plant_derivative(x, &model, &config.tower, &inputs, &w)
            })?;
            field.advance(config.dt);
        }
    }
    Ok(trace)
}
