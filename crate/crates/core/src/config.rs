//! Structured-text (TOML) configuration with one section per module.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::aero::{AeroConstants, AeroMaps, Aerodynamics};
use crate::control_central::CentralGains;
use crate::control_local::{
    synthesize_gains, ControlLimits, DesignWeights, GainSchedule, LocalDesign, ObserverSettings,
    PitchFeedforward,
};
use crate::dynamics::{RotorModel, RotorUnitParams};
use crate::error::{Error, Result};
use crate::reduced_model::{sector_decompose, Interval, ReducedModel, SchedulingBox};
use crate::simkit::scenario::{PowerSchedule, SimConfig};
use crate::simkit::wind::WindScenario;
use crate::tower::TowerParams;

const DEFAULT_5MW: &str = include_str!("../../../configs/default.cfg");
const PROTOTYPE_30KW: &str = include_str!("../../../configs/prototype_30kw.cfg");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AeroSection {
    pub rho: f64,
    pub radius: f64,
    #[serde(default = "default_wind_floor")]
    pub wind_floor: f64,
    /// Optional torque-coefficient table; relative paths resolve against the
    /// config file's directory. Without files the built-in surrogate is used.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cq_file: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ct_file: Option<PathBuf>,
}

fn default_wind_floor() -> f64 {
    crate::aero::DEFAULT_WIND_FLOOR
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperationSection {
    pub omega_rated: f64,
    pub p_rated: f64,
    pub v_design: f64,
    pub t_g_max: f64,
}

/// Scheduling box as `[min, max]` pairs; pitch in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSection {
    pub omega_r: [f64; 2],
    pub beta_deg: [f64; 2],
    pub v: [f64; 2],
    pub t_g: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LocalSection {
    pub weights: DesignWeights,
    pub observer: ObserverSettings,
    pub beta_min_deg: f64,
    pub beta_max_deg: f64,
    pub beta_rate_max_deg: f64,
    pub t_g_slew: f64,
    pub omega_floor: f64,
    pub integrator_limit: f64,
    /// Pre-computed gain file used instead of in-process synthesis.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gain_file: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CentralSection {
    pub k_p_c: f64,
    pub k_i_c: f64,
    pub u_c_limit: f64,
    /// Fraction of the total power change assigned to the lateral pair.
    pub share_23: f64,
    pub track_when_disabled: bool,
}

impl CentralSection {
    pub fn gains(&self) -> CentralGains {
        CentralGains {
            k_p_c: self.k_p_c,
            k_i_c: self.k_i_c,
            u_c_limit: self.u_c_limit,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    pub dt: f64,
    pub control_period: f64,
    pub t_end: f64,
    pub mitigation_enable_time: f64,
    pub seed: u64,
    pub turbulence_intensity: f64,
    pub correlation_time: f64,
}

/// Replica of the load-mitigation scenario: uniform wind, then a wind step
/// on one lateral rotor, with a ramped curtailment of the total power.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Fig7Section {
    pub v_mean: f64,
    pub dv: f64,
    pub step_time: f64,
    /// Lateral rotor receiving the step (2 or 3).
    pub step_rotor: usize,
    /// Total power change reached at the end of the ramp (W).
    pub dp_total: f64,
    pub ramp_start: f64,
    pub ramp_end: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub aero: AeroSection,
    pub rotor: RotorUnitParams,
    pub operation: OperationSection,
    pub tower: TowerParams,
    pub schedule: ScheduleSection,
    pub local: LocalSection,
    pub central: CentralSection,
    pub sim: SimSection,
    pub fig7: Fig7Section,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

/// Named scenarios known to [`Config::scenario`].
pub const SCENARIOS: [&str; 3] = ["fig7", "uniform", "power-step"];

fn parse_error(e: toml::de::Error) -> Error {
    let msg = e.message().to_string();
    let key = msg
        .split('`')
        .nth(1)
        .map(str::to_string)
        .unwrap_or_else(|| "config".to_string());
    Error::Config {
        key,
        reason: e.to_string().trim().to_string(),
    }
}

fn in_section(section: &str) -> impl Fn(Error) -> Error + '_ {
    move |e| match e {
        Error::Parameter { key, reason } => Error::Config {
            key: format!("{section}.{key}"),
            reason,
        },
        other => other,
    }
}

fn check(ok: bool, key: &str, reason: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::Config {
            key: key.into(),
            reason: reason.into(),
        })
    }
}

impl Config {
    pub fn from_toml_str(text: &str, base_dir: &Path) -> Result<Self> {
        let mut cfg: Config = toml::from_str(text).map_err(parse_error)?;
        cfg.base_dir = base_dir.to_path_buf();
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml_str(&text, base)
    }

    /// The shipped 3 x 5 MW configuration.
    pub fn default_5mw() -> Self {
        Self::from_toml_str(DEFAULT_5MW, Path::new(".")).expect("shipped default config parses")
    }

    /// The shipped 3 x 30 kW prototype configuration.
    pub fn prototype_30kw() -> Self {
        Self::from_toml_str(PROTOTYPE_30KW, Path::new(".")).expect("shipped prototype config parses")
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    /// Check every parameter block without running anything.
    pub fn validate(&self) -> Result<()> {
        AeroConstants::new(self.aero.rho, self.aero.radius).map_err(in_section("aero"))?;
        check(self.aero.wind_floor > 0.0, "aero.wind_floor", "must be positive")?;
        check(
            self.aero.cq_file.is_some() == self.aero.ct_file.is_some(),
            "aero.cq_file",
            "cq_file and ct_file must be given together",
        )?;
        self.aerodynamics()?;
        self.rotor.validate().map_err(in_section("rotor"))?;
        self.tower.validate().map_err(in_section("tower"))?;

        let op = &self.operation;
        for (key, value) in [
            ("operation.omega_rated", op.omega_rated),
            ("operation.p_rated", op.p_rated),
            ("operation.v_design", op.v_design),
            ("operation.t_g_max", op.t_g_max),
        ] {
            check(value > 0.0 && value.is_finite(), key, "must be positive")?;
        }

        let s = &self.schedule;
        for (key, pair) in [
            ("schedule.omega_r", s.omega_r),
            ("schedule.beta_deg", s.beta_deg),
            ("schedule.v", s.v),
            ("schedule.t_g", s.t_g),
        ] {
            check(pair[0] < pair[1], key, "needs min < max")?;
        }
        check(s.omega_r[0] > 0.0, "schedule.omega_r", "minimum must be positive")?;
        check(
            s.omega_r[0] <= op.omega_rated && op.omega_rated <= s.omega_r[1],
            "schedule.omega_r",
            "must contain omega_rated",
        )?;
        check(
            s.v[0] > self.aero.wind_floor,
            "schedule.v",
            "minimum must exceed the wind floor",
        )?;

        let l = &self.local;
        for (key, value) in [
            ("local.weights.q_omega", l.weights.q_omega),
            ("local.weights.q_int", l.weights.q_int),
            ("local.weights.r", l.weights.r),
            ("local.observer.bandwidth", l.observer.bandwidth),
            ("local.observer.filter_tau", l.observer.filter_tau),
        ] {
            check(value > 0.0 && value.is_finite(), key, "must be positive")?;
        }
        check(l.weights.q_beta >= 0.0, "local.weights.q_beta", "must be non-negative")?;
        check(
            l.observer.newton_max_iter > 0,
            "local.observer.newton_max_iter",
            "must be at least 1",
        )?;
        self.control_limits().validate().map_err(in_section("local"))?;

        let c = &self.central;
        self.central.gains().validate().map_err(in_section("central"))?;
        check(
            (0.0..=1.0).contains(&c.share_23),
            "central.share_23",
            "must lie in [0, 1]",
        )?;

        let sim = &self.sim;
        check(sim.dt > 0.0, "sim.dt", "must be positive")?;
        check(sim.t_end > 0.0, "sim.t_end", "must be positive")?;
        check(sim.control_period >= sim.dt, "sim.control_period", "must be at least dt")?;
        let ratio = sim.control_period / sim.dt;
        check(
            (ratio - ratio.round()).abs() < 1e-9,
            "sim.control_period",
            "must be an integer multiple of dt",
        )?;

        let f = &self.fig7;
        check(
            f.step_rotor == 2 || f.step_rotor == 3,
            "fig7.step_rotor",
            "must be 2 or 3",
        )?;
        check(f.ramp_start <= f.ramp_end, "fig7.ramp_end", "must not precede ramp_start")?;
        check(f.v_mean > self.aero.wind_floor, "fig7.v_mean", "must exceed the wind floor")?;
        self.scenario("fig7")?.wind.validate()?;
        Ok(())
    }

    pub fn aerodynamics(&self) -> Result<Arc<Aerodynamics>> {
        let constants = AeroConstants::new(self.aero.rho, self.aero.radius).map_err(in_section("aero"))?;
        let maps = match (&self.aero.cq_file, &self.aero.ct_file) {
            (Some(cq), Some(ct)) => AeroMaps::from_csv_files(&self.resolve(cq), &self.resolve(ct))?,
            _ => AeroMaps::surrogate(),
        };
        let mut aero = Aerodynamics::new(constants, maps);
        aero.wind_floor = self.aero.wind_floor;
        Ok(Arc::new(aero))
    }

    pub fn rotor_model(&self) -> Result<RotorModel> {
        RotorModel::new(self.rotor, self.aerodynamics()?).map_err(in_section("rotor"))
    }

    pub fn reduced_model(&self) -> Result<ReducedModel> {
        self.rotor.validate().map_err(in_section("rotor"))?;
        Ok(ReducedModel::new(&self.rotor, self.aerodynamics()?))
    }

    pub fn scheduling_box(&self) -> SchedulingBox {
        let s = &self.schedule;
        let iv = |p: [f64; 2]| Interval::new(p[0], p[1]);
        SchedulingBox {
            omega_r: iv(s.omega_r),
            beta: Interval::new(s.beta_deg[0].to_radians(), s.beta_deg[1].to_radians()),
            v: iv(s.v),
            t_g: iv(s.t_g),
        }
    }

    pub fn control_limits(&self) -> ControlLimits {
        let l = &self.local;
        ControlLimits {
            beta_min: l.beta_min_deg.to_radians(),
            beta_max: l.beta_max_deg.to_radians(),
            beta_rate_max: l.beta_rate_max_deg.to_radians(),
            t_g_max: self.operation.t_g_max,
            t_g_slew: l.t_g_slew,
            omega_floor: l.omega_floor,
            integrator_limit: l.integrator_limit,
        }
    }

    /// Gain schedule synthesized from the configured weights.
    pub fn synthesize(&self) -> Result<(GainSchedule, crate::reduced_model::SectorDecomposition)> {
        let model = self.reduced_model()?;
        let decomposition = sector_decompose(&self.scheduling_box(), &model)?;
        let schedule = synthesize_gains(
            &decomposition.vertices,
            &self.local.weights,
            self.operation.omega_rated,
            self.operation.p_rated,
        )?;
        Ok((schedule, decomposition))
    }

    /// Everything the local controllers need: vertex models, gains (loaded
    /// from `local.gain_file` when set), pitch feedforward and limits.
    pub fn local_design(&self) -> Result<LocalDesign> {
        self.local_design_with(None)
    }

    /// As [`Config::local_design`], with an explicit gain schedule taking
    /// precedence over both the gain file and synthesis.
    pub fn local_design_with(&self, gains: Option<GainSchedule>) -> Result<LocalDesign> {
        let model = self.reduced_model()?;
        let decomposition = sector_decompose(&self.scheduling_box(), &model)?;
        let schedule = match (gains, &self.local.gain_file) {
            (Some(g), _) => g,
            (None, Some(path)) => GainSchedule::load(&self.resolve(path))?,
            (None, None) => synthesize_gains(
                &decomposition.vertices,
                &self.local.weights,
                self.operation.omega_rated,
                self.operation.p_rated,
            )?,
        };
        schedule.validate(&decomposition.vertices)?;
        let limits = self.control_limits();
        limits.validate().map_err(in_section("local"))?;

        let rotor = self.rotor_model()?;
        let vb = self.schedule.v;
        let n_v = ((vb[1] - vb[0]) / 0.25).ceil() as usize;
        let v_grid: Vec<f64> = (0..=n_v)
            .map(|k| vb[0] + (vb[1] - vb[0]) * k as f64 / n_v as f64)
            .collect();
        let p_rated = self.operation.p_rated;
        let p_grid: Vec<f64> = (0..=28).map(|k| p_rated * (0.4 + 0.025 * k as f64)).collect();
        let feedforward = PitchFeedforward::build(&rotor, self.operation.omega_rated, v_grid, p_grid);

        Ok(LocalDesign {
            schedule,
            decomposition,
            feedforward,
            limits,
            observer: self.local.observer,
            v_design: self.operation.v_design,
        })
    }

    fn base_sim(&self, wind: WindScenario, power: PowerSchedule) -> Result<SimConfig> {
        Ok(SimConfig {
            dt: self.sim.dt,
            control_period: self.sim.control_period,
            t_end: self.sim.t_end,
            mitigation_enable_time: self.sim.mitigation_enable_time,
            mitigation: true,
            observer: true,
            wind,
            power,
            share_23: self.central.share_23,
            rotor: self.rotor,
            tower: self.tower,
            central: self.central.gains(),
            track_when_disabled: self.central.track_when_disabled,
            omega_init: self.operation.omega_rated,
        })
    }

    /// Simulation set-up for one of the named [`SCENARIOS`].
    pub fn scenario(&self, name: &str) -> Result<SimConfig> {
        let f = &self.fig7;
        let sim = &self.sim;
        let uniform = |v: f64| WindScenario {
            schedules: [vec![(0.0, v)], vec![(0.0, v)], vec![(0.0, v)]],
            turbulence_intensity: sim.turbulence_intensity,
            correlation_time: sim.correlation_time,
            rng_seed: sim.seed,
        };
        match name {
            "fig7" => {
                let mut wind = uniform(f.v_mean);
                let idx = f.step_rotor.clamp(2, 3) - 1;
                wind.schedules[idx].push((f.step_time, f.v_mean + f.dv));
                let power = PowerSchedule::new(vec![
                    (0.0, 0.0),
                    (f.ramp_start, 0.0),
                    (f.ramp_end, f.dp_total),
                ]);
                self.base_sim(wind, power)
            }
            "uniform" => {
                let mut c = self.base_sim(uniform(f.v_mean), PowerSchedule::constant(0.0))?;
                c.mitigation = false;
                Ok(c)
            }
            "power-step" => {
                let step = -0.1 * 3.0 * self.operation.p_rated;
                let power = PowerSchedule::new(vec![(0.0, 0.0), (10.0, 0.0), (10.0, step)]);
                let mut c = self.base_sim(uniform(f.v_mean), power)?;
                c.mitigation = false;
                Ok(c)
            }
            other => Err(Error::Config {
                key: "scenario".into(),
                reason: format!("unknown scenario `{other}`; expected one of {SCENARIOS:?}"),
            }),
        }
    }
}
