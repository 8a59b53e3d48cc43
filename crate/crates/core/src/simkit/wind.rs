//! Per-rotor wind: piecewise-constant mean schedule plus first-order
//! autoregressive (discrete Ornstein-Uhlenbeck) turbulence.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct WindScenario {
    /// `(time, mean speed)` breakpoints per rotor; the mean holds from each
    /// breakpoint until the next.
    pub schedules: [Vec<(f64, f64)>; 3],
    pub turbulence_intensity: f64,
    /// Correlation time of the turbulence (s).
    pub correlation_time: f64,
    pub rng_seed: u64,
}

impl WindScenario {
    /// Same constant mean on every rotor, no turbulence.
    pub fn uniform(v: f64) -> Self {
        Self {
            schedules: [vec![(0.0, v)], vec![(0.0, v)], vec![(0.0, v)]],
            turbulence_intensity: 0.0,
            correlation_time: 1.0,
            rng_seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (i, s) in self.schedules.iter().enumerate() {
            let key = format!("wind.rotor{}", i + 1);
            if s.is_empty() {
                return Err(Error::Config { key, reason: "empty mean-speed schedule".into() });
            }
            if s.windows(2).any(|w| w[1].0 <= w[0].0) {
                return Err(Error::Config { key, reason: "breakpoints must be time-sorted".into() });
            }
            if s.iter().any(|&(t, v)| !(t.is_finite() && v.is_finite() && v >= 0.0)) {
                return Err(Error::Config { key, reason: "mean speeds must be finite and non-negative".into() });
            }
        }
        if !(0.0..0.5).contains(&self.turbulence_intensity) {
            return Err(Error::Config {
                key: "sim.turbulence_intensity".into(),
                reason: "must lie in [0, 0.5)".into(),
            });
        }
        if !(self.correlation_time > 0.0) {
            return Err(Error::Config {
                key: "sim.correlation_time".into(),
                reason: "must be positive".into(),
            });
        }
        Ok(())
    }

    /// Scheduled mean speed of `rotor` (0-based) at time `t`.
    pub fn mean(&self, rotor: usize, t: f64) -> f64 {
        let s = &self.schedules[rotor];
        let idx = s.partition_point(|&(tb, _)| tb <= t);
        s[idx.saturating_sub(1)].1
    }
}

/// Stateful sampler over a [`WindScenario`]. Draws are consumed in a fixed
/// order (rotor 1, 2, 3 per step), which makes a run bit-reproducible for a
/// given seed.
#[derive(Debug, Clone)]
pub struct WindField {
    pub scenario: WindScenario,
    rng: ChaCha8Rng,
    /// Normalized turbulence state per rotor, unit stationary variance.
    noise: [f64; 3],
}

impl WindField {
    pub fn new(scenario: WindScenario) -> Self {
        let rng = ChaCha8Rng::seed_from_u64(scenario.rng_seed);
        Self {
            scenario,
            rng,
            noise: [0.0; 3],
        }
    }

    /// Current wind of every rotor at time `t`.
    pub fn current(&self, t: f64) -> [f64; 3] {
        [0, 1, 2].map(|i| self.sample(i, t))
    }

    pub fn sample(&self, rotor: usize, t: f64) -> f64 {
        let mean = self.scenario.mean(rotor, t);
        (mean * (1.0 + self.scenario.turbulence_intensity * self.noise[rotor])).max(0.0)
    }

    /// Advance the turbulence of all rotors by `dt`.
    pub fn advance(&mut self, dt: f64) {
        if self.scenario.turbulence_intensity == 0.0 {
            return;
        }
        let a = (-dt / self.scenario.correlation_time).exp();
        let b = (1.0 - a * a).sqrt();
        for n in &mut self.noise {
            let e: f64 = StandardNormal.sample(&mut self.rng);
            *n = a * *n + b * e;
        }
    }
}

/// Wind of `rotor` at time `t` for the current turbulence state.
pub fn wind_sample(field: &WindField, rotor: usize, t: f64) -> f64 {
    field.sample(rotor, t)
}
