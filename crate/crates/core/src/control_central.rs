//! Tower load mitigation: a PI law on the tower torsion rate produces a
//! participation factor that skews the power-change split between the two
//! lateral rotors.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CentralGains {
    /// Proportional gain on the torsion rate (s/rad).
    pub k_p_c: f64,
    /// Gain on the integrated torsion rate (1/rad).
    pub k_i_c: f64,
    #[serde(default = "default_limit")]
    pub u_c_limit: f64,
}

fn default_limit() -> f64 {
    0.5
}

impl CentralGains {
    pub fn validate(&self) -> Result<()> {
        if !self.k_p_c.is_finite() {
            return Err(Error::param("k_p_c", "must be finite"));
        }
        if !self.k_i_c.is_finite() {
            return Err(Error::param("k_i_c", "must be finite"));
        }
        if !(self.u_c_limit > 0.0 && self.u_c_limit <= 0.5) {
            return Err(Error::param("u_c_limit", "must lie in (0, 1/2]"));
        }
        Ok(())
    }
}

/// Power-change references for rotors 2 and 3.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DispatchCommand {
    pub delta_p_2_ref: f64,
    pub delta_p_3_ref: f64,
    pub u_c: f64,
}

/// PI mitigation controller with clamped output.
///
/// The integral of the torsion rate is accumulated with the trapezoidal rule.
/// When `track_when_disabled` is set the integral keeps following the
/// measured rate while the output is switched off, so that it equals the
/// torsion angle accumulated since start.
#[derive(Debug, Clone)]
pub struct MitigationController {
    pub gains: CentralGains,
    pub track_when_disabled: bool,
    integral: f64,
    prev_rate: Option<f64>,
}

impl MitigationController {
    pub fn new(gains: CentralGains, track_when_disabled: bool) -> Self {
        Self {
            gains,
            track_when_disabled,
            integral: 0.0,
            prev_rate: None,
        }
    }

    pub fn integral(&self) -> f64 {
        self.integral
    }

    pub fn step(&mut self, phi_z_dot: f64, dt: f64, enabled: bool) -> f64 {
        let inc = match self.prev_rate {
            Some(prev) => 0.5 * (prev + phi_z_dot) * dt,
            None => 0.0,
        };
        self.prev_rate = Some(phi_z_dot);
        let g = &self.gains;
        if !enabled {
            if self.track_when_disabled {
                self.integral += inc;
            }
            return 0.0;
        }
        let candidate = self.integral + inc;
        let raw = g.k_p_c * phi_z_dot + g.k_i_c * candidate;
        let sat = raw.clamp(-g.u_c_limit, g.u_c_limit);
        // conditional integration: hold while pushing into the clamp
        if !(sat != raw && (raw - sat) * (g.k_i_c * inc) > 0.0) {
            self.integral = candidate;
        }
        sat
    }
}

/// Free-function form of [`MitigationController::step`].
pub fn mitigation_step(
    phi_z_dot: f64,
    dt: f64,
    controller: &mut MitigationController,
    enabled: bool,
) -> f64 {
    controller.step(phi_z_dot, dt, enabled)
}

/// Split `delta_p_total_ref` between rotors 2 and 3 as
/// `(1/2 + u_c, 1/2 - u_c)`.
///
/// The larger share is formed by the product and the smaller one as the exact
/// remainder, so the two shares always add up to the total bit for bit.
pub fn dispatch(u_c: f64, delta_p_total_ref: f64) -> Result<DispatchCommand> {
    if !(u_c.abs() <= 0.5) {
        return Err(Error::Participation { u_c });
    }
    let larger = (0.5 + u_c.abs()) * delta_p_total_ref;
    let smaller = delta_p_total_ref - larger;
    let (delta_p_2_ref, delta_p_3_ref) = if u_c >= 0.0 {
        (larger, smaller)
    } else {
        (smaller, larger)
    };
    Ok(DispatchCommand {
        delta_p_2_ref,
        delta_p_3_ref,
        u_c,
    })
}

/// Reference for the top rotor: whatever part of the total is not assigned to
/// the lateral pair.
pub fn rotor1_reference(delta_p_total_all: f64, delta_p_23: f64) -> f64 {
    delta_p_total_all - delta_p_23
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gains() -> CentralGains {
        CentralGains {
            k_p_c: 2.0,
            k_i_c: 30.0,
            u_c_limit: 0.5,
        }
    }

    #[test]
    fn zero_rate_gives_zero_output() {
        let mut c = MitigationController::new(gains(), true);
        for _ in 0..100 {
            assert_eq!(c.step(0.0, 0.02, true), 0.0);
        }
    }

    #[test]
    fn constant_rate_is_pi() {
        let mut c = MitigationController::new(gains(), true);
        let rate = 1e-4;
        let dt = 0.02;
        let mut u = c.step(rate, dt, true);
        let n = 250;
        for _ in 0..n {
            u = c.step(rate, dt, true);
        }
        let t = n as f64 * dt;
        let expected = 2.0 * rate + 30.0 * rate * t;
        assert!((u - expected).abs() < 1e-12, "{u} vs {expected}");
    }

    #[test]
    fn output_is_clamped_and_integral_held() {
        let mut c = MitigationController::new(gains(), true);
        let mut last_integral = 0.0;
        for k in 0..2000 {
            let u = c.step(0.01, 0.02, true);
            assert!(u.abs() <= 0.5);
            if k > 200 {
                assert_eq!(u, 0.5);
                assert_eq!(c.integral(), last_integral);
            }
            last_integral = c.integral();
        }
        // reversing the rate unwinds immediately
        let u = c.step(-0.01, 0.02, true);
        assert!(u < 0.5);
    }

    #[test]
    fn disabled_controller_outputs_zero() {
        let mut tracking = MitigationController::new(gains(), true);
        let mut holding = MitigationController::new(gains(), false);
        for _ in 0..10 {
            assert_eq!(tracking.step(0.1, 0.1, false), 0.0);
            assert_eq!(holding.step(0.1, 0.1, false), 0.0);
        }
        assert!((tracking.integral() - 0.09).abs() < 1e-15);
        assert_eq!(holding.integral(), 0.0);
    }

    #[test]
    fn dispatch_examples() {
        let d = dispatch(0.0, -3.0e6).unwrap();
        assert_eq!(d.delta_p_2_ref, -1.5e6);
        assert_eq!(d.delta_p_3_ref, -1.5e6);
        let d = dispatch(0.5, -1.0e6).unwrap();
        assert_eq!(d.delta_p_2_ref, -1.0e6);
        assert_eq!(d.delta_p_3_ref, 0.0);
        let d = dispatch(-0.5, -1.0e6).unwrap();
        assert_eq!(d.delta_p_2_ref, 0.0);
        assert_eq!(d.delta_p_3_ref, -1.0e6);
        let d = dispatch(0.1, 2.0e6).unwrap();
        assert!((d.delta_p_2_ref - 1.2e6).abs() < 1e-6);
        assert!(matches!(dispatch(0.51, 1.0), Err(Error::Participation { .. })));
        assert!(dispatch(f64::NAN, 1.0).is_err());
    }

    #[test]
    fn rotor1_examples() {
        assert_eq!(rotor1_reference(-3.0e6, -2.0e6), -1.0e6);
        assert_eq!(rotor1_reference(-3.0e6, -3.0e6), 0.0);
        let total = -2.7e6;
        let d23 = total * (2.0 / 3.0);
        let d = dispatch(0.37, d23).unwrap();
        let p1 = rotor1_reference(total, d23);
        assert_eq!(p1 + (d.delta_p_2_ref + d.delta_p_3_ref), total);
    }

    #[test]
    fn validation() {
        let mut g = gains();
        g.u_c_limit = 0.7;
        assert!(g.validate().unwrap_err().to_string().contains("u_c_limit"));
        g.u_c_limit = 0.5;
        g.k_i_c = f64::INFINITY;
        assert!(g.validate().is_err());
    }
}
