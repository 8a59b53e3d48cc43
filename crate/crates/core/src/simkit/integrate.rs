//! Classical fixed-step fourth-order Runge-Kutta.

use nalgebra::SVector;

use crate::error::{Error, Result};

/// One RK4 step of `dx/dt = f(t, x)` from `t` to `t + dt`. Inputs captured by
/// `f` are held constant over the step.
pub fn rk4_step<const N: usize>(
    x: &SVector<f64, N>,
    t: f64,
    dt: f64,
    mut f: impl FnMut(f64, &SVector<f64, N>) -> SVector<f64, N>,
) -> Result<SVector<f64, N>> {
    let check = |k: SVector<f64, N>, at: f64| -> Result<SVector<f64, N>> {
        if k.iter().all(|v| v.is_finite()) {
            Ok(k)
        } else {
            Err(Error::Blowup { t: at })
        }
    };
    let half = 0.5 * dt;
    let k1 = check(f(t, x), t)?;
    let k2 = check(f(t + half, &(x + k1 * half)), t + half)?;
    let k3 = check(f(t + half, &(x + k2 * half)), t + half)?;
    let k4 = check(f(t + dt, &(x + k3 * dt)), t + dt)?;
    Ok(x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{Vector1, Vector2};

    fn decay(x0: f64, dt: f64, t_end: f64) -> f64 {
        let steps = (t_end / dt).round() as usize;
        let mut x = Vector1::new(x0);
        for k in 0..steps {
            x = rk4_step(&x, k as f64 * dt, dt, |_, x| -x).unwrap();
        }
        x[0]
    }

    #[test]
    fn exponential_single_step() {
        assert!((decay(1.0, 0.1, 0.1) - (-0.1f64).exp()).abs() < 1e-7);
    }

    #[test]
    fn fourth_order_convergence() {
        let exact = (-1.0f64).exp();
        let e1 = (decay(1.0, 0.1, 1.0) - exact).abs();
        let e2 = (decay(1.0, 0.05, 1.0) - exact).abs();
        let ratio = e1 / e2;
        assert!((ratio - 16.0).abs() < 1.0, "ratio {ratio}");
    }

    #[test]
    fn zero_derivative_keeps_state() {
        let x = Vector2::new(3.0, -4.0);
        assert_eq!(rk4_step(&x, 0.0, 0.3, |_, _| Vector2::zeros()).unwrap(), x);
    }

    #[test]
    fn non_finite_derivative_is_reported() {
        let x = Vector1::new(1.0);
        let err = rk4_step(&x, 2.5, 0.1, |_, _| Vector1::new(f64::NAN)).unwrap_err();
        assert!(matches!(err, Error::Blowup { t } if t == 2.5));
    }
}
