//! Continuous-time algebraic Riccati equation and LQR gains for small dense
//! systems.
//!
//! The stabilizing solution is read off the stable invariant subspace of the
//! Hamiltonian matrix, which is found with the scaled Newton iteration for the
//! matrix sign function.

use nalgebra::DMatrix;

const MAX_SIGN_ITERATIONS: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct LqrSolution {
    /// State-feedback gain for `u = -K x`.
    pub gain: DMatrix<f64>,
    /// Stabilizing Riccati solution.
    pub riccati: DMatrix<f64>,
}

fn matrix_sign(h: DMatrix<f64>) -> Result<DMatrix<f64>, String> {
    let n = h.nrows();
    let mut z = h;
    for _ in 0..MAX_SIGN_ITERATIONS {
        let lu = z.clone().lu();
        let det = lu.determinant();
        if !(det.is_finite() && det != 0.0) {
            return Err("Hamiltonian has eigenvalues on the imaginary axis".into());
        }
        let inv = lu
            .try_inverse()
            .ok_or("Hamiltonian iterate is singular")?;
        let c = det.abs().powf(-1.0 / n as f64);
        let next = (&z * c + inv / c) * 0.5;
        let delta = (&next - &z).abs().sum();
        let scale = next.abs().sum();
        z = next;
        if delta <= 1e-13 * scale {
            return Ok(z);
        }
    }
    Err("matrix sign iteration did not converge".into())
}

/// Stabilizing solution `P` of `A'P + PA - P B R^-1 B' P + Q = 0` and the
/// gain `K = R^-1 B' P`.
pub fn lqr(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
) -> Result<LqrSolution, String> {
    let n = a.nrows();
    if a.ncols() != n || b.nrows() != n || q.shape() != (n, n) || r.nrows() != b.ncols() {
        return Err("inconsistent matrix dimensions".into());
    }
    let r_inv = r
        .clone()
        .try_inverse()
        .ok_or("control weight R is singular")?;
    let g = b * &r_inv * b.transpose();
    let mut h = DMatrix::zeros(2 * n, 2 * n);
    h.view_mut((0, 0), (n, n)).copy_from(a);
    h.view_mut((0, n), (n, n)).copy_from(&(-&g));
    h.view_mut((n, 0), (n, n)).copy_from(&(-q));
    h.view_mut((n, n), (n, n)).copy_from(&(-a.transpose()));

    let w = matrix_sign(h)?;
    let id = DMatrix::<f64>::identity(n, n);
    // (W + I) [I; P] = 0
    let mut lhs = DMatrix::zeros(2 * n, n);
    lhs.view_mut((0, 0), (n, n)).copy_from(&w.view((0, n), (n, n)));
    lhs.view_mut((n, 0), (n, n))
        .copy_from(&(w.view((n, n), (n, n)) + &id));
    let mut rhs = DMatrix::zeros(2 * n, n);
    rhs.view_mut((0, 0), (n, n))
        .copy_from(&(-(w.view((0, 0), (n, n)) + &id)));
    rhs.view_mut((n, 0), (n, n))
        .copy_from(&(-w.view((n, 0), (n, n))));
    let p = lhs
        .svd(true, true)
        .solve(&rhs, 1e-14)
        .map_err(|e| e.to_string())?;
    let p = (&p + p.transpose()) * 0.5;
    if p.iter().any(|x| !x.is_finite()) {
        return Err("non-finite Riccati solution".into());
    }
    let gain = &r_inv * b.transpose() * &p;
    let closed = a - b * &gain;
    let abscissa = spectral_abscissa(&closed);
    if !(abscissa < 0.0) {
        return Err(format!(
            "closed loop not Hurwitz (spectral abscissa {abscissa:.3e}); pair not stabilizable"
        ));
    }
    Ok(LqrSolution { gain, riccati: p })
}

/// Largest real part over the eigenvalues of a square matrix.
pub fn spectral_abscissa(m: &DMatrix<f64>) -> f64 {
    m.complex_eigenvalues()
        .iter()
        .map(|l| l.re)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Residual `A'P + PA - P B R^-1 B' P + Q`.
pub fn riccati_residual(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
    p: &DMatrix<f64>,
) -> DMatrix<f64> {
    let r_inv = r.clone().try_inverse().expect("invertible R");
    a.transpose() * p + p * a - p * b * r_inv * b.transpose() * p + q
}
