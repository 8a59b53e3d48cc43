//! Control-oriented rigid-shaft model with first-order pitch, rewritten as a
//! convex blend of four linear vertex models.
//!
//! With `x = (omega_r, beta)` the nonlinear rotor acceleration is split into
//! two scheduling terms
//!
//! * `theta_beta(z) = d(omega_r_dot)/d(beta)`, the local pitch sensitivity, and
//! * `theta_omega(z) = (omega_r_dot(z) - theta_beta(z) beta) / omega_r`,
//!
//! so that `omega_r_dot = theta_omega omega_r + theta_beta beta` holds exactly
//! everywhere in the scheduling box (`omega_r > 0` there). Each term is bounded
//! over the box; the four combinations of term extremes give the vertices.
//! The bounds on `theta_omega` are widened to also cover the local speed
//! sensitivity `d(omega_r_dot)/d(omega_r)`, so every local Jacobian lies in the
//! vertex hull.

use std::sync::Arc;

use nalgebra::{Matrix2, RowVector2, Vector2};
use serde::{Deserialize, Serialize};

use crate::aero::Aerodynamics;
use crate::dynamics::RotorUnitParams;
use crate::error::{Error, Result};

pub const N_VERTICES: usize = 4;

/// Scheduling variables `z = (omega_r, beta, v, t_g)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PremiseVector {
    pub omega_r: f64,
    /// Pitch (rad).
    pub beta: f64,
    pub v: f64,
    pub t_g: f64,
}

/// Closed interval `[min, max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub min: f64,
    pub max: f64,
}

impl Interval {
    pub fn new(min: f64, max: f64) -> Self {
        Self { min, max }
    }

    pub fn clamp(&self, x: f64) -> f64 {
        x.clamp(self.min, self.max)
    }

    pub fn width(&self) -> f64 {
        self.max - self.min
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.min && x <= self.max
    }

    fn samples(&self, n: usize) -> impl Iterator<Item = f64> + '_ {
        (0..n).map(move |k| self.min + self.width() * k as f64 / (n - 1) as f64)
    }
}

/// Operating region over which the vertex models are valid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchedulingBox {
    pub omega_r: Interval,
    /// Pitch (rad).
    pub beta: Interval,
    pub v: Interval,
    pub t_g: Interval,
}

impl SchedulingBox {
    pub fn validate(&self) -> Result<()> {
        for (name, iv) in [
            ("omega_r", self.omega_r),
            ("beta", self.beta),
            ("v", self.v),
            ("t_g", self.t_g),
        ] {
            if !(iv.min.is_finite() && iv.max.is_finite() && iv.min < iv.max) {
                return Err(Error::Decomposition(format!(
                    "scheduling box component `{name}` needs finite min < max"
                )));
            }
        }
        if self.omega_r.min <= 0.0 {
            return Err(Error::Decomposition(
                "scheduling box must keep omega_r strictly positive".into(),
            ));
        }
        Ok(())
    }

    pub fn clamp(&self, z: &PremiseVector) -> PremiseVector {
        PremiseVector {
            omega_r: self.omega_r.clamp(z.omega_r),
            beta: self.beta.clamp(z.beta),
            v: self.v.clamp(z.v),
            t_g: self.t_g.clamp(z.t_g),
        }
    }

    pub fn contains(&self, z: &PremiseVector) -> bool {
        self.omega_r.contains(z.omega_r)
            && self.beta.contains(z.beta)
            && self.v.contains(z.v)
            && self.t_g.contains(z.t_g)
    }

    /// Point at fractional coordinates `u` in `[0,1]^4`.
    pub fn point(&self, u: [f64; 4]) -> PremiseVector {
        let at = |iv: Interval, s: f64| iv.min + s * iv.width();
        PremiseVector {
            omega_r: at(self.omega_r, u[0]),
            beta: at(self.beta, u[1]),
            v: at(self.v, u[2]),
            t_g: at(self.t_g, u[3]),
        }
    }
}

/// Rigid-shaft rotor with first-order pitch actuator.
#[derive(Debug, Clone)]
pub struct ReducedModel {
    /// `J_r + n_g^2 J_g`.
    pub inertia: f64,
    pub n_g: f64,
    pub tau_beta: f64,
    pub aero: Arc<Aerodynamics>,
}

/// Values of the two scheduling terms at one premise point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchedulingTerms {
    pub theta_omega: f64,
    pub theta_beta: f64,
}

impl ReducedModel {
    pub fn new(params: &RotorUnitParams, aero: Arc<Aerodynamics>) -> Self {
        Self {
            inertia: params.lumped_inertia(),
            n_g: params.n_g,
            tau_beta: params.tau_beta,
            aero,
        }
    }

    /// `d/dt (omega_r, beta)`.
    pub fn derivative(&self, x: [f64; 2], beta_ref: f64, t_g: f64, v: f64) -> Result<[f64; 2]> {
        let torque = self.aero.torque(v, x[0], x[1])?;
        Ok([
            (torque - self.n_g * t_g) / self.inertia,
            (beta_ref - x[1]) / self.tau_beta,
        ])
    }

    /// Local Jacobian of the rotor acceleration, `(d/d omega_r, d/d beta)`.
    pub fn acceleration_gradient(&self, z: &PremiseVector) -> Result<[f64; 2]> {
        let l = self.aero.loads(z.v, z.omega_r, z.beta)?;
        Ok([l.dtorque_domega / self.inertia, l.dtorque_dbeta / self.inertia])
    }

    pub fn scheduling_terms(&self, z: &PremiseVector) -> Result<SchedulingTerms> {
        let l = self.aero.loads(z.v, z.omega_r, z.beta)?;
        let accel = (l.torque - self.n_g * z.t_g) / self.inertia;
        let theta_beta = l.dtorque_dbeta / self.inertia;
        Ok(SchedulingTerms {
            theta_omega: (accel - theta_beta * z.beta) / z.omega_r,
            theta_beta,
        })
    }

    /// Input matrix for `beta_ref`.
    pub fn input_matrix(&self) -> Vector2<f64> {
        Vector2::new(0.0, 1.0 / self.tau_beta)
    }
}

/// Free-function form of [`ReducedModel::derivative`].
pub fn reduced_derivative(
    x: [f64; 2],
    beta_ref: f64,
    t_g: f64,
    v: f64,
    model: &ReducedModel,
) -> Result<[f64; 2]> {
    model.derivative(x, beta_ref, t_g, v)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VertexModel {
    pub index: usize,
    pub a: Matrix2<f64>,
    pub b: Vector2<f64>,
    pub c: RowVector2<f64>,
    /// Scheduling-term values `(theta_omega, theta_beta)` at this vertex.
    pub theta: [f64; 2],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MembershipWeights {
    pub h: [f64; N_VERTICES],
}

impl MembershipWeights {
    pub fn indicator(i: usize) -> Self {
        let mut h = [0.0; N_VERTICES];
        h[i] = 1.0;
        Self { h }
    }

    pub fn sum(&self) -> f64 {
        self.h.iter().sum()
    }
}

/// Vertex models together with the sector bounds they were built from.
#[derive(Debug, Clone)]
pub struct SectorDecomposition {
    pub scheduling_box: SchedulingBox,
    /// Bounds of `theta_omega` and `theta_beta`.
    pub bounds: [Interval; 2],
    pub vertices: [VertexModel; N_VERTICES],
    pub model: ReducedModel,
}

/// Vertex index for the (theta_omega, theta_beta) extreme combination;
/// `false` selects the minimum.
pub fn vertex_index(omega_at_max: bool, beta_at_max: bool) -> usize {
    2 * omega_at_max as usize + beta_at_max as usize
}

fn system_matrix(theta: [f64; 2], tau_beta: f64) -> Matrix2<f64> {
    Matrix2::new(theta[0], theta[1], 0.0, -1.0 / tau_beta)
}

/// Bound both scheduling terms over the box and build the four vertex models.
pub fn sector_decompose(scheduling_box: &SchedulingBox, model: &ReducedModel) -> Result<SectorDecomposition> {
    scheduling_box.validate()?;
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    let mut widen = |k: usize, x: f64| -> Result<()> {
        if !x.is_finite() {
            return Err(Error::Decomposition(
                "non-finite scheduling term inside the box".into(),
            ));
        }
        lo[k] = lo[k].min(x);
        hi[k] = hi[k].max(x);
        Ok(())
    };
    let b = scheduling_box;
    // the terms are affine in t_g, so its end points suffice
    for omega_r in b.omega_r.samples(17) {
        for v in b.v.samples(17) {
            for beta in b.beta.samples(61) {
                for t_g in [b.t_g.min, b.t_g.max] {
                    let z = PremiseVector { omega_r, beta, v, t_g };
                    let terms = model
                        .scheduling_terms(&z)
                        .map_err(|e| Error::Decomposition(e.to_string()))?;
                    let grad = model
                        .acceleration_gradient(&z)
                        .map_err(|e| Error::Decomposition(e.to_string()))?;
                    widen(0, terms.theta_omega)?;
                    widen(0, grad[0])?;
                    widen(1, terms.theta_beta)?;
                }
            }
        }
    }
    // sampled extremes are widened so that off-sample points stay inside
    let bounds = [0, 1].map(|k| {
        let pad = 0.02 * (hi[k] - lo[k]) + 1e-9 * lo[k].abs().max(hi[k].abs()).max(1e-12);
        Interval::new(lo[k] - pad, hi[k] + pad)
    });
    let vertices = [false, true]
        .iter()
        .flat_map(|&wo| [false, true].map(move |wb| (wo, wb)))
        .map(|(wo, wb)| {
            let theta = [
                if wo { bounds[0].max } else { bounds[0].min },
                if wb { bounds[1].max } else { bounds[1].min },
            ];
            VertexModel {
                index: vertex_index(wo, wb),
                a: system_matrix(theta, model.tau_beta),
                b: model.input_matrix(),
                c: RowVector2::new(1.0, 0.0),
                theta,
            }
        })
        .collect::<Vec<_>>();
    Ok(SectorDecomposition {
        scheduling_box: *scheduling_box,
        bounds,
        vertices: vertices.try_into().expect("four vertices"),
        model: model.clone(),
    })
}

impl SectorDecomposition {
    /// Memberships from scheduling-term values.
    pub fn membership_from_terms(&self, terms: SchedulingTerms) -> Result<MembershipWeights> {
        let eta = |k: usize, name: &'static str, x: f64| -> Result<f64> {
            let iv = self.bounds[k];
            if !(iv.width() > 0.0) {
                return Err(Error::DegenerateSector(name));
            }
            Ok(((iv.max - x) / iv.width()).clamp(0.0, 1.0))
        };
        let e_omega = eta(0, "theta_omega", terms.theta_omega)?;
        let e_beta = eta(1, "theta_beta", terms.theta_beta)?;
        let w_omega = [e_omega, 1.0 - e_omega];
        let w_beta = [e_beta, 1.0 - e_beta];
        let mut h = [0.0; N_VERTICES];
        for (io, wo) in w_omega.iter().enumerate() {
            for (ib, wb) in w_beta.iter().enumerate() {
                h[vertex_index(io == 1, ib == 1)] = wo * wb;
            }
        }
        Ok(MembershipWeights { h })
    }

    /// Memberships at premise `z`, clamped into the scheduling box.
    pub fn membership(&self, z: &PremiseVector) -> Result<MembershipWeights> {
        let z = self.scheduling_box.clamp(z);
        let terms = self.model.scheduling_terms(&z)?;
        self.membership_from_terms(terms)
    }

    /// `sum_i h_i A_i x + B beta_ref`, the blended vertex dynamics.
    pub fn blended_derivative(&self, h: &MembershipWeights, x: [f64; 2], beta_ref: f64) -> [f64; 2] {
        let a = blend(h, &self.vertices);
        let dx = a * Vector2::new(x[0], x[1]) + self.model.input_matrix() * beta_ref;
        [dx[0], dx[1]]
    }
}

/// Free-function form of [`SectorDecomposition::membership`].
pub fn membership(z: &PremiseVector, decomposition: &SectorDecomposition) -> Result<MembershipWeights> {
    decomposition.membership(z)
}

/// `A(z) = sum_i h_i A_i`.
pub fn blend(h: &MembershipWeights, vertices: &[VertexModel; N_VERTICES]) -> Matrix2<f64> {
    vertices
        .iter()
        .zip(h.h)
        .fold(Matrix2::zeros(), |acc, (v, w)| acc + v.a * w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aero::{AeroConstants, AeroMaps, Coefficients};
    use crate::config::Config;

    fn decomposition() -> SectorDecomposition {
        let cfg = Config::default_5mw();
        let model = cfg.reduced_model().unwrap();
        sector_decompose(&cfg.scheduling_box(), &model).unwrap()
    }

    #[test]
    fn corner_terms_give_indicator_weights() {
        let d = decomposition();
        for (wo, wb) in [(false, false), (false, true), (true, false), (true, true)] {
            let terms = SchedulingTerms {
                theta_omega: if wo { d.bounds[0].max } else { d.bounds[0].min },
                theta_beta: if wb { d.bounds[1].max } else { d.bounds[1].min },
            };
            let h = d.membership_from_terms(terms).unwrap();
            assert_eq!(h, MembershipWeights::indicator(vertex_index(wo, wb)));
        }
    }

    #[test]
    fn midpoint_terms_give_equal_weights() {
        let d = decomposition();
        let terms = SchedulingTerms {
            theta_omega: 0.5 * (d.bounds[0].min + d.bounds[0].max),
            theta_beta: 0.5 * (d.bounds[1].min + d.bounds[1].max),
        };
        let h = d.membership_from_terms(terms).unwrap();
        for w in h.h {
            assert!((w - 0.25).abs() < 1e-12);
        }
    }

    #[test]
    fn blend_examples() {
        let d = decomposition();
        for i in 0..N_VERTICES {
            assert_eq!(blend(&MembershipWeights::indicator(i), &d.vertices), d.vertices[i].a);
        }
        let a = Matrix2::new(1.0, -2.0, 0.5, 3.0);
        let mut vs = d.vertices;
        for (i, v) in vs.iter_mut().enumerate() {
            v.a = if i % 2 == 0 { a } else { -a };
        }
        let h = MembershipWeights { h: [0.25; 4] };
        assert_eq!(blend(&h, &vs), Matrix2::zeros());
    }

    #[test]
    fn vertex_structure() {
        let d = decomposition();
        for v in &d.vertices {
            assert_eq!(v.b[0], 0.0);
            assert_eq!(v.b[1], 1.0 / d.model.tau_beta);
            assert_eq!(v.a[(1, 0)], 0.0);
            assert_eq!(v.a[(1, 1)], -1.0 / d.model.tau_beta);
        }
        assert!(d.bounds[1].max < 0.0, "pitching to feather reduces torque");
    }

    #[test]
    fn reduced_derivative_examples() {
        let cfg = Config::default_5mw();
        let rm = cfg.reduced_model().unwrap();
        let full = cfg.rotor_model().unwrap();
        let (x, u) = full.equilibrium(15.0, 1.2, 0.12).unwrap();
        let d = rm.derivative([x.omega_r, x.beta], u.beta_ref, u.t_g, 15.0).unwrap();
        assert!(d[0].abs() < 1e-9 && d[1].abs() < 1e-12);
        let d = rm.derivative([1.0, 0.3], 0.3, 0.0, 20.0).unwrap();
        assert_eq!(d[1], 0.0);
        assert!(rm.derivative([1.0, 0.0], 0.0, 0.0, 0.01).is_err());
    }

    #[test]
    fn affine_torque_map_collapses_vertices() {
        // cQ linear in lambda and beta through the origin, evaluated at a
        // single wind speed with no generator torque: both terms are constant.
        let maps = AeroMaps::from_fn(
            (0..=20).map(|i| i as f64).collect(),
            (0..=10).map(|j| 9.0 * j as f64).collect(),
            |l, b| Coefficients {
                cq: 0.004 * l - 0.0005 * b,
                ct: 0.5,
            },
        )
        .unwrap();
        let aero = Arc::new(Aerodynamics::new(AeroConstants::new(1.225, 63.0).unwrap(), maps));
        let model = ReducedModel::new(&Config::default_5mw().rotor, aero);
        let bx = SchedulingBox {
            omega_r: Interval::new(0.9, 1.5),
            beta: Interval::new(0.0, 0.4),
            v: Interval::new(12.0, 12.0 + 1e-9),
            t_g: Interval::new(0.0, 1e-12),
        };
        let d = sector_decompose(&bx, &model).unwrap();
        for v in &d.vertices[1..] {
            let diff = (v.a - d.vertices[0].a).amax();
            assert!(diff <= 1e-6 * d.vertices[0].a.amax(), "{diff}");
        }
    }

    #[test]
    fn rejects_bad_boxes() {
        let cfg = Config::default_5mw();
        let model = cfg.reduced_model().unwrap();
        let mut bx = cfg.scheduling_box();
        bx.v = Interval::new(20.0, 10.0);
        assert!(matches!(sector_decompose(&bx, &model), Err(Error::Decomposition(_))));
        let mut bx = cfg.scheduling_box();
        bx.v = Interval::new(0.0, 10.0);
        assert!(matches!(sector_decompose(&bx, &model), Err(Error::Decomposition(_))));
    }

    #[test]
    fn zero_width_sector_is_reported() {
        let mut d = decomposition();
        d.bounds[1] = Interval::new(-1.0, -1.0);
        let err = d
            .membership_from_terms(SchedulingTerms { theta_omega: 0.0, theta_beta: -1.0 })
            .unwrap_err();
        assert!(matches!(err, Error::DegenerateSector("theta_beta")));
    }
}
