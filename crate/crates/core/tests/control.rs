use multirotor::control_local::{augmented_vertex, LocalController, Measurement};
use multirotor::lqr::{lqr, riccati_residual, spectral_abscissa};
use multirotor::reduced_model::blend;
use multirotor::simkit::{run_scenario, PowerSchedule, WindScenario};
use multirotor::Config;
use nalgebra::{DMatrix, Matrix3, RowVector3, Vector3};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn scalar_riccati_gain() {
    let one = DMatrix::from_element(1, 1, 1.0);
    let sol = lqr(&one, &one, &one, &one).unwrap();
    // p^2 - 2p - 1 = 0, stabilizing root
    let expected = 1.0 + 2.0f64.sqrt();
    assert!((sol.gain[(0, 0)] - expected).abs() <= 1e-9);
    assert!((sol.riccati[(0, 0)] - expected).abs() <= 1e-9);
}

#[test]
fn riccati_residual_vanishes_for_vertex_designs() {
    let cfg = Config::default_5mw();
    let (_, dec) = cfg.synthesize().unwrap();
    let w = cfg.local.weights;
    let q = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![w.q_omega, w.q_beta, w.q_int]));
    let r = DMatrix::from_element(1, 1, w.r);
    for v in &dec.vertices {
        let (a, b) = augmented_vertex(v);
        let a = DMatrix::from_iterator(3, 3, a.iter().copied());
        let b = DMatrix::from_iterator(3, 1, b.iter().copied());
        let sol = lqr(&a, &b, &q, &r).unwrap();
        let res = riccati_residual(&a, &b, &q, &r, &sol.riccati).amax();
        assert!(res <= 1e-8 * sol.riccati.amax(), "vertex {}: {res:e}", v.index);
    }
}

#[test]
fn every_vertex_closed_loop_is_hurwitz() {
    for cfg in [Config::default_5mw(), Config::prototype_30kw()] {
        let (schedule, dec) = cfg.synthesize().unwrap();
        schedule.validate(&dec.vertices).unwrap();
        for (j, eig) in schedule.closed_loop_eigenvalues(&dec.vertices).iter().enumerate() {
            assert!(eig.iter().all(|l| l.re < 0.0), "vertex {j}: {eig:?}");
        }
    }
}

#[test]
fn blended_closed_loop_spot_check() {
    let cfg = Config::default_5mw();
    let (schedule, dec) = cfg.synthesize().unwrap();
    let b = Vector3::new(0.0, 1.0 / cfg.rotor.tau_beta, 0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..200 {
        let z = cfg.scheduling_box().point([0; 4].map(|_| rng.random_range(0.0..=1.0)));
        let h = dec.membership(&z).unwrap();
        let a = blend(&h, &dec.vertices);
        #[rustfmt::skip]
        let a_aug = Matrix3::new(
            a[(0, 0)], a[(0, 1)], 0.0,
            a[(1, 0)], a[(1, 1)], 0.0,
            1.0, 0.0, 0.0,
        );
        let k = schedule.blended_gain(&h);
        let cl = a_aug - b * RowVector3::new(k[0], k[1], k[2]);
        let abscissa = spectral_abscissa(&DMatrix::from_iterator(3, 3, cl.iter().copied()));
        assert!(abscissa < 0.0, "z = {z:?}: {abscissa}");
    }
}

#[test]
fn heavier_control_weight_shrinks_every_gain() {
    let cfg = Config::default_5mw();
    let (base, dec) = cfg.synthesize().unwrap();
    let mut w = cfg.local.weights;
    w.r *= 100.0;
    let heavy = multirotor::control_local::synthesize_gains(
        &dec.vertices,
        &w,
        cfg.operation.omega_rated,
        cfg.operation.p_rated,
    )
    .unwrap();
    for (a, b) in base.vertex.iter().zip(&heavy.vertex) {
        let norm = |g: &multirotor::control_local::VertexGain| g.k_x[0].hypot(g.k_x[1]);
        assert!(norm(b) < norm(a));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn integrator_and_pitch_respect_their_limits(
        omegas in proptest::collection::vec(0.9f64..1.6, 1..200),
        betas in proptest::collection::vec(0.0f64..0.6, 200),
        dps in proptest::collection::vec(-2.0e6f64..0.0, 200),
    ) {
        let cfg = Config::default_5mw();
        let design = cfg.local_design().unwrap();
        let lim = design.limits;
        let dt = cfg.sim.control_period;
        let wr = design.schedule.omega_rated;
        let mut c = LocalController::new(&design, wr, 0.1, 3.9e4);
        let mut beta_prev = c.state.beta_cmd_prev;
        for (k, &omega) in omegas.iter().enumerate() {
            let xi_prev = c.state.integrator;
            let meas = Measurement { omega_r: omega, omega_g: omega * cfg.rotor.n_g, beta: betas[k], p_g: 0.0 };
            let cmd = c.step(&meas, dps[k], dt, Some(16.0));
            let xi = c.state.integrator;
            prop_assert!(xi.abs() <= lim.integrator_limit);
            prop_assert!(xi.abs() <= xi_prev.abs() + (omega - wr).abs() * dt * (1.0 + 1e-12));
            if c.last.integrator_frozen {
                prop_assert_eq!(xi, xi_prev);
            }
            prop_assert!(cmd.beta_ref >= lim.beta_min && cmd.beta_ref <= lim.beta_max);
            prop_assert!((cmd.beta_ref - beta_prev).abs() <= lim.beta_rate_max * dt * (1.0 + 1e-12));
            prop_assert!(cmd.t_g >= 0.0 && cmd.t_g <= lim.t_g_max);
            beta_prev = cmd.beta_ref;
        }
    }
}

#[test]
fn saturated_pitch_freezes_the_integrator() {
    let cfg = Config::default_5mw();
    let design = cfg.local_design().unwrap();
    let wr = design.schedule.omega_rated;
    let dt = cfg.sim.control_period;
    // persistent overspeed drives the command to its upper rate bound and
    // then to the position limit
    let mut c = LocalController::new(&design, wr, 0.0, 3.9e4);
    let meas = Measurement { omega_r: 1.5 * wr, omega_g: 1.5 * wr * cfg.rotor.n_g, beta: 0.0, p_g: 0.0 };
    let mut frozen_steps = 0;
    for _ in 0..2000 {
        let before = c.state.integrator;
        c.step(&meas, 0.0, dt, Some(16.0));
        if c.last.pitch_saturated && c.last.integrator_frozen {
            frozen_steps += 1;
            assert_eq!(c.state.integrator, before);
        }
    }
    assert!(frozen_steps > 0);
    assert!(c.state.integrator.abs() < design.limits.integrator_limit);
}

fn constant_wind(cfg: &Config, v: f64, t_end: f64) -> multirotor::simkit::SimConfig {
    let mut sim = cfg.scenario("uniform").unwrap();
    sim.wind = WindScenario::uniform(v);
    sim.t_end = t_end;
    sim
}

#[test]
fn observer_tracks_constant_wind() {
    let cfg = Config::default_5mw();
    let design = cfg.local_design().unwrap();
    let trace = run_scenario(&constant_wind(&cfg, 14.0, 30.0), &design).unwrap();
    for row in trace.window(10.0, 30.0) {
        for r in &row.rotors {
            assert!(((r.v_hat - 14.0) / 14.0).abs() < 0.02, "t {}: {}", row.t, r.v_hat);
        }
    }
}

#[test]
fn speed_is_regulated_in_constant_wind() {
    let cfg = Config::default_5mw();
    let design = cfg.local_design().unwrap();
    let wr = cfg.operation.omega_rated;
    for v in [13.0, 16.0, 19.0] {
        let trace = run_scenario(&constant_wind(&cfg, v, 60.0), &design).unwrap();
        for row in trace.window(40.0, 60.0) {
            for r in &row.rotors {
                assert!(((r.state.omega_r - wr) / wr).abs() < 1e-3, "v {v}: {}", r.state.omega_r);
            }
        }
    }
}

#[test]
fn power_step_is_tracked() {
    let cfg = Config::default_5mw();
    let design = cfg.local_design().unwrap();
    let mut sim = constant_wind(&cfg, 16.0, 45.0);
    let step = -0.1 * cfg.operation.p_rated;
    // the same relative step on every rotor
    sim.power = PowerSchedule::new(vec![(0.0, 0.0), (10.0, 0.0), (10.0, 3.0 * step)]);
    let trace = run_scenario(&sim, &design).unwrap();
    let target = cfg.operation.p_rated + step;
    let wr = cfg.operation.omega_rated;
    for row in trace.window(30.0, 45.0) {
        for r in &row.rotors {
            assert!(((r.p_g - target) / target).abs() < 0.02, "t {}: {}", row.t, r.p_g);
            assert!(((r.state.omega_r - wr) / wr).abs() < 0.005);
        }
    }
    let peak = |t0: f64, t1: f64| {
        trace
            .window(t0, t1)
            .map(|row| (row.rotors[1].state.omega_r - wr).abs())
            .fold(0.0, f64::max)
    };
    assert!(peak(30.0, 40.0) < peak(10.0, 20.0));
}
