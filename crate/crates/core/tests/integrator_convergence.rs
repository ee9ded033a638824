use t2d_mpc::integrator::rk4_step;
use t2d_mpc::{integrate, InputSchedule, ModelParams, ParameterSet, StateVector, TimeGrid};

fn defaults() -> ModelParams {
    ParameterSet::defaults().model
}

/// V_l(t) under constant input from V_l(0) = v0.
fn exercise_closed_form(p: &ModelParams, u: f64, v0: f64, t: f64) -> f64 {
    let v_star = p.SR * u / (p.K_IL6 * p.k_s);
    v_star + (v0 - v_star) * (-p.k_s * t).exp()
}

#[test]
fn exercise_state_matches_closed_form() {
    let p = defaults();
    let u = 2.0;
    let grid = TimeGrid::new(0.0, 30.0, 1e-3).unwrap();
    let traj = integrate(StateVector::onset(), &InputSchedule::constant(u), &grid, &p).unwrap();
    for s in traj.samples.iter().skip(1) {
        let exact = exercise_closed_form(&p, u, 0.0, s.t);
        assert!(
            (s.x.exercise_effect - exact).abs() <= 1e-6 * exact,
            "t = {}: {} vs {}",
            s.t,
            s.x.exercise_effect,
            exact
        );
    }
}

#[test]
fn fourth_order_convergence_on_exercise_state() {
    // Stiff insulin mode is irrelevant here: integrate V_l alone with RK4.
    let p = defaults();
    let u = 1.5;
    let scalar_error = |h: f64| {
        let n = (10.0 / h).round() as usize;
        let mut x = StateVector::new(100.0, 0.0, 0.0, p.S_I_target, 0.0);
        let mut err: f64 = 0.0;
        // Zero insulin/beta decouples every other state from V_l.
        let q = ModelParams { k: 0.0, ..p };
        for i in 1..=n {
            x = rk4_step(&x, u, h, &q);
            err = err.max((x.exercise_effect - exercise_closed_form(&p, u, 0.0, i as f64 * h)).abs());
        }
        err
    };
    let hs = [2.0, 1.0, 0.5, 0.25];
    let errs: Vec<f64> = hs.iter().map(|&h| scalar_error(h)).collect();
    for w in errs.windows(2) {
        let ratio = w[0] / w[1];
        assert!((12.0..=20.0).contains(&ratio), "ratios from {errs:?}");
    }
}

#[test]
fn split_integration_agrees_with_single_pass() {
    let p = defaults();
    let u = InputSchedule::constant(1.0);
    let whole = integrate(StateVector::onset(), &u, &TimeGrid::new(0.0, 20.0, 0.005).unwrap(), &p).unwrap();
    let first = integrate(StateVector::onset(), &u, &TimeGrid::new(0.0, 8.0, 0.005).unwrap(), &p).unwrap();
    let second = integrate(
        first.final_state().unwrap(),
        &u,
        &TimeGrid::new(8.0, 20.0, 0.005).unwrap(),
        &p,
    )
    .unwrap();
    let joined: Vec<_> = first.samples.iter().chain(second.samples.iter().skip(1)).collect();
    assert_eq!(joined.len(), whole.len());
    for (a, b) in joined.iter().zip(&whole.samples) {
        assert!((a.t - b.t).abs() <= 1e-12 * b.t.max(1.0));
        for (xa, xb) in a.x.to_array().iter().zip(b.x.to_array()) {
            assert!((xa - xb).abs() <= 1e-12 * xb.abs().max(1e-300), "t = {}: {xa} vs {xb}", b.t);
        }
    }
}

#[test]
fn integration_is_deterministic() {
    let p = defaults();
    let s = InputSchedule::piecewise(vec![(0.0, 0.5), (3.3, 2.5), (7.0, 0.0)]).unwrap();
    let grid = TimeGrid::new(0.0, 12.0, 0.005).unwrap();
    let a = integrate(StateVector::onset(), &s, &grid, &p).unwrap();
    let b = integrate(StateVector::onset(), &s, &grid, &p).unwrap();
    assert_eq!(a, b);
}

#[test]
fn trajectory_structure() {
    let p = defaults();
    let s = InputSchedule::piecewise(vec![(0.0, 0.5), (1.0021, 2.5)]).unwrap();
    let grid = TimeGrid::new(0.0, 2.0, 0.005).unwrap();
    let traj = integrate(StateVector::onset(), &s, &grid, &p).unwrap();
    assert_eq!(traj.samples[0].t, 0.0);
    assert_eq!(traj.last().unwrap().t, 2.0);
    assert!(traj.times().collect::<Vec<_>>().windows(2).all(|w| w[1] > w[0]));
    assert_eq!(traj.times().filter(|&t| t == 1.0021).count(), 1);
    assert_eq!(traj.len(), 402);
}

#[test]
fn open_loop_reaches_hyperglycemia() {
    let p = defaults();
    let grid = TimeGrid::new(0.0, 365.0, 0.005).unwrap();
    let traj = integrate(StateVector::onset(), &InputSchedule::constant(0.0), &grid, &p).unwrap();
    let g = traj.final_state().unwrap().glucose;
    assert!((g - 600.0).abs() <= 30.0, "G(365) = {g}");
}
