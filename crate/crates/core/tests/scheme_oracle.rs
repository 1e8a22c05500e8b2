//! Scheme validation against closed-form solutions.

mod common;

use common::ColeHopf;
use diaghyp::solver::{solve, step, InitialData, Profile, SolverConfig};
use diaghyp::{DiagonalSystem, GridFunction};

fn cole_hopf_error(dx: f64) -> f64 {
    let (eps, w, r) = (0.05, 0.5, 1.5);
    let u0 = InitialData::new(vec![Profile::tanh(-1.0, 1.0, 0.0, w, r)]).unwrap();
    let mut cfg = SolverConfig::new(eps, dx, 1.0);
    cfg.mollifier_width = Some(0.0);
    cfg.record_every = 0.5;
    let traj = solve(&u0, &DiagonalSystem::burgers(), &cfg).unwrap();
    let oracle = ColeHopf::clamped_tanh(eps, w, r);
    let last = traj.last();
    let u = &last.u;
    let range = u.index_range(-4.0, 4.0);
    range.step_by(4).map(|j| (u.component(0)[j] - oracle.eval(last.t, u.x(j))).abs()).fold(0.0, f64::max)
}

#[test]
fn oracle_reproduces_initial_data_for_small_time() {
    let oracle = ColeHopf::clamped_tanh(0.05, 0.5, 1.5);
    let p = Profile::tanh(-1.0, 1.0, 0.0, 0.5, 1.5);
    for x in [-2.0, -0.7, 0.0, 0.3, 1.1] {
        assert!((oracle.eval(1e-4, x) - p.eval(x)).abs() < 2e-2, "x = {x}");
    }
}

#[test]
fn cole_hopf_first_order() {
    let errs: Vec<f64> = [256.0, 512.0].iter().map(|n| cole_hopf_error(1.0 / n)).collect();
    let order = (errs[0] / errs[1]).log2();
    assert!((0.8..=1.2).contains(&order), "errors {errs:?}, order {order}");
}

#[test]
fn unit_cfl_translation_is_bitwise() {
    let sys = DiagonalSystem::constant_advection(&[1.0, -0.25], None).unwrap();
    let dx = 1.0 / 64.0;
    let n = 400;
    let a: Vec<f64> = (0..n).map(|j| 0.8 * ((j as f64 - 150.0) * dx * 3.0).tanh()).collect();
    let b: Vec<f64> = (0..n).map(|j| 0.5 * ((j as f64 - 250.0) * dx * 2.0).tanh()).collect();
    let mut u = GridFunction::new(vec![a.clone(), b.clone()], dx, 0.0).unwrap();
    let dt = dx;
    for _ in 0..40 {
        u = step(&u, &sys, 0.0, dt).unwrap();
    }
    for j in 40..n {
        assert_eq!(u.component(0)[j].to_bits(), a[j - 40].to_bits());
    }
    // The second component moves a quarter cell per step: not a translation
    // of the grid, but bounded by its data.
    assert!(u.component(1).iter().all(|v| v.abs() <= 0.5));
}
