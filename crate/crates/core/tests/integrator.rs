use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use dualspin::analysis::dominant_period;
use dualspin::control::eigenvalues;
use dualspin::dynamics::{P, PHI_S};
use dualspin::presets;
use dualspin::simulator::{simulate, InputSignal, Scenario, TimeVaryingSystem};

fn short(name: &str, member: usize, duration: f64) -> Scenario {
    let mut s = presets::scenario(name, member).unwrap();
    s.duration = duration;
    s
}

fn rel_diff(a: &[f64], b: &[f64]) -> f64 {
    let scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs())) / scale
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]
    #[test]
    fn response_scales_with_reference(alpha in -50.0..50.0f64) {
        prop_assume!(alpha.abs() > 1e-3);
        // e = 0 member: no drift forcing
        let base = short("lateral/e-sweep/i30/500s", 0, 10.0);
        let mut scaled = base.clone();
        scaled.input.amplitude *= alpha;
        let r1 = simulate(&base).unwrap();
        let r2 = simulate(&scaled).unwrap();
        let expect: Vec<f64> = r1.states.iter().map(|v| v * alpha).collect();
        prop_assert!(rel_diff(&r2.states, &expect) < 1e-12);
    }
}

#[test]
fn doublet_is_sum_of_steps() {
    let mut base = short("directional/e-sweep/i30/500s", 2, 30.0);
    base.time_varying.b_channel_dn = false;
    let d = simulate(&base).unwrap();
    let a = base.input.amplitude;
    let mut sum = vec![0.0; d.states.len()];
    for (amp, t0) in [(a, base.input.t_start), (-2.0 * a, base.input.t_half), (a, base.input.t_end)] {
        let mut s = base.clone();
        s.input = InputSignal::step(amp, t0);
        for (acc, v) in sum.iter_mut().zip(simulate(&s).unwrap().states) {
            *acc += v;
        }
    }
    assert!(rel_diff(&sum, &d.states) < 1e-9);
}

#[test]
fn fourth_order_convergence_with_fast_pole() {
    let mut s = short("lateral/e-sweep/i30/500s", 0, 2.0);
    s.orbit.i_deg = 0.0;
    s.input = InputSignal::zero();
    s.initial.phi_s_deg = 0.1;
    let terminal = |dt: f64| {
        let mut c = s.clone();
        c.dt = dt;
        DVector::from_column_slice(simulate(&c).unwrap().final_state().unwrap())
    };
    let reference = terminal(0.003125);
    let e1 = (terminal(0.05) - &reference).norm();
    let e2 = (terminal(0.025) - &reference).norm();
    let order = (e1 / e2).log2();
    assert!(order >= 3.5, "order {order}");
}

#[test]
fn matches_matrix_exponential_on_lateral_loop() {
    let mut s = short("lateral/e-sweep/i30/500s", 0, 100.0);
    s.orbit.i_deg = 0.0;
    s.input = InputSignal::zero();
    s.initial.phi_s_deg = 0.1;
    let sys = TimeVaryingSystem::from_scenario(&s).unwrap();
    let (a, _) = sys.system_at(0.0).unwrap();
    let mut x0 = DVector::zeros(a.nrows());
    x0[PHI_S] = 0.1f64.to_radians();
    let exact = (a * 100.0).exp() * x0;
    let sim = DVector::from_column_slice(simulate(&s).unwrap().final_state().unwrap());
    assert!((&sim - &exact).norm() / exact.norm() < 1e-6);
}

#[test]
fn open_loop_impulse_rings_at_nutation_frequency() {
    let mut s = short("longitudinal/e-sweep/i30/500s", 0, 60.0);
    s.loops.clear();
    s.orbit.i_deg = 0.0;
    s.input = InputSignal::impulse(1.0, 0.5);
    let r = simulate(&s).unwrap();
    let plant = presets::plant_config(presets::LONGITUDINAL).unwrap().resolve().unwrap();
    let wn = eigenvalues(&DMatrix::from_iterator(6, 6, plant.a.iter().copied()))
        .unwrap()
        .iter()
        .map(|l| l.im)
        .fold(0.0, f64::max);
    let t: Vec<f64> = r.t.iter().copied().filter(|t| *t >= 1.0).collect();
    let p: Vec<f64> = r.column(P)[r.len() - t.len()..].to_vec();
    let period = dominant_period(&t, &p).unwrap();
    let expected = 2.0 * std::f64::consts::PI / wn;
    assert!((period - expected).abs() / expected < 0.01, "{period} vs {expected}");
}

#[test]
fn gravity_gradient_destabilises_lateral_only() {
    let long = presets::plant_config(presets::LONGITUDINAL).unwrap().resolve().unwrap();
    let lat = presets::plant_config(presets::LATERAL).unwrap().resolve().unwrap();
    let spectrum = |p: &dualspin::dynamics::PlantMatrices| {
        eigenvalues(&DMatrix::from_iterator(6, 6, p.a.iter().copied())).unwrap()
    };
    let (e2, e6) = (spectrum(&long), spectrum(&lat));
    let max_real = |e: &[num_complex::Complex64]| {
        e.iter().filter(|l| l.im == 0.0).map(|l| l.re).fold(f64::NEG_INFINITY, f64::max)
    };
    let min_real = |e: &[num_complex::Complex64]| e.iter().map(|l| l.re).fold(f64::INFINITY, f64::min);
    assert!(max_real(&e2) < 1e-9);
    assert!(max_real(&e6) > 1e-4, "lateral divergence expected");
    // the damped subsidence mode moves further left
    assert!(min_real(&e6) < min_real(&e2));
    let nutation_re = |e: &[num_complex::Complex64]| e.iter().find(|l| l.im > 1.0).unwrap().re;
    assert!(nutation_re(&e2) < 0.0 && nutation_re(&e6) < 0.0);
}

#[test]
fn concurrent_sweep_matches_sequential() {
    let members: Vec<Scenario> = presets::scenario_preset("directional/e-sweep/i30/500s")
        .unwrap()
        .members
        .into_iter()
        .map(|mut s| {
            s.duration = 50.0;
            s
        })
        .collect();
    let sequential: Vec<_> = members.iter().map(|s| simulate(s).unwrap()).collect();
    let parallel: Vec<_> = std::thread::scope(|scope| {
        let handles: Vec<_> = members.iter().map(|s| scope.spawn(move || simulate(s).unwrap())).collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    assert_eq!(sequential, parallel);
}

#[test]
fn recorded_grid_is_uniform() {
    let mut s = short("lateral/e-sweep/i30/10T", 2, 2000.0);
    s.record_stride = 7;
    let r = simulate(&s).unwrap();
    let dt = s.dt * 7.0;
    assert!(r.t.windows(2).all(|w| ((w[1] - w[0]) - dt).abs() < 1e-9));
    assert!(r.states.iter().all(|v| v.is_finite()));
}
