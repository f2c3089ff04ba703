//! Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

use std::f64::consts::PI;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use dualspin::analysis::{envelope, peak_abs, pointing_check, settling_time, POINTING_BUDGET_DEG};
use dualspin::control::{
    close_loop, eigen_modes, eigenvalues, log_gain_grid, root_locus, FeedbackLoop, Mode,
    RationalCompensator, SensedOutput,
};
use dualspin::dynamics::{PlantMatrices, PHI_S, PSI_S, THETA_S};
use dualspin::orbit::{orbital_period, propagate, solve_kepler, OrbitElements, MU_EARTH};
use dualspin::presets;
use dualspin::simulator::{simulate, InputSignal, Scenario};

/// Longitudinal design plant, row 6 kept as given.
const A_LONG_REF: [[f64; 6]; 6] = [
    [0.0, 0.0, 3.7113, 0.0, 0.0, 0.0],
    [0.49773, -9.7138e-4, -3.4402e-5, 0.0, 0.0, 0.0],
    [-4.0326, 3.3636e-5, -1.1912e-6, 0.0, 0.0, 0.0],
    [1.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.0, 1.0, 0.0, 0.0, 0.0, 0.0],
    [0.0, 0.0, 0.0, 1.0, 0.0, 0.0],
];
const A_LAT_REF: [[f64; 6]; 6] = [
    [0.0, 0.0, 3.7113, -6.1872e-7, 0.0, 0.0],
    [0.49773, -9.7138e-4, -3.4402e-5, 0.0, 7.2937e-7, 0.0],
    [-4.0326, 3.3636e-5, -1.1912e-6, 0.0, -1.3422e-7, 0.0],
    [1.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.0, 1.0, 0.0, 0.0, 0.0, 0.0],
    [0.0, 0.0, 1.0, 0.0, 0.0, 0.0],
];
const B_REF: [[f64; 2]; 6] = [
    [0.0, 0.0],
    [-5.1218e-4, 0.0],
    [1.7735e-5, 0.0],
    [0.0, 0.0],
    [0.0, 1.0],
    [0.0, 0.0],
];

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self {
            pass,
            detail: detail.into(),
        }
    }
}

fn model_json(preset: &str) -> (serde_json::Value, Duration) {
    let start = Instant::now();
    let out = Command::new(env!("CARGO_BIN_EXE_dualspin"))
        .args(["model", "--preset", preset, "--format", "json"])
        .output()
        .expect("run dualspin");
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    (serde_json::from_slice(&out.stdout).expect("model json"), start.elapsed())
}

fn rows(v: &serde_json::Value) -> Vec<Vec<f64>> {
    serde_json::from_value(v.clone()).expect("matrix rows")
}

fn as_rows<const C: usize>(m: &[[f64; C]; 6]) -> Vec<Vec<f64>> {
    m.iter().map(|r| r.to_vec()).collect()
}

fn criterion_1() -> Outcome {
    let (long, t1) = model_json(presets::LONGITUDINAL);
    let (verbatim, t2) = model_json(presets::LONGITUDINAL_VERBATIM);
    let (lat, t3) = model_json(presets::LATERAL);
    let elapsed = t1.max(t2).max(t3);

    let long_a = rows(&long["A"]);
    let rows_1_5 = long_a[..5] == as_rows(&A_LONG_REF)[..5];
    let row_6 = long_a[5] == vec![0.0, 0.0, 1.0, 0.0, 0.0, 0.0];
    let verbatim_exact = rows(&verbatim["A"]) == as_rows(&A_LONG_REF);
    let b_exact = rows(&long["B"]) == as_rows(&B_REF) && rows(&lat["B"]) == as_rows(&B_REF);
    let lat_exact = rows(&lat["A"]) == as_rows(&A_LAT_REF);

    // oracle: undamped pair of the p-r block, wn^2 = -A13 * A31
    let wn_oracle = (3.7113f64 * 4.0326).sqrt();
    let modes: Vec<(f64, f64, f64)> = long["modes"]
        .as_array()
        .unwrap()
        .iter()
        .map(|m| {
            (
                m["im"].as_f64().unwrap(),
                m["natural_frequency"].as_f64().unwrap(),
                m["damping_ratio"].as_f64().unwrap(),
            )
        })
        .collect();
    let pair = modes.iter().find(|(im, _, _)| *im > 1.0).copied();
    let (wn_ok, wn_text) = match pair {
        Some((_, wn, zeta)) => (
            (wn - 3.869).abs() <= 0.01 && (wn - wn_oracle).abs() < 1e-3 && zeta.abs() < 0.01,
            format!("wn = {wn:.5} (oracle {wn_oracle:.5}), zeta = {zeta:.2e}"),
        ),
        None => (false, "no oscillatory pair".into()),
    };
    let fast = elapsed < Duration::from_secs(1);
    Outcome::new(
        rows_1_5 && row_6 && verbatim_exact && b_exact && lat_exact && wn_ok && fast,
        format!(
            "longitudinal rows 1-5 exact: {rows_1_5}, row 6 kinematic: {row_6}, verbatim preset exact: {verbatim_exact}, \
             B exact: {b_exact}, lateral A exact: {lat_exact}; {wn_text}; slowest model run {:.3} s",
            elapsed.as_secs_f64()
        ),
    )
}

fn reference_plant(a: &[[f64; 6]; 6]) -> PlantMatrices {
    let mut p = PlantMatrices::zero();
    for r in 0..6 {
        for c in 0..6 {
            p.a[(r, c)] = a[r][c];
        }
        for c in 0..2 {
            p.b[(r, c)] = B_REF[r][c];
        }
    }
    p
}

fn max_oscillatory_re(modes: &[Mode]) -> f64 {
    modes
        .iter()
        .filter(|m| m.is_oscillatory())
        .map(|m| m.eigenvalue.re)
        .fold(f64::NEG_INFINITY, f64::max)
}

fn criterion_2() -> Outcome {
    let mut long_plant = reference_plant(&A_LONG_REF);
    long_plant.a[(5, 3)] = 0.0;
    long_plant.a[(5, 2)] = 1.0;
    let lat_plant = reference_plant(&A_LAT_REF);

    let theta = FeedbackLoop::new(
        SensedOutput::ThetaS,
        RationalCompensator::new(-29800.0, vec![-0.498], vec![-1.0]).unwrap(),
    );
    let p = FeedbackLoop::new(
        SensedOutput::P,
        RationalCompensator::new(1.5e6, vec![-4.1], vec![-25.9, -2.63]).unwrap(),
    );
    let r = FeedbackLoop::new(SensedOutput::R, RationalCompensator::static_gain(300_000.0).unwrap());

    let mut all = true;
    let mut parts = Vec::new();
    for (name, plant, fl) in [("theta_s", &long_plant, &theta), ("p", &lat_plant, &p), ("r", &lat_plant, &r)] {
        let start = Instant::now();
        let closed = close_loop(plant, fl).unwrap();
        let modes = eigen_modes(&closed.a).unwrap();
        let worst = max_oscillatory_re(&modes);
        let ok = worst < -1e-6 && start.elapsed() < Duration::from_secs(1);
        all &= ok;
        parts.push(format!("{name}: max oscillatory Re = {worst:.4e} [{}]", if ok { "ok" } else { "unstable" }));
    }
    Outcome::new(all, parts.join("; "))
}

fn run_timed(sc: &Scenario) -> (dualspin::simulator::SimulationResult, f64) {
    let start = Instant::now();
    let res = simulate(sc).expect("simulation");
    (res, start.elapsed().as_secs_f64())
}

fn criterion_3() -> Outcome {
    let mut all = true;
    let mut parts = Vec::new();
    for (family, idx, limit) in [
        ("longitudinal/e-sweep/i30/500s", THETA_S, 60.0),
        ("lateral/e-sweep/i30/500s", PHI_S, 30.0),
        ("directional/e-sweep/i30/500s", PSI_S, 30.0),
    ] {
        let preset = presets::scenario_preset(family).unwrap();
        let mut worst: f64 = 0.0;
        let mut slowest: f64 = 0.0;
        for sc in &preset.members {
            // the doublet response alone: subtract the orbit-forced run
            let (res, secs) = run_timed(sc);
            let mut forced = sc.clone();
            forced.input = InputSignal::zero();
            let (free, _) = run_timed(&forced);
            let y: Vec<f64> = res
                .angle_deg(idx)
                .iter()
                .zip(free.angle_deg(idx))
                .map(|(a, b)| a - b)
                .collect();
            let ts = settling_time(&res.t, &y, 0.05 * peak_abs(&y)).unwrap();
            let ts = ts.unwrap_or(f64::INFINITY);
            worst = worst.max(ts);
            slowest = slowest.max(secs);
        }
        let ok = worst < limit && slowest < 10.0;
        all &= ok;
        parts.push(format!(
            "{} t* = {worst:.2} s (< {limit}) [{:.2} s/run]",
            preset.mode.name(),
            slowest
        ));
    }

    let preset = presets::scenario_preset("longitudinal/initial-offset/i30/500s").unwrap();
    let mut abs_times = Vec::new();
    for sc in &preset.members {
        let (res, _) = run_timed(sc);
        let y = res.angle_deg(THETA_S);
        abs_times.push(settling_time(&res.t, &y, 0.01).unwrap().unwrap_or(f64::INFINITY));
    }
    let abs_ok = abs_times.iter().all(|t| (24.0..=36.0).contains(t));
    all &= abs_ok;
    parts.push(format!(
        "theta_s from -1.5 deg into 0.01 deg band at {:?} s (target 30 s +/- 20%)",
        abs_times.iter().map(|t| (t * 100.0).round() / 100.0).collect::<Vec<_>>()
    ));
    Outcome::new(all, parts.join("; "))
}

fn long_run(family: &str, e: f64) -> Scenario {
    presets::scenario_preset(family)
        .unwrap()
        .members
        .into_iter()
        .find(|s| s.orbit.e == e && s.orbit.i_deg == 30.0)
        .expect("member")
}

/// Window that skips the doublet transient.
fn tail_window(res: &dualspin::simulator::SimulationResult) -> (f64, f64) {
    (presets::SHORT_HORIZON, *res.t.last().unwrap())
}

fn criterion_4() -> Outcome {
    let sc = long_run("directional/e-sweep/i30/10T", 0.2);
    let (res, secs) = run_timed(&sc);
    let y = res.angle_deg(PSI_S);
    let verdict = pointing_check(&y, POINTING_BUDGET_DEG).unwrap();
    let (lo, hi) = envelope(&res.t, &y, tail_window(&res)).unwrap();
    let (plo, phi) = (-5.5e-3, 1.6e-3);
    let within = |v: f64, p: f64| v.signum() == p.signum() && v.abs() >= p.abs() / 3.0 && v.abs() <= p.abs() * 3.0;
    let env_ok = within(lo, plo) && within(hi, phi);
    let budget_ok = verdict.pass && verdict.margin_deg > 0.0;
    Outcome::new(
        budget_ok && env_ok && secs < 60.0,
        format!(
            "max |psi_s| = {:.4e} deg, margin {:.4e} deg [{}]; envelope [{lo:.3e}, {hi:.3e}] deg vs [{plo:e}, {phi:e}] x/÷3 [{}]; {secs:.1} s",
            POINTING_BUDGET_DEG - verdict.margin_deg,
            verdict.margin_deg,
            if budget_ok { "ok" } else { "fail" },
            if env_ok { "ok" } else { "fail" },
        ),
    )
}

fn criterion_5() -> Outcome {
    let closed = long_run("lateral/e-sweep/i30/10T", 0.2);
    let mut open = closed.clone();
    open.loops.clear();
    let (rc, _) = run_timed(&closed);
    let (ro, _) = run_timed(&open);
    let mag = |res: &dualspin::simulator::SimulationResult| {
        let y = res.angle_deg(PHI_S);
        let (lo, hi) = envelope(&res.t, &y, tail_window(res)).unwrap();
        (lo, hi, lo.abs().max(hi.abs()))
    };
    let (clo, chi, cm) = mag(&rc);
    let (olo, ohi, om) = mag(&ro);
    let ratio = cm / om;
    Outcome::new(
        ratio <= 0.6 && cm < om,
        format!(
            "closed-loop phi_s [{clo:.3e}, {chi:.3e}] deg, open-loop [{olo:.3e}, {ohi:.3e}] deg, ratio {ratio:.3e} (<= 0.6)"
        ),
    )
}

fn criterion_6() -> Outcome {
    let start = Instant::now();
    let mut rng = StdRng::seed_from_u64(0x5eed);
    let mut worst_residual: f64 = 0.0;
    for _ in 0..10_000 {
        let m = rng.random_range(-4.0 * PI..4.0 * PI);
        let e = rng.random_range(0.0..=0.9);
        let ea = solve_kepler(m, e).unwrap();
        worst_residual = worst_residual.max((ea - e * ea.sin() - m).abs());
    }
    let kepler_ok = worst_residual < 1e-12;

    let a = 8.078e6;
    let orb = OrbitElements::new(a, 0.2, 30f64.to_radians(), 0.3, MU_EARTH).unwrap();
    let period = orbital_period(&orb);
    let mut worst_h: f64 = 0.0;
    let mut worst_periodic: f64 = 0.0;
    let h0 = orb.angular_momentum();
    for k in 0..500 {
        let t = k as f64 * period / 137.0;
        let s = propagate(&orb, t).unwrap();
        let s2 = propagate(&orb, t + period).unwrap();
        worst_h = worst_h.max((s.radius * s.v_theta - h0).abs() / h0);
        worst_periodic = worst_periodic
            .max((s.radius - s2.radius).abs() / s.radius)
            .max((s.n - s2.n).abs() / s.n.abs());
    }
    let conserve_ok = worst_h < 1e-9 && worst_periodic < 1e-9;

    let circ = OrbitElements::new(a, 0.0, 0.0, 0.0, MU_EARTH).unwrap();
    let circ_ok = (0..1000).all(|k| {
        let s = propagate(&circ, k as f64 * 7.3).unwrap();
        s.delta_n == 0.0 && s.r_zp == 0.0
    });

    let perigee = propagate(&orb, 0.0).unwrap();
    let apogee = propagate(&orb, 0.5 * period).unwrap();
    let ratio = perigee.n / apogee.n;
    let ratio_ok = (ratio - 2.25).abs() < 1e-12;
    let fast = start.elapsed() < Duration::from_secs(5);
    Outcome::new(
        kepler_ok && conserve_ok && circ_ok && ratio_ok && fast,
        format!(
            "Kepler residual {worst_residual:.2e}; h drift {worst_h:.2e}, periodicity {worst_periodic:.2e}; \
             circular equatorial zero: {circ_ok}; n_p/n_a = {ratio:.15}; {:.2} s",
            start.elapsed().as_secs_f64()
        ),
    )
}

fn rel_diff(a: &[f64], b: &[f64]) -> f64 {
    let scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs())) / scale
}

fn criterion_7() -> Outcome {
    // e = 0: no drift forcing, so the response is linear in the reference
    let mut base = presets::scenario("longitudinal/e-sweep/i30/500s", 0).unwrap();
    base.duration = 60.0;

    // linearity
    let r1 = simulate(&base).unwrap();
    let mut scaled = base.clone();
    scaled.input.amplitude *= 3.5;
    let r2 = simulate(&scaled).unwrap();
    let r1s: Vec<f64> = r1.states.iter().map(|v| v * 3.5).collect();
    let lin = rel_diff(&r2.states, &r1s);

    // superposition of the doublet into three steps on an elliptic orbit with
    // the drift input off
    let mut tv = presets::scenario("longitudinal/e-sweep/i30/500s", 2).unwrap();
    tv.duration = 60.0;
    tv.time_varying.b_channel_dn = false;
    let d = simulate(&tv).unwrap();
    let amp = tv.input.amplitude;
    let mut sum = vec![0.0; d.states.len()];
    for (a, t0) in [(amp, tv.input.t_start), (-2.0 * amp, tv.input.t_half), (amp, tv.input.t_end)] {
        let mut s = tv.clone();
        s.input = InputSignal::step(a, t0);
        let r = simulate(&s).unwrap();
        for (acc, v) in sum.iter_mut().zip(&r.states) {
            *acc += v;
        }
    }
    let sup = rel_diff(&sum, &d.states);

    // convergence order on the time-invariant preset
    let mut ti = presets::scenario("longitudinal/initial-offset/i30/500s", 0).unwrap();
    ti.orbit.i_deg = 0.0;
    ti.input = InputSignal::zero();
    ti.duration = 20.0;
    let terminal = |dt: f64| -> DVector<f64> {
        let mut s = ti.clone();
        s.dt = dt;
        let r = simulate(&s).unwrap();
        DVector::from_column_slice(r.final_state().unwrap())
    };
    let reference = terminal(0.0025);
    let e1 = (terminal(0.04) - &reference).norm();
    let e2 = (terminal(0.02) - &reference).norm();
    let order = (e1 / e2).log2();

    // matrix exponential at t = 100 s
    let sys = dualspin::simulator::TimeVaryingSystem::from_scenario(&ti).unwrap();
    let (a, _) = sys.system_at(0.0).unwrap();
    let mut x0 = DVector::zeros(a.nrows());
    x0[THETA_S] = (-1.5f64).to_radians();
    let exact = (a * 100.0).exp() * x0;
    let expm_error = |dt: f64| {
        let mut ex = ti.clone();
        ex.duration = 100.0;
        ex.dt = dt;
        let r = simulate(&ex).unwrap();
        let sim = DVector::from_column_slice(r.final_state().unwrap());
        (&sim - &exact).norm() / exact.norm()
    };
    let exp_rel = expm_error(0.005);
    let exp_rel_coarse = expm_error(0.01);

    Outcome::new(
        lin < 1e-9 && sup < 1e-9 && order >= 3.5 && exp_rel < 1e-6,
        format!(
            "linearity {lin:.2e}, superposition {sup:.2e}, observed order {order:.3}, \
             expm rel error {exp_rel:.2e} at dt = 0.005 s ({exp_rel_coarse:.2e} at dt = 0.01 s)"
        ),
    )
}

fn min_harmonic_zeta(plant: &PlantMatrices, zero: f64, gain: f64) -> f64 {
    let fl = FeedbackLoop::new(
        SensedOutput::ThetaS,
        RationalCompensator::new(gain, vec![-zero], vec![-1.0]).unwrap(),
    );
    let closed = close_loop(plant, &fl).unwrap();
    eigen_modes(&closed.a)
        .unwrap()
        .iter()
        .filter(|m| m.eigenvalue.im.abs() > 1.0)
        .map(|m| m.damping_ratio)
        .fold(f64::INFINITY, f64::min)
}

fn criterion_8() -> Outcome {
    let mut plant = reference_plant(&A_LONG_REF);
    plant.a[(5, 3)] = 0.0;
    plant.a[(5, 2)] = 1.0;
    let fl = presets::loop_preset(presets::LONGITUDINAL).unwrap();
    let grid = log_gain_grid(-1.0, 10.0, 3e5, 100, true);
    let locus = root_locus(&plant, &fl, &grid).unwrap();

    // K = 0: plant modes plus the compensator pole
    let mut open: Vec<Complex64> = eigenvalues(&DMatrix::from_iterator(6, 6, plant.a.iter().copied())).unwrap();
    open.push(Complex64::new(-1.0, 0.0));
    let mut k0 = locus.slices[0].clone();
    let key = |c: &Complex64| (c.re, c.im);
    open.sort_by(|a, b| key(a).partial_cmp(&key(b)).unwrap());
    k0.sort_by(|a, b| key(a).partial_cmp(&key(b)).unwrap());
    let k0_err = open.iter().zip(&k0).fold(0.0f64, |m, (a, b)| m.max((a - b).norm()));

    let mut worst_conj: f64 = 0.0;
    for slice in &locus.slices {
        for l in slice {
            let d = slice.iter().map(|m| (m - l.conj()).norm()).fold(f64::INFINITY, f64::min);
            worst_conj = worst_conj.max(d / l.norm().max(1.0));
        }
    }

    let zeros = [0.2, 0.3, 0.4, 0.46, 0.498];
    let zetas: Vec<f64> = zeros.iter().map(|z| min_harmonic_zeta(&plant, *z, -29800.0)).collect();
    let monotone = zetas.windows(2).all(|w| w[1] > w[0]);
    Outcome::new(
        k0_err < 1e-9 && worst_conj < 1e-9 && monotone,
        format!(
            "K=0 endpoint error {k0_err:.2e}; conjugate asymmetry {worst_conj:.2e} over {} slices; \
             zeta_min at |K|=29800 for zeros {zeros:?}: {:?}",
            locus.slices.len(),
            zetas.iter().map(|z| (z * 1e5).round() / 1e5).collect::<Vec<_>>()
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("1 plant fidelity", criterion_1),
        ("2 design outcomes", criterion_2),
        ("3 settling claims", criterion_3),
        ("4 pointing budget", criterion_4),
        ("5 lateral eccentricity suppression", criterion_5),
        ("6 orbit properties", criterion_6),
        ("7 integrator properties", criterion_7),
        ("8 locus properties", criterion_8),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        let o = f();
        if !o.pass {
            failed += 1;
        }
        println!("{} criterion {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
    }
    println!("acceptance: {} of 8 criteria pass", 8 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
