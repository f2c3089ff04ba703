//! Fixed-step integration of the closed loop under reference input and
//! orbit forcing.
//!
//! Eccentricity enters through the drift rate `delta_n(t)` (kinematic rows and
//! the second input channel) and through the radius, which scales the
//! gravity-gradient entries by `(R0 / R)^3`. Inclination only changes `R_Zp`
//! unless a custom [`GravityModulation`] says otherwise.

use std::fmt;
use std::io::Write;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::control::{close_loops, ClosedLoopSystem, LoopConfig};
use crate::dynamics::{
    PlantConfig, PlantMatrices, StateMatrix, GRAVITY_ENTRIES, PHI_S, PSI_S, STATE_DIM,
};
use crate::orbit::{gg_scale, propagate, OrbitConfig, OrbitElements, OrbitState};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InputKind {
    #[serde(rename = "zero")]
    Zero,
    #[serde(rename = "step")]
    Step,
    #[serde(rename = "impulse-approx")]
    Impulse,
    #[serde(rename = "doublet")]
    Doublet,
}

/// Reference command `delta_e_ref` (V).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InputSignal {
    pub kind: InputKind,
    #[serde(default)]
    pub amplitude: f64,
    #[serde(default)]
    pub t_start: f64,
    #[serde(default)]
    pub t_half: f64,
    #[serde(default)]
    pub t_end: f64,
}

impl InputSignal {
    pub fn zero() -> Self {
        Self {
            kind: InputKind::Zero,
            amplitude: 0.0,
            t_start: 0.0,
            t_half: 0.0,
            t_end: 0.0,
        }
    }

    pub fn step(amplitude: f64, t_start: f64) -> Self {
        Self {
            kind: InputKind::Step,
            amplitude,
            t_start,
            ..Self::zero()
        }
    }

    pub fn impulse(amplitude: f64, t_start: f64) -> Self {
        Self {
            kind: InputKind::Impulse,
            amplitude,
            t_start,
            ..Self::zero()
        }
    }

    pub fn doublet(amplitude: f64, t_start: f64, t_half: f64, t_end: f64) -> Self {
        Self {
            kind: InputKind::Doublet,
            amplitude,
            t_start,
            t_half,
            t_end,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.amplitude.is_finite()
            && self.t_start.is_finite()
            && self.t_half.is_finite()
            && self.t_end.is_finite())
        {
            return Err(Error::InvalidParameter {
                name: "input",
                reason: "amplitude and times must be finite".into(),
            });
        }
        if self.kind == InputKind::Doublet && !(self.t_start < self.t_half && self.t_half < self.t_end) {
            return Err(Error::InvalidParameter {
                name: "input",
                reason: format!(
                    "doublet needs t_start < t_half < t_end, got {}, {}, {}",
                    self.t_start, self.t_half, self.t_end
                ),
            });
        }
        Ok(())
    }
}

/// A sampled-time evaluator for an [`InputSignal`].
#[derive(Debug, Clone, Copy)]
pub struct Signal {
    input: InputSignal,
    dt: f64,
}

impl Signal {
    pub fn value(&self, t: f64) -> f64 {
        let s = &self.input;
        match s.kind {
            InputKind::Zero => 0.0,
            InputKind::Step if t >= s.t_start => s.amplitude,
            InputKind::Impulse if t >= s.t_start && t < s.t_start + self.dt => s.amplitude,
            InputKind::Doublet if t >= s.t_start && t < s.t_half => s.amplitude,
            InputKind::Doublet if t >= s.t_half && t < s.t_end => -s.amplitude,
            _ => 0.0,
        }
    }
}

/// Build the evaluator; `dt` sets the width of the impulse bin.
pub fn make_input(input: &InputSignal, dt: f64) -> Result<Signal> {
    input.validate()?;
    if !(dt > 0.0) {
        return Err(Error::InvalidParameter {
            name: "dt",
            reason: format!("must be positive, got {dt}"),
        });
    }
    Ok(Signal { input: *input, dt })
}

/// Which parts of the model follow the orbit in time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeVaryingFlags {
    /// `A46 = delta_n(t)`, `A64 = -delta_n(t)`.
    pub kinematic_dn: bool,
    /// `delta_n(t)` drives input channel 2.
    pub b_channel_dn: bool,
    /// Gravity-gradient entries scale with the orbit radius.
    pub gg_scaling: bool,
}

impl Default for TimeVaryingFlags {
    fn default() -> Self {
        Self {
            kinematic_dn: true,
            b_channel_dn: true,
            gg_scaling: true,
        }
    }
}

impl TimeVaryingFlags {
    pub fn frozen() -> Self {
        Self {
            kinematic_dn: false,
            b_channel_dn: false,
            gg_scaling: false,
        }
    }
}

/// Initial plant state; body rates in rad/s, angles in degrees.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct InitialAttitude {
    #[serde(default)]
    pub p: f64,
    #[serde(default)]
    pub q: f64,
    #[serde(default)]
    pub r: f64,
    #[serde(default)]
    pub phi_s_deg: f64,
    #[serde(default)]
    pub theta_s_deg: f64,
    #[serde(default)]
    pub psi_s_deg: f64,
}

impl InitialAttitude {
    fn to_state(self) -> [f64; STATE_DIM] {
        [
            self.p,
            self.q,
            self.r,
            self.phi_s_deg.to_radians(),
            self.theta_s_deg.to_radians(),
            self.psi_s_deg.to_radians(),
        ]
    }
}

fn default_stride() -> usize {
    1
}

/// One simulation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub plant: PlantConfig,
    #[serde(default)]
    pub loops: Vec<LoopConfig>,
    /// Index into `loops` of the loop that receives `delta_e_ref`.
    #[serde(default)]
    pub reference_loop: usize,
    pub orbit: OrbitConfig,
    /// Gravity-gradient reference radius (m); the semi-major axis when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r0: Option<f64>,
    pub input: InputSignal,
    #[serde(default)]
    pub initial: InitialAttitude,
    /// Simulated span (s).
    pub duration: f64,
    /// Integration step (s).
    pub dt: f64,
    /// Keep every n-th step in the result.
    #[serde(default = "default_stride")]
    pub record_stride: usize,
    #[serde(default)]
    pub time_varying: TimeVaryingFlags,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "dt",
                reason: format!("must be positive, got {}", self.dt),
            });
        }
        if !(self.duration >= self.dt && self.duration.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "duration",
                reason: format!("must be at least dt = {}, got {}", self.dt, self.duration),
            });
        }
        if self.record_stride == 0 {
            return Err(Error::InvalidParameter {
                name: "record_stride",
                reason: "must be at least 1".into(),
            });
        }
        self.input.validate()
    }

    pub fn steps(&self) -> usize {
        (self.duration / self.dt).round() as usize
    }
}

/// Maps an orbit sample to multipliers for `[A14, A25, A35]`.
pub trait GravityModulation: Send + Sync {
    fn factors(&self, state: &OrbitState, r0: f64) -> [f64; 3];
}

/// All three entries scale as `(R0 / R)^3`.
#[derive(Debug, Clone, Copy, Default)]
pub struct InverseCube;

impl GravityModulation for InverseCube {
    fn factors(&self, state: &OrbitState, r0: f64) -> [f64; 3] {
        [gg_scale(state, r0); 3]
    }
}

/// Supplies `A(t)` and `B(t)` for the integrator.
pub trait MatrixProvider {
    fn matrices_at(&self, t: f64) -> Result<(DMatrix<f64>, DMatrix<f64>)>;
}

/// Constant `(A, B)`.
#[derive(Debug, Clone)]
pub struct ConstantSystem {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
}

impl MatrixProvider for ConstantSystem {
    fn matrices_at(&self, _t: f64) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        Ok((self.a.clone(), self.b.clone()))
    }
}

/// A scenario's closed loop coupled to its orbit.
#[derive(Clone)]
pub struct TimeVaryingSystem {
    pub closed: ClosedLoopSystem,
    pub plant: PlantMatrices,
    pub orbit: OrbitElements,
    pub r0: f64,
    pub flags: TimeVaryingFlags,
    modulation: Arc<dyn GravityModulation>,
}

impl fmt::Debug for TimeVaryingSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TimeVaryingSystem")
            .field("closed", &self.closed)
            .field("plant", &self.plant)
            .field("orbit", &self.orbit)
            .field("r0", &self.r0)
            .field("flags", &self.flags)
            .finish_non_exhaustive()
    }
}

impl TimeVaryingSystem {
    pub fn from_scenario(scenario: &Scenario) -> Result<Self> {
        let plant = scenario.plant.resolve()?;
        let loops = scenario
            .loops
            .iter()
            .map(LoopConfig::resolve)
            .collect::<Result<Vec<_>>>()?;
        let closed = close_loops(&plant, &loops, scenario.reference_loop)?;
        let orbit = scenario.orbit.elements()?;
        let r0 = scenario.r0.unwrap_or(orbit.a);
        if !(r0 > 0.0 && r0.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "r0",
                reason: format!("must be positive, got {r0}"),
            });
        }
        Ok(Self {
            closed,
            plant,
            orbit,
            r0,
            flags: scenario.time_varying,
            modulation: Arc::new(InverseCube),
        })
    }

    /// Replace the gravity-gradient modulation law.
    pub fn with_modulation(mut self, modulation: Arc<dyn GravityModulation>) -> Self {
        self.modulation = modulation;
        self
    }

    pub fn orbit_state(&self, t: f64) -> Result<OrbitState> {
        propagate(&self.orbit, t)
    }

    /// Plant `A` at time `t`.
    pub fn plant_at(&self, t: f64) -> Result<StateMatrix> {
        let mut a = self.plant.a;
        if !(self.flags.kinematic_dn || self.flags.gg_scaling) {
            return Ok(a);
        }
        let state = self.orbit_state(t)?;
        if self.flags.gg_scaling {
            let factors = self.modulation.factors(&state, self.r0);
            for ((r, c), f) in GRAVITY_ENTRIES.into_iter().zip(factors) {
                a[(r, c)] *= f;
            }
        }
        if self.flags.kinematic_dn {
            a[(PHI_S, PSI_S)] = state.delta_n;
            a[(PSI_S, PHI_S)] = -state.delta_n;
        }
        Ok(a)
    }

    /// Drift-rate input on channel 2 (zero when the channel is disabled).
    pub fn drift_input(&self, t: f64) -> Result<f64> {
        if self.flags.b_channel_dn {
            Ok(self.orbit_state(t)?.delta_n)
        } else {
            Ok(0.0)
        }
    }

    pub fn system_at(&self, t: f64) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        Ok((self.closed.assemble(&self.plant_at(t)?), self.closed.b.clone()))
    }
}

impl MatrixProvider for TimeVaryingSystem {
    fn matrices_at(&self, t: f64) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        self.system_at(t)
    }
}

/// Instantaneous closed-loop `(A(t), B(t))` of a scenario.
pub fn system_at(scenario: &Scenario, t: f64) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    TimeVaryingSystem::from_scenario(scenario)?.system_at(t)
}

/// One classical Runge-Kutta step of `x' = A(t) x + B(t) u(t)`.
pub fn step_rk4<S, U>(sys: &S, input: U, x: &DVector<f64>, t: f64, dt: f64) -> Result<DVector<f64>>
where
    S: MatrixProvider + ?Sized,
    U: Fn(f64) -> Result<DVector<f64>>,
{
    if !(dt > 0.0) {
        return Err(Error::InvalidParameter {
            name: "dt",
            reason: format!("must be positive, got {dt}"),
        });
    }
    let half = t + 0.5 * dt;
    let end = t + dt;
    let (a0, b0) = sys.matrices_at(t)?;
    let (ah, bh) = sys.matrices_at(half)?;
    let (a1, b1) = sys.matrices_at(end)?;
    let (u0, uh, u1) = (input(t)?, input(half)?, input(end)?);

    let k1 = &a0 * x + &b0 * &u0;
    let k2 = &ah * (x + &k1 * (0.5 * dt)) + &bh * &uh;
    let k3 = &ah * (x + &k2 * (0.5 * dt)) + &bh * &uh;
    let k4 = &a1 * (x + &k3 * dt) + &b1 * &u1;
    let next = x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
    if next.iter().any(|v| !v.is_finite()) {
        return Err(Error::Divergence {
            t: end,
            partial: Box::new(SimulationResult::empty(next.len())),
        });
    }
    Ok(next)
}

/// Recorded trajectory of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationResult {
    pub scenario: Option<Scenario>,
    pub t: Vec<f64>,
    /// Row-major `t.len() x dim` state samples (plant then compensator).
    pub states: Vec<f64>,
    pub dim: usize,
    /// Motor voltage after the compensators (V).
    pub delta_e: Vec<f64>,
    /// Drift-rate input actually applied (rad/s).
    pub delta_n: Vec<f64>,
}

impl SimulationResult {
    pub(crate) fn empty(dim: usize) -> Self {
        Self {
            scenario: None,
            t: Vec::new(),
            states: Vec::new(),
            dim,
            delta_e: Vec::new(),
            delta_n: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn state(&self, k: usize) -> &[f64] {
        &self.states[k * self.dim..(k + 1) * self.dim]
    }

    pub fn column(&self, idx: usize) -> Vec<f64> {
        (0..self.len()).map(|k| self.states[k * self.dim + idx]).collect()
    }

    /// Plant angle `idx` (3, 4 or 5) in degrees.
    pub fn angle_deg(&self, idx: usize) -> Vec<f64> {
        self.column(idx).into_iter().map(f64::to_degrees).collect()
    }

    pub fn final_state(&self) -> Option<&[f64]> {
        (!self.is_empty()).then(|| self.state(self.len() - 1))
    }

    fn push(&mut self, t: f64, x: &DVector<f64>, de: f64, dn: f64) {
        self.t.push(t);
        self.states.extend(x.iter());
        self.delta_e.push(de);
        self.delta_n.push(dn);
    }

    pub fn csv_header(&self) -> String {
        let mut cols = vec![
            "t".to_string(),
            "p".into(),
            "q".into(),
            "r".into(),
            "phi_s_deg".into(),
            "theta_s_deg".into(),
            "psi_s_deg".into(),
        ];
        cols.extend((1..=self.dim - STATE_DIM).map(|i| format!("xc_{i}")));
        cols.push("de_applied".into());
        cols.push("dn_applied".into());
        cols.join(",")
    }

    /// `t,p,q,r,phi_s_deg,theta_s_deg,psi_s_deg,xc_1..xc_m,de_applied,dn_applied`.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> Result<()> {
        writeln!(out, "{}", self.csv_header())?;
        let mut line = String::new();
        for k in 0..self.len() {
            line.clear();
            line.push_str(&format!("{:?}", self.t[k]));
            for (i, v) in self.state(k).iter().enumerate() {
                let v = if (PHI_S..=PSI_S).contains(&i) {
                    v.to_degrees()
                } else {
                    *v
                };
                line.push_str(&format!(",{v:?}"));
            }
            line.push_str(&format!(",{:?},{:?}", self.delta_e[k], self.delta_n[k]));
            writeln!(out, "{line}")?;
        }
        Ok(())
    }
}

pub fn simulate(scenario: &Scenario) -> Result<SimulationResult> {
    scenario.validate()?;
    let sys = TimeVaryingSystem::from_scenario(scenario)?;
    simulate_system(scenario, &sys)
}

/// Run `scenario` against an already assembled (possibly customised) system.
pub fn simulate_system(scenario: &Scenario, sys: &TimeVaryingSystem) -> Result<SimulationResult> {
    scenario.validate()?;
    let dt = scenario.dt;
    let reference = make_input(&scenario.input, dt)?;
    let dim = sys.closed.dim();

    let mut x = DVector::zeros(dim);
    for (i, v) in scenario.initial.to_state().into_iter().enumerate() {
        x[i] = v;
    }
    let input = |t: f64| -> Result<DVector<f64>> {
        Ok(DVector::from_vec(vec![reference.value(t), sys.drift_input(t)?]))
    };

    let steps = scenario.steps();
    let stride = scenario.record_stride;
    let mut result = SimulationResult::empty(dim);
    result.t.reserve(steps / stride + 1);
    result.states.reserve((steps / stride + 1) * dim);

    for k in 0..=steps {
        let t = k as f64 * dt;
        if k % stride == 0 {
            let r = reference.value(t);
            let de = if sys.closed.taps.is_empty() {
                r
            } else {
                sys.closed.actuation(&x, r)
            };
            result.push(t, &x, de, sys.drift_input(t)?);
        }
        if k == steps {
            break;
        }
        x = match step_rk4(sys, &input, &x, t, dt) {
            Ok(next) => next,
            Err(Error::Divergence { t, .. }) => {
                result.scenario = Some(scenario.clone());
                return Err(Error::Divergence {
                    t,
                    partial: Box::new(result),
                });
            }
            Err(e) => return Err(e),
        };
    }
    result.scenario = Some(scenario.clone());
    Ok(result)
}
