//! Built-in plants, loops and simulation scenarios.

use std::fmt;

use crate::control::{FeedbackLoop, LoopConfig, RationalCompensator, SensedOutput};
use crate::dynamics::{LiteralPlant, PlantConfig};
use crate::orbit::OrbitConfig;
use crate::simulator::{InitialAttitude, InputSignal, Scenario, TimeVaryingFlags};
use crate::{Error, Result};

pub const LONGITUDINAL: &str = "paper-longitudinal";
pub const LONGITUDINAL_VERBATIM: &str = "paper-longitudinal-verbatim";
pub const LATERAL: &str = "paper-lateral";
pub const DIRECTIONAL: &str = "paper-directional";

/// Orbital period of the reference orbit (s).
pub const ORBIT_PERIOD: f64 = 7225.67;
/// Ten orbital periods (s).
pub const LONG_HORIZON: f64 = 72256.7;
pub const SHORT_HORIZON: f64 = 500.0;

/// Doublet used by every preset scenario: 0.1 mV, flipping at 2 s, off at 3 s.
pub fn reference_doublet() -> InputSignal {
    InputSignal::doublet(1e-4, 1.0, 2.0, 3.0)
}

fn b_rows() -> Vec<Vec<f64>> {
    vec![
        vec![0.0, 0.0],
        vec![-5.1218e-4, 0.0],
        vec![1.7735e-5, 0.0],
        vec![0.0, 0.0],
        vec![0.0, 1.0],
        vec![0.0, 0.0],
    ]
}

fn dynamic_rows(gravity: [f64; 3]) -> Vec<Vec<f64>> {
    vec![
        vec![0.0, 0.0, 3.7113, gravity[0], 0.0, 0.0],
        vec![0.49773, -9.7138e-4, -3.4402e-5, 0.0, gravity[1], 0.0],
        vec![-4.0326, 3.3636e-5, -1.1912e-6, 0.0, gravity[2], 0.0],
        vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        vec![0.0, 1.0, 0.0, 0.0, 0.0, 0.0],
    ]
}

/// Longitudinal design plant, no gravity gradient.
///
/// With `verbatim` the last kinematic row is kept as `[0, 0, 0, 1, 0, 0]`;
/// otherwise it is the kinematic row `[0, 0, 1, 0, 0, 0]`.
pub fn longitudinal_plant(verbatim: bool) -> LiteralPlant {
    let mut a = dynamic_rows([0.0; 3]);
    a.push(if verbatim {
        vec![0.0, 0.0, 0.0, 1.0, 0.0, 0.0]
    } else {
        vec![0.0, 0.0, 1.0, 0.0, 0.0, 0.0]
    });
    LiteralPlant {
        a,
        b: b_rows(),
        accept_literal_row6: verbatim,
    }
}

/// Lateral/directional design plant with gravity-gradient columns.
pub fn lateral_plant() -> LiteralPlant {
    let mut a = dynamic_rows([-6.1872e-7, 7.2937e-7, -1.3422e-7]);
    a.push(vec![0.0, 0.0, 1.0, 0.0, 0.0, 0.0]);
    LiteralPlant {
        a,
        b: b_rows(),
        accept_literal_row6: false,
    }
}

pub const PLANT_PRESETS: [&str; 3] = [LONGITUDINAL, LONGITUDINAL_VERBATIM, LATERAL];
pub const LOOP_PRESETS: [&str; 3] = [LONGITUDINAL, LATERAL, DIRECTIONAL];

pub fn plant_config(name: &str) -> Result<PlantConfig> {
    match name {
        LONGITUDINAL => Ok(PlantConfig::Literal(longitudinal_plant(false))),
        LONGITUDINAL_VERBATIM => Ok(PlantConfig::Literal(longitudinal_plant(true))),
        LATERAL | DIRECTIONAL => Ok(PlantConfig::Literal(lateral_plant())),
        _ => Err(Error::UnknownPreset(name.to_string())),
    }
}

pub fn loop_preset(name: &str) -> Result<FeedbackLoop> {
    match name {
        LONGITUDINAL => Ok(FeedbackLoop::new(
            SensedOutput::ThetaS,
            RationalCompensator::new(-29800.0, vec![-0.498], vec![-1.0])?,
        )),
        LATERAL => Ok(FeedbackLoop::new(
            SensedOutput::P,
            RationalCompensator::new(1.5e6, vec![-4.1], vec![-25.9, -2.63])?,
        )),
        DIRECTIONAL => Ok(FeedbackLoop::new(
            SensedOutput::R,
            RationalCompensator::static_gain(300_000.0)?,
        )),
        _ => Err(Error::UnknownPreset(name.to_string())),
    }
}

/// Controller mode of a scenario family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Longitudinal,
    Lateral,
    Directional,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::Longitudinal, Mode::Lateral, Mode::Directional];

    pub fn name(self) -> &'static str {
        match self {
            Mode::Longitudinal => "longitudinal",
            Mode::Lateral => "lateral",
            Mode::Directional => "directional",
        }
    }

    /// Plant angle the mode is judged on.
    pub fn angle_index(self) -> usize {
        match self {
            Mode::Longitudinal => crate::dynamics::THETA_S,
            Mode::Lateral => crate::dynamics::PHI_S,
            Mode::Directional => crate::dynamics::PSI_S,
        }
    }

    fn plant(self) -> PlantConfig {
        match self {
            Mode::Longitudinal => PlantConfig::Preset(LONGITUDINAL.into()),
            _ => PlantConfig::Preset(LATERAL.into()),
        }
    }

    /// Engaged loops, reference loop first. The lateral and directional
    /// modes share the plant and need both the p and r loops to be stable.
    fn loops(self) -> Vec<LoopConfig> {
        let names: &[&str] = match self {
            Mode::Longitudinal => &[LONGITUDINAL],
            Mode::Lateral => &[LATERAL, DIRECTIONAL],
            Mode::Directional => &[DIRECTIONAL, LATERAL],
        };
        names
            .iter()
            .map(|n| LoopConfig::Preset {
                preset: n.to_string(),
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sweep {
    /// `e in {0, 0.1, 0.2}` at `i = 30 deg`.
    Eccentricity,
    /// `i in {0, 30} deg` at `e = 0.2`.
    Inclination,
}

impl Sweep {
    pub fn name(self) -> &'static str {
        match self {
            Sweep::Eccentricity => "e-sweep/i30",
            Sweep::Inclination => "i-sweep/e0.2",
        }
    }

    fn points(self) -> Vec<(f64, f64)> {
        match self {
            Sweep::Eccentricity => vec![(0.0, 30.0), (0.1, 30.0), (0.2, 30.0)],
            Sweep::Inclination => vec![(0.2, 0.0), (0.2, 30.0)],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Horizon {
    Short,
    TenPeriods,
}

impl Horizon {
    pub fn name(self) -> &'static str {
        match self {
            Horizon::Short => "500s",
            Horizon::TenPeriods => "10T",
        }
    }

    fn duration(self) -> f64 {
        match self {
            Horizon::Short => SHORT_HORIZON,
            Horizon::TenPeriods => LONG_HORIZON,
        }
    }

    fn dt(self) -> f64 {
        match self {
            Horizon::Short => 0.01,
            Horizon::TenPeriods => 0.1,
        }
    }

    fn stride(self) -> usize {
        match self {
            Horizon::Short => 1,
            Horizon::TenPeriods => 10,
        }
    }
}

/// A named group of scenarios that differ only in orbit elements.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioPreset {
    pub name: String,
    pub mode: Mode,
    pub figure: Option<u32>,
    pub members: Vec<Scenario>,
}

impl fmt::Display for ScenarioPreset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.name)?;
        if let Some(n) = self.figure {
            write!(f, " (figure {n})")?;
        }
        let labels: Vec<&str> = self
            .members
            .iter()
            .map(|s| s.name.rsplit('/').next().unwrap_or(""))
            .collect();
        write!(f, ": {}", labels.join(", "))
    }
}

fn member(family: &str, mode: Mode, e: f64, i_deg: f64, horizon: Horizon, initial: InitialAttitude) -> Scenario {
    Scenario {
        name: format!("{family}/e{e}-i{i_deg}"),
        plant: mode.plant(),
        loops: mode.loops(),
        reference_loop: 0,
        orbit: OrbitConfig::with_period(ORBIT_PERIOD, e, i_deg),
        r0: None,
        input: reference_doublet(),
        initial,
        duration: horizon.duration(),
        dt: horizon.dt(),
        record_stride: horizon.stride(),
        time_varying: TimeVaryingFlags::default(),
    }
}

fn figure_number(mode: Mode, sweep: Sweep, horizon: Horizon) -> u32 {
    let base = match mode {
        Mode::Longitudinal => 29,
        Mode::Lateral => 34,
        Mode::Directional => 39,
    };
    base + match (sweep, horizon) {
        (Sweep::Eccentricity, Horizon::Short) => 0,
        (Sweep::Eccentricity, Horizon::TenPeriods) => 1,
        (Sweep::Inclination, Horizon::Short) => 2,
        (Sweep::Inclination, Horizon::TenPeriods) => 3,
    }
}

/// Every built-in scenario family.
pub fn preset_scenarios() -> Vec<ScenarioPreset> {
    let mut out = Vec::new();
    for mode in Mode::ALL {
        for sweep in [Sweep::Eccentricity, Sweep::Inclination] {
            for horizon in [Horizon::Short, Horizon::TenPeriods] {
                let name = format!("{}/{}/{}", mode.name(), sweep.name(), horizon.name());
                let members = sweep
                    .points()
                    .into_iter()
                    .map(|(e, i)| member(&name, mode, e, i, horizon, InitialAttitude::default()))
                    .collect();
                out.push(ScenarioPreset {
                    name,
                    mode,
                    figure: Some(figure_number(mode, sweep, horizon)),
                    members,
                });
            }
        }
    }
    let name = "longitudinal/initial-offset/i30/500s".to_string();
    let initial = InitialAttitude {
        theta_s_deg: -1.5,
        ..InitialAttitude::default()
    };
    let members = Sweep::Eccentricity
        .points()
        .into_iter()
        .map(|(e, i)| member(&name, Mode::Longitudinal, e, i, Horizon::Short, initial))
        .collect();
    out.push(ScenarioPreset {
        name,
        mode: Mode::Longitudinal,
        figure: None,
        members,
    });
    out
}

pub fn scenario_preset(name: &str) -> Result<ScenarioPreset> {
    preset_scenarios()
        .into_iter()
        .find(|p| p.name == name)
        .ok_or_else(|| Error::UnknownPreset(name.to_string()))
}

/// Member `index` of family `name`.
pub fn scenario(name: &str, index: usize) -> Result<Scenario> {
    let preset = scenario_preset(name)?;
    let count = preset.members.len();
    preset.members.into_iter().nth(index).ok_or_else(|| {
        Error::Input(format!("{name} has {count} members, index {index} is out of range"))
    })
}

/// Scenario family reproducing figure `n`.
pub fn figure(n: u32) -> Result<ScenarioPreset> {
    preset_scenarios()
        .into_iter()
        .find(|p| p.figure == Some(n))
        .ok_or_else(|| Error::UnknownPreset(format!("figure {n}")))
}

/// Figure numbers that have an alias.
pub fn figure_numbers() -> Vec<u32> {
    preset_scenarios().iter().filter_map(|p| p.figure).collect()
}
