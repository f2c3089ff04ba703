//! Stability-axes plant of the dual-spin satellite.
//!
//! State order is `[p, q, r, phi_s, theta_s, psi_s]` (three body rates in
//! rad/s followed by three attitude angles in rad). Input order is
//! `[delta_e, delta_n]`: de-spin motor armature voltage deviation (V) and the
//! orbital drift rate (rad/s).
//!
//! Rows 1-3 carry the rigid-body coupling, rows 4-6 the kinematics:
//!
//! ```text
//!     | 0    0    A13  A14  0    0   |        | 0    0 |
//!     | A21  A22  A23  0    A25  0   |        | B21  0 |
//! A = | A31  A32  A33  0    A35  0   |    B = | B31  0 |
//!     | 1    0    0    0    0    dn  |        | 0    0 |
//!     | 0    1    0    0    0    0   |        | 0    1 |
//!     | 0    0    1   -dn   0    0   |        | 0    0 |
//! ```

use std::fmt;

use nalgebra::{SMatrix, SVector};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const STATE_DIM: usize = 6;
pub const INPUT_DIM: usize = 2;

pub type StateMatrix = SMatrix<f64, STATE_DIM, STATE_DIM>;
pub type InputMatrix = SMatrix<f64, STATE_DIM, INPUT_DIM>;
pub type StateVector = SVector<f64, STATE_DIM>;

pub const P: usize = 0;
pub const Q: usize = 1;
pub const R: usize = 2;
pub const PHI_S: usize = 3;
pub const THETA_S: usize = 4;
pub const PSI_S: usize = 5;

/// `(row, col)` of the three gravity-gradient entries A14, A25, A35 (0-indexed).
pub const GRAVITY_ENTRIES: [(usize, usize); 3] = [(0, 3), (1, 4), (2, 4)];

pub const STATE_NAMES: [&str; STATE_DIM] = ["p", "q", "r", "phi_s", "theta_s", "psi_s"];

/// Platform and rotor inertias plus the nominal rotor spin rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InertiaParameters {
    /// Platform moments of inertia (kg m^2).
    pub i_x: f64,
    pub i_y: f64,
    pub i_z: f64,
    /// Platform product of inertia (kg m^2).
    pub i_yz: f64,
    /// Rotor transverse inertia (kg m^2).
    pub i_t: f64,
    /// Rotor spin-axis inertia (kg m^2).
    pub i_s: f64,
    /// Nominal rotor spin rate (rad/s).
    pub omega_r0: f64,
}

impl InertiaParameters {
    pub fn validate(&self) -> Result<()> {
        self.check_finite()?;
        for (name, value) in [
            ("i_x", self.i_x),
            ("i_y", self.i_y),
            ("i_z", self.i_z),
            ("i_t", self.i_t),
            ("i_s", self.i_s),
        ] {
            if value <= 0.0 {
                return Err(Error::InvalidParameter {
                    name,
                    reason: format!("must be positive, got {value}"),
                });
            }
        }
        let delta = compute_delta_i(self)?;
        if delta <= 0.0 {
            return Err(Error::InvalidParameter {
                name: "delta_i",
                reason: format!("i_y*i_z + i_y*i_t - i_yz^2 must be positive, got {delta}"),
            });
        }
        Ok(())
    }

    fn check_finite(&self) -> Result<()> {
        let fields = [
            ("i_x", self.i_x),
            ("i_y", self.i_y),
            ("i_z", self.i_z),
            ("i_yz", self.i_yz),
            ("i_t", self.i_t),
            ("i_s", self.i_s),
            ("omega_r0", self.omega_r0),
        ];
        for (name, value) in fields {
            if !value.is_finite() {
                return Err(Error::InvalidParameter {
                    name,
                    reason: format!("must be finite, got {value}"),
                });
            }
        }
        Ok(())
    }

    /// Rotor angular momentum `I_S * Omega_R0`.
    pub fn spin_momentum(&self) -> f64 {
        self.i_s * self.omega_r0
    }
}

/// De-spin motor constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotorParameters {
    /// Torque constant N (N m / A).
    pub torque_constant: f64,
    /// Back-EMF constant K_V (V s / rad).
    pub back_emf_constant: f64,
    /// Armature resistance R_dc (ohm).
    pub resistance: f64,
    /// Viscous damping c (N m s / rad).
    pub damping: f64,
}

impl MotorParameters {
    pub fn validate(&self) -> Result<()> {
        for (name, value) in [
            ("torque_constant", self.torque_constant),
            ("back_emf_constant", self.back_emf_constant),
            ("resistance", self.resistance),
            ("damping", self.damping),
        ] {
            if !value.is_finite() {
                return Err(Error::InvalidParameter {
                    name,
                    reason: format!("must be finite, got {value}"),
                });
            }
            if value < 0.0 {
                return Err(Error::InvalidParameter {
                    name,
                    reason: format!("must be non-negative, got {value}"),
                });
            }
        }
        if self.resistance == 0.0 {
            return Err(Error::InvalidParameter {
                name: "resistance",
                reason: "must be positive".into(),
            });
        }
        Ok(())
    }

    /// Combined electrical and viscous damping `N K_V / R_dc + c`.
    fn damping_term(&self) -> f64 {
        self.torque_constant * self.back_emf_constant / self.resistance + self.damping
    }
}

/// Gravity-gradient moment coefficients at the reference radius (N m / rad).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct GravityGradientCoefficients {
    pub g_x: f64,
    pub g_y: f64,
    pub g_z: f64,
}

/// `I_Y I_Z + I_Y I_T - I_YZ^2`, the common denominator of rows 2 and 3.
pub fn compute_delta_i(inertia: &InertiaParameters) -> Result<f64> {
    let InertiaParameters {
        i_y, i_z, i_t, i_yz, ..
    } = *inertia;
    for (name, value) in [("i_y", i_y), ("i_z", i_z), ("i_t", i_t), ("i_yz", i_yz)] {
        if !value.is_finite() {
            return Err(Error::InvalidParameter {
                name,
                reason: format!("must be finite, got {value}"),
            });
        }
    }
    Ok(i_y * i_z + i_y * i_t - i_yz * i_yz)
}

/// The 6-state, 2-input linear attitude model.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantMatrices {
    pub a: StateMatrix,
    pub b: InputMatrix,
    /// Whether the gravity-gradient entries A14, A25, A35 are active.
    pub gg_enabled: bool,
    /// Drift rate embedded in the kinematic rows (A46 = dn, A64 = -dn).
    pub delta_n0: f64,
}

impl PlantMatrices {
    pub fn zero() -> Self {
        Self {
            a: StateMatrix::zeros(),
            b: InputMatrix::zeros(),
            gg_enabled: false,
            delta_n0: 0.0,
        }
    }

    /// The three gravity-gradient entries `[A14, A25, A35]`.
    pub fn gravity_entries(&self) -> [f64; 3] {
        GRAVITY_ENTRIES.map(|(r, c)| self.a[(r, c)])
    }

    /// Copy of the plant with the gravity-gradient entries forced to zero.
    pub fn without_gravity_gradient(&self) -> Self {
        let mut out = self.clone();
        for (r, c) in GRAVITY_ENTRIES {
            out.a[(r, c)] = 0.0;
        }
        out.gg_enabled = false;
        out
    }

    pub fn a_rows(&self) -> Vec<Vec<f64>> {
        (0..STATE_DIM)
            .map(|i| self.a.row(i).iter().copied().collect())
            .collect()
    }

    pub fn b_rows(&self) -> Vec<Vec<f64>> {
        (0..STATE_DIM)
            .map(|i| self.b.row(i).iter().copied().collect())
            .collect()
    }
}

/// Assemble the plant from physical parameters.
///
/// With `gg_enabled == false` the three gravity-gradient entries are zeroed
/// regardless of `gg`.
pub fn build_plant(
    inertia: &InertiaParameters,
    motor: &MotorParameters,
    gg: &GravityGradientCoefficients,
    gg_enabled: bool,
    delta_n0: f64,
) -> Result<PlantMatrices> {
    inertia.check_finite()?;
    let delta = compute_delta_i(inertia)?;
    let axial = inertia.i_x + inertia.i_t;
    if !(delta > 0.0) {
        return Err(Error::SingularConfiguration(format!(
            "delta_i = {delta} must be positive"
        )));
    }
    if !(axial > 0.0) {
        return Err(Error::SingularConfiguration(format!(
            "i_x + i_t = {axial} must be positive"
        )));
    }
    inertia.validate()?;
    motor.validate()?;
    for (name, value) in [("g_x", gg.g_x), ("g_y", gg.g_y), ("g_z", gg.g_z)] {
        if !value.is_finite() {
            return Err(Error::InvalidParameter {
                name,
                reason: format!("must be finite, got {value}"),
            });
        }
    }
    if !delta_n0.is_finite() {
        return Err(Error::InvalidParameter {
            name: "delta_n0",
            reason: format!("must be finite, got {delta_n0}"),
        });
    }

    let InertiaParameters {
        i_y,
        i_z,
        i_yz,
        i_t,
        i_s,
        ..
    } = *inertia;
    let spin = inertia.spin_momentum();
    let damping = motor.damping_term();
    let drive = motor.torque_constant / motor.resistance;
    let (g_x, g_y, g_z) = if gg_enabled {
        (gg.g_x, gg.g_y, gg.g_z)
    } else {
        (0.0, 0.0, 0.0)
    };

    let mut a = StateMatrix::zeros();
    a[(0, 2)] = -spin / axial;
    a[(0, 3)] = -g_x / axial;

    a[(1, 0)] = -i_yz / delta * spin;
    a[(1, 1)] = (i_z + i_t) / delta * damping * (i_y / i_s + 1.0);
    a[(1, 2)] = (i_z + i_t) / delta * damping * (i_yz / i_s);
    a[(1, 4)] = -(i_z + i_t) / delta * g_y + i_yz / delta * g_z;

    a[(2, 0)] = i_y / delta * spin;
    a[(2, 1)] = -i_yz / delta * damping * (i_y / i_s + 1.0);
    a[(2, 2)] = -(i_yz * i_yz) / delta * damping / i_s;
    a[(2, 4)] = i_yz / delta * g_y - (-i_y / delta) * g_z;

    set_kinematics(&mut a, delta_n0);

    let mut b = InputMatrix::zeros();
    b[(1, 0)] = (i_z + i_t) / delta * drive;
    b[(2, 0)] = -i_yz / delta * drive;
    b[(4, 1)] = 1.0;

    Ok(PlantMatrices {
        a,
        b,
        gg_enabled,
        delta_n0,
    })
}

/// Overwrite rows 4-6 with the stability-axes kinematics for drift rate `dn`.
pub fn set_kinematics(a: &mut StateMatrix, dn: f64) {
    for row in PHI_S..STATE_DIM {
        for col in 0..STATE_DIM {
            a[(row, col)] = 0.0;
        }
    }
    a[(PHI_S, P)] = 1.0;
    a[(PHI_S, PSI_S)] = dn;
    a[(THETA_S, Q)] = 1.0;
    a[(PSI_S, R)] = 1.0;
    a[(PSI_S, PHI_S)] = -dn;
}

/// Literal matrices as they appear in a plant config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LiteralPlant {
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    pub b: Vec<Vec<f64>>,
    /// Accept a kinematic row 6 that does not match `[0, 0, 1, -dn, 0, 0]`
    /// (keeps a hand-entered matrix bit for bit).
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub accept_literal_row6: bool,
}

/// Physical parameter set as it appears in a plant config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhysicalPlant {
    pub inertia: InertiaParameters,
    pub motor: MotorParameters,
    #[serde(default)]
    pub gravity_gradient: GravityGradientCoefficients,
    #[serde(default)]
    pub gg_enabled: bool,
    #[serde(default)]
    pub delta_n0: f64,
}

/// Plant config: `{"literal": {...}}`, `{"physical": {...}}` or `{"preset": "name"}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlantConfig {
    Literal(LiteralPlant),
    Physical(PhysicalPlant),
    Preset(String),
}

impl PlantConfig {
    pub fn resolve(&self) -> Result<PlantMatrices> {
        match self {
            PlantConfig::Literal(lit) => load_plant_literal(lit),
            PlantConfig::Physical(phys) => build_plant(
                &phys.inertia,
                &phys.motor,
                &phys.gravity_gradient,
                phys.gg_enabled,
                phys.delta_n0,
            ),
            PlantConfig::Preset(name) => crate::presets::plant_config(name)?.resolve(),
        }
    }
}

/// Load literal `A` (6x6) and `B` (6x2) arrays, bit-for-bit.
///
/// Entries that the model forces to zero must be zero, and the kinematic
/// drift entries must be antisymmetric. Missing unit couplings are tolerated
/// (a degenerate plant is still a plant) but show up in
/// [`validate_structure`].
pub fn load_plant_literal(config: &LiteralPlant) -> Result<PlantMatrices> {
    let a = matrix_from_rows::<STATE_DIM, STATE_DIM>(&config.a, "A")?;
    let b = matrix_from_rows::<STATE_DIM, INPUT_DIM>(&config.b, "B")?;
    let gg_enabled = GRAVITY_ENTRIES.iter().any(|&(r, c)| a[(r, c)] != 0.0);
    let plant = PlantMatrices {
        a,
        b,
        gg_enabled,
        delta_n0: a[(PHI_S, PSI_S)],
    };
    let fatal: Vec<Diagnostic> = validate_structure(&plant)
        .into_iter()
        .filter(|d| d.severity == Severity::Violation)
        .filter(|d| !(config.accept_literal_row6 && d.location == Location::ARow(PSI_S)))
        .collect();
    if !fatal.is_empty() {
        return Err(Error::Structure(fatal));
    }
    Ok(plant)
}

fn matrix_from_rows<const NR: usize, const NC: usize>(
    rows: &[Vec<f64>],
    name: &str,
) -> Result<SMatrix<f64, NR, NC>> {
    if rows.len() != NR {
        return Err(Error::Shape(format!(
            "{name} must have {NR} rows, got {}",
            rows.len()
        )));
    }
    let mut m = SMatrix::<f64, NR, NC>::zeros();
    for (i, row) in rows.iter().enumerate() {
        if row.len() != NC {
            return Err(Error::Shape(format!(
                "{name} row {} must have {NC} columns, got {}",
                i + 1,
                row.len()
            )));
        }
        for (j, &v) in row.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::InvalidParameter {
                    name: "matrix entry",
                    reason: format!("{name}[{}][{}] = {v} is not finite", i + 1, j + 1),
                });
            }
            m[(i, j)] = v;
        }
    }
    Ok(m)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Location {
    /// Row of A, 0-indexed.
    ARow(usize),
    /// Row of B, 0-indexed.
    BRow(usize),
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Location::ARow(r) => write!(f, "A row {}", r + 1),
            Location::BRow(r) => write!(f, "B row {}", r + 1),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum Severity {
    /// A coupling the model requires (a kinematic 1, the drift input) is absent.
    Degenerate,
    /// An entry the model forces to zero is nonzero, or the drift entries
    /// are not antisymmetric.
    Violation,
}

/// One structural mismatch, grouped per matrix row.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostic {
    pub location: Location,
    pub severity: Severity,
    /// 1-indexed columns that differ from the expected pattern.
    pub columns: Vec<usize>,
    pub expected: String,
    pub found: Vec<f64>,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} columns {:?}: expected {}, found {:?}",
            self.location, self.columns, self.expected, self.found
        )
    }
}

#[derive(Clone, Copy)]
enum Slot {
    Zero,
    One,
    Free,
    Drift,
    NegDrift,
}

/// Check a plant against the structural pattern of the model.
///
/// Returns one diagnostic per offending row; empty means the plant is
/// structurally well formed.
pub fn validate_structure(plant: &PlantMatrices) -> Vec<Diagnostic> {
    use Slot::*;
    let a_pattern: [[Slot; STATE_DIM]; STATE_DIM] = [
        [Zero, Zero, Free, Free, Zero, Zero],
        [Free, Free, Free, Zero, Free, Zero],
        [Free, Free, Free, Zero, Free, Zero],
        [One, Zero, Zero, Zero, Zero, Drift],
        [Zero, One, Zero, Zero, Zero, Zero],
        [Zero, Zero, One, NegDrift, Zero, Zero],
    ];
    let a_text = [
        "[0, 0, A13, A14, 0, 0]",
        "[A21, A22, A23, 0, A25, 0]",
        "[A31, A32, A33, 0, A35, 0]",
        "[1, 0, 0, 0, 0, dn]",
        "[0, 1, 0, 0, 0, 0]",
        "[0, 0, 1, -dn, 0, 0]",
    ];
    let b_pattern: [[Slot; INPUT_DIM]; STATE_DIM] = [
        [Zero, Zero],
        [Free, Zero],
        [Free, Zero],
        [Zero, Zero],
        [Zero, One],
        [Zero, Zero],
    ];
    let b_text = [
        "[0, 0]",
        "[B21, 0]",
        "[B31, 0]",
        "[0, 0]",
        "[0, 1] (drift-rate input channel)",
        "[0, 0]",
    ];

    let dn = plant.a[(PHI_S, PSI_S)];
    let mut out = Vec::new();
    for row in 0..STATE_DIM {
        let found: Vec<f64> = plant.a.row(row).iter().copied().collect();
        if let Some(d) = check_row(&found, &a_pattern[row], dn, Location::ARow(row), a_text[row]) {
            out.push(d);
        }
    }
    for row in 0..STATE_DIM {
        let found: Vec<f64> = plant.b.row(row).iter().copied().collect();
        if let Some(d) = check_row(&found, &b_pattern[row], dn, Location::BRow(row), b_text[row]) {
            out.push(d);
        }
    }
    out
}

fn check_row(
    found: &[f64],
    pattern: &[Slot],
    dn: f64,
    location: Location,
    expected: &str,
) -> Option<Diagnostic> {
    let mut columns = Vec::new();
    let mut severity = Severity::Degenerate;
    for (col, (&v, slot)) in found.iter().zip(pattern).enumerate() {
        let bad = match slot {
            Slot::Free => None,
            Slot::Zero => (v != 0.0).then_some(Severity::Violation),
            Slot::One => (v != 1.0).then_some(if v == 0.0 {
                Severity::Degenerate
            } else {
                Severity::Violation
            }),
            Slot::Drift => None,
            Slot::NegDrift => (v != -dn).then_some(Severity::Violation),
        };
        if let Some(s) = bad {
            columns.push(col + 1);
            severity = severity.max(s);
        }
    }
    (!columns.is_empty()).then(|| Diagnostic {
        location,
        severity,
        columns,
        expected: expected.to_string(),
        found: found.to_vec(),
    })
}
