//! Two-body elliptical orbit and the forcing quantities it feeds into the
//! attitude model: drift rate `delta_n`, radius `R` and the inertial Z
//! component of the position `R_Zp`.

use std::f64::consts::{PI, TAU};
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Earth's gravitational parameter (m^3/s^2).
pub const MU_EARTH: f64 = 3.986004418e14;

const NEWTON_MAX_ITER: usize = 50;
const KEPLER_TOL: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrbitElements {
    /// Semi-major axis (m).
    pub a: f64,
    /// Eccentricity.
    pub e: f64,
    /// Inclination (rad).
    pub i: f64,
    /// Argument of perigee (rad).
    pub argp: f64,
    /// Gravitational parameter (m^3/s^2).
    pub mu: f64,
    /// `t = 0` at perigee when set, at apogee otherwise.
    pub t0_at_perigee: bool,
}

impl OrbitElements {
    pub fn new(a: f64, e: f64, i: f64, argp: f64, mu: f64) -> Result<Self> {
        let el = Self {
            a,
            e,
            i,
            argp,
            mu,
            t0_at_perigee: true,
        };
        el.validate()?;
        Ok(el)
    }

    /// Circular equatorial orbit with the given period.
    pub fn circular_with_period(period: f64, mu: f64) -> Result<Self> {
        Self::new(semi_major_axis_for_period(period, mu), 0.0, 0.0, 0.0, mu)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.a.is_finite() && self.a > 0.0) {
            return Err(Error::InvalidParameter {
                name: "a",
                reason: format!("semi-major axis must be positive, got {}", self.a),
            });
        }
        if !(0.0..1.0).contains(&self.e) {
            return Err(Error::UnsupportedOrbit(format!(
                "eccentricity {} outside [0, 1)",
                self.e
            )));
        }
        if !(0.0..=PI).contains(&self.i) {
            return Err(Error::InvalidParameter {
                name: "i",
                reason: format!("inclination {} rad outside [0, pi]", self.i),
            });
        }
        if !self.argp.is_finite() {
            return Err(Error::InvalidParameter {
                name: "argp",
                reason: "must be finite".into(),
            });
        }
        if !(self.mu.is_finite() && self.mu > 0.0) {
            return Err(Error::InvalidParameter {
                name: "mu",
                reason: format!("must be positive, got {}", self.mu),
            });
        }
        Ok(())
    }

    /// Specific angular momentum `sqrt(mu a (1 - e^2))`.
    pub fn angular_momentum(&self) -> f64 {
        (self.mu * self.a * (1.0 - self.e * self.e)).sqrt()
    }

    /// Reference orbital rate `n0 = -V0 / R0` of the circular orbit with
    /// radius `a`; equal to `-2 pi / T`, and bit-identical to `n` when `e = 0`.
    pub fn reference_rate(&self) -> f64 {
        let radius = self.a;
        let v_theta = (self.mu * self.a).sqrt() / radius;
        -v_theta / radius
    }

    fn mean_anomaly_at_epoch(&self) -> f64 {
        if self.t0_at_perigee {
            0.0
        } else {
            PI
        }
    }
}

/// Instantaneous orbit sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OrbitState {
    pub t: f64,
    /// Eccentric anomaly (rad).
    pub ecc_anomaly: f64,
    /// True anomaly (rad).
    pub true_anomaly: f64,
    /// Radius (m).
    pub radius: f64,
    /// Transverse velocity (m/s).
    pub v_theta: f64,
    /// Orbital angular velocity `-V_theta / R` (rad/s).
    pub n: f64,
    /// Drift rate `n - n0` (rad/s).
    pub delta_n: f64,
    /// Z component of the inertial position (m).
    pub r_zp: f64,
}

/// Solve `E - e sin E = M` for the eccentric anomaly.
///
/// Newton iteration seeded at `E = M`, falling back to bisection on
/// `[M - e, M + e]` if Newton has not converged after 50 iterations.
pub fn solve_kepler(mean_anomaly: f64, e: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&e) {
        return Err(Error::UnsupportedOrbit(format!(
            "eccentricity {e} outside [0, 1)"
        )));
    }
    if !mean_anomaly.is_finite() {
        return Err(Error::InvalidParameter {
            name: "mean_anomaly",
            reason: format!("must be finite, got {mean_anomaly}"),
        });
    }
    let m = mean_anomaly;
    if e == 0.0 {
        return Ok(m);
    }
    let residual = |ecc: f64| ecc - e * ecc.sin() - m;
    let tol = KEPLER_TOL * m.abs().max(1.0);

    let mut ecc = m;
    for _ in 0..NEWTON_MAX_ITER {
        let f = residual(ecc);
        if f.abs() <= tol {
            return Ok(ecc);
        }
        let step = f / (1.0 - e * ecc.cos());
        ecc -= step;
        if step.abs() <= f64::EPSILON * ecc.abs().max(1.0) {
            return Ok(ecc);
        }
    }

    // The residual is monotone and |E - M| <= e, so this bracket always holds a root.
    let (mut lo, mut hi) = (m - e, m + e);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let f = residual(mid);
        if f.abs() <= tol || hi - lo <= f64::EPSILON * mid.abs().max(1.0) {
            return Ok(mid);
        }
        if f > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Err(Error::Numeric(format!(
        "Kepler equation did not converge for M = {m}, e = {e}"
    )))
}

/// `2 pi sqrt(a^3 / mu)`.
pub fn orbital_period(elements: &OrbitElements) -> f64 {
    TAU * (elements.a.powi(3) / elements.mu).sqrt()
}

/// Inverse of [`orbital_period`].
pub fn semi_major_axis_for_period(period: f64, mu: f64) -> f64 {
    (mu * (period / TAU).powi(2)).cbrt()
}

/// Sample the orbit at time `t` (s).
pub fn propagate(elements: &OrbitElements, t: f64) -> Result<OrbitState> {
    if !t.is_finite() {
        return Err(Error::InvalidParameter {
            name: "t",
            reason: format!("must be finite, got {t}"),
        });
    }
    let OrbitElements {
        a, e, i, argp, ..
    } = *elements;
    let period = orbital_period(elements);
    let mean_anomaly = elements.mean_anomaly_at_epoch() + TAU * t / period;
    let ecc_anomaly = solve_kepler(mean_anomaly, e)?;
    let half = 0.5 * ecc_anomaly;
    let true_anomaly = 2.0 * ((1.0 + e).sqrt() * half.sin()).atan2((1.0 - e).sqrt() * half.cos());
    let radius = a * (1.0 - e * ecc_anomaly.cos());
    let v_theta = elements.angular_momentum() / radius;
    let n = -v_theta / radius;
    Ok(OrbitState {
        t,
        ecc_anomaly,
        true_anomaly,
        radius,
        v_theta,
        n,
        delta_n: n - elements.reference_rate(),
        r_zp: radius * i.sin() * (argp + true_anomaly).sin(),
    })
}

/// Inverse-cube multiplier `(R0 / R)^3` applied to the gravity-gradient entries.
pub fn gg_scale(state: &OrbitState, r0: f64) -> f64 {
    (r0 / state.radius).powi(3)
}

/// Orbit block of a config file. Exactly one of `a` and `period_s` is given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrbitConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub period_s: Option<f64>,
    #[serde(default)]
    pub e: f64,
    #[serde(default)]
    pub i_deg: f64,
    #[serde(default)]
    pub argp_deg: f64,
    #[serde(default = "default_mu")]
    pub mu: f64,
}

fn default_mu() -> f64 {
    MU_EARTH
}

impl OrbitConfig {
    pub fn with_period(period_s: f64, e: f64, i_deg: f64) -> Self {
        Self {
            a: None,
            period_s: Some(period_s),
            e,
            i_deg,
            argp_deg: 0.0,
            mu: MU_EARTH,
        }
    }

    pub fn elements(&self) -> Result<OrbitElements> {
        let a = match (self.a, self.period_s) {
            (Some(a), None) => a,
            (None, Some(t)) => {
                if !(t.is_finite() && t > 0.0) {
                    return Err(Error::InvalidParameter {
                        name: "period_s",
                        reason: format!("must be positive, got {t}"),
                    });
                }
                semi_major_axis_for_period(t, self.mu)
            }
            _ => {
                return Err(Error::Input(
                    "orbit config needs exactly one of `a` or `period_s`".into(),
                ))
            }
        };
        OrbitElements::new(
            a,
            self.e,
            self.i_deg.to_radians(),
            self.argp_deg.to_radians(),
            self.mu,
        )
    }
}

/// Write `t,R,V_theta,n,delta_n,R_Zp` rows for `t = 0, dt, ..., duration`.
pub fn write_schedule_csv<W: Write>(
    out: &mut W,
    elements: &OrbitElements,
    duration: f64,
    dt: f64,
) -> Result<()> {
    if !(dt > 0.0 && duration >= 0.0) {
        return Err(Error::Input("schedule needs dt > 0 and duration >= 0".into()));
    }
    writeln!(out, "t,R,V_theta,n,delta_n,R_Zp")?;
    let steps = (duration / dt).round() as usize;
    for k in 0..=steps {
        let s = propagate(elements, k as f64 * dt)?;
        writeln!(
            out,
            "{:?},{:?},{:?},{:?},{:?},{:?}",
            s.t, s.radius, s.v_theta, s.n, s.delta_n, s.r_zp
        )?;
    }
    Ok(())
}
