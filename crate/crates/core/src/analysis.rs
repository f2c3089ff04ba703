//! Time-response figures of merit on sampled traces.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Pointing budget in degrees (both N-S and E-W).
pub const POINTING_BUDGET_DEG: f64 = 0.047;
/// Default settling band as a fraction of the peak absolute deviation.
pub const DEFAULT_BAND_FRACTION: f64 = 0.05;

fn check_series(t: &[f64], y: &[f64]) -> Result<()> {
    if y.is_empty() {
        return Err(Error::Input("empty series".into()));
    }
    if t.len() != y.len() {
        return Err(Error::Input(format!(
            "time grid has {} samples, series has {}",
            t.len(),
            y.len()
        )));
    }
    Ok(())
}

/// Earliest sample time after which `|y| <= band` holds to the end of the
/// trace; `None` when the last sample is still outside the band.
pub fn settling_time(t: &[f64], y: &[f64], band: f64) -> Result<Option<f64>> {
    check_series(t, y)?;
    if !(band > 0.0) {
        return Err(Error::InvalidParameter {
            name: "band",
            reason: format!("must be positive, got {band}"),
        });
    }
    match y.iter().rposition(|v| v.abs() > band) {
        None => Ok(Some(t[0])),
        Some(k) if k + 1 < y.len() => Ok(Some(t[k + 1])),
        Some(_) => Ok(None),
    }
}

pub fn peak_abs(y: &[f64]) -> f64 {
    y.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Exact `(min, max)` of the samples with `t_a <= t <= t_b`.
pub fn envelope(t: &[f64], y: &[f64], window: (f64, f64)) -> Result<(f64, f64)> {
    check_series(t, y)?;
    let (ta, tb) = window;
    let mut found = None::<(f64, f64)>;
    for (tk, yk) in t.iter().zip(y) {
        if *tk >= ta && *tk <= tb {
            found = Some(match found {
                None => (*yk, *yk),
                Some((lo, hi)) => (lo.min(*yk), hi.max(*yk)),
            });
        }
    }
    found.ok_or_else(|| Error::Input(format!("no samples in window [{ta}, {tb}]")))
}

/// Twice the mean spacing between zero crossings of the mean-removed
/// signal; needs at least four crossings.
pub fn dominant_period(t: &[f64], y: &[f64]) -> Option<f64> {
    if y.len() < 2 || t.len() != y.len() {
        return None;
    }
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let mut crossings = Vec::new();
    for k in 1..y.len() {
        let (a, b) = (y[k - 1] - mean, y[k] - mean);
        if (a < 0.0 && b >= 0.0) || (a >= 0.0 && b < 0.0) {
            let frac = if b != a { a / (a - b) } else { 0.0 };
            crossings.push(t[k - 1] + frac * (t[k] - t[k - 1]));
        }
    }
    if crossings.len() < 4 {
        return None;
    }
    let span = crossings[crossings.len() - 1] - crossings[0];
    Some(2.0 * span / (crossings.len() - 1) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BudgetVerdict {
    pub limit_deg: f64,
    pub pass: bool,
    pub margin_deg: f64,
}

pub fn pointing_check(y_deg: &[f64], budget_deg: f64) -> Result<BudgetVerdict> {
    if !(budget_deg > 0.0) {
        return Err(Error::InvalidParameter {
            name: "budget",
            reason: format!("must be positive, got {budget_deg}"),
        });
    }
    let worst = peak_abs(y_deg);
    Ok(BudgetVerdict {
        limit_deg: budget_deg,
        pass: worst <= budget_deg,
        margin_deg: budget_deg - worst,
    })
}

/// How the settling band is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Band {
    /// Fraction of the peak absolute deviation.
    FractionOfPeak(f64),
    /// Absolute threshold in the series' units.
    Absolute(f64),
}

impl Default for Band {
    fn default() -> Self {
        Band::FractionOfPeak(DEFAULT_BAND_FRACTION)
    }
}

/// Analysis options for one column.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalysisOptions {
    #[serde(default)]
    pub band: Band,
    /// Envelope window; the whole trace when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<(f64, f64)>,
    #[serde(default = "default_budget")]
    pub budget_deg: f64,
}

fn default_budget() -> f64 {
    POINTING_BUDGET_DEG
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        Self {
            band: Band::default(),
            window: None,
            budget_deg: POINTING_BUDGET_DEG,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResponseMetrics {
    pub settling_time_s: Option<f64>,
    pub peak_deg: f64,
    pub envelope_deg: (f64, f64),
    pub dominant_period_s: Option<f64>,
    pub budget: BudgetVerdict,
}

/// All metrics for one angle trace in degrees.
pub fn response_metrics(t: &[f64], y_deg: &[f64], opts: &AnalysisOptions) -> Result<ResponseMetrics> {
    check_series(t, y_deg)?;
    let peak = peak_abs(y_deg);
    let band = match opts.band {
        Band::FractionOfPeak(f) => f * peak,
        Band::Absolute(b) => b,
    };
    // A flat-zero trace is settled from the start.
    let settling = if band > 0.0 {
        settling_time(t, y_deg, band)?
    } else if peak == 0.0 {
        Some(t[0])
    } else {
        return Err(Error::InvalidParameter {
            name: "band",
            reason: format!("must be positive, got {band}"),
        });
    };
    let window = opts.window.unwrap_or((t[0], t[t.len() - 1]));
    Ok(ResponseMetrics {
        settling_time_s: settling,
        peak_deg: peak,
        envelope_deg: envelope(t, y_deg, window)?,
        dominant_period_s: dominant_period(t, y_deg),
        budget: pointing_check(y_deg, opts.budget_deg)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn grid(n: usize, dt: f64) -> Vec<f64> {
        (0..n).map(|k| k as f64 * dt).collect()
    }

    #[test]
    fn zero_series_settles_immediately() {
        let t = grid(100, 0.1);
        assert_eq!(settling_time(&t, &vec![0.0; 100], 1e-3).unwrap(), Some(0.0));
    }

    #[test]
    fn exponential_settling() {
        let dt = 0.01;
        let tau = 2.0;
        let t = grid(3000, dt);
        let y: Vec<f64> = t.iter().map(|t| (-t / tau).exp()).collect();
        let ts = settling_time(&t, &y, 0.05).unwrap().unwrap();
        assert!((ts - tau * 20f64.ln()).abs() <= dt, "{ts}");
    }

    #[test]
    fn unsettled_is_none() {
        let t = grid(10, 1.0);
        let y: Vec<f64> = t.iter().map(|t| t * 1.0).collect();
        assert_eq!(settling_time(&t, &y, 5.0).unwrap(), None);
    }

    #[test]
    fn empty_series_is_input_error() {
        assert!(matches!(settling_time(&[], &[], 1.0), Err(Error::Input(_))));
        assert!(matches!(envelope(&[], &[], (0.0, 1.0)), Err(Error::Input(_))));
    }

    #[test]
    fn envelope_cases() {
        let t = grid(1001, 0.01);
        assert_eq!(envelope(&t, &vec![2.5; 1001], (0.0, 10.0)).unwrap(), (2.5, 2.5));
        let y: Vec<f64> = t.iter().map(|t| (2.0 * PI * t).sin()).collect();
        let (lo, hi) = envelope(&t, &y, (0.0, 10.0)).unwrap();
        assert!((lo + 1.0).abs() < 1e-3 && (hi - 1.0).abs() < 1e-3);
        assert!(envelope(&t, &y, (20.0, 30.0)).is_err());
    }

    #[test]
    fn period_of_sine() {
        let dt = 0.5;
        let t = grid((10.0 * 7225.67 / dt) as usize, dt);
        let y: Vec<f64> = t.iter().map(|t| (2.0 * PI * t / 7225.67).sin()).collect();
        let p = dominant_period(&t, &y).unwrap();
        assert!((p - 7225.67).abs() <= 2.0 * dt, "{p}");
    }

    #[test]
    fn ramp_has_no_period() {
        let t = grid(100, 1.0);
        assert_eq!(dominant_period(&t, &t), None);
    }

    #[test]
    fn pointing_examples() {
        let v = pointing_check(&[0.0; 10], POINTING_BUDGET_DEG).unwrap();
        assert!(v.pass);
        assert_eq!(v.margin_deg, 0.047);
        let v = pointing_check(&[0.01, -0.05], POINTING_BUDGET_DEG).unwrap();
        assert!(!v.pass);
        assert_relative_eq!(v.margin_deg, -0.003, epsilon = 1e-15);
    }

    #[test]
    fn metrics_json_shape() {
        let t = grid(100, 0.1);
        let m = response_metrics(&t, &vec![0.0; 100], &AnalysisOptions::default()).unwrap();
        let v = serde_json::to_value(m).unwrap();
        for key in ["settling_time_s", "peak_deg", "envelope_deg", "dominant_period_s", "budget"] {
            assert!(v.get(key).is_some(), "{key}");
        }
        assert_eq!(v["envelope_deg"], serde_json::json!([0.0, 0.0]));
        assert_eq!(v["budget"]["limit_deg"], 0.047);
        assert_eq!(v["settling_time_s"], 0.0);
    }
}
