//! Flight time from vertical ground-reaction force.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{median, Constants, ForceTrace};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlightConfig {
    /// Samples above this fraction of the global maximum count as stance.
    pub stance_fraction: f64,
    /// Candidate flight runs lie below this fraction of stance force.
    pub flight_fraction: f64,
    /// Edges are refined where force crosses unloaded mean + this many SDs.
    pub noise_sd_multiplier: f64,
    /// Fraction of a candidate run dropped from each end before estimating
    /// the unloaded noise.
    pub interior_trim: f64,
    pub min_flight_s: f64,
    pub max_flight_s: f64,
}

impl Default for FlightConfig {
    fn default() -> Self {
        Self {
            stance_fraction: 0.5,
            flight_fraction: 0.05,
            noise_sd_multiplier: 5.0,
            interior_trim: 0.1,
            min_flight_s: 0.1,
            max_flight_s: 1.0,
        }
    }
}

impl FlightConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = |v: f64| v > 0.0 && v < 1.0;
        if !unit(self.stance_fraction) || !unit(self.flight_fraction) {
            return Err(Error::Validation(
                "force fractions must be in (0, 1)".into(),
            ));
        }
        if !(self.noise_sd_multiplier >= 0.0) {
            return Err(Error::Validation(
                "noise_sd_multiplier must be non-negative".into(),
            ));
        }
        if !(0.0..0.5).contains(&self.interior_trim) {
            return Err(Error::Validation(
                "interior_trim must be in [0, 0.5)".into(),
            ));
        }
        if !(self.min_flight_s > 0.0 && self.max_flight_s > self.min_flight_s) {
            return Err(Error::Validation(
                "flight bounds must satisfy 0 < min < max".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlightWindow {
    /// First unloaded sample.
    pub toe_off_index: usize,
    /// First loaded sample after the flight.
    pub landing_index: usize,
    pub flight_time_s: f64,
    pub toe_off_s: f64,
    pub landing_s: f64,
}

impl FlightWindow {
    pub fn midpoint_s(&self) -> f64 {
        0.5 * (self.toe_off_s + self.landing_s)
    }
}

/// Every plausible flight phase in `trace`, in time order.
pub fn detect_flight_windows(trace: &ForceTrace, cfg: &FlightConfig) -> Result<Vec<FlightWindow>> {
    let series = trace.force();
    let f = series.samples();
    let peak = series.max();
    if !(peak > 0.0) {
        return Err(Error::Signal(
            "no loaded region: force never rises above zero".into(),
        ));
    }
    let loaded: Vec<f64> = f
        .iter()
        .copied()
        .filter(|&v| v > cfg.stance_fraction * peak)
        .collect();
    let stance = median(&loaded);
    let low = cfg.flight_fraction * stance;

    let mut runs = Vec::new();
    let mut i = 0;
    while i < f.len() {
        if f[i] < low {
            let start = i;
            while i < f.len() && f[i] < low {
                i += 1;
            }
            runs.push((start, i));
        } else {
            i += 1;
        }
    }
    if runs.is_empty() {
        return Err(Error::NoFlight);
    }

    let rate = trace.rate_hz();
    let mut windows: Vec<FlightWindow> = Vec::new();
    for (start, end) in runs {
        // a run touching either end of the recording has no observed edge
        if start == 0 || end == f.len() {
            continue;
        }
        let len = end - start;
        let trim = ((len as f64) * cfg.interior_trim).floor() as usize;
        let (a, b) = if len > 2 * trim + 1 {
            (start + trim, end - trim)
        } else {
            (start, end)
        };
        let interior = &f[a..b];
        let mean = interior.iter().sum::<f64>() / interior.len() as f64;
        let sd = if interior.len() > 1 {
            (interior.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (interior.len() - 1) as f64)
                .sqrt()
        } else {
            0.0
        };
        let threshold = mean + cfg.noise_sd_multiplier * sd;

        let mut toe_off = a;
        while toe_off > 0 && f[toe_off - 1] <= threshold {
            toe_off -= 1;
        }
        let mut landing = b;
        while landing < f.len() && f[landing] <= threshold {
            landing += 1;
        }
        if toe_off == 0 || landing == f.len() {
            continue;
        }
        let flight_time_s = (landing - toe_off) as f64 / rate;
        if flight_time_s < cfg.min_flight_s || flight_time_s > cfg.max_flight_s {
            continue;
        }
        if windows.last().is_some_and(|w| w.toe_off_index == toe_off) {
            continue;
        }
        windows.push(FlightWindow {
            toe_off_index: toe_off,
            landing_index: landing,
            flight_time_s,
            toe_off_s: series.time_of(toe_off),
            landing_s: series.time_of(landing),
        });
    }
    if windows.is_empty() {
        return Err(Error::NoFlight);
    }
    Ok(windows)
}

/// Jump height in centimetres for a flight of `t_f` seconds: `100·g·T²/8`.
pub fn height_from_flight_time(t_f: f64, constants: &Constants) -> Result<f64> {
    if !(t_f.is_finite() && t_f > 0.0) {
        return Err(Error::Argument(format!(
            "flight time must be positive, got {t_f}"
        )));
    }
    Ok(100.0 * constants.g * t_f * t_f / 8.0)
}
