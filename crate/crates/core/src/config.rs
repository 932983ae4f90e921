//! Pipeline configuration and its `key = value` file form.

use std::fmt::{self, Write as _};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forceplate::FlightConfig;
use crate::kv::KvFile;
use crate::model::Constants;
use crate::preprocess::{DenoiseConfig, FailureConfig, SegmentConfig};

/// Which repetition's scale converts a repetition's pixels to millimetres.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CalibrationMode {
    /// Each repetition calibrates itself; failures borrow the session mean.
    PerRepetition,
    /// Every repetition uses the mean scale of the session's successful fits.
    SessionMean,
    /// One calibrating repetition (1-based) serves the whole session.
    Designated(u32),
}

impl fmt::Display for CalibrationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CalibrationMode::PerRepetition => f.write_str("per_repetition"),
            CalibrationMode::SessionMean => f.write_str("session_mean"),
            CalibrationMode::Designated(r) => write!(f, "designated:{r}"),
        }
    }
}

impl FromStr for CalibrationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "per_repetition" => Ok(CalibrationMode::PerRepetition),
            "session_mean" => Ok(CalibrationMode::SessionMean),
            other => other
                .strip_prefix("designated:")
                .and_then(|r| r.trim().parse().ok())
                .filter(|&r: &u32| r >= 1)
                .map(CalibrationMode::Designated)
                .ok_or_else(|| Error::Format(format!("unknown calibration mode {other:?}"))),
        }
    }
}

/// How repetitions enter the agreement statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pooling {
    /// Every valid repetition is one observation.
    Repetitions,
    /// Each participant contributes the mean of their valid repetitions.
    ParticipantMeans,
}

impl fmt::Display for Pooling {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Pooling::Repetitions => "repetitions",
            Pooling::ParticipantMeans => "participant_means",
        })
    }
}

impl FromStr for Pooling {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "repetitions" => Ok(Pooling::Repetitions),
            "participant_means" => Ok(Pooling::ParticipantMeans),
            other => Err(Error::Format(format!("unknown pooling {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationConfig {
    pub fall_fraction: f64,
    pub mode: CalibrationMode,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        Self {
            fall_fraction: 0.4,
            mode: CalibrationMode::PerRepetition,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Config {
    pub denoise: DenoiseConfig,
    pub segment: SegmentConfig,
    pub failure: FailureConfig,
    pub flight: FlightConfig,
    pub calibration: CalibrationConfig,
    pub constants: Constants,
    pub pooling: Pooling,
    /// Largest apex-time difference at which events from two modalities are
    /// taken to be the same repetition.
    pub pairing_tolerance_s: f64,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            denoise: DenoiseConfig::default(),
            segment: SegmentConfig::default(),
            failure: FailureConfig::default(),
            flight: FlightConfig::default(),
            calibration: CalibrationConfig::default(),
            constants: Constants::default(),
            pooling: Pooling::Repetitions,
            pairing_tolerance_s: 0.25,
        }
    }
}

fn set<T: FromStr>(kv: &mut KvFile, key: &str, slot: &mut T) -> Result<()> {
    if let Some(v) = kv.take_parsed(key)? {
        *slot = v;
    }
    Ok(())
}

impl Config {
    pub fn validate(&self) -> Result<()> {
        self.denoise.validate()?;
        self.segment.validate()?;
        self.failure.validate()?;
        self.flight.validate()?;
        Constants::new(self.constants.g)?;
        if !(self.calibration.fall_fraction > 0.0 && self.calibration.fall_fraction < 1.0) {
            return Err(Error::Validation("fall_fraction must be in (0, 1)".into()));
        }
        if !(self.pairing_tolerance_s > 0.0) {
            return Err(Error::Validation(
                "pairing_tolerance_s must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_str(&text)
    }

    /// Parses a configuration file; absent keys keep their defaults.
    pub fn parse_str(text: &str) -> Result<Self> {
        let mut kv = KvFile::parse(text)?;
        let mut c = Config::default();
        let k = &mut kv;
        set(k, "zscore_window", &mut c.denoise.zscore_window)?;
        set(k, "zscore_threshold", &mut c.denoise.zscore_threshold)?;
        set(k, "savgol_window", &mut c.denoise.savgol_window)?;
        set(k, "savgol_order", &mut c.denoise.savgol_order)?;
        set(k, "measure_window_s", &mut c.denoise.measure_window_s)?;
        set(k, "half_window_s", &mut c.segment.half_window_s)?;
        set(
            k,
            "min_peak_prominence_frac",
            &mut c.segment.min_peak_prominence_frac,
        )?;
        set(
            k,
            "min_peak_separation_s",
            &mut c.segment.min_peak_separation_s,
        )?;
        if let Some(v) = k.take("expected_reps") {
            c.segment.expected_reps =
                match v.as_str() {
                    "none" => None,
                    n => Some(n.parse().map_err(|_| {
                        Error::Format(format!("cannot parse expected_reps = {n:?}"))
                    })?),
                };
        }
        set(k, "min_confidence", &mut c.failure.min_confidence)?;
        set(
            k,
            "max_low_confidence_frac",
            &mut c.failure.max_low_confidence_frac,
        )?;
        set(
            k,
            "max_speed_frac_of_height",
            &mut c.failure.max_speed_frac_of_height,
        )?;
        set(k, "stance_fraction", &mut c.flight.stance_fraction)?;
        set(k, "flight_fraction", &mut c.flight.flight_fraction)?;
        set(k, "noise_sd_multiplier", &mut c.flight.noise_sd_multiplier)?;
        set(k, "interior_trim", &mut c.flight.interior_trim)?;
        set(k, "min_flight_s", &mut c.flight.min_flight_s)?;
        set(k, "max_flight_s", &mut c.flight.max_flight_s)?;
        set(k, "fall_fraction", &mut c.calibration.fall_fraction)?;
        set(k, "calibration_mode", &mut c.calibration.mode)?;
        set(k, "g", &mut c.constants.g)?;
        set(k, "pooling", &mut c.pooling)?;
        set(k, "pairing_tolerance_s", &mut c.pairing_tolerance_s)?;
        kv.finish()?;
        c.validate()?;
        Ok(c)
    }

    /// Every parameter, one per line, in a form [`Config::parse_str`] reads back.
    pub fn to_kv_string(&self) -> String {
        let mut out = String::new();
        let mut line = |k: &str, v: &dyn fmt::Display| {
            let _ = writeln!(out, "{k} = {v}");
        };
        let c = self;
        line("zscore_window", &c.denoise.zscore_window);
        line("zscore_threshold", &c.denoise.zscore_threshold);
        line("savgol_window", &c.denoise.savgol_window);
        line("savgol_order", &c.denoise.savgol_order);
        line("measure_window_s", &c.denoise.measure_window_s);
        line("half_window_s", &c.segment.half_window_s);
        line(
            "min_peak_prominence_frac",
            &c.segment.min_peak_prominence_frac,
        );
        line("min_peak_separation_s", &c.segment.min_peak_separation_s);
        match c.segment.expected_reps {
            Some(n) => line("expected_reps", &n),
            None => line("expected_reps", &"none"),
        }
        line("min_confidence", &c.failure.min_confidence);
        line(
            "max_low_confidence_frac",
            &c.failure.max_low_confidence_frac,
        );
        line(
            "max_speed_frac_of_height",
            &c.failure.max_speed_frac_of_height,
        );
        line("stance_fraction", &c.flight.stance_fraction);
        line("flight_fraction", &c.flight.flight_fraction);
        line("noise_sd_multiplier", &c.flight.noise_sd_multiplier);
        line("interior_trim", &c.flight.interior_trim);
        line("min_flight_s", &c.flight.min_flight_s);
        line("max_flight_s", &c.flight.max_flight_s);
        line("fall_fraction", &c.calibration.fall_fraction);
        line("calibration_mode", &c.calibration.mode);
        line("g", &c.constants.g);
        line("pooling", &c.pooling);
        line("pairing_tolerance_s", &c.pairing_tolerance_s);
        out
    }
}
