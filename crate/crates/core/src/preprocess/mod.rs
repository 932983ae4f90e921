//! Denoising, failure screening, repetition segmentation and resampling.

mod despike;
mod failure;
mod resample;
mod savgol;
mod segment;

pub use despike::{zscore_despike, zscore_flags};
pub use failure::{detect_failure, FailureConfig, FailureReason, Verdict};
pub use resample::fft_resample;
pub use savgol::{savgol_smooth, savgol_weights};
pub use segment::{find_peaks, segment_repetitions, Peak, Segmentation};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DenoiseConfig {
    /// Centered window, in samples, for the rolling z-score.
    pub zscore_window: usize,
    pub zscore_threshold: f64,
    /// Savitzky–Golay window in samples; this is the smoothing applied
    /// before segmentation.
    pub savgol_window: usize,
    pub savgol_order: usize,
    /// Savitzky–Golay window, in seconds, for the series that heights are
    /// measured on. Converted to the nearest odd sample count at each
    /// series' rate.
    pub measure_window_s: f64,
}

impl Default for DenoiseConfig {
    fn default() -> Self {
        Self {
            zscore_window: 11,
            zscore_threshold: 3.0,
            savgol_window: 21,
            savgol_order: 2,
            measure_window_s: 0.21,
        }
    }
}

impl DenoiseConfig {
    pub fn validate(&self) -> Result<()> {
        if self.zscore_window < 3 || self.zscore_window.is_multiple_of(2) {
            return Err(Error::Validation(format!(
                "zscore_window must be odd and >= 3, got {}",
                self.zscore_window
            )));
        }
        if !(self.zscore_threshold.is_finite() && self.zscore_threshold > 0.0) {
            return Err(Error::Validation(
                "zscore_threshold must be positive".into(),
            ));
        }
        if self.savgol_window.is_multiple_of(2) || self.savgol_window <= self.savgol_order {
            return Err(Error::Validation(format!(
                "savgol_window must be odd and larger than savgol_order, got {} / {}",
                self.savgol_window, self.savgol_order
            )));
        }
        if !(self.measure_window_s.is_finite() && self.measure_window_s > 0.0) {
            return Err(Error::Validation(
                "measure_window_s must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Copy whose `savgol_window` is the measurement window at `rate_hz`.
    pub fn for_measurement(&self, rate_hz: f64) -> Self {
        let samples = self.measure_window_s * rate_hz;
        let half = ((samples - 1.0) / 2.0).round().max(0.0) as usize;
        let min_half = self.savgol_order.div_ceil(2).max(1);
        Self {
            savgol_window: 2 * half.max(min_half) + 1,
            ..*self
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentConfig {
    pub half_window_s: f64,
    /// Minimum peak prominence as a fraction of the series' global range.
    pub min_peak_prominence_frac: f64,
    pub min_peak_separation_s: f64,
    pub expected_reps: Option<usize>,
}

impl Default for SegmentConfig {
    fn default() -> Self {
        Self {
            half_window_s: 1.0,
            min_peak_prominence_frac: 0.5,
            min_peak_separation_s: 1.0,
            expected_reps: Some(3),
        }
    }
}

impl SegmentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.half_window_s.is_finite() && self.half_window_s > 0.0) {
            return Err(Error::Validation("half_window_s must be positive".into()));
        }
        if !(self.min_peak_prominence_frac > 0.0 && self.min_peak_prominence_frac <= 1.0) {
            return Err(Error::Validation(
                "min_peak_prominence_frac must be in (0, 1]".into(),
            ));
        }
        if !(self.min_peak_separation_s.is_finite() && self.min_peak_separation_s > 0.0) {
            return Err(Error::Validation(
                "min_peak_separation_s must be positive".into(),
            ));
        }
        if self.expected_reps == Some(0) {
            return Err(Error::Validation("expected_reps must be positive".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn measurement_window_scales_with_rate() {
        let cfg = DenoiseConfig::default();
        assert_eq!(cfg.for_measurement(100.0).savgol_window, 21);
        assert_eq!(cfg.for_measurement(30.0).savgol_window, 7);
        assert_eq!(cfg.for_measurement(1.0).savgol_window, 3);
    }

    #[test]
    fn config_validation() {
        DenoiseConfig::default().validate().unwrap();
        SegmentConfig::default().validate().unwrap();
        let even = DenoiseConfig {
            zscore_window: 4,
            ..Default::default()
        };
        assert!(even.validate().is_err());
        let order = DenoiseConfig {
            savgol_window: 3,
            savgol_order: 3,
            ..Default::default()
        };
        assert!(order.validate().is_err());
    }
}
