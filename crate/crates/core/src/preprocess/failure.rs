use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::TimeSeries;

use super::despike::zscore_despike;
use super::segment::select_peaks;
use super::{DenoiseConfig, SegmentConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FailureConfig {
    /// Confidence below which a keypoint counts as unreliable.
    pub min_confidence: f64,
    /// Largest tolerated fraction of unreliable frames.
    pub max_low_confidence_frac: f64,
    /// Largest frame-to-frame displacement, as a fraction of image height.
    pub max_speed_frac_of_height: f64,
}

impl Default for FailureConfig {
    fn default() -> Self {
        Self {
            min_confidence: 0.3,
            max_low_confidence_frac: 0.2,
            max_speed_frac_of_height: 0.25,
        }
    }
}

impl FailureConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.min_confidence) {
            return Err(Error::Validation("min_confidence must be in [0, 1]".into()));
        }
        if !(0.0..=1.0).contains(&self.max_low_confidence_frac) {
            return Err(Error::Validation(
                "max_low_confidence_frac must be in [0, 1]".into(),
            ));
        }
        if !(self.max_speed_frac_of_height > 0.0) {
            return Err(Error::Validation(
                "max_speed_frac_of_height must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum FailureReason {
    LowConfidence { fraction: f64 },
    ImplausibleSpeed { frame: usize, px_per_frame: f64 },
    NoPeak,
}

impl std::fmt::Display for FailureReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FailureReason::LowConfidence { fraction } => {
                write!(
                    f,
                    "low-confidence: {:.0}% of frames below threshold",
                    fraction * 100.0
                )
            }
            FailureReason::ImplausibleSpeed {
                frame,
                px_per_frame,
            } => {
                write!(
                    f,
                    "implausible-speed: {px_per_frame:.1} px/frame at frame {frame}"
                )
            }
            FailureReason::NoPeak => f.write_str("no-peak: no jump apex found"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Verdict {
    Valid,
    Invalid(FailureReason),
}

impl Verdict {
    pub fn is_valid(&self) -> bool {
        matches!(self, Verdict::Valid)
    }
}

/// Screens one keypoint track for pose-estimation failures.
///
/// `max_speed_px_per_frame` is usually `max_speed_frac_of_height` times the
/// image height.
pub fn detect_failure(
    vertical_px: &TimeSeries,
    confidence: &TimeSeries,
    cfg: &FailureConfig,
    max_speed_px_per_frame: f64,
    denoise: &DenoiseConfig,
    segment: &SegmentConfig,
) -> Result<Verdict> {
    if vertical_px.len() != confidence.len() {
        return Err(Error::Alignment(vertical_px.len(), confidence.len()));
    }
    let n = confidence.len() as f64;
    let low = confidence
        .samples()
        .iter()
        .filter(|&&c| c < cfg.min_confidence)
        .count() as f64;
    let fraction = low / n;
    if fraction > cfg.max_low_confidence_frac {
        return Ok(Verdict::Invalid(FailureReason::LowConfidence { fraction }));
    }

    let clean = zscore_despike(vertical_px, denoise)?;
    let y = clean.samples();
    if let Some((frame, speed)) = y
        .windows(2)
        .map(|w| (w[1] - w[0]).abs())
        .enumerate()
        .find(|&(_, d)| d > max_speed_px_per_frame)
    {
        return Ok(Verdict::Invalid(FailureReason::ImplausibleSpeed {
            frame: frame + 1,
            px_per_frame: speed,
        }));
    }

    let range = clean.max() - clean.min();
    let peaks = select_peaks(y, segment.min_peak_prominence_frac * range, 1.0);
    if peaks.is_empty() {
        return Ok(Verdict::Invalid(FailureReason::NoPeak));
    }
    Ok(Verdict::Valid)
}
