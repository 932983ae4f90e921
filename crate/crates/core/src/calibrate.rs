//! Pixel-to-millimetre rescaling of keypoint displacement.
//!
//! Two routes are provided:
//!
//! * [`reverse_minmax`] maps a pixel series onto the range of a simultaneously
//!   recorded marker series. It needs the optical reference, so it is an
//!   **evaluation-only** tool.
//! * [`fit_ptm_scale`] uses gravity as the ruler: after the apex of a jump the
//!   body is in free fall, so the pixel drop over a known time fixes the
//!   millimetres-per-pixel ratio. [`apply_ptm`] then rescales any series.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Constants, RepetitionId, TimeSeries, Unit};

/// Millimetres per pixel derived from a free-fall interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleCalibration {
    pub r_mm_per_px: f64,
    /// Time from the apex to the end of the calibration interval, seconds.
    pub free_fall_duration_s: f64,
    /// Pixel drop over `free_fall_duration_s`.
    pub drop_px: f64,
    pub source_segment: Option<RepetitionId>,
}

impl ScaleCalibration {
    pub fn new(r_mm_per_px: f64, free_fall_duration_s: f64, drop_px: f64) -> Result<Self> {
        if !(r_mm_per_px.is_finite() && r_mm_per_px > 0.0) {
            return Err(Error::Calibration(format!(
                "scale must be positive, got {r_mm_per_px}"
            )));
        }
        if !(free_fall_duration_s.is_finite() && free_fall_duration_s > 0.0) {
            return Err(Error::Calibration(format!(
                "free-fall duration must be positive, got {free_fall_duration_s}"
            )));
        }
        Ok(Self {
            r_mm_per_px,
            free_fall_duration_s,
            drop_px,
            source_segment: None,
        })
    }

    pub fn with_source(mut self, id: RepetitionId) -> Self {
        self.source_segment = Some(id);
        self
    }
}

/// Millimetres per pixel for a body that falls `drop_px` pixels in
/// `duration_s` seconds from rest: `500·T²·g / drop`.
///
/// The factor 500 is ½ × 1000 mm/m, so `g` must be in m/s².
pub fn ptm_ratio(duration_s: f64, drop_px: f64, constants: &Constants) -> Result<f64> {
    if !(duration_s > 0.0) {
        return Err(Error::Calibration(format!(
            "non-positive fall time {duration_s}"
        )));
    }
    if !(drop_px.abs() > 0.0) {
        return Err(Error::Calibration("zero pixel drop".into()));
    }
    Ok(500.0 * duration_s * duration_s * constants.g / drop_px.abs())
}

pub fn minmax_normalize(series: &TimeSeries) -> Result<TimeSeries> {
    let lo = series.min();
    let hi = series.max();
    let span = hi - lo;
    if !(span > 0.0) {
        return Err(Error::DegenerateRange);
    }
    series.with_unit(
        series.samples().iter().map(|v| (v - lo) / span).collect(),
        Unit::Normalized,
    )
}

/// Rescales `mmc_px` onto the range of `omc_mm`.
///
/// Evaluation only: the output borrows its scale from the optical reference.
/// Inputs are expected to cover the same repetition window; the output keeps
/// the timing of `mmc_px`.
pub fn reverse_minmax(mmc_px: &TimeSeries, omc_mm: &TimeSeries) -> Result<TimeSeries> {
    mmc_px.require_unit(Unit::Pixels)?;
    omc_mm.require_unit(Unit::Millimetres)?;
    let unit = minmax_normalize(mmc_px)?;
    let lo = omc_mm.min();
    let span = omc_mm.max() - lo;
    if !(span > 0.0) {
        return Err(Error::DegenerateRange);
    }
    mmc_px.with_unit(
        unit.samples().iter().map(|q| q * span + lo).collect(),
        Unit::Millimetres,
    )
}

/// Gravity-referenced scale from an up-positive hip series in pixels.
///
/// The descent after `apex_index` defines the calibration interval: it ends
/// at the first sample whose drop from the apex reaches `fall_fraction` of
/// the segment's total vertical range. The rising samples up to the same
/// number of frames before the apex, and still within that drop, are airborne
/// too, so a parabola is fitted to the whole span by least squares. Its
/// vertex is the instant where velocity and displacement are zero. `T` runs
/// from the vertex to the end sample and the drop is read off the fitted
/// curve at that time, so the two stay consistent and `T` keeps sub-frame
/// precision.
pub fn fit_ptm_scale(
    hip_px_up: &TimeSeries,
    apex_index: usize,
    constants: &Constants,
    fall_fraction: f64,
) -> Result<ScaleCalibration> {
    hip_px_up.require_unit(Unit::Pixels)?;
    if !(fall_fraction > 0.0 && fall_fraction < 1.0) {
        return Err(Error::Argument(format!(
            "fall fraction must be in (0, 1), got {fall_fraction}"
        )));
    }
    let y = hip_px_up.samples();
    if apex_index >= y.len() {
        return Err(Error::Argument(format!(
            "apex {apex_index} outside series of length {}",
            y.len()
        )));
    }
    if y[apex_index] < hip_px_up.max() {
        return Err(Error::Argument(format!(
            "sample {apex_index} is not the series maximum"
        )));
    }
    let amplitude = y[apex_index] - hip_px_up.min();
    if !(amplitude > 0.0) {
        return Err(Error::DegenerateRange);
    }
    let target = fall_fraction * amplitude;
    let end = (apex_index + 1..y.len())
        .find(|&k| y[apex_index] - y[k] >= target)
        .ok_or_else(|| {
            Error::Calibration("segment ends before the hip falls the calibration distance".into())
        })?;
    // rising side: the mirror of the descent, never reaching back further
    let mut first = apex_index;
    while first > 0
        && apex_index - first < end - apex_index
        && y[apex_index] - y[first - 1] < target
    {
        first -= 1;
    }
    let rate = hip_px_up.rate_hz();

    let ts: Vec<f64> = (first..=end)
        .map(|i| (i as f64 - apex_index as f64) / rate)
        .collect();
    if ts.len() < 3 {
        return Err(Error::Calibration(
            "too few samples in the free-fall window".into(),
        ));
    }
    let design = DMatrix::from_fn(ts.len(), 3, |r, c| ts[r].powi(c as i32));
    let values = DVector::from_iterator(ts.len(), (first..=end).map(|i| y[i]));
    let coef = design
        .svd(true, true)
        .solve(&values, 1e-12)
        .map_err(|e| Error::Calibration(e.to_string()))?;
    let (b, a) = (coef[1], coef[2]);
    if !(a < 0.0) {
        return Err(Error::Calibration("free-fall window is not concave".into()));
    }
    let vertex = -b / (2.0 * a);
    let duration = ts[ts.len() - 1] - vertex;
    if !(vertex.abs() < duration && duration > 0.0) {
        return Err(Error::Calibration(
            "fitted apex lies outside the free-fall window".into(),
        ));
    }
    let drop = -a * duration * duration;
    let r = ptm_ratio(duration, drop, constants)?;
    ScaleCalibration::new(r, duration, drop)
}

/// Multiplies every pixel sample by the calibration's mm-per-pixel ratio.
pub fn apply_ptm(series_px: &TimeSeries, cal: &ScaleCalibration) -> Result<TimeSeries> {
    series_px.require_unit(Unit::Pixels)?;
    series_px.with_unit(
        series_px
            .samples()
            .iter()
            .map(|v| cal.r_mm_per_px * v)
            .collect(),
        Unit::Millimetres,
    )
}
