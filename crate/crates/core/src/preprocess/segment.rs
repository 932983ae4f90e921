use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{JumpSegment, Modality, TimeSeries};

use super::SegmentConfig;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Peak {
    pub index: usize,
    pub value: f64,
    pub prominence: f64,
}

/// Local maxima with their topographic prominence.
///
/// A flat-topped maximum is reported at the middle of its plateau. The end
/// samples are never peaks. Prominence is the peak height above the higher
/// of the two lowest points reached before meeting higher ground (or the
/// series end) on each side.
pub fn find_peaks(y: &[f64]) -> Vec<Peak> {
    let n = y.len();
    let mut peaks = Vec::new();
    let mut i = 1;
    while i + 1 < n {
        if y[i] > y[i - 1] {
            let mut j = i;
            while j + 1 < n && y[j + 1] == y[i] {
                j += 1;
            }
            if j + 1 < n && y[j + 1] < y[i] {
                let index = (i + j) / 2;
                peaks.push(Peak {
                    index,
                    value: y[index],
                    prominence: prominence(y, index),
                });
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }
    peaks
}

fn prominence(y: &[f64], p: usize) -> f64 {
    let h = y[p];
    let mut left_min = h;
    for &v in y[..p].iter().rev() {
        if v > h {
            break;
        }
        left_min = left_min.min(v);
    }
    let mut right_min = h;
    for &v in &y[p + 1..] {
        if v > h {
            break;
        }
        right_min = right_min.min(v);
    }
    h - left_min.max(right_min)
}

/// Peaks passing the prominence floor, thinned so that no two are closer
/// than `min_separation` samples (higher peaks win).
pub(crate) fn select_peaks(y: &[f64], min_prominence: f64, min_separation: f64) -> Vec<Peak> {
    let mut candidates: Vec<Peak> = find_peaks(y)
        .into_iter()
        .filter(|p| p.prominence > 0.0 && p.prominence >= min_prominence)
        .collect();
    candidates.sort_by(|a, b| b.value.total_cmp(&a.value).then(a.index.cmp(&b.index)));
    let mut kept: Vec<Peak> = Vec::new();
    for c in candidates {
        if kept
            .iter()
            .all(|k| (k.index.abs_diff(c.index) as f64) >= min_separation)
        {
            kept.push(c);
        }
    }
    kept.sort_by_key(|p| p.index);
    kept
}

/// Repetition windows found in one vertical series.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Segmentation {
    pub segments: Vec<JumpSegment>,
    /// Set when `expected_reps` was configured and a different count was found.
    pub count_mismatch: Option<(usize, usize)>,
}

/// Cuts one window around each dominant peak of `series`.
///
/// Windows span `half_window_s` either side of the peak, clipped to the
/// series and stopped short of any sample higher than the peak, so every
/// segment's apex is its maximum.
pub fn segment_repetitions(
    series: &TimeSeries,
    cfg: &SegmentConfig,
    source: Modality,
) -> Result<Segmentation> {
    let y = series.samples();
    let range = series.max() - series.min();
    let rate = series.rate_hz();
    let peaks = select_peaks(
        y,
        cfg.min_peak_prominence_frac * range,
        cfg.min_peak_separation_s * rate,
    );
    if peaks.is_empty() {
        return Err(Error::Segmentation(
            "no peak meets the prominence threshold".into(),
        ));
    }
    let half = (cfg.half_window_s * rate).round() as usize;
    let mut segments = Vec::with_capacity(peaks.len());
    for p in &peaks {
        let h = y[p.index];
        let mut start = p.index.saturating_sub(half);
        if let Some(higher) = (start..p.index).rev().find(|&j| y[j] > h) {
            start = higher + 1;
        }
        let mut end = (p.index + half + 1).min(y.len());
        if let Some(higher) = (p.index + 1..end).find(|&j| y[j] > h) {
            end = higher;
        }
        let seg = series.slice(start, end)?;
        segments.push(JumpSegment::new(seg, p.index - start, start, source, None)?);
    }
    let count_mismatch = cfg
        .expected_reps
        .filter(|&e| e != segments.len())
        .map(|e| (e, segments.len()));
    Ok(Segmentation {
        segments,
        count_mismatch,
    })
}
