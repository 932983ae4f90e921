use crate::error::{Error, Result};
use crate::model::TimeSeries;

use super::DenoiseConfig;

/// Marks samples whose deviation from their neighbours exceeds `threshold`
/// standard deviations.
///
/// Each sample is compared with the other `window - 1` samples of a centered
/// window (shifted inward at the series ends so it always holds `window`
/// samples). Neighbour mean and sample SD exclude the sample under test.
pub fn zscore_flags(samples: &[f64], window: usize, threshold: f64) -> Vec<bool> {
    let n = samples.len();
    if n < window || window < 3 {
        return vec![false; n];
    }
    let half = window / 2;
    let m = (window - 1) as f64;
    (0..n)
        .map(|i| {
            let start = i.saturating_sub(half).min(n - window);
            let neighbours = (start..start + window)
                .filter(|&j| j != i)
                .map(|j| samples[j]);
            let mean = neighbours.clone().sum::<f64>() / m;
            let var = neighbours.map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0);
            let dev = (samples[i] - mean).abs();
            // absolute floor so exactly-flat neighbourhoods do not flag rounding noise
            let floor = 1e-9 * (mean.abs() + 1.0);
            dev > threshold * var.sqrt() + floor
        })
        .collect()
}

/// Replaces flagged samples by linear interpolation between the nearest
/// unflagged neighbours; runs touching an end take the nearest unflagged value.
fn interpolate_flagged(samples: &mut [f64], flags: &[bool]) {
    let n = samples.len();
    let mut i = 0;
    while i < n {
        if !flags[i] {
            i += 1;
            continue;
        }
        let run_start = i;
        while i < n && flags[i] {
            i += 1;
        }
        let left = run_start.checked_sub(1);
        let right = (i < n).then_some(i);
        for k in run_start..i {
            samples[k] = match (left, right) {
                (Some(l), Some(r)) => {
                    let t = (k - l) as f64 / (r - l) as f64;
                    samples[l] + t * (samples[r] - samples[l])
                }
                (Some(l), None) => samples[l],
                (None, Some(r)) => samples[r],
                (None, None) => samples[k],
            };
        }
    }
}

/// Rolling z-score spike removal.
///
/// Detection and replacement repeat until a pass flags nothing, so the
/// output is a fixed point: despiking it again changes nothing.
pub fn zscore_despike(series: &TimeSeries, cfg: &DenoiseConfig) -> Result<TimeSeries> {
    let w = cfg.zscore_window;
    if series.len() < w {
        return Err(Error::Length {
            needed: w,
            got: series.len(),
        });
    }
    let mut out = series.samples().to_vec();
    for _ in 0..out.len() {
        let flags = zscore_flags(&out, w, cfg.zscore_threshold);
        if !flags.iter().any(|&f| f) || flags.iter().all(|&f| f) {
            break;
        }
        interpolate_flagged(&mut out, &flags);
    }
    series.with_samples(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Unit;
    use proptest::prelude::*;

    fn cfg(window: usize) -> DenoiseConfig {
        DenoiseConfig {
            zscore_window: window,
            ..Default::default()
        }
    }

    fn series(v: Vec<f64>) -> TimeSeries {
        TimeSeries::new(v, 30.0, Unit::Pixels).unwrap()
    }

    /// Straightforward rolling statistics, written independently of the
    /// implementation above: full neighbour list, then mean and n-1 SD.
    #[allow(clippy::needless_range_loop, clippy::implicit_saturating_sub)]
    fn brute_force_max_z(v: &[f64], window: usize) -> f64 {
        let n = v.len();
        let half = window / 2;
        let mut worst: f64 = 0.0;
        for i in 0..n {
            let mut start = if i >= half { i - half } else { 0 };
            if start + window > n {
                start = n - window;
            }
            let mut nb = Vec::new();
            for j in start..start + window {
                if j != i {
                    nb.push(v[j]);
                }
            }
            let mean: f64 = nb.iter().sum::<f64>() / nb.len() as f64;
            let sd = (nb.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>()
                / (nb.len() - 1) as f64)
                .sqrt();
            if sd > 0.0 {
                worst = worst.max((v[i] - mean).abs() / sd);
            }
        }
        worst
    }

    #[test]
    fn isolated_spike_is_removed() {
        let s = series(vec![0.0, 0.0, 0.0, 50.0, 0.0, 0.0, 0.0]);
        let out = zscore_despike(&s, &cfg(5)).unwrap();
        assert_eq!(out.samples(), &[0.0; 7]);
    }

    #[test]
    fn ramp_is_untouched() {
        let v: Vec<f64> = (0..=20).map(f64::from).collect();
        assert!(brute_force_max_z(&v, 5) < 3.0);
        assert!(brute_force_max_z(&v, 11) < 3.0);
        for w in [5, 11] {
            let out = zscore_despike(&series(v.clone()), &cfg(w)).unwrap();
            assert_eq!(out.samples(), v.as_slice());
        }
    }

    #[test]
    fn constant_is_untouched() {
        let out = zscore_despike(&series(vec![7.25; 30]), &cfg(11)).unwrap();
        assert_eq!(out.samples(), &[7.25; 30]);
    }

    #[test]
    fn short_series_is_a_length_error() {
        assert!(matches!(
            zscore_despike(&series(vec![1.0; 4]), &cfg(5)),
            Err(Error::Length { needed: 5, got: 4 })
        ));
    }

    #[test]
    fn edge_spike_takes_neighbour_value() {
        let mut v = vec![1.0; 12];
        v[0] = 90.0;
        let out = zscore_despike(&series(v), &cfg(5)).unwrap();
        assert_eq!(out.samples(), &[1.0; 12]);
    }

    proptest! {
        #[test]
        fn despike_is_idempotent(
            base in prop::collection::vec(-5.0f64..5.0, 20..120),
            spikes in prop::collection::vec((0usize..120, -200.0f64..200.0), 0..6),
        ) {
            let mut v = base;
            for (i, a) in spikes {
                let n = v.len();
                v[i % n] += a;
            }
            let once = zscore_despike(&series(v), &cfg(11)).unwrap();
            let twice = zscore_despike(&once, &cfg(11)).unwrap();
            prop_assert_eq!(once.samples(), twice.samples());
        }
    }
}
