use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::model::TimeSeries;

/// Fourier resampling to `target_len` samples over the same duration.
///
/// The spectrum is zero-padded (upsampling) or truncated (downsampling); an
/// even-length Nyquist bin is split or folded so that band-limited input
/// survives a round trip. The DC bin is carried over unchanged, so the mean
/// is preserved.
pub fn fft_resample(segment: &TimeSeries, target_len: usize) -> Result<TimeSeries> {
    if target_len < 2 {
        return Err(Error::Argument(format!(
            "target length must be >= 2, got {target_len}"
        )));
    }
    let n = segment.len();
    let rate = segment.rate_hz() * target_len as f64 / n as f64;
    if n == target_len {
        return Ok(segment.clone());
    }

    let mut planner = FftPlanner::<f64>::new();
    let mut spectrum: Vec<Complex64> = segment
        .samples()
        .iter()
        .map(|&v| Complex64::new(v, 0.0))
        .collect();
    planner.plan_fft_forward(n).process(&mut spectrum);

    let kept = n.min(target_len);
    let mut out = vec![Complex64::new(0.0, 0.0); target_len];
    let positive = kept / 2 + 1;
    out[..positive].copy_from_slice(&spectrum[..positive]);
    // negative frequencies: the top (kept - positive) bins
    let negative = kept - positive;
    for k in 1..=negative {
        out[target_len - k] = spectrum[n - k];
    }
    if kept.is_multiple_of(2) {
        let nyq = kept / 2;
        if target_len < n {
            // fold the discarded mirror bin into the new Nyquist bin
            out[nyq] += spectrum[n - nyq];
        } else {
            let half = out[nyq] * 0.5;
            out[nyq] = half;
            out[target_len - nyq] = half;
        }
    }

    planner.plan_fft_inverse(target_len).process(&mut out);
    let scale = 1.0 / n as f64;
    let samples = out.iter().map(|c| c.re * scale).collect();
    TimeSeries::with_start(samples, rate, segment.unit(), segment.start_s())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Unit;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn series(v: Vec<f64>) -> TimeSeries {
        TimeSeries::new(v, 30.0, Unit::Pixels).unwrap()
    }

    #[test]
    fn constant_stays_constant() {
        let out = fft_resample(&series(vec![3.25; 30]), 100).unwrap();
        assert_eq!(out.len(), 100);
        assert!(out.samples().iter().all(|v| (v - 3.25).abs() < 1e-12));
        assert!((out.rate_hz() - 100.0).abs() < 1e-12);
    }

    #[test]
    fn sinusoid_keeps_cycles_and_amplitude() {
        let x: Vec<f64> = (0..30)
            .map(|i| (2.0 * PI * 2.0 * i as f64 / 30.0).sin())
            .collect();
        let out = fft_resample(&series(x), 100).unwrap();
        for (i, v) in out.samples().iter().enumerate() {
            let expected = (2.0 * PI * 2.0 * i as f64 / 100.0).sin();
            assert!((v - expected).abs() < 1e-9, "sample {i}: {v} vs {expected}");
        }
    }

    #[test]
    fn round_trip_on_band_limited_input() {
        let x: Vec<f64> = (0..30)
            .map(|i| {
                let t = i as f64 / 30.0;
                1.5 + (2.0 * PI * 3.0 * t).cos() - 0.4 * (2.0 * PI * 7.0 * t).sin()
            })
            .collect();
        let up = fft_resample(&series(x.clone()), 100).unwrap();
        let back = fft_resample(&up, 30).unwrap();
        for (a, b) in back.samples().iter().zip(&x) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn odd_lengths_and_nyquist_content() {
        // alternating sequence is pure Nyquist at even length
        let x: Vec<f64> = (0..8)
            .map(|i| if i % 2 == 0 { 1.0 } else { -1.0 })
            .collect();
        let up = fft_resample(&series(x.clone()), 16).unwrap();
        let back = fft_resample(&up, 8).unwrap();
        for (a, b) in back.samples().iter().zip(&x) {
            assert!((a - b).abs() < 1e-12);
        }
        let odd = fft_resample(&series(vec![1.0, 2.0, 0.5, 4.0, 3.0]), 11).unwrap();
        assert_eq!(odd.len(), 11);
        assert!((odd.samples()[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_tiny_targets() {
        assert!(fft_resample(&series(vec![1.0, 2.0]), 1).is_err());
    }

    proptest! {
        #[test]
        fn mean_is_preserved(x in prop::collection::vec(-50.0f64..50.0, 2..80), m in 2usize..200) {
            let s = series(x);
            let out = fft_resample(&s, m).unwrap();
            let scale = s.samples().iter().fold(1.0f64, |a, v| a.max(v.abs()));
            prop_assert!((out.mean() - s.mean()).abs() <= 1e-9 * scale);
        }
    }
}
