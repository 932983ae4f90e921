use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::model::TimeSeries;

use super::DenoiseConfig;

/// Least-squares weights that evaluate a degree-`order` polynomial fitted on
/// sample offsets `-m..=m` (with `window = 2m + 1`) at offset `at`.
pub fn savgol_weights(window: usize, order: usize, at: isize) -> Result<Vec<f64>> {
    if window.is_multiple_of(2) || window <= order {
        return Err(Error::Argument(format!(
            "window {window} must be odd and larger than order {order}"
        )));
    }
    let m = (window / 2) as isize;
    if at.abs() > m {
        return Err(Error::Argument(format!(
            "offset {at} outside window half-width {m}"
        )));
    }
    let cols = order + 1;
    let design = DMatrix::from_fn(window, cols, |r, c| {
        ((r as isize - m) as f64).powi(c as i32)
    });
    let normal = design.transpose() * &design;
    let projector = normal
        .lu()
        .solve(&design.transpose())
        .ok_or_else(|| Error::Argument("singular Savitzky–Golay system".into()))?;
    let basis = DMatrix::from_fn(1, cols, |_, c| (at as f64).powi(c as i32));
    Ok((basis * projector).iter().copied().collect())
}

/// Savitzky–Golay smoothing with `cfg.savgol_window` / `cfg.savgol_order`.
///
/// Samples within half a window of either end take the value of the
/// polynomial fitted to the first (or last) full window, evaluated at their
/// offset, rather than being padded.
pub fn savgol_smooth(series: &TimeSeries, cfg: &DenoiseConfig) -> Result<TimeSeries> {
    let w = cfg.savgol_window;
    let n = series.len();
    if n < w {
        return Err(Error::Length { needed: w, got: n });
    }
    let m = w / 2;
    let table = (0..w)
        .map(|k| savgol_weights(w, cfg.savgol_order, k as isize - m as isize))
        .collect::<Result<Vec<_>>>()?;
    let y = series.samples();
    let dot = |weights: &[f64], start: usize| -> f64 {
        weights
            .iter()
            .zip(&y[start..start + w])
            .map(|(c, v)| c * v)
            .sum()
    };
    let out = (0..n)
        .map(|i| {
            if i < m {
                dot(&table[i], 0)
            } else if i + m >= n {
                dot(&table[i + w - n], n - w)
            } else {
                dot(&table[m], i - m)
            }
        })
        .collect();
    series.with_samples(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Unit;
    use proptest::prelude::*;

    fn cfg(window: usize, order: usize) -> DenoiseConfig {
        DenoiseConfig {
            savgol_window: window,
            savgol_order: order,
            ..Default::default()
        }
    }

    fn series(v: Vec<f64>) -> TimeSeries {
        TimeSeries::new(v, 100.0, Unit::Millimetres).unwrap()
    }

    /// Closed-form quadratic/cubic Savitzky–Golay center weight for
    /// half-width m: 3(3m² + 3m − 1 − 5i²) / ((2m + 3)(2m + 1)(2m − 1)).
    fn closed_form_center(m: f64, i: f64) -> f64 {
        3.0 * (3.0 * m * m + 3.0 * m - 1.0 - 5.0 * i * i)
            / ((2.0 * m + 3.0) * (2.0 * m + 1.0) * (2.0 * m - 1.0))
    }

    /// Direct least-squares fit of a quadratic by Cramer's rule on the 3×3
    /// normal equations, evaluated at 0.
    fn lstsq_quadratic_at_zero(ts: &[f64], ys: &[f64]) -> f64 {
        let s = |p: i32| ts.iter().map(|t| t.powi(p)).sum::<f64>();
        let sy = |p: i32| ts.iter().zip(ys).map(|(t, y)| t.powi(p) * y).sum::<f64>();
        let a = [[s(0), s(1), s(2)], [s(1), s(2), s(3)], [s(2), s(3), s(4)]];
        let b = [sy(0), sy(1), sy(2)];
        let det3 = |m: [[f64; 3]; 3]| {
            m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
                - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
                + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
        };
        let mut a0 = a;
        for r in 0..3 {
            a0[r][0] = b[r];
        }
        det3(a0) / det3(a)
    }

    #[test]
    fn impulse_response_matches_least_squares() {
        let mut v = vec![0.0; 21];
        v[10] = 1.0;
        let out = savgol_smooth(&series(v.clone()), &cfg(21, 2)).unwrap();
        let ts: Vec<f64> = (-10..=10).map(f64::from).collect();
        let oracle = lstsq_quadratic_at_zero(&ts, &v);
        assert!((out.samples()[10] - oracle).abs() < 1e-12);
        assert!((oracle - closed_form_center(10.0, 0.0)).abs() < 1e-12);
        assert!((oracle - 987.0 / 9177.0).abs() < 1e-12);
    }

    #[test]
    fn center_weights_match_closed_form() {
        for m in [2usize, 5, 10] {
            let w = savgol_weights(2 * m + 1, 2, 0).unwrap();
            for (k, c) in w.iter().enumerate() {
                let i = k as f64 - m as f64;
                assert!((c - closed_form_center(m as f64, i)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn constant_is_preserved() {
        let out = savgol_smooth(&series(vec![4.5; 40]), &cfg(21, 2)).unwrap();
        assert!(out.samples().iter().all(|v| (v - 4.5).abs() < 1e-12));
    }

    #[test]
    fn quadratic_is_reproduced_including_edges() {
        let v: Vec<f64> = (0..50)
            .map(|i| {
                let t = i as f64 * 0.1;
                t * t
            })
            .collect();
        let out = savgol_smooth(&series(v.clone()), &cfg(21, 2)).unwrap();
        for (a, b) in out.samples().iter().zip(&v) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn short_series_is_a_length_error() {
        assert!(matches!(
            savgol_smooth(&series(vec![0.0; 20]), &cfg(21, 2)),
            Err(Error::Length {
                needed: 21,
                got: 20
            })
        ));
    }

    proptest! {
        #[test]
        fn filter_is_linear(
            xs in prop::collection::vec(-100.0f64..100.0, 30),
            ys in prop::collection::vec(-100.0f64..100.0, 30),
            a in -3.0f64..3.0,
            b in -3.0f64..3.0,
        ) {
            let c = cfg(21, 2);
            let combo: Vec<f64> = xs.iter().zip(&ys).map(|(x, y)| a * x + b * y).collect();
            let lhs = savgol_smooth(&series(combo), &c).unwrap();
            let fx = savgol_smooth(&series(xs), &c).unwrap();
            let fy = savgol_smooth(&series(ys), &c).unwrap();
            let scale = fx.samples().iter().chain(fy.samples()).fold(1.0f64, |m, v| m.max(v.abs()))
                * (a.abs() + b.abs()).max(1.0);
            for i in 0..30 {
                let rhs = a * fx.samples()[i] + b * fy.samples()[i];
                prop_assert!((lhs.samples()[i] - rhs).abs() <= 1e-12 * scale);
            }
        }
    }
}
