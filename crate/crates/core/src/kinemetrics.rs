//! Jump heights from displacement, and agreement statistics between methods.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{median, JumpSegment, Method, RepetitionId, TimeSeries, Unit};

/// Fraction of a segment's leading samples taken as standing baseline.
pub const BASELINE_FRACTION: f64 = 0.1;

/// Two-sided 95% normal quantile used for limits of agreement.
pub const LOA_Z: f64 = 1.96;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JumpMeasurement {
    pub repetition: RepetitionId,
    pub method: Method,
    pub height_cm: f64,
}

impl JumpMeasurement {
    pub fn new(repetition: RepetitionId, method: Method, height_cm: f64) -> Result<Self> {
        if !(height_cm.is_finite() && height_cm >= 0.0) {
            return Err(Error::NonPhysical(format!("height {height_cm} cm")));
        }
        Ok(Self {
            repetition,
            method,
            height_cm,
        })
    }
}

/// Peak rise above the standing baseline, in centimetres, of an up-positive
/// millimetre series. The baseline is the median of the first tenth of the
/// samples (at least one).
pub fn jump_height_cm(series: &TimeSeries) -> Result<f64> {
    series.require_unit(Unit::Millimetres)?;
    let y = series.samples();
    let lead = ((y.len() as f64 * BASELINE_FRACTION).ceil() as usize).clamp(1, y.len());
    let baseline = median(&y[..lead]);
    let rise = series.max() - baseline;
    if !(rise > 0.0) {
        return Err(Error::NonPhysical(format!(
            "peak {} mm does not rise above baseline {baseline} mm",
            series.max()
        )));
    }
    Ok(rise / 10.0)
}

pub fn jump_height_from_displacement(segment: &JumpSegment) -> Result<f64> {
    jump_height_cm(segment.displacement())
}

/// ICC(2,1) and the two-way ANOVA it is built from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementResult {
    /// Reported as computed; negative estimates are not clamped.
    pub icc: f64,
    pub n: usize,
    pub k: usize,
    pub msr: f64,
    pub msc: f64,
    pub mse: f64,
    pub method_pair: Option<(Method, Method)>,
}

impl AgreementResult {
    pub fn with_pair(mut self, a: Method, b: Method) -> Self {
        self.method_pair = Some((a, b));
        self
    }

    pub fn is_negative(&self) -> bool {
        self.icc < 0.0
    }
}

/// Two-way random effects, absolute agreement, single measurement
/// (McGraw and Wong's ICC(A,1)). `rows` holds one vector per target with one
/// rating per rater.
pub fn icc_2_1(rows: &[Vec<f64>]) -> Result<AgreementResult> {
    let n = rows.len();
    let k = rows.first().map_or(0, Vec::len);
    if n < 2 || k < 2 {
        return Err(Error::Argument(format!(
            "need at least 2 targets and 2 raters, got {n} x {k}"
        )));
    }
    if let Some(r) = rows.iter().position(|r| r.len() != k) {
        return Err(Error::Input(format!(
            "row {r} has {} ratings, expected {k}",
            rows[r].len()
        )));
    }
    if rows.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Input("missing or non-finite rating".into()));
    }
    let (nf, kf) = (n as f64, k as f64);
    let grand = rows.iter().flatten().sum::<f64>() / (nf * kf);
    let row_means: Vec<f64> = rows.iter().map(|r| r.iter().sum::<f64>() / kf).collect();
    let col_means: Vec<f64> = (0..k)
        .map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / nf)
        .collect();

    let ssr = kf * row_means.iter().map(|m| (m - grand).powi(2)).sum::<f64>();
    let ssc = nf * col_means.iter().map(|m| (m - grand).powi(2)).sum::<f64>();
    let sse: f64 = rows
        .iter()
        .zip(&row_means)
        .flat_map(|(r, rm)| {
            r.iter()
                .zip(&col_means)
                .map(move |(v, cm)| (v - rm - cm + grand).powi(2))
        })
        .sum();
    let msr = ssr / (nf - 1.0);
    let msc = ssc / (kf - 1.0);
    let mse = sse / ((nf - 1.0) * (kf - 1.0));
    let denom = msr + (kf - 1.0) * mse + kf / nf * (msc - mse);
    if !(denom > 0.0) {
        return Err(Error::DegenerateRange);
    }
    let icc = (msr - mse) / denom;
    Ok(AgreementResult {
        icc,
        n,
        k,
        msr,
        msc,
        mse,
        method_pair: None,
    })
}

/// ICC(2,1) of two paired columns.
pub fn icc_pair(a: &[f64], b: &[f64]) -> Result<AgreementResult> {
    if a.len() != b.len() {
        return Err(Error::Pairing(a.len(), b.len()));
    }
    let rows: Vec<Vec<f64>> = a.iter().zip(b).map(|(&x, &y)| vec![x, y]).collect();
    icc_2_1(&rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlandAltmanResult {
    pub bias_cm: f64,
    pub sd_cm: f64,
    pub loa_low_cm: f64,
    pub loa_high_cm: f64,
    pub n: usize,
}

/// Bias and 95% limits of agreement of `a − b`, with the sample (n − 1)
/// standard deviation of the differences.
pub fn bland_altman(a: &[f64], b: &[f64]) -> Result<BlandAltmanResult> {
    if a.len() != b.len() {
        return Err(Error::Pairing(a.len(), b.len()));
    }
    let n = a.len();
    if n < 2 {
        return Err(Error::Argument(format!("need at least 2 pairs, got {n}")));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::Input("non-finite height".into()));
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    // bias as a difference of means, so it equals mean(a) − mean(b) exactly
    let bias = a.iter().sum::<f64>() / n as f64 - b.iter().sum::<f64>() / n as f64;
    let d_mean = diffs.iter().sum::<f64>() / n as f64;
    let sd = (diffs.iter().map(|d| (d - d_mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
    Ok(BlandAltmanResult {
        bias_cm: bias,
        sd_cm: sd,
        loa_low_cm: bias - LOA_Z * sd,
        loa_high_cm: bias + LOA_Z * sd,
        n,
    })
}

/// One point of a Bland–Altman plot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaPoint {
    pub mean_cm: f64,
    pub diff_cm: f64,
}

pub fn bland_altman_points(a: &[f64], b: &[f64]) -> Result<Vec<BaPoint>> {
    if a.len() != b.len() {
        return Err(Error::Pairing(a.len(), b.len()));
    }
    Ok(a.iter()
        .zip(b)
        .map(|(x, y)| BaPoint {
            mean_cm: 0.5 * (x + y),
            diff_cm: x - y,
        })
        .collect())
}

/// ICC(2,1) across repetitions of one method, repetitions acting as raters.
///
/// Targets missing any repetition, or with a different repetition count from
/// the first complete target, are left out.
pub fn test_retest_reliability(per_target: &[Vec<Option<f64>>]) -> Result<AgreementResult> {
    let complete: Vec<Vec<f64>> = per_target
        .iter()
        .filter_map(|reps| reps.iter().copied().collect::<Option<Vec<f64>>>())
        .filter(|r| !r.is_empty())
        .collect();
    let k = complete.first().map_or(0, Vec::len);
    let rows: Vec<Vec<f64>> = complete.into_iter().filter(|r| r.len() == k).collect();
    if rows.len() < 2 {
        return Err(Error::Input(format!(
            "need at least 2 targets with all repetitions, got {}",
            rows.len()
        )));
    }
    icc_2_1(&rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Modality;
    use proptest::prelude::*;

    /// Two-way ANOVA by explicit cell loops, with the ICC(A,1) formula
    /// written out independently.
    pub(crate) fn brute_force_icc(m: &[Vec<f64>]) -> f64 {
        let n = m.len();
        let k = m[0].len();
        let mut total = 0.0;
        for row in m {
            for v in row {
                total += v;
            }
        }
        let grand = total / (n * k) as f64;
        let mut ss_total = 0.0;
        for row in m {
            for v in row {
                ss_total += (v - grand) * (v - grand);
            }
        }
        let mut ss_rows = 0.0;
        for row in m {
            let mut s = 0.0;
            for v in row {
                s += v;
            }
            ss_rows += k as f64 * (s / k as f64 - grand).powi(2);
        }
        let mut ss_cols = 0.0;
        for j in 0..k {
            let mut s = 0.0;
            for row in m {
                s += row[j];
            }
            ss_cols += n as f64 * (s / n as f64 - grand).powi(2);
        }
        let ss_err = ss_total - ss_rows - ss_cols;
        let msr = ss_rows / (n - 1) as f64;
        let msc = ss_cols / (k - 1) as f64;
        let mse = ss_err / ((n - 1) * (k - 1)) as f64;
        (msr - mse) / (msr + (k as f64 - 1.0) * mse + k as f64 * (msc - mse) / n as f64)
    }

    fn id(rep: u32) -> RepetitionId {
        RepetitionId {
            participant: "P01".into(),
            task: crate::model::Task::Bilateral,
            rep,
        }
    }

    fn mm(v: Vec<f64>) -> TimeSeries {
        TimeSeries::new(v, 100.0, Unit::Millimetres).unwrap()
    }

    #[test]
    fn height_from_toe_series() {
        let mut v = vec![40.0; 20];
        v[12] = 240.0;
        assert_eq!(jump_height_cm(&mm(v.clone())).unwrap(), 20.0);
        let seg = JumpSegment::from_displacement(mm(v), 0, Modality::Omc, Some(id(1)));
        assert_eq!(jump_height_from_displacement(&seg).unwrap(), 20.0);
        assert!(matches!(
            jump_height_cm(&mm(vec![40.0; 20])),
            Err(Error::NonPhysical(_))
        ));
        let px = TimeSeries::new(vec![0.0, 1.0], 30.0, Unit::Pixels).unwrap();
        assert!(jump_height_cm(&px).is_err());
    }

    #[test]
    fn measurement_rejects_negative_heights() {
        assert!(JumpMeasurement::new(id(1), Method::Fp, -0.1).is_err());
        assert!(JumpMeasurement::new(id(1), Method::Fp, f64::NAN).is_err());
        assert!(JumpMeasurement::new(id(1), Method::Fp, 0.0).is_ok());
    }

    #[test]
    fn icc_examples() {
        let x = [10.0, 14.0, 9.0, 20.0, 17.0];
        let same: Vec<Vec<f64>> = x.iter().map(|&v| vec![v, v]).collect();
        assert!((icc_2_1(&same).unwrap().icc - 1.0).abs() < 1e-12);
        let offset: Vec<Vec<f64>> = x.iter().map(|&v| vec![v, v + 1e4]).collect();
        let r = icc_2_1(&offset).unwrap().icc;
        assert!(r > 0.0 && r < 1e-5, "{r}");
    }

    #[test]
    fn icc_matches_oracle_on_integer_matrix() {
        let m = vec![
            vec![9.0, 2.0, 5.0, 8.0],
            vec![6.0, 1.0, 3.0, 2.0],
            vec![8.0, 4.0, 6.0, 8.0],
            vec![7.0, 1.0, 2.0, 6.0],
            vec![10.0, 5.0, 6.0, 9.0],
            vec![6.0, 2.0, 4.0, 7.0],
        ];
        let r = icc_2_1(&m).unwrap();
        assert!((r.icc - brute_force_icc(&m)).abs() < 1e-10);
        // Shrout and Fleiss (1979), Table 2: ICC(2,1) = 0.29
        assert!((r.icc - 0.29).abs() < 0.005);
    }

    #[test]
    fn icc_errors() {
        assert!(matches!(
            icc_2_1(&[vec![1.0, 2.0]]),
            Err(Error::Argument(_))
        ));
        assert!(matches!(
            icc_2_1(&[vec![1.0], vec![2.0]]),
            Err(Error::Argument(_))
        ));
        assert!(matches!(
            icc_2_1(&[vec![1.0, 2.0], vec![3.0]]),
            Err(Error::Input(_))
        ));
        assert!(matches!(
            icc_2_1(&[vec![1.0, 2.0], vec![3.0, f64::NAN]]),
            Err(Error::Input(_))
        ));
    }

    #[test]
    fn bland_altman_examples() {
        let a = [3.0, 7.0, 5.0];
        let r = bland_altman(&a, &a).unwrap();
        assert_eq!(
            (r.bias_cm, r.sd_cm, r.loa_low_cm, r.loa_high_cm),
            (0.0, 0.0, 0.0, 0.0)
        );

        let r = bland_altman(&[1.0, 3.0], &[0.0, 0.0]).unwrap();
        let s2 = 2f64.sqrt();
        assert!((r.bias_cm - 2.0).abs() < 1e-12);
        assert!((r.sd_cm - s2).abs() < 1e-12);
        assert!((r.loa_low_cm - (2.0 - 1.96 * s2)).abs() < 1e-12);
        assert!((r.loa_high_cm - (2.0 + 1.96 * s2)).abs() < 1e-12);

        assert!(matches!(
            bland_altman(&[1.0], &[1.0, 2.0]),
            Err(Error::Pairing(1, 2))
        ));
    }

    #[test]
    fn trr_skips_incomplete_targets() {
        let rows = vec![
            vec![Some(20.0), Some(20.0), Some(20.0)],
            vec![Some(25.0), None, Some(25.0)],
            vec![Some(30.0), Some(30.0), Some(30.0)],
        ];
        let r = test_retest_reliability(&rows).unwrap();
        assert_eq!(r.n, 2);
        assert!((r.icc - 1.0).abs() < 1e-12);
        assert!(matches!(
            test_retest_reliability(&rows[..2]),
            Err(Error::Input(_))
        ));
    }

    fn matrix(
        n: std::ops::Range<usize>,
        k: std::ops::Range<usize>,
    ) -> impl Strategy<Value = Vec<Vec<f64>>> {
        (n, k).prop_flat_map(|(n, k)| {
            prop::collection::vec(prop::collection::vec(0.0f64..60.0, k), n)
        })
    }

    proptest! {
        #[test]
        fn trr_matches_oracle(m in matrix(5..6, 3..4)) {
            let rows: Vec<Vec<Option<f64>>> = m.iter().map(|r| r.iter().copied().map(Some).collect()).collect();
            let r = test_retest_reliability(&rows).unwrap();
            prop_assert!((r.icc - brute_force_icc(&m)).abs() < 1e-10);
        }

        #[test]
        fn icc_shift_and_scale_invariant(m in matrix(3..10, 2..5), c in -100.0f64..100.0, s in 0.1f64..10.0) {
            let base = icc_2_1(&m).unwrap().icc;
            let shifted: Vec<Vec<f64>> = m.iter().map(|r| r.iter().map(|v| v + c).collect()).collect();
            let scaled: Vec<Vec<f64>> = m.iter().map(|r| r.iter().map(|v| v * s).collect()).collect();
            prop_assert!((icc_2_1(&shifted).unwrap().icc - base).abs() < 1e-10);
            prop_assert!((icc_2_1(&scaled).unwrap().icc - base).abs() < 1e-10);
        }

        #[test]
        fn bland_altman_symmetry(pairs in prop::collection::vec((0.0f64..60.0, 0.0f64..60.0), 2..40)) {
            let (a, b): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            let ab = bland_altman(&a, &b).unwrap();
            let ba = bland_altman(&b, &a).unwrap();
            prop_assert_eq!(ab.bias_cm, -ba.bias_cm);
            prop_assert!((ab.sd_cm - ba.sd_cm).abs() < 1e-12);
            let width = ab.loa_high_cm - ab.loa_low_cm;
            prop_assert!((width - 2.0 * LOA_Z * ab.sd_cm).abs() <= 1e-12 * (1.0 + ab.bias_cm.abs()));
            let ma = a.iter().sum::<f64>() / a.len() as f64;
            let mb = b.iter().sum::<f64>() / b.len() as f64;
            prop_assert_eq!(ab.bias_cm, ma - mb);
            prop_assert!(ab.loa_low_cm <= ab.bias_cm && ab.bias_cm <= ab.loa_high_cm);
        }

        #[test]
        fn height_is_scale_equivariant(v in prop::collection::vec(0.0f64..500.0, 10..60), c in 0.1f64..10.0) {
            let s = mm(v.clone());
            prop_assume!(jump_height_cm(&s).is_ok());
            let h = jump_height_cm(&s).unwrap();
            let hc = jump_height_cm(&mm(v.iter().map(|x| x * c).collect())).unwrap();
            prop_assert!((hc - c * h).abs() <= 1e-9 * hc.abs().max(1.0));
        }
    }
}
