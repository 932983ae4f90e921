//! One session end to end: load, denoise, screen, segment, calibrate, measure.
//!
//! Stage errors never abort a session. Every repetition gets, for each of the
//! four methods, either a measurement or an exclusion with a reason.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::calibrate::{apply_ptm, fit_ptm_scale, reverse_minmax, ScaleCalibration};
use crate::config::{CalibrationMode, Config};
use crate::error::Result;
use crate::forceplate::{detect_flight_windows, height_from_flight_time};
use crate::ingest::{self, check_declared_rate, SessionManifest, VerticalSource};
use crate::kinemetrics::{jump_height_cm, JumpMeasurement};
use crate::model::{
    ForceTrace, KeypointRecording, MarkerRecording, Method, Modality, RepetitionId, Task,
    TimeSeries,
};
use crate::preprocess::{
    detect_failure, fft_resample, savgol_smooth, segment_repetitions, zscore_despike,
    DenoiseConfig, Verdict,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exclusion {
    pub repetition: RepetitionId,
    pub method: Method,
    pub reason: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScaleOrigin {
    /// Fitted on this repetition.
    Own,
    /// Mean of the session's successful fits.
    SessionMean,
    /// Taken from the designated calibration repetition.
    Designated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationRecord {
    pub repetition: RepetitionId,
    pub r_mm_per_px: f64,
    pub origin: ScaleOrigin,
    /// The repetition's own fit, when it succeeded.
    pub fit: Option<ScaleCalibration>,
}

/// Apex time of each repetition on the reference timeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepTiming {
    pub repetition: RepetitionId,
    pub apex_s: f64,
    pub reference: Modality,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionReport {
    pub participant: String,
    pub task: Task,
    pub repetitions: Vec<RepTiming>,
    pub measurements: Vec<JumpMeasurement>,
    pub exclusions: Vec<Exclusion>,
    pub calibrations: Vec<CalibrationRecord>,
    /// Session-level observations that are not tied to one repetition.
    pub notes: Vec<String>,
}

impl SessionReport {
    pub fn height(&self, rep: u32, method: Method) -> Option<f64> {
        self.measurements
            .iter()
            .find(|m| m.repetition.rep == rep && m.method == method)
            .map(|m| m.height_cm)
    }
}

/// Recordings of one session; a modality that is absent or failed to load
/// carries the reason instead.
#[derive(Debug, Clone)]
pub struct SessionData {
    pub manifest: SessionManifest,
    pub keypoints: std::result::Result<KeypointRecording, String>,
    pub markers: std::result::Result<MarkerRecording, String>,
    pub force: std::result::Result<ForceTrace, String>,
}

fn load_one<T>(
    path: &Option<PathBuf>,
    what: &str,
    declared: Option<f64>,
    parse: impl Fn(&Path) -> Result<T>,
    rate: impl Fn(&T) -> f64,
) -> std::result::Result<T, String> {
    let path = path
        .as_ref()
        .ok_or_else(|| format!("no {what} file in manifest"))?;
    let value = parse(path).map_err(|e| format!("{what} file: {e}"))?;
    check_declared_rate(what, declared, rate(&value)).map_err(|e| e.to_string())?;
    Ok(value)
}

impl SessionData {
    pub fn load(manifest: SessionManifest) -> Self {
        let keypoints = load_one(
            &manifest.keypoints,
            "keypoints",
            manifest.fps,
            |p| ingest::parse_keypoints(p),
            |r| r.fps(),
        );
        let markers = load_one(
            &manifest.markers,
            "markers",
            manifest.omc_hz,
            |p| ingest::parse_markers(p),
            |r| r.rate_hz(),
        );
        let force = load_one(
            &manifest.force,
            "force",
            manifest.fp_hz,
            |p| ingest::parse_force(p),
            |r| r.rate_hz(),
        );
        Self {
            manifest,
            keypoints,
            markers,
            force,
        }
    }

    pub fn from_recordings(
        manifest: SessionManifest,
        keypoints: Option<KeypointRecording>,
        markers: Option<MarkerRecording>,
        force: Option<ForceTrace>,
    ) -> Self {
        Self {
            manifest,
            keypoints: keypoints.ok_or_else(|| "no keypoints file in manifest".to_string()),
            markers: markers.ok_or_else(|| "no markers file in manifest".to_string()),
            force: force.ok_or_else(|| "no force file in manifest".to_string()),
        }
    }
}

/// Despiked, then smoothed for apex finding.
fn for_segmentation(series: &TimeSeries, cfg: &DenoiseConfig) -> Result<TimeSeries> {
    savgol_smooth(&zscore_despike(series, cfg)?, cfg)
}

/// Despiked, then lightly smoothed for height measurement.
fn for_measurement(series: &TimeSeries, cfg: &DenoiseConfig) -> Result<TimeSeries> {
    savgol_smooth(
        &zscore_despike(series, cfg)?,
        &cfg.for_measurement(series.rate_hz()),
    )
}

/// Toe height window of one optical repetition, kept for reverse minmax.
struct OmcRep {
    apex_s: f64,
    toe_mm: TimeSeries,
    height: Result<f64>,
}

fn process_omc(
    rec: &MarkerRecording,
    m: &SessionManifest,
    cfg: &Config,
    notes: &mut Vec<String>,
) -> Result<Vec<OmcRep>> {
    let hip = rec.extract_vertical(&m.hip_marker)?.position;
    let toe = rec.extract_vertical(&m.toe_marker)?.position;
    let seg = segment_repetitions(
        &for_segmentation(&hip, &cfg.denoise)?,
        &cfg.segment,
        Modality::Omc,
    )?;
    if let Some((want, got)) = seg.count_mismatch {
        notes.push(format!("OMC: expected {want} repetitions, found {got}"));
    }
    let toe = for_measurement(&toe, &cfg.denoise)?;
    seg.segments
        .iter()
        .map(|s| {
            let toe_mm = s.cut(&toe)?;
            Ok(OmcRep {
                apex_s: s.apex_time_s(),
                height: jump_height_cm(&toe_mm),
                toe_mm,
            })
        })
        .collect()
}

/// One markerless repetition after screening and scale fitting.
struct MmcRep {
    apex_s: f64,
    /// Set when the repetition failed screening.
    invalid: Option<String>,
    toe_px: Option<TimeSeries>,
    fit: Result<ScaleCalibration>,
}

struct MmcSession {
    reps: Vec<MmcRep>,
    /// Whole-recording verdict; when set every repetition is excluded.
    invalid: Option<String>,
}

fn process_mmc(
    rec: &KeypointRecording,
    m: &SessionManifest,
    cfg: &Config,
    notes: &mut Vec<String>,
) -> Result<MmcSession> {
    let hip = rec.extract_vertical(&m.hip_joint)?;
    let toe = rec.extract_vertical(&m.toe_joint)?;
    let (hip_px, hip_conf) = (
        hip.position,
        hip.confidence.expect("keypoints carry confidence"),
    );
    let (toe_px, toe_conf) = (
        toe.position,
        toe.confidence.expect("keypoints carry confidence"),
    );
    let max_speed = cfg.failure.max_speed_frac_of_height * rec.image_height_px() as f64;
    let screen = |pos: &TimeSeries, conf: &TimeSeries| {
        detect_failure(
            pos,
            conf,
            &cfg.failure,
            max_speed,
            &cfg.denoise,
            &cfg.segment,
        )
    };

    // Whole-recording screening covers properties of the video as a whole.
    // Implausible speed is judged per repetition below, so one bad jump does
    // not discard its neighbours.
    let mut invalid = None;
    for (name, pos, conf) in [
        (&m.hip_joint, &hip_px, &hip_conf),
        (&m.toe_joint, &toe_px, &toe_conf),
    ] {
        if let Verdict::Invalid(reason) = screen(pos, conf)? {
            if !matches!(
                reason,
                crate::preprocess::FailureReason::ImplausibleSpeed { .. }
            ) {
                invalid.get_or_insert(format!("{name}: {reason}"));
            }
        }
    }

    let seg = segment_repetitions(
        &for_segmentation(&hip_px, &cfg.denoise)?,
        &cfg.segment,
        Modality::Mmc,
    )?;
    if let Some((want, got)) = seg.count_mismatch {
        notes.push(format!("MMC: expected {want} repetitions, found {got}"));
    }
    let hip_clean = zscore_despike(&hip_px, &cfg.denoise)?;
    let toe_smooth = for_measurement(&toe_px, &cfg.denoise)?;

    let reps = seg
        .segments
        .iter()
        .map(|s| {
            let mut invalid = None;
            for (name, pos, conf) in [
                (&m.hip_joint, &hip_px, &hip_conf),
                (&m.toe_joint, &toe_px, &toe_conf),
            ] {
                let verdict = s.cut(pos).and_then(|p| screen(&p, &s.cut(conf)?));
                match verdict {
                    Ok(Verdict::Valid) => {}
                    Ok(Verdict::Invalid(reason)) => {
                        invalid.get_or_insert(format!("{name}: {reason}"));
                    }
                    Err(e) => {
                        invalid.get_or_insert(format!("{name}: {e}"));
                    }
                }
            }
            let fit = s.cut(&hip_clean).and_then(|w| {
                let apex = w.argmax();
                fit_ptm_scale(&w, apex, &cfg.constants, cfg.calibration.fall_fraction)
            });
            MmcRep {
                apex_s: s.apex_time_s(),
                invalid,
                toe_px: s.cut(&toe_smooth).ok(),
                fit,
            }
        })
        .collect();
    Ok(MmcSession { reps, invalid })
}

/// Assigns each event to the nearest reference apex within `tolerance`,
/// one event per reference at most. Returns, per reference, the event index.
fn pair_events(
    reference: &[f64],
    events: &[f64],
    tolerance: f64,
) -> (Vec<Option<usize>>, Vec<usize>) {
    let mut candidates: Vec<(f64, usize, usize)> = Vec::new();
    for (r, &rt) in reference.iter().enumerate() {
        for (e, &et) in events.iter().enumerate() {
            let d = (rt - et).abs();
            if d <= tolerance {
                candidates.push((d, r, e));
            }
        }
    }
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut by_ref = vec![None; reference.len()];
    let mut used = vec![false; events.len()];
    for (_, r, e) in candidates {
        if by_ref[r].is_none() && !used[e] {
            by_ref[r] = Some(e);
            used[e] = true;
        }
    }
    let unmatched = (0..events.len()).filter(|&e| !used[e]).collect();
    (by_ref, unmatched)
}

fn mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

/// Runs every stage on loaded recordings.
pub fn analyze_session(data: &SessionData, cfg: &Config) -> SessionReport {
    let m = &data.manifest;
    let mut notes = Vec::new();
    let id = |rep: u32| RepetitionId {
        participant: m.participant_id.clone(),
        task: m.task,
        rep,
    };

    let omc: std::result::Result<Vec<OmcRep>, String> = data
        .markers
        .as_ref()
        .map_err(Clone::clone)
        .and_then(|rec| process_omc(rec, m, cfg, &mut notes).map_err(|e| format!("OMC: {e}")));
    let mmc: std::result::Result<MmcSession, String> = data
        .keypoints
        .as_ref()
        .map_err(Clone::clone)
        .and_then(|rec| process_mmc(rec, m, cfg, &mut notes).map_err(|e| format!("MMC: {e}")));
    let fp = data.force.as_ref().map_err(Clone::clone).and_then(|trace| {
        detect_flight_windows(trace, &cfg.flight).map_err(|e| format!("FP: {e}"))
    });

    // Reference timeline: the most precise modality that segmented.
    let (reference, reference_times): (Modality, Vec<f64>) = if let Ok(o) = &omc {
        (Modality::Omc, o.iter().map(|r| r.apex_s).collect())
    } else if let Ok(k) = &mmc {
        (Modality::Mmc, k.reps.iter().map(|r| r.apex_s).collect())
    } else if let Ok(w) = &fp {
        (Modality::Fp, w.iter().map(|w| w.midpoint_s()).collect())
    } else {
        (Modality::Omc, Vec::new())
    };
    let placeholder = reference_times.is_empty();
    let rep_count = if placeholder {
        notes.push("no modality could be segmented".into());
        cfg.segment.expected_reps.unwrap_or(1)
    } else {
        reference_times.len()
    };
    let repetitions: Vec<RepTiming> = reference_times
        .iter()
        .enumerate()
        .map(|(i, &t)| RepTiming {
            repetition: id(i as u32 + 1),
            apex_s: t,
            reference,
        })
        .collect();

    let tol = cfg.pairing_tolerance_s;
    let mut pair = |label: &str, events: &[f64]| -> Vec<Option<usize>> {
        if placeholder {
            return vec![None; rep_count];
        }
        let (by_ref, unmatched) = pair_events(&reference_times, events, tol);
        for e in unmatched {
            notes.push(format!(
                "{label}: event at {:.3} s matches no repetition",
                events[e]
            ));
        }
        by_ref
    };
    let omc_pairs = match &omc {
        Ok(o) => pair("OMC", &o.iter().map(|r| r.apex_s).collect::<Vec<_>>()),
        Err(_) => vec![None; rep_count],
    };
    let mmc_pairs = match &mmc {
        Ok(k) => pair("MMC", &k.reps.iter().map(|r| r.apex_s).collect::<Vec<_>>()),
        Err(_) => vec![None; rep_count],
    };
    let fp_pairs = match &fp {
        Ok(w) => pair("FP", &w.iter().map(|w| w.midpoint_s()).collect::<Vec<_>>()),
        Err(_) => vec![None; rep_count],
    };

    // Scale per repetition, following the configured calibration mode.
    let fits: Vec<Option<&ScaleCalibration>> = (0..rep_count)
        .map(|r| match (&mmc, mmc_pairs[r]) {
            (Ok(k), Some(e)) if k.reps[e].invalid.is_none() => k.reps[e].fit.as_ref().ok(),
            _ => None,
        })
        .collect();
    let session_mean = mean(
        &fits
            .iter()
            .flatten()
            .map(|c| c.r_mm_per_px)
            .collect::<Vec<_>>(),
    );
    let scale_for = |r: usize| -> std::result::Result<(f64, ScaleOrigin), String> {
        let fallback = || {
            session_mean
                .map(|s| (s, ScaleOrigin::SessionMean))
                .ok_or_else(|| "no repetition in the session could be calibrated".to_string())
        };
        match cfg.calibration.mode {
            CalibrationMode::PerRepetition => match fits[r] {
                Some(c) => Ok((c.r_mm_per_px, ScaleOrigin::Own)),
                None => fallback(),
            },
            CalibrationMode::SessionMean => fallback(),
            CalibrationMode::Designated(d) => match fits.get(d as usize - 1).copied().flatten() {
                Some(c) => Ok((c.r_mm_per_px, ScaleOrigin::Designated)),
                None => fallback(),
            },
        }
    };

    let mut measurements = Vec::new();
    let mut exclusions = Vec::new();
    let mut calibrations = Vec::new();
    for r in 0..rep_count {
        let rid = id(r as u32 + 1);
        let mut record = |method: Method, outcome: std::result::Result<f64, String>| match outcome
            .and_then(|h| JumpMeasurement::new(rid.clone(), method, h).map_err(|e| e.to_string()))
        {
            Ok(meas) => measurements.push(meas),
            Err(reason) => exclusions.push(Exclusion {
                repetition: rid.clone(),
                method,
                reason,
            }),
        };

        let omc_rep = match (&omc, omc_pairs[r]) {
            (Ok(o), Some(e)) => Ok(&o[e]),
            (Ok(_), None) => Err("OMC: no segment for this repetition".to_string()),
            (Err(e), _) => Err(e.clone()),
        };
        record(
            Method::Omc,
            omc_rep.clone().and_then(|o| {
                o.height
                    .as_ref()
                    .map(|h| *h)
                    .map_err(|e| format!("OMC: {e}"))
            }),
        );

        let fp_height = match (&fp, fp_pairs[r]) {
            (Ok(w), Some(e)) => height_from_flight_time(w[e].flight_time_s, &cfg.constants)
                .map_err(|e| format!("FP: {e}")),
            (Ok(_), None) => Err("FP: no flight window for this repetition".to_string()),
            (Err(e), _) => Err(e.clone()),
        };
        record(Method::Fp, fp_height);

        let mmc_rep: std::result::Result<&MmcRep, String> = match (&mmc, mmc_pairs[r]) {
            (Ok(k), _) if k.invalid.is_some() => {
                Err(format!("MMC failure: {}", k.invalid.as_ref().unwrap()))
            }
            (Ok(k), Some(e)) => match &k.reps[e].invalid {
                Some(reason) => Err(format!("MMC failure: {reason}")),
                None => Ok(&k.reps[e]),
            },
            (Ok(_), None) => Err("MMC: no segment for this repetition".to_string()),
            (Err(e), _) => Err(e.clone()),
        };
        let toe_px = mmc_rep.clone().and_then(|k| {
            k.toe_px
                .as_ref()
                .ok_or_else(|| "MMC: toe window unavailable".to_string())
        });

        let rmm = toe_px.clone().and_then(|px| {
            let o = omc_rep
                .clone()
                .map_err(|e| format!("RMM needs the OMC reference ({e})"))?;
            let resampled = fft_resample(px, o.toe_mm.len()).map_err(|e| format!("RMM: {e}"))?;
            let mm = reverse_minmax(&resampled, &o.toe_mm).map_err(|e| format!("RMM: {e}"))?;
            jump_height_cm(&mm).map_err(|e| format!("RMM: {e}"))
        });
        record(Method::Rmm, rmm);

        let ptm = toe_px.and_then(|px| {
            let (scale, origin) = scale_for(r).map_err(|e| format!("PTM: {e}"))?;
            calibrations.push(CalibrationRecord {
                repetition: rid.clone(),
                r_mm_per_px: scale,
                origin,
                fit: fits[r].cloned().map(|c| c.with_source(rid.clone())),
            });
            let cal = ScaleCalibration::new(scale, 1.0, 1.0).map_err(|e| format!("PTM: {e}"))?;
            let mm = apply_ptm(px, &cal).map_err(|e| format!("PTM: {e}"))?;
            jump_height_cm(&mm).map_err(|e| format!("PTM: {e}"))
        });
        record(Method::Ptm, ptm);
    }

    for (label, err) in [
        ("keypoints", data.keypoints.as_ref().err()),
        ("markers", data.markers.as_ref().err()),
        ("force", data.force.as_ref().err()),
    ] {
        if let Some(e) = err {
            notes.push(format!("{label}: {e}"));
        }
    }

    SessionReport {
        participant: m.participant_id.clone(),
        task: m.task,
        repetitions,
        measurements,
        exclusions,
        calibrations,
        notes,
    }
}

/// Loads the manifest's recordings and analyzes them. Only an unreadable
/// manifest is an error; recording problems become exclusions.
pub fn run_session(manifest_path: &Path, cfg: &Config) -> Result<SessionReport> {
    let manifest = SessionManifest::load(manifest_path)?;
    Ok(analyze_session(&SessionData::load(manifest), cfg))
}
