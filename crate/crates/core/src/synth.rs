//! Synthetic countermovement-jump sessions with known ground truth.
//!
//! The hip and toe follow a closed-form trajectory: a half-cosine
//! countermovement dip, constant-acceleration propulsion to take-off speed,
//! an exact ballistic flight and a critically damped landing. The same
//! trajectory is sampled by a simulated camera, a marker system and a force
//! plate, each on its own clock rate but sharing time zero.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{
    self, SessionManifest, DEFAULT_HIP_JOINT, DEFAULT_HIP_MARKER, DEFAULT_TOE_JOINT,
    DEFAULT_TOE_MARKER,
};
use crate::model::{
    Axis, ForceTrace, Keypoint, KeypointFrame, KeypointRecording, MarkerRecording, MarkerTrack,
    Task, TimeSeries, Unit,
};

/// 25-joint body model, in pose-estimator order.
pub const BODY_25: [&str; 25] = [
    "Nose",
    "Neck",
    "RShoulder",
    "RElbow",
    "RWrist",
    "LShoulder",
    "LElbow",
    "LWrist",
    "MidHip",
    "RHip",
    "RKnee",
    "RAnkle",
    "LHip",
    "LKnee",
    "LAnkle",
    "REye",
    "LEye",
    "REar",
    "LEar",
    "LBigToe",
    "LSmallToe",
    "LHeel",
    "RBigToe",
    "RSmallToe",
    "RHeel",
];

/// Standing hip height, mm.
pub const HIP_STANDING_MM: f64 = 950.0;
/// Standing toe marker height, mm.
pub const TOE_STANDING_MM: f64 = 20.0;
/// Rows between the ground contact line and the image bottom.
pub const GROUND_MARGIN_PX: f64 = 40.0;

const COUNTERMOVEMENT_S: f64 = 0.5;
/// Deepest landing absorption, mm; lower jumps absorb half their height.
const LANDING_DIP_MM: f64 = 100.0;
const RECOVERY_S: f64 = 2.5;
const KEYPOINT_CONFIDENCE: f64 = 0.9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthJumpSpec {
    pub participant: String,
    pub task: Task,
    pub true_height_cm: f64,
    /// Repetition-to-repetition height spread, cm.
    pub height_sd_cm: f64,
    pub reps: usize,
    pub scale_mm_per_px: f64,
    pub fps: f64,
    pub omc_hz: f64,
    pub fp_rate_hz: f64,
    pub noise_px_sd: f64,
    pub noise_mm_sd: f64,
    pub noise_n_sd: f64,
    pub stance_force_n: f64,
    pub countermovement_depth_cm: f64,
    pub image_height_px: u32,
    /// Single-frame outliers injected into the hip and toe keypoints.
    pub spikes: usize,
    pub spike_px: f64,
    pub seed: u64,
}

impl Default for SynthJumpSpec {
    fn default() -> Self {
        Self {
            participant: "P01".into(),
            task: Task::Bilateral,
            true_height_cm: 20.0,
            height_sd_cm: 0.0,
            reps: 3,
            scale_mm_per_px: 3.5,
            fps: 30.0,
            omc_hz: 100.0,
            fp_rate_hz: 1000.0,
            noise_px_sd: 0.0,
            noise_mm_sd: 0.0,
            noise_n_sd: 0.0,
            stance_force_n: 600.0,
            countermovement_depth_cm: 15.0,
            image_height_px: 720,
            spikes: 0,
            spike_px: 80.0,
            seed: 0,
        }
    }
}

impl SynthJumpSpec {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("true_height_cm", self.true_height_cm),
            ("scale_mm_per_px", self.scale_mm_per_px),
            ("fps", self.fps),
            ("omc_hz", self.omc_hz),
            ("fp_rate_hz", self.fp_rate_hz),
            ("stance_force_n", self.stance_force_n),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Validation(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        let non_negative = [
            ("height_sd_cm", self.height_sd_cm),
            ("noise_px_sd", self.noise_px_sd),
            ("noise_mm_sd", self.noise_mm_sd),
            ("noise_n_sd", self.noise_n_sd),
            ("countermovement_depth_cm", self.countermovement_depth_cm),
            ("spike_px", self.spike_px),
        ];
        for (name, v) in non_negative {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Validation(format!(
                    "{name} must be non-negative, got {v}"
                )));
            }
        }
        if self.reps == 0 {
            return Err(Error::Validation("reps must be at least 1".into()));
        }
        if self.image_height_px == 0 {
            return Err(Error::Validation("image_height_px must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthRep {
    pub rep: u32,
    pub height_cm: f64,
    pub countermovement_s: f64,
    pub toe_off_s: f64,
    pub apex_s: f64,
    pub landing_s: f64,
    pub flight_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpikeTruth {
    pub joint: String,
    pub frame: usize,
    pub offset_px: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthTruth {
    pub participant: String,
    pub task: Task,
    pub scale_mm_per_px: f64,
    pub g: f64,
    pub ground_row_px: f64,
    pub reps: Vec<TruthRep>,
    pub spikes: Vec<SpikeTruth>,
}

/// Closed-form hip and toe motion for one session, in mm relative to standing.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    reps: Vec<RepKinematics>,
    depth_mm: f64,
    g_mm: f64,
    duration_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct RepKinematics {
    dip_s: f64,
    push_s: f64,
    off_s: f64,
    land_s: f64,
    v0: f64,
}

impl Trajectory {
    fn build(heights_mm: &[f64], depth_mm: f64, g_mm: f64, rests: &[f64]) -> Self {
        let mut reps = Vec::with_capacity(heights_mm.len());
        let mut t = rests[0];
        for (i, &h) in heights_mm.iter().enumerate() {
            let v0 = (2.0 * g_mm * h).sqrt();
            let dip_s = t;
            let push_s = dip_s
                + if depth_mm > 0.0 {
                    COUNTERMOVEMENT_S
                } else {
                    0.0
                };
            let off_s = push_s + 2.0 * depth_mm / v0;
            let land_s = off_s + 2.0 * v0 / g_mm;
            reps.push(RepKinematics {
                dip_s,
                push_s,
                off_s,
                land_s,
                v0,
            });
            t = land_s + RECOVERY_S + rests.get(i + 1).copied().unwrap_or(0.0);
        }
        Self {
            reps,
            depth_mm,
            g_mm,
            duration_s: t,
        }
    }

    pub fn duration_s(&self) -> f64 {
        self.duration_s
    }

    fn active(&self, t: f64) -> Option<&RepKinematics> {
        self.reps.iter().rev().find(|r| t >= r.dip_s)
    }

    pub fn in_flight(&self, t: f64) -> bool {
        self.active(t).is_some_and(|r| t >= r.off_s && t < r.land_s)
    }

    /// Hip displacement from standing height, mm, up-positive.
    pub fn hip_mm(&self, t: f64) -> f64 {
        let Some(r) = self.active(t) else { return 0.0 };
        let d = self.depth_mm;
        if t < r.push_s {
            -0.5 * d * (1.0 - (std::f64::consts::PI * (t - r.dip_s) / COUNTERMOVEMENT_S).cos())
        } else if t < r.off_s {
            let a = r.v0 * r.v0 / (2.0 * d);
            let tau = t - r.push_s;
            -d + 0.5 * a * tau * tau
        } else if t < r.land_s {
            let tau = t - r.off_s;
            r.v0 * tau - 0.5 * self.g_mm * tau * tau
        } else {
            // critically damped: starts at 0 with velocity −v0
            let h = r.v0 * r.v0 / (2.0 * self.g_mm);
            let omega = r.v0 / (std::f64::consts::E * LANDING_DIP_MM.min(0.5 * h));
            let tau = t - r.land_s;
            -r.v0 * tau * (-omega * tau).exp()
        }
    }

    /// Toe displacement from standing height, mm: it leaves the ground only in flight.
    pub fn toe_mm(&self, t: f64) -> f64 {
        if self.in_flight(t) {
            self.hip_mm(t)
        } else {
            0.0
        }
    }
}

/// Everything one synthetic session produces.
#[derive(Debug, Clone)]
pub struct SynthSession {
    pub spec: SynthJumpSpec,
    pub keypoints: KeypointRecording,
    pub markers: MarkerRecording,
    pub force: ForceTrace,
    pub truth: SynthTruth,
    pub trajectory: Trajectory,
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

fn normal(sd: f64) -> Option<Normal<f64>> {
    (sd > 0.0).then(|| Normal::new(0.0, sd).expect("finite non-negative sd"))
}

/// Standing height (mm) and image column (px) of each joint, and whether it
/// moves with the hip, the feet, or halfway between.
fn joint_layout(name: &str) -> (f64, f64, f64) {
    // (standing mm, column px, weight on hip motion; the rest follows the toe)
    match name {
        "Nose" => (1650.0, 640.0, 1.0),
        "REye" | "LEye" => (1680.0, 640.0, 1.0),
        "REar" | "LEar" => (1660.0, 640.0, 1.0),
        "Neck" => (1450.0, 640.0, 1.0),
        "RShoulder" | "LShoulder" => (1420.0, 640.0, 1.0),
        "RElbow" | "LElbow" => (1150.0, 650.0, 1.0),
        "RWrist" | "LWrist" => (900.0, 660.0, 1.0),
        "MidHip" | "RHip" | "LHip" => (HIP_STANDING_MM, 640.0, 1.0),
        "RKnee" | "LKnee" => (500.0, 660.0, 0.5),
        "RAnkle" | "LAnkle" => (80.0, 640.0, 0.0),
        "RHeel" | "LHeel" => (30.0, 620.0, 0.0),
        _ => (TOE_STANDING_MM, 680.0, 0.0),
    }
}

pub fn generate(spec: &SynthJumpSpec) -> Result<SynthSession> {
    spec.validate()?;
    let g = 9.81;
    let g_mm = g * 1000.0;

    let mut timing = stream(spec.seed, 0);
    let height_noise = normal(spec.height_sd_cm);
    let heights_mm: Vec<f64> = (0..spec.reps)
        .map(|_| {
            let h = spec.true_height_cm + height_noise.map_or(0.0, |n| n.sample(&mut timing));
            10.0 * h.max(1.0)
        })
        .collect();
    let rests: Vec<f64> = (0..spec.reps)
        .map(|i| if i == 0 { 1.0 } else { 0.0 } + timing.random_range(0.0..0.5))
        .collect();
    let traj = Trajectory::build(
        &heights_mm,
        10.0 * spec.countermovement_depth_cm,
        g_mm,
        &rests,
    );

    let truth_reps = traj
        .reps
        .iter()
        .zip(&heights_mm)
        .enumerate()
        .map(|(i, (r, h))| TruthRep {
            rep: i as u32 + 1,
            height_cm: h / 10.0,
            countermovement_s: r.dip_s,
            toe_off_s: r.off_s,
            apex_s: r.off_s + r.v0 / g_mm,
            landing_s: r.land_s,
            flight_time_s: r.land_s - r.off_s,
        })
        .collect();

    let ground_row = spec.image_height_px as f64 - GROUND_MARGIN_PX;
    let keypoints = camera(spec, &traj, ground_row)?;
    let (keypoints, spikes) = inject_spikes(spec, keypoints)?;
    let markers = marker_system(spec, &traj)?;
    let force = force_plate(spec, &traj)?;

    Ok(SynthSession {
        spec: spec.clone(),
        keypoints,
        markers,
        force,
        truth: SynthTruth {
            participant: spec.participant.clone(),
            task: spec.task,
            scale_mm_per_px: spec.scale_mm_per_px,
            g,
            ground_row_px: ground_row,
            reps: truth_reps,
            spikes,
        },
        trajectory: traj,
    })
}

fn sample_count(duration_s: f64, rate: f64) -> usize {
    (duration_s * rate).floor() as usize + 1
}

fn camera(spec: &SynthJumpSpec, traj: &Trajectory, ground_row: f64) -> Result<KeypointRecording> {
    let mut rng = stream(spec.seed, 1);
    let noise = normal(spec.noise_px_sd);
    let layout: Vec<(f64, f64, f64)> = BODY_25.iter().map(|n| joint_layout(n)).collect();
    let frames = (0..sample_count(traj.duration_s, spec.fps))
        .map(|index| {
            let t = index as f64 / spec.fps;
            let (hip, toe) = (traj.hip_mm(t), traj.toe_mm(t));
            let joints = layout
                .iter()
                .map(|&(base, col, w)| {
                    let mm = base + w * hip + (1.0 - w) * toe;
                    let mut jitter = || noise.map_or(0.0, |n| n.sample(&mut rng));
                    Keypoint {
                        x: col + jitter(),
                        y: ground_row - mm / spec.scale_mm_per_px + jitter(),
                        confidence: KEYPOINT_CONFIDENCE,
                    }
                })
                .collect();
            KeypointFrame { index, joints }
        })
        .collect();
    KeypointRecording::new(
        frames,
        spec.fps,
        BODY_25.iter().map(|s| s.to_string()).collect(),
        spec.image_height_px,
    )
}

fn inject_spikes(
    spec: &SynthJumpSpec,
    mut rec: KeypointRecording,
) -> Result<(KeypointRecording, Vec<SpikeTruth>)> {
    if spec.spikes == 0 {
        return Ok((rec, Vec::new()));
    }
    let mut rng = stream(spec.seed, 4);
    let n = rec.frames().len();
    let margin = 10.min(n / 4);
    let targets = [DEFAULT_HIP_JOINT, DEFAULT_TOE_JOINT];
    let mut frames = rec.frames().to_vec();
    let mut truth: Vec<SpikeTruth> = Vec::new();
    let mut attempts = 0;
    while truth.len() < spec.spikes && attempts < 100 * spec.spikes {
        attempts += 1;
        let frame = rng.random_range(margin..n - margin);
        let joint = targets[truth.len() % 2];
        // keep spikes apart so each stands alone inside the despiking window
        if truth
            .iter()
            .any(|s| s.joint == joint && s.frame.abs_diff(frame) < 12)
        {
            continue;
        }
        let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        let offset_px = sign * spec.spike_px;
        let j = rec.joint_index(joint)?;
        frames[frame].joints[j].y += offset_px;
        truth.push(SpikeTruth {
            joint: joint.to_string(),
            frame,
            offset_px,
        });
    }
    truth.sort_by(|a, b| (a.frame, &a.joint).cmp(&(b.frame, &b.joint)));
    rec = KeypointRecording::new(
        frames,
        rec.fps(),
        rec.joint_names().to_vec(),
        rec.image_height_px(),
    )?;
    Ok((rec, truth))
}

fn marker_system(spec: &SynthJumpSpec, traj: &Trajectory) -> Result<MarkerRecording> {
    let mut rng = stream(spec.seed, 2);
    let noise = normal(spec.noise_mm_sd);
    let n = sample_count(traj.duration_s, spec.omc_hz);
    let mut track = |name: &str, x: f64, y: f64, z: &dyn Fn(f64) -> f64| -> Result<MarkerTrack> {
        let mut axes: [Vec<f64>; 3] = Default::default();
        for i in 0..n {
            let t = i as f64 / spec.omc_hz;
            for (a, v) in [x, y, z(t)].into_iter().enumerate() {
                axes[a].push(v + noise.map_or(0.0, |d| d.sample(&mut rng)));
            }
        }
        let [ax, ay, az] = axes;
        Ok(MarkerTrack {
            name: name.to_string(),
            axes: [
                TimeSeries::new(ax, spec.omc_hz, Unit::Millimetres)?,
                TimeSeries::new(ay, spec.omc_hz, Unit::Millimetres)?,
                TimeSeries::new(az, spec.omc_hz, Unit::Millimetres)?,
            ],
        })
    };
    let hip = track(DEFAULT_HIP_MARKER, 0.0, 0.0, &|t| {
        HIP_STANDING_MM + traj.hip_mm(t)
    })?;
    let toe = track(DEFAULT_TOE_MARKER, 120.0, 60.0, &|t| {
        TOE_STANDING_MM + traj.toe_mm(t)
    })?;
    MarkerRecording::new(vec![hip, toe], spec.omc_hz, Axis::Z)
}

fn force_plate(spec: &SynthJumpSpec, traj: &Trajectory) -> Result<ForceTrace> {
    let mut rng = stream(spec.seed, 3);
    let noise = normal(spec.noise_n_sd);
    let samples = (0..sample_count(traj.duration_s, spec.fp_rate_hz))
        .map(|i| {
            let t = i as f64 / spec.fp_rate_hz;
            let base = if traj.in_flight(t) {
                0.0
            } else {
                spec.stance_force_n
            };
            base + noise.map_or(0.0, |d| d.sample(&mut rng))
        })
        .collect();
    ForceTrace::new(TimeSeries::new(samples, spec.fp_rate_hz, Unit::Newtons)?)
}

pub const MANIFEST_FILE: &str = "manifest.txt";
pub const KEYPOINTS_FILE: &str = "keypoints.txt";
pub const MARKERS_FILE: &str = "markers.csv";
pub const FORCE_FILE: &str = "force.csv";
pub const TRUTH_FILE: &str = "truth.json";

impl SynthSession {
    pub fn manifest(&self, dir: &Path) -> SessionManifest {
        let mut m = SessionManifest::new(self.spec.participant.clone(), self.spec.task);
        m.keypoints = Some(dir.join(KEYPOINTS_FILE));
        m.markers = Some(dir.join(MARKERS_FILE));
        m.force = Some(dir.join(FORCE_FILE));
        m.fps = Some(self.spec.fps);
        m.omc_hz = Some(self.spec.omc_hz);
        m.fp_hz = Some(self.spec.fp_rate_hz);
        m
    }

    /// Writes the recordings, ground truth and a manifest into `dir`, which
    /// is created if needed. Returns the manifest path.
    pub fn write_to(&self, dir: &Path) -> Result<PathBuf> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        ingest::write_keypoints(&self.keypoints, dir.join(KEYPOINTS_FILE))?;
        ingest::write_markers(&self.markers, dir.join(MARKERS_FILE))?;
        ingest::write_force(&self.force, dir.join(FORCE_FILE))?;
        let truth = serde_json::to_string_pretty(&self.truth)? + "\n";
        let truth_path = dir.join(TRUTH_FILE);
        std::fs::write(&truth_path, truth).map_err(|e| Error::io(&truth_path, e))?;
        let path = dir.join(MANIFEST_FILE);
        std::fs::write(&path, self.manifest(dir).to_kv_string(dir))
            .map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }
}

/// Specs for a synthetic cohort: participants with different heights and
/// camera distances, three repetitions each, labelled P01, P02, ...
pub fn cohort(participants: usize, task: Task, base: &SynthJumpSpec) -> Vec<SynthJumpSpec> {
    let mut rng = stream(base.seed, 5);
    (0..participants)
        .map(|i| {
            let h =
                rng.random_range(12.0..40.0) * if task == Task::Unilateral { 0.55 } else { 1.0 };
            (i, h)
        })
        .collect::<Vec<_>>()
        .into_iter()
        .map(|(i, h)| SynthJumpSpec {
            participant: format!("P{:02}", i + 1),
            task,
            true_height_cm: h,
            // shallow dips for low jumps keep the post-apex descent airborne
            countermovement_depth_cm: base.countermovement_depth_cm.min(0.75 * h),
            scale_mm_per_px: rng.random_range(3.0..4.0),
            seed: base.seed.wrapping_mul(1000).wrapping_add(i as u64 + 1),
            ..base.clone()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn noiseless() -> SynthSession {
        generate(&SynthJumpSpec::default()).unwrap()
    }

    #[test]
    fn flight_is_exactly_ballistic() {
        let s = noiseless();
        let g = 9810.0;
        for r in &s.truth.reps {
            // take-off speed from the true height alone
            let v0 = (2.0 * g * r.height_cm * 10.0).sqrt();
            let n = 200;
            for i in 0..n {
                let tau = r.flight_time_s * i as f64 / n as f64;
                let expected = v0 * tau - 0.5 * g * tau * tau;
                let got = s.trajectory.hip_mm(r.toe_off_s + tau);
                assert!(
                    (got - expected).abs() < 1e-9,
                    "tau {tau}: {got} vs {expected}"
                );
                assert!((s.trajectory.toe_mm(r.toe_off_s + tau) - expected).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn flight_time_inverts_height_formula() {
        let s = noiseless();
        let expected = (8.0 * 20.0 / (100.0 * 9.81_f64)).sqrt();
        for r in &s.truth.reps {
            assert!((r.flight_time_s - expected).abs() < 1e-12);
            assert!((r.apex_s - 0.5 * (r.toe_off_s + r.landing_s)).abs() < 1e-12);
        }
    }

    #[test]
    fn trajectory_is_continuous() {
        let s = noiseless();
        for r in &s.truth.reps {
            for t in [r.countermovement_s, r.toe_off_s, r.landing_s] {
                let eps = 1e-9;
                assert!((s.trajectory.hip_mm(t - eps) - s.trajectory.hip_mm(t + eps)).abs() < 1e-3);
            }
        }
    }

    #[test]
    fn force_and_kinematics_agree_on_contact_edges() {
        let s = noiseless();
        let f = s.force.force();
        let frame = 1.0 / s.spec.fps;
        for r in &s.truth.reps {
            let off = f
                .samples()
                .iter()
                .enumerate()
                .position(|(i, &v)| v == 0.0 && f.time_of(i) >= r.countermovement_s)
                .unwrap();
            assert!((f.time_of(off) - r.toe_off_s).abs() <= frame);
            let land = (off..f.len()).find(|&i| f.samples()[i] > 0.0).unwrap();
            assert!((f.time_of(land) - r.landing_s).abs() <= frame);
        }
    }

    #[test]
    fn keypoints_are_image_rows() {
        let s = noiseless();
        let hip = s.keypoints.joint_y(DEFAULT_HIP_JOINT).unwrap();
        let standing = s.truth.ground_row_px - HIP_STANDING_MM / 3.5;
        assert!((hip.samples()[0] - standing).abs() < 1e-9);
        // higher in the air is a smaller row number
        assert!(hip.min() < standing);
    }

    #[test]
    fn deterministic_for_a_seed() {
        let spec = SynthJumpSpec {
            noise_px_sd: 2.0,
            noise_n_sd: 2.0,
            spikes: 4,
            seed: 99,
            ..Default::default()
        };
        let a = generate(&spec).unwrap();
        let b = generate(&spec).unwrap();
        assert_eq!(a.keypoints, b.keypoints);
        assert_eq!(a.force, b.force);
        assert_eq!(a.truth, b.truth);
        assert_eq!(a.truth.spikes.len(), 4);
        let c = generate(&SynthJumpSpec { seed: 100, ..spec }).unwrap();
        assert_ne!(a.keypoints, c.keypoints);
    }

    #[test]
    fn invalid_spec_is_rejected() {
        let bad = SynthJumpSpec {
            reps: 0,
            ..Default::default()
        };
        assert!(generate(&bad).is_err());
        let bad = SynthJumpSpec {
            scale_mm_per_px: -1.0,
            ..Default::default()
        };
        assert!(generate(&bad).is_err());
    }
}
