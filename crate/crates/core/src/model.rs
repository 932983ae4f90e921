//! Value types shared by every pipeline stage.
//!
//! All vertical series leaving ingestion are up-positive: camera `y` values
//! are reflected through [`flip_image_vertical`], marker and force channels
//! pass through unchanged.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Unit {
    Pixels,
    Millimetres,
    Centimetres,
    Newtons,
    Normalized,
}

/// Uniformly sampled scalar signal tagged with its unit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimeSeries {
    samples: Vec<f64>,
    rate_hz: f64,
    unit: Unit,
    start_s: f64,
}

impl TimeSeries {
    pub fn new(samples: Vec<f64>, rate_hz: f64, unit: Unit) -> Result<Self> {
        Self::with_start(samples, rate_hz, unit, 0.0)
    }

    /// Like [`TimeSeries::new`], with the time of the first sample given in seconds.
    pub fn with_start(samples: Vec<f64>, rate_hz: f64, unit: Unit, start_s: f64) -> Result<Self> {
        if !(rate_hz.is_finite() && rate_hz > 0.0) {
            return Err(Error::Validation(format!(
                "sample rate must be positive, got {rate_hz}"
            )));
        }
        if samples.is_empty() {
            return Err(Error::Length { needed: 1, got: 0 });
        }
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::Validation(format!("sample {i} is not finite")));
        }
        if !start_s.is_finite() {
            return Err(Error::Validation("start time is not finite".into()));
        }
        Ok(Self {
            samples,
            rate_hz,
            unit,
            start_s,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    /// Always false; construction rejects empty series.
    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn rate_hz(&self) -> f64 {
        self.rate_hz
    }

    pub fn unit(&self) -> Unit {
        self.unit
    }

    pub fn start_s(&self) -> f64 {
        self.start_s
    }

    pub fn period_s(&self) -> f64 {
        1.0 / self.rate_hz
    }

    /// Time in seconds of sample `index`.
    pub fn time_of(&self, index: usize) -> f64 {
        self.start_s + index as f64 / self.rate_hz
    }

    /// Nearest sample index to time `t` (seconds), clamped to the series.
    pub fn index_at(&self, t: f64) -> usize {
        let i = ((t - self.start_s) * self.rate_hz).round();
        i.clamp(0.0, (self.len() - 1) as f64) as usize
    }

    /// A new series with the same rate, unit and start time.
    pub fn with_samples(&self, samples: Vec<f64>) -> Result<Self> {
        Self::with_start(samples, self.rate_hz, self.unit, self.start_s)
    }

    pub fn with_unit(&self, samples: Vec<f64>, unit: Unit) -> Result<Self> {
        Self::with_start(samples, self.rate_hz, unit, self.start_s)
    }

    /// Samples `start..end`, keeping absolute timing.
    pub fn slice(&self, start: usize, end: usize) -> Result<Self> {
        if start >= end || end > self.len() {
            return Err(Error::Argument(format!(
                "slice {start}..{end} out of bounds for length {}",
                self.len()
            )));
        }
        Self::with_start(
            self.samples[start..end].to_vec(),
            self.rate_hz,
            self.unit,
            self.time_of(start),
        )
    }

    pub fn require_unit(&self, expected: Unit) -> Result<()> {
        if self.unit == expected {
            Ok(())
        } else {
            Err(Error::UnitMismatch {
                expected,
                found: self.unit,
            })
        }
    }

    pub fn max(&self) -> f64 {
        self.samples
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.samples.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Index of the first maximum.
    pub fn argmax(&self) -> usize {
        argmax(&self.samples)
    }

    /// Index of the first minimum.
    pub fn argmin(&self) -> usize {
        let mut best = 0;
        for (i, &v) in self.samples.iter().enumerate() {
            if v < self.samples[best] {
                best = i;
            }
        }
        best
    }

    pub fn mean(&self) -> f64 {
        self.samples.iter().sum::<f64>() / self.len() as f64
    }
}

pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

pub(crate) fn median(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Reflect image rows so that larger values point up.
pub fn flip_image_vertical(series: &TimeSeries, image_height_px: u32) -> Result<TimeSeries> {
    series.require_unit(Unit::Pixels)?;
    let h = f64::from(image_height_px);
    series.with_samples(series.samples().iter().map(|y| h - y).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Keypoint {
    pub x: f64,
    pub y: f64,
    pub confidence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KeypointFrame {
    pub index: usize,
    pub joints: Vec<Keypoint>,
}

/// Per-frame 2D joint positions from a pose estimator, in image pixels
/// (top-left origin, `y` growing downward).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KeypointRecording {
    frames: Vec<KeypointFrame>,
    fps: f64,
    joint_names: Vec<String>,
    image_height_px: u32,
}

impl KeypointRecording {
    pub fn new(
        mut frames: Vec<KeypointFrame>,
        fps: f64,
        joint_names: Vec<String>,
        image_height_px: u32,
    ) -> Result<Self> {
        if !(fps.is_finite() && fps > 0.0) {
            return Err(Error::Validation(format!(
                "fps must be positive, got {fps}"
            )));
        }
        if image_height_px == 0 {
            return Err(Error::Validation("image height must be positive".into()));
        }
        if frames.is_empty() {
            return Err(Error::Format("keypoint recording has no frames".into()));
        }
        let k = joint_names.len();
        if k == 0 {
            return Err(Error::Format(
                "keypoint recording declares no joints".into(),
            ));
        }
        for (i, a) in joint_names.iter().enumerate() {
            if joint_names[..i].contains(a) {
                return Err(Error::Format(format!("duplicate joint name {a:?}")));
            }
        }
        for frame in &frames {
            if frame.joints.len() != k {
                return Err(Error::Format(format!(
                    "frame {} has {} joints, expected {k}",
                    frame.index,
                    frame.joints.len()
                )));
            }
            for (j, kp) in frame.joints.iter().enumerate() {
                if !(kp.x.is_finite() && kp.y.is_finite()) {
                    return Err(Error::Validation(format!(
                        "frame {} joint {j}: non-finite coordinate",
                        frame.index
                    )));
                }
                if !(0.0..=1.0).contains(&kp.confidence) {
                    return Err(Error::Validation(format!(
                        "frame {} joint {j}: confidence {} outside [0, 1]",
                        frame.index, kp.confidence
                    )));
                }
            }
        }
        frames.sort_by_key(|f| f.index);
        let first = frames[0].index;
        let present: std::collections::BTreeSet<usize> = frames.iter().map(|f| f.index).collect();
        if present.len() != frames.len() {
            return Err(Error::Format("duplicate frame indices".into()));
        }
        let last = frames[frames.len() - 1].index;
        let missing: Vec<usize> = (first..=last).filter(|i| !present.contains(i)).collect();
        if !missing.is_empty() {
            return Err(Error::FrameGap { missing });
        }
        Ok(Self {
            frames,
            fps,
            joint_names,
            image_height_px,
        })
    }

    pub fn frames(&self) -> &[KeypointFrame] {
        &self.frames
    }

    pub fn fps(&self) -> f64 {
        self.fps
    }

    pub fn joint_names(&self) -> &[String] {
        &self.joint_names
    }

    pub fn joint_count(&self) -> usize {
        self.joint_names.len()
    }

    pub fn image_height_px(&self) -> u32 {
        self.image_height_px
    }

    pub fn joint_index(&self, name: &str) -> Result<usize> {
        self.joint_names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::Lookup(name.to_string()))
    }

    pub fn start_s(&self) -> f64 {
        self.frames[0].index as f64 / self.fps
    }

    /// Raw image-row series of one joint (pixels, downward-positive).
    pub fn joint_y(&self, name: &str) -> Result<TimeSeries> {
        let j = self.joint_index(name)?;
        let ys = self.frames.iter().map(|f| f.joints[j].y).collect();
        TimeSeries::with_start(ys, self.fps, Unit::Pixels, self.start_s())
    }

    pub fn joint_confidence(&self, name: &str) -> Result<TimeSeries> {
        let j = self.joint_index(name)?;
        let cs = self.frames.iter().map(|f| f.joints[j].confidence).collect();
        TimeSeries::with_start(cs, self.fps, Unit::Normalized, self.start_s())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }

    pub fn suffix(self) -> &'static str {
        match self {
            Axis::X => "x",
            Axis::Y => "y",
            Axis::Z => "z",
        }
    }
}

impl FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "x" => Ok(Axis::X),
            "y" => Ok(Axis::Y),
            "z" => Ok(Axis::Z),
            other => Err(Error::Format(format!("unknown axis {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MarkerTrack {
    pub name: String,
    /// x, y, z series in millimetres.
    pub axes: [TimeSeries; 3],
}

/// Per-sample 3D marker positions in millimetres.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MarkerRecording {
    markers: Vec<MarkerTrack>,
    rate_hz: f64,
    vertical_axis: Axis,
}

impl MarkerRecording {
    pub fn new(markers: Vec<MarkerTrack>, rate_hz: f64, vertical_axis: Axis) -> Result<Self> {
        if !(rate_hz.is_finite() && rate_hz > 0.0) {
            return Err(Error::Validation(format!(
                "marker rate must be positive, got {rate_hz}"
            )));
        }
        if markers.is_empty() {
            return Err(Error::Format("marker recording has no markers".into()));
        }
        let len = markers[0].axes[0].len();
        for m in &markers {
            for axis in &m.axes {
                axis.require_unit(Unit::Millimetres)?;
                if axis.len() != len {
                    return Err(Error::Format(format!(
                        "marker {:?} axis length {} differs from {len}",
                        m.name,
                        axis.len()
                    )));
                }
                if axis.rate_hz() != rate_hz {
                    return Err(Error::Validation(format!(
                        "marker {:?} rate {} differs from recording rate {rate_hz}",
                        m.name,
                        axis.rate_hz()
                    )));
                }
            }
        }
        Ok(Self {
            markers,
            rate_hz,
            vertical_axis,
        })
    }

    pub fn markers(&self) -> &[MarkerTrack] {
        &self.markers
    }

    pub fn rate_hz(&self) -> f64 {
        self.rate_hz
    }

    pub fn vertical_axis(&self) -> Axis {
        self.vertical_axis
    }

    pub fn len(&self) -> usize {
        self.markers[0].axes[0].len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn marker(&self, name: &str) -> Result<&MarkerTrack> {
        self.markers
            .iter()
            .find(|m| m.name == name)
            .ok_or_else(|| Error::Lookup(name.to_string()))
    }
}

/// Vertical ground-reaction force in newtons.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ForceTrace {
    force: TimeSeries,
}

impl ForceTrace {
    pub fn new(force: TimeSeries) -> Result<Self> {
        force.require_unit(Unit::Newtons)?;
        Ok(Self { force })
    }

    pub fn force(&self) -> &TimeSeries {
        &self.force
    }

    pub fn rate_hz(&self) -> f64 {
        self.force.rate_hz()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Task {
    Bilateral,
    Unilateral,
}

impl Task {
    pub fn label(self) -> &'static str {
        match self {
            Task::Bilateral => "bilateral",
            Task::Unilateral => "unilateral",
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "bilateral" | "bl" => Ok(Task::Bilateral),
            "unilateral" | "ul" => Ok(Task::Unilateral),
            other => Err(Error::Format(format!("unknown task {other:?}"))),
        }
    }
}

/// Capture modality a segment was cut from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Modality {
    Mmc,
    Omc,
    Fp,
}

/// How a jump height was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Method {
    Fp,
    Omc,
    Rmm,
    Ptm,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Fp, Method::Omc, Method::Rmm, Method::Ptm];

    pub fn label(self) -> &'static str {
        match self {
            Method::Fp => "FP",
            Method::Omc => "OMC",
            Method::Rmm => "RMM",
            Method::Ptm => "PTM",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "FP" => Ok(Method::Fp),
            "OMC" => Ok(Method::Omc),
            "RMM" => Ok(Method::Rmm),
            "PTM" => Ok(Method::Ptm),
            other => Err(Error::Format(format!("unknown method {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RepetitionId {
    pub participant: String,
    pub task: Task,
    /// 1-based, in time order.
    pub rep: u32,
}

impl fmt::Display for RepetitionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}/rep{}", self.participant, self.task, self.rep)
    }
}

/// One repetition's vertical displacement, with its apex.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JumpSegment {
    displacement: TimeSeries,
    apex_index: usize,
    /// Offset of the first sample within the series the segment was cut from.
    start_index: usize,
    source: Modality,
    repetition: Option<RepetitionId>,
}

impl JumpSegment {
    pub fn new(
        displacement: TimeSeries,
        apex_index: usize,
        start_index: usize,
        source: Modality,
        repetition: Option<RepetitionId>,
    ) -> Result<Self> {
        if apex_index >= displacement.len() {
            return Err(Error::Argument(format!(
                "apex index {apex_index} outside segment of length {}",
                displacement.len()
            )));
        }
        if displacement.samples()[apex_index] < displacement.max() {
            return Err(Error::Argument(format!(
                "apex index {apex_index} is not the segment maximum"
            )));
        }
        Ok(Self {
            displacement,
            apex_index,
            start_index,
            source,
            repetition,
        })
    }

    /// Segment whose apex is the first maximum of `displacement`.
    pub fn from_displacement(
        displacement: TimeSeries,
        start_index: usize,
        source: Modality,
        repetition: Option<RepetitionId>,
    ) -> Self {
        let apex_index = displacement.argmax();
        Self {
            displacement,
            apex_index,
            start_index,
            source,
            repetition,
        }
    }

    pub fn displacement(&self) -> &TimeSeries {
        &self.displacement
    }

    pub fn apex_index(&self) -> usize {
        self.apex_index
    }

    pub fn start_index(&self) -> usize {
        self.start_index
    }

    /// One past the last sample, in source-series indices.
    pub fn end_index(&self) -> usize {
        self.start_index + self.displacement.len()
    }

    pub fn source(&self) -> Modality {
        self.source
    }

    pub fn repetition(&self) -> Option<&RepetitionId> {
        self.repetition.as_ref()
    }

    pub fn with_repetition(mut self, id: RepetitionId) -> Self {
        self.repetition = Some(id);
        self
    }

    pub fn apex_time_s(&self) -> f64 {
        self.displacement.time_of(self.apex_index)
    }

    pub fn start_time_s(&self) -> f64 {
        self.displacement.start_s()
    }

    pub fn end_time_s(&self) -> f64 {
        self.displacement.time_of(self.displacement.len() - 1)
    }

    /// Cut the same sample range out of another series recorded at the same rate.
    pub fn cut(&self, other: &TimeSeries) -> Result<TimeSeries> {
        other.slice(self.start_index, self.end_index())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Constants {
    /// Gravitational acceleration, m/s².
    pub g: f64,
}

impl Constants {
    pub fn new(g: f64) -> Result<Self> {
        if !(g.is_finite() && g > 0.0) {
            return Err(Error::Validation(format!("g must be positive, got {g}")));
        }
        Ok(Self { g })
    }
}

impl Default for Constants {
    fn default() -> Self {
        Self { g: 9.81 }
    }
}
