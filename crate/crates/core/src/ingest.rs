//! Readers and writers for the three recording formats and the session manifest.
//!
//! Keypoints (line-oriented text):
//!
//! ```text
//! #fps=30
//! #image_height=720
//! #joints=MidHip,RSmallToe
//! 0, 412.5,380.1,0.91, 430.0,674.2,0.88
//! ```
//!
//! Markers (comma-separated, millimetres):
//!
//! ```text
//! #rate_hz=100
//! time_s,hip_x,hip_y,hip_z,toe_x,toe_y,toe_z
//! 0,0,0,950,120,0,20
//! ```
//!
//! Force (comma-separated, newtons): either `time_s,fz_n` columns or a single
//! `fz_n` column with a `#rate_hz=` line.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::kv::KvFile;
use crate::model::{
    flip_image_vertical, Axis, ForceTrace, Keypoint, KeypointFrame, KeypointRecording,
    MarkerRecording, MarkerTrack, Task, TimeSeries, Unit,
};

/// Tolerance on time-column spacing, in seconds.
const TIME_TOLERANCE_S: f64 = 1e-6;

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn parse_cell(cell: &str, row: usize, column: usize) -> Result<f64> {
    let cell = cell.trim();
    match cell.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(Error::Parse {
            row,
            column,
            value: cell.to_string(),
        }),
    }
}

fn parse_rate(value: &str, what: &str) -> Result<f64> {
    let rate: f64 = value
        .trim()
        .parse()
        .map_err(|_| Error::Format(format!("cannot parse {what} {value:?}")))?;
    if !(rate.is_finite() && rate > 0.0) {
        return Err(Error::Validation(format!(
            "{what} must be positive, got {rate}"
        )));
    }
    Ok(rate)
}

/// Splits a `#key=value` header line.
fn header_pair(line: &str) -> Option<(&str, &str)> {
    let body = line.strip_prefix('#')?;
    let (k, v) = body.split_once('=')?;
    Some((k.trim(), v.trim()))
}

pub fn parse_keypoints(path: impl AsRef<Path>) -> Result<KeypointRecording> {
    parse_keypoints_str(&read(path.as_ref())?)
}

pub fn parse_keypoints_str(text: &str) -> Result<KeypointRecording> {
    let mut fps = None;
    let mut image_height = None;
    let mut joints: Option<Vec<String>> = None;
    let mut frames = Vec::new();

    for (lineno, raw) in text.lines().enumerate() {
        let row = lineno + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if line.starts_with('#') {
            match header_pair(line) {
                Some(("fps", v)) => fps = Some(parse_rate(v, "fps")?),
                Some(("image_height", v)) => {
                    let h: u32 = v.parse().map_err(|_| {
                        Error::Format(format!("line {row}: bad image_height {v:?}"))
                    })?;
                    if h == 0 {
                        return Err(Error::Validation("image_height must be positive".into()));
                    }
                    image_height = Some(h);
                }
                Some(("joints", v)) => {
                    joints = Some(v.split(',').map(|s| s.trim().to_string()).collect());
                }
                _ => {}
            }
            continue;
        }
        let k = joints
            .as_ref()
            .ok_or_else(|| Error::Format("frame data before #joints header".into()))?
            .len();
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != 1 + 3 * k {
            return Err(Error::Format(format!(
                "line {row}: {} values, expected {} for {k} joints",
                cells.len(),
                1 + 3 * k
            )));
        }
        let index: usize = cells[0].trim().parse().map_err(|_| Error::Parse {
            row,
            column: 1,
            value: cells[0].trim().to_string(),
        })?;
        let mut kps = Vec::with_capacity(k);
        for j in 0..k {
            let base = 1 + 3 * j;
            kps.push(Keypoint {
                x: parse_cell(cells[base], row, base + 1)?,
                y: parse_cell(cells[base + 1], row, base + 2)?,
                confidence: parse_cell(cells[base + 2], row, base + 3)?,
            });
        }
        frames.push(KeypointFrame { index, joints: kps });
    }

    let fps = fps.ok_or_else(|| Error::Format("missing #fps header".into()))?;
    let image_height =
        image_height.ok_or_else(|| Error::Format("missing #image_height header".into()))?;
    let joints = joints.ok_or_else(|| Error::Format("missing #joints header".into()))?;
    KeypointRecording::new(frames, fps, joints, image_height)
}

pub fn write_keypoints_string(rec: &KeypointRecording) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "#fps={}", rec.fps());
    let _ = writeln!(out, "#image_height={}", rec.image_height_px());
    let _ = writeln!(out, "#joints={}", rec.joint_names().join(","));
    for frame in rec.frames() {
        let _ = write!(out, "{}", frame.index);
        for kp in &frame.joints {
            let _ = write!(out, ",{},{},{}", kp.x, kp.y, kp.confidence);
        }
        out.push('\n');
    }
    out
}

pub fn write_keypoints(rec: &KeypointRecording, path: impl AsRef<Path>) -> Result<()> {
    write(path.as_ref(), &write_keypoints_string(rec))
}

/// Comment headers and numeric body of a comma-separated table.
struct Table {
    headers: Vec<(String, String)>,
    columns: Option<Vec<String>>,
    rows: Vec<Vec<f64>>,
}

impl Table {
    fn header(&self, key: &str) -> Option<&str> {
        self.headers
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }
}

fn parse_table(text: &str, require_header_row: bool) -> Result<Table> {
    let mut headers = Vec::new();
    let mut columns: Option<Vec<String>> = None;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let row = lineno + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if line.starts_with('#') {
            if let Some((k, v)) = header_pair(line) {
                headers.push((k.to_string(), v.to_string()));
            }
            continue;
        }
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        if columns.is_none() && rows.is_empty() {
            let numeric = cells.iter().all(|c| c.parse::<f64>().is_ok());
            if !numeric || require_header_row {
                columns = Some(cells.iter().map(|s| s.to_string()).collect());
                continue;
            }
        }
        let width = columns
            .as_ref()
            .map(Vec::len)
            .or_else(|| rows.first().map(Vec::len))
            .unwrap_or(cells.len());
        if cells.len() != width {
            return Err(Error::Format(format!(
                "line {row}: {} columns, expected {width}",
                cells.len()
            )));
        }
        let values = cells
            .iter()
            .enumerate()
            .map(|(c, cell)| parse_cell(cell, row, c + 1))
            .collect::<Result<Vec<_>>>()?;
        rows.push(values);
    }
    if rows.is_empty() {
        return Err(Error::Format("no data rows".into()));
    }
    Ok(Table {
        headers,
        columns,
        rows,
    })
}

/// Resolves the sample rate from an optional `#rate_hz` header and an
/// optional time column; checks uniform spacing of the latter.
fn resolve_rate(header_rate: Option<&str>, times: Option<&[f64]>) -> Result<(f64, f64)> {
    let declared = header_rate.map(|v| parse_rate(v, "rate_hz")).transpose()?;
    let Some(times) = times else {
        let rate = declared
            .ok_or_else(|| Error::Format("no time column and no #rate_hz header".into()))?;
        return Ok((rate, 0.0));
    };
    let start = times[0];
    let step = match (declared, times.len()) {
        (Some(rate), _) => 1.0 / rate,
        (None, n) if n >= 2 => (times[n - 1] - times[0]) / (n - 1) as f64,
        (None, _) => {
            return Err(Error::Format(
                "cannot infer rate from a single sample".into(),
            ))
        }
    };
    if !(step > 0.0) {
        return Err(Error::Validation(format!(
            "time column implies non-positive rate (step {step})"
        )));
    }
    for (i, &t) in times.iter().enumerate() {
        let expected = start + i as f64 * step;
        if (t - expected).abs() > TIME_TOLERANCE_S {
            return Err(Error::Format(format!(
                "non-uniform sampling: sample {i} at {t} s, expected {expected} s"
            )));
        }
    }
    Ok((declared.unwrap_or(1.0 / step), start))
}

pub fn parse_markers(path: impl AsRef<Path>) -> Result<MarkerRecording> {
    parse_markers_str(&read(path.as_ref())?)
}

pub fn parse_markers_str(text: &str) -> Result<MarkerRecording> {
    let table = parse_table(text, true)?;
    let columns = table.columns.clone().unwrap_or_default();
    let has_time = columns.first().is_some_and(|c| c == "time_s");
    let times: Option<Vec<f64>> = has_time.then(|| table.rows.iter().map(|r| r[0]).collect());
    let (rate, start) = resolve_rate(table.header("rate_hz"), times.as_deref())?;
    let vertical_axis = match table.header("vertical_axis") {
        Some(v) => v.parse()?,
        None => Axis::Z,
    };

    // marker name -> column index per axis, in order of first appearance
    let mut layout: Vec<(String, [Option<usize>; 3])> = Vec::new();
    for (c, name) in columns.iter().enumerate().skip(usize::from(has_time)) {
        let (marker, axis) = name
            .rsplit_once('_')
            .and_then(|(m, a)| a.parse::<Axis>().ok().map(|a| (m, a)))
            .ok_or_else(|| Error::Format(format!("column {name:?} is not <marker>_<x|y|z>")))?;
        let slot = match layout.iter().position(|(m, _)| m == marker) {
            Some(i) => i,
            None => {
                layout.push((marker.to_string(), [None; 3]));
                layout.len() - 1
            }
        };
        if layout[slot].1[axis.index()].replace(c).is_some() {
            return Err(Error::Format(format!("duplicate column {name:?}")));
        }
    }

    let mut markers = Vec::with_capacity(layout.len());
    for (name, cols) in layout {
        let mut axes = Vec::with_capacity(3);
        for (a, col) in cols.iter().enumerate() {
            let col = col.ok_or_else(|| {
                Error::Format(format!(
                    "marker {name:?} has no {} column",
                    ["x", "y", "z"][a]
                ))
            })?;
            let values = table.rows.iter().map(|r| r[col]).collect();
            axes.push(TimeSeries::with_start(
                values,
                rate,
                Unit::Millimetres,
                start,
            )?);
        }
        let axes: [TimeSeries; 3] = axes.try_into().expect("three axes");
        markers.push(MarkerTrack { name, axes });
    }
    MarkerRecording::new(markers, rate, vertical_axis)
}

pub fn write_markers_string(rec: &MarkerRecording) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "#rate_hz={}", rec.rate_hz());
    if rec.vertical_axis() != Axis::Z {
        let _ = writeln!(out, "#vertical_axis={}", rec.vertical_axis().suffix());
    }
    out.push_str("time_s");
    for m in rec.markers() {
        for axis in [Axis::X, Axis::Y, Axis::Z] {
            let _ = write!(out, ",{}_{}", m.name, axis.suffix());
        }
    }
    out.push('\n');
    let first = &rec.markers()[0].axes[0];
    for i in 0..rec.len() {
        let _ = write!(out, "{}", first.time_of(i));
        for m in rec.markers() {
            for axis in &m.axes {
                let _ = write!(out, ",{}", axis.samples()[i]);
            }
        }
        out.push('\n');
    }
    out
}

pub fn write_markers(rec: &MarkerRecording, path: impl AsRef<Path>) -> Result<()> {
    write(path.as_ref(), &write_markers_string(rec))
}

pub fn parse_force(path: impl AsRef<Path>) -> Result<ForceTrace> {
    parse_force_str(&read(path.as_ref())?)
}

pub fn parse_force_str(text: &str) -> Result<ForceTrace> {
    let table = parse_table(text, false)?;
    let width = table.rows[0].len();
    let (times, fz): (Option<Vec<f64>>, Vec<f64>) = match width {
        1 => (None, table.rows.iter().map(|r| r[0]).collect()),
        2 => (
            Some(table.rows.iter().map(|r| r[0]).collect()),
            table.rows.iter().map(|r| r[1]).collect(),
        ),
        n => {
            return Err(Error::Format(format!(
                "force file has {n} columns, expected 1 or 2"
            )))
        }
    };
    if let Some(cols) = &table.columns {
        let expected: &[&str] = if width == 1 {
            &["fz_n"]
        } else {
            &["time_s", "fz_n"]
        };
        if cols.iter().map(String::as_str).ne(expected.iter().copied()) {
            return Err(Error::Format(format!("unexpected force header {cols:?}")));
        }
    }
    let (rate, start) = resolve_rate(table.header("rate_hz"), times.as_deref())?;
    ForceTrace::new(TimeSeries::with_start(fz, rate, Unit::Newtons, start)?)
}

pub fn write_force_string(trace: &ForceTrace) -> String {
    let f = trace.force();
    let mut out = String::with_capacity(f.len() * 16);
    let _ = writeln!(out, "#rate_hz={}", f.rate_hz());
    out.push_str("time_s,fz_n\n");
    for (i, v) in f.samples().iter().enumerate() {
        let _ = writeln!(out, "{},{}", f.time_of(i), v);
    }
    out
}

pub fn write_force(trace: &ForceTrace, path: impl AsRef<Path>) -> Result<()> {
    write(path.as_ref(), &write_force_string(trace))
}

/// A vertical position series plus, for keypoints, the matching confidences.
#[derive(Debug, Clone, PartialEq)]
pub struct VerticalTrack {
    pub position: TimeSeries,
    pub confidence: Option<TimeSeries>,
}

pub trait VerticalSource {
    /// Up-positive vertical position of the named joint or marker.
    fn extract_vertical(&self, name: &str) -> Result<VerticalTrack>;
}

impl VerticalSource for KeypointRecording {
    fn extract_vertical(&self, name: &str) -> Result<VerticalTrack> {
        let y = self.joint_y(name)?;
        Ok(VerticalTrack {
            position: flip_image_vertical(&y, self.image_height_px())?,
            confidence: Some(self.joint_confidence(name)?),
        })
    }
}

impl VerticalSource for MarkerRecording {
    fn extract_vertical(&self, name: &str) -> Result<VerticalTrack> {
        let track = self.marker(name)?;
        Ok(VerticalTrack {
            position: track.axes[self.vertical_axis().index()].clone(),
            confidence: None,
        })
    }
}

pub const DEFAULT_HIP_JOINT: &str = "MidHip";
pub const DEFAULT_TOE_JOINT: &str = "RSmallToe";
pub const DEFAULT_HIP_MARKER: &str = "hip";
pub const DEFAULT_TOE_MARKER: &str = "toe";

/// One participant/task recording session and where its files live.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SessionManifest {
    pub participant_id: String,
    pub task: Task,
    pub keypoints: Option<PathBuf>,
    pub markers: Option<PathBuf>,
    pub force: Option<PathBuf>,
    pub hip_joint: String,
    pub toe_joint: String,
    pub hip_marker: String,
    pub toe_marker: String,
    pub fps: Option<f64>,
    pub omc_hz: Option<f64>,
    pub fp_hz: Option<f64>,
}

impl SessionManifest {
    pub fn new(participant_id: impl Into<String>, task: Task) -> Self {
        Self {
            participant_id: participant_id.into(),
            task,
            keypoints: None,
            markers: None,
            force: None,
            hip_joint: DEFAULT_HIP_JOINT.into(),
            toe_joint: DEFAULT_TOE_JOINT.into(),
            hip_marker: DEFAULT_HIP_MARKER.into(),
            toe_marker: DEFAULT_TOE_MARKER.into(),
            fps: None,
            omc_hz: None,
            fp_hz: None,
        }
    }

    /// Reads a manifest; relative file paths resolve against its directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        Self::parse_str(&read(path)?, base)
    }

    pub fn parse_str(text: &str, base_dir: &Path) -> Result<Self> {
        let mut kv = KvFile::parse(text)?;
        let participant = kv
            .take("participant")
            .ok_or_else(|| Error::Format("manifest missing `participant`".into()))?;
        let task: Task = kv
            .take("task")
            .ok_or_else(|| Error::Format("manifest missing `task`".into()))?
            .parse()?;
        let mut m = Self::new(participant, task);
        let resolve = |p: String| {
            let p = PathBuf::from(p);
            if p.is_absolute() {
                p
            } else {
                base_dir.join(p)
            }
        };
        m.keypoints = kv.take("keypoints").map(resolve);
        m.markers = kv.take("markers").map(resolve);
        m.force = kv.take("force").map(resolve);
        if let Some(v) = kv.take("hip_joint") {
            m.hip_joint = v;
        }
        if let Some(v) = kv.take("toe_joint") {
            m.toe_joint = v;
        }
        if let Some(v) = kv.take("hip_marker") {
            m.hip_marker = v;
        }
        if let Some(v) = kv.take("toe_marker") {
            m.toe_marker = v;
        }
        m.fps = kv.take_parsed("fps")?;
        m.omc_hz = kv.take_parsed("omc_hz")?;
        m.fp_hz = kv.take_parsed("fp_hz")?;
        kv.finish()?;
        for (name, rate) in [("fps", m.fps), ("omc_hz", m.omc_hz), ("fp_hz", m.fp_hz)] {
            if let Some(r) = rate {
                if !(r.is_finite() && r > 0.0) {
                    return Err(Error::Validation(format!(
                        "{name} must be positive, got {r}"
                    )));
                }
            }
        }
        Ok(m)
    }

    /// Serializes with paths written relative to `base_dir` when possible.
    pub fn to_kv_string(&self, base_dir: &Path) -> String {
        let rel = |p: &PathBuf| {
            p.strip_prefix(base_dir)
                .unwrap_or(p)
                .to_string_lossy()
                .into_owned()
        };
        let mut out = String::new();
        let _ = writeln!(out, "participant = {}", self.participant_id);
        let _ = writeln!(out, "task = {}", self.task);
        for (key, p) in [
            ("keypoints", &self.keypoints),
            ("markers", &self.markers),
            ("force", &self.force),
        ] {
            if let Some(p) = p {
                let _ = writeln!(out, "{key} = {}", rel(p));
            }
        }
        let _ = writeln!(out, "hip_joint = {}", self.hip_joint);
        let _ = writeln!(out, "toe_joint = {}", self.toe_joint);
        let _ = writeln!(out, "hip_marker = {}", self.hip_marker);
        let _ = writeln!(out, "toe_marker = {}", self.toe_marker);
        for (key, r) in [
            ("fps", self.fps),
            ("omc_hz", self.omc_hz),
            ("fp_hz", self.fp_hz),
        ] {
            if let Some(r) = r {
                let _ = writeln!(out, "{key} = {r}");
            }
        }
        out
    }
}

/// Checks a file's rate against the manifest's declared one.
pub(crate) fn check_declared_rate(what: &str, declared: Option<f64>, actual: f64) -> Result<()> {
    match declared {
        Some(d) if (d - actual).abs() > 1e-9 * d.max(actual) => Err(Error::Validation(format!(
            "{what}: manifest declares {d} Hz but file has {actual} Hz"
        ))),
        _ => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keypoints_two_frames() {
        let text = "#fps=30\n#image_height=720\n#joints=hip,toe\n\
                    0, 10,700,0.9, 12,698,0.8\n1, 11,690,0.95, 13,688,0.85\n";
        let rec = parse_keypoints_str(text).unwrap();
        assert_eq!(rec.frames().len(), 2);
        assert_eq!(rec.joint_count(), 2);
        assert_eq!(rec.frames()[1].joints[1].y, 688.0);
        assert_eq!(rec.frames()[0].joints[0].confidence, 0.9);
    }

    #[test]
    fn keypoint_confidence_out_of_range() {
        let text = "#fps=30\n#image_height=720\n#joints=hip\n0, 10,700,1.2\n";
        assert!(matches!(
            parse_keypoints_str(text),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn keypoint_empty_frames() {
        let text = "#fps=30\n#image_height=720\n#joints=hip\n";
        assert!(matches!(parse_keypoints_str(text), Err(Error::Format(_))));
    }

    #[test]
    fn keypoint_gap_lists_missing() {
        let text = "#fps=30\n#image_height=720\n#joints=hip\n0,1,1,1\n1,1,1,1\n4,1,1,1\n";
        match parse_keypoints_str(text) {
            Err(Error::FrameGap { missing }) => assert_eq!(missing, vec![2, 3]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn keypoint_ragged_row() {
        let text = "#fps=30\n#image_height=720\n#joints=hip,toe\n0,1,1,1\n";
        assert!(matches!(parse_keypoints_str(text), Err(Error::Format(_))));
    }

    #[test]
    fn markers_single_marker() {
        let text = "#rate_hz=100\ntime_s,toe_x,toe_y,toe_z\n0,1,2,0\n0.01,1,2,100\n0.02,1,2,0\n";
        let rec = parse_markers_str(text).unwrap();
        assert_eq!(rec.rate_hz(), 100.0);
        let z = rec.extract_vertical("toe").unwrap();
        assert_eq!(z.position.samples(), &[0.0, 100.0, 0.0]);
        assert_eq!(z.position.unit(), Unit::Millimetres);
        assert!(z.confidence.is_none());
    }

    #[test]
    fn markers_missing_axis() {
        let text = "#rate_hz=100\ntime_s,toe_x,toe_y\n0,1,2\n";
        assert!(matches!(parse_markers_str(text), Err(Error::Format(_))));
    }

    #[test]
    fn markers_zero_rate() {
        let text = "#rate_hz=0\ntime_s,toe_x,toe_y,toe_z\n0,1,2,3\n";
        assert!(matches!(parse_markers_str(text), Err(Error::Validation(_))));
    }

    #[test]
    fn markers_ragged_and_non_numeric() {
        let ragged = "#rate_hz=100\ntoe_x,toe_y,toe_z\n1,2,3\n1,2\n";
        assert!(matches!(parse_markers_str(ragged), Err(Error::Format(_))));
        let bad = "#rate_hz=100\ntoe_x,toe_y,toe_z\n1,2,3\n1,oops,3\n";
        match parse_markers_str(bad) {
            Err(Error::Parse { row, column, .. }) => assert_eq!((row, column), (4, 2)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn force_single_column() {
        let text = "#rate_hz=1000\nfz_n\n500\n500\n10\n10\n500\n";
        let f = parse_force_str(text).unwrap();
        assert_eq!(f.force().len(), 5);
        assert_eq!(f.rate_hz(), 1000.0);
    }

    #[test]
    fn force_time_column_checks_spacing() {
        let ok = "time_s,fz_n\n0,1\n0.001,2\n0.002,3\n";
        assert_eq!(parse_force_str(ok).unwrap().rate_hz(), 1000.0);
        let bad = "time_s,fz_n\n0,1\n0.001,2\n0.003,3\n";
        assert!(matches!(parse_force_str(bad), Err(Error::Format(_))));
    }

    #[test]
    fn force_empty_and_negative_rate() {
        assert!(matches!(parse_force_str(""), Err(Error::Format(_))));
        assert!(matches!(
            parse_force_str("#rate_hz=-5\nfz_n\n1\n"),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn vertical_from_keypoints_is_flipped() {
        let text = "#fps=30\n#image_height=720\n#joints=toe\n0,0,700,1\n1,0,600,1\n2,0,700,1\n";
        let rec = parse_keypoints_str(text).unwrap();
        let track = rec.extract_vertical("toe").unwrap();
        assert_eq!(track.position.samples(), &[20.0, 120.0, 20.0]);
        assert_eq!(track.confidence.unwrap().samples(), &[1.0, 1.0, 1.0]);
        assert!(matches!(
            rec.extract_vertical("ankle9"),
            Err(Error::Lookup(_))
        ));
    }

    #[test]
    fn manifest_round_trip() {
        let base = Path::new("/data/p01");
        let text = "participant = P01\ntask = bilateral\nkeypoints = kp.txt\nforce = /abs/f.csv\nfps = 30\n";
        let m = SessionManifest::parse_str(text, base).unwrap();
        assert_eq!(m.keypoints.as_deref(), Some(Path::new("/data/p01/kp.txt")));
        assert_eq!(m.force.as_deref(), Some(Path::new("/abs/f.csv")));
        assert!(m.markers.is_none());
        assert_eq!(m.hip_joint, DEFAULT_HIP_JOINT);
        let again = SessionManifest::parse_str(&m.to_kv_string(base), base).unwrap();
        assert_eq!(again, m);
    }

    #[test]
    fn manifest_rejects_bad_rates_and_keys() {
        let base = Path::new(".");
        assert!(SessionManifest::parse_str("participant=a\ntask=ul\nfps=0\n", base).is_err());
        assert!(SessionManifest::parse_str("participant=a\ntask=ul\nbogus=1\n", base).is_err());
        assert!(SessionManifest::parse_str("task=ul\n", base).is_err());
    }
}
