use cmj_core::ingest::{
    parse_force, parse_force_str, parse_keypoints, parse_keypoints_str, parse_markers,
    parse_markers_str, write_force_string, write_keypoints_string, write_markers_string,
    SessionManifest,
};
use cmj_core::model::{
    Axis, ForceTrace, Keypoint, KeypointFrame, KeypointRecording, MarkerRecording, MarkerTrack,
    TimeSeries, Unit,
};
use cmj_core::synth::{generate, SynthJumpSpec};
use proptest::prelude::*;

fn keypoints(cells: Vec<Vec<(f64, f64, f64)>>, fps: f64) -> KeypointRecording {
    let k = cells[0].len();
    let frames = cells
        .into_iter()
        .enumerate()
        .map(|(index, row)| KeypointFrame {
            index,
            joints: row
                .into_iter()
                .map(|(x, y, confidence)| Keypoint { x, y, confidence })
                .collect(),
        })
        .collect();
    let names = (0..k).map(|j| format!("J{j}")).collect();
    KeypointRecording::new(frames, fps, names, 720).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn keypoints_survive_write_and_parse(
        (k, cells) in (1usize..4).prop_flat_map(|k| (Just(k), prop::collection::vec(
            prop::collection::vec((-1e4..1e4f64, -1e4..1e4f64, 0.0..=1.0f64), k), 1..30))),
        fps in 1.0..240.0f64,
    ) {
        let rec = keypoints(cells, fps);
        prop_assert_eq!(rec.joint_count(), k);
        let back = parse_keypoints_str(&write_keypoints_string(&rec)).unwrap();
        prop_assert_eq!(back, rec);
    }

    #[test]
    fn markers_survive_write_and_parse(
        rows in prop::collection::vec(prop::collection::vec(-5e3..5e3f64, 6), 2..40),
        rate in prop::sample::select(vec![50.0, 100.0, 200.0, 250.0]),
    ) {
        let col = |c: usize| TimeSeries::new(rows.iter().map(|r| r[c]).collect(), rate, Unit::Millimetres).unwrap();
        let tracks = vec![
            MarkerTrack { name: "hip".into(), axes: [col(0), col(1), col(2)] },
            MarkerTrack { name: "toe".into(), axes: [col(3), col(4), col(5)] },
        ];
        let rec = MarkerRecording::new(tracks, rate, Axis::Z).unwrap();
        let back = parse_markers_str(&write_markers_string(&rec)).unwrap();
        prop_assert_eq!(back, rec);
    }

    #[test]
    fn force_survives_write_and_parse(
        samples in prop::collection::vec(-50.0..3000.0f64, 2..200),
        rate in prop::sample::select(vec![500.0, 1000.0, 2000.0]),
    ) {
        let trace = ForceTrace::new(TimeSeries::new(samples, rate, Unit::Newtons).unwrap()).unwrap();
        let back = parse_force_str(&write_force_string(&trace)).unwrap();
        prop_assert_eq!(back, trace);
    }
}

#[test]
fn synthetic_files_read_back_unchanged() {
    let dir = tempfile::tempdir().unwrap();
    let s = generate(&SynthJumpSpec {
        noise_px_sd: 1.5,
        noise_mm_sd: 0.4,
        noise_n_sd: 3.0,
        spikes: 2,
        seed: 17,
        ..Default::default()
    })
    .unwrap();
    let manifest_path = s.write_to(dir.path()).unwrap();
    let m = SessionManifest::load(&manifest_path).unwrap();
    assert_eq!(m, s.manifest(dir.path()));
    assert_eq!(
        parse_keypoints(m.keypoints.as_ref().unwrap()).unwrap(),
        s.keypoints
    );
    assert_eq!(
        parse_markers(m.markers.as_ref().unwrap()).unwrap(),
        s.markers
    );
    assert_eq!(parse_force(m.force.as_ref().unwrap()).unwrap(), s.force);
}

#[test]
fn same_seed_writes_identical_bytes() {
    let spec = SynthJumpSpec {
        noise_px_sd: 2.0,
        noise_n_sd: 2.0,
        spikes: 3,
        seed: 99,
        ..Default::default()
    };
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    generate(&spec).unwrap().write_to(a.path()).unwrap();
    generate(&spec).unwrap().write_to(b.path()).unwrap();
    for name in ["keypoints.txt", "markers.csv", "force.csv", "truth.json"] {
        let x = std::fs::read(a.path().join(name)).unwrap();
        let y = std::fs::read(b.path().join(name)).unwrap();
        assert!(!x.is_empty() && x == y, "{name} differs");
    }
    let other = SynthJumpSpec { seed: 100, ..spec };
    let c = tempfile::tempdir().unwrap();
    generate(&other).unwrap().write_to(c.path()).unwrap();
    assert_ne!(
        std::fs::read(a.path().join("keypoints.txt")).unwrap(),
        std::fs::read(c.path().join("keypoints.txt")).unwrap()
    );
}
