//! Replay, campaign and labeling behaviour on real rollouts.

use std::fs;
use std::path::PathBuf;

use aquagrasp::controller::{yaw_step, PdState};
use aquagrasp::harness::{
    label_episodes, read_rgb_png, replay, run_campaign, run_episode, target_centroid, CampaignSpec, DumpMode,
    EpisodeOutput, EpisodeRecord, EpisodeSpec, LabelOptions, CENTROID_RGB, CSV_HEADER, ERRORS_CSV,
};
use aquagrasp::io::file_checksum;
use aquagrasp::labeling::{read_array, read_manifest, verify_dataset, SAMPLE_SIZE};

fn recorded(dir: &std::path::Path, id: u64, seed: u64) -> EpisodeRecord {
    let spec = EpisodeSpec::default();
    run_episode(&spec, id, seed, seed, Some(EpisodeOutput { dir, dump: DumpMode::All })).unwrap()
}

#[test]
fn replay_marks_the_logged_centroid() {
    let dir = tempfile::tempdir().unwrap();
    let rec = recorded(dir.path(), 0, 3);
    let out = dir.path().join("replay");
    let summary = replay(dir.path(), &out).unwrap();
    assert_eq!(summary.frames, rec.frames.len());
    let mut checked = 0;
    for f in rec.frames.iter().step_by(7) {
        let img = read_rgb_png(&out.join(format!("frame_{:05}.png", f.index))).unwrap();
        assert_eq!((img.width, img.height), (224, 160));
        if let Some([u, v]) = target_centroid(f) {
            let (u, v) = (u.round() as usize, v.round() as usize);
            if u < 224 && v < 160 {
                assert_eq!(img.get(u, v), CENTROID_RGB, "frame {}", f.index);
                checked += 1;
            }
        }
    }
    assert!(checked > 10);
}

#[test]
fn error_table_reproduces_the_yaw_law() {
    let dir = tempfile::tempdir().unwrap();
    let rec = recorded(dir.path(), 0, 8);
    let out = dir.path().join("replay");
    replay(dir.path(), &out).unwrap();
    let text = fs::read_to_string(out.join(ERRORS_CSV)).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(header, CSV_HEADER.split(',').collect::<Vec<_>>());
    let col = |name: &str| header.iter().position(|h| *h == name).unwrap();
    let gains = EpisodeSpec::default().controller.yaw;
    let mut rows = 0;
    for line in lines {
        let cells: Vec<&str> = line.split(',').collect();
        assert_eq!(cells.len(), header.len());
        if cells[col("centroid_u")].is_empty() {
            continue;
        }
        let num = |name: &str| cells[col(name)].parse::<f64>().unwrap();
        let prev = cells[col("yaw_prev_error")];
        let state = PdState {
            prev_error: (!prev.is_empty()).then(|| prev.parse().unwrap()),
            derivative: num("yaw_prev_derivative"),
        };
        let (u, _) = yaw_step(num("centroid_u"), num("centerline"), state, &gains, 0.1);
        assert_eq!(u, num("yaw_command"), "row {line}");
        assert_eq!(num("yaw_error"), num("centerline") - num("centroid_u"));
        rows += 1;
    }
    assert!(rows > rec.frames.len() / 2);
}

#[test]
fn replay_without_dumps_reports_missing_frames() {
    let dir = tempfile::tempdir().unwrap();
    let spec = EpisodeSpec::default();
    run_episode(&spec, 0, 1, 1, Some(EpisodeOutput { dir: dir.path(), dump: DumpMode::None })).unwrap();
    let err = replay(dir.path(), &dir.path().join("r")).unwrap_err();
    assert!(matches!(err, aquagrasp::harness::HarnessError::MissingFrameData(_)), "{err}");
}

#[test]
fn campaigns_are_reproducible_across_worker_counts() {
    let dir = tempfile::tempdir().unwrap();
    let spec = CampaignSpec::from_toml("name = \"det\"\nn_episodes = 4\nseed_base = 9\n[episode.sim]\nn_objects = 2\n").unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let ra = run_campaign(&spec, Some(&a), 1).unwrap();
    let rb = run_campaign(&spec, Some(&b), 2).unwrap();
    assert_eq!(ra, rb);
    assert_eq!(file_checksum(&a.join("report.json")).unwrap(), file_checksum(&b.join("report.json")).unwrap());
    assert_eq!(ra.accounted(), 4);
}

#[test]
fn multi_episode_dataset_keeps_splits_apart() {
    let dir = tempfile::tempdir().unwrap();
    let mut dirs: Vec<PathBuf> = Vec::new();
    for (id, seed) in [(0u64, 30u64), (1, 31), (2, 32), (3, 33), (4, 34)] {
        let d = dir.path().join(format!("ep{id}"));
        let rec = recorded(&d, id, seed);
        if rec.success() {
            dirs.push(d);
        }
    }
    assert!(dirs.len() >= 3, "need a few successes");
    let out = dir.path().join("dataset");
    let opts = LabelOptions { val_fraction: 0.4, ..LabelOptions::default() };
    let s = label_episodes(&dirs, &out, &opts).unwrap();
    let m = read_manifest(&out).unwrap();
    assert_eq!(m, s.manifest);
    assert!(!m.splits.validation.is_empty());
    assert!(m.splits.train.iter().all(|id| !m.splits.validation.contains(id)));
    verify_dataset(&out, &m).unwrap();
    let e = &m.samples[0];
    let target = read_array(&out.join(&e.target)).unwrap();
    assert_eq!((target.width, target.height), (SAMPLE_SIZE, SAMPLE_SIZE));
    assert_eq!(target.get(e.target_pixel[0], e.target_pixel[1]), 1.0);
    for ep in &s.episodes {
        assert!(ep.track_file.exists());
        let n = m.samples.iter().filter(|x| x.episode == ep.episode_id).count();
        assert_eq!(n, ep.track.points.iter().filter(|p| p.visible && p.frame <= ep.closure.index).count());
    }
}
