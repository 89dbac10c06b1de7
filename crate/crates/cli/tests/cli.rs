use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use aquagrasp::camera::{read_png_planes, write_png_planes};
use aquagrasp::harness::{CampaignReport, EpisodeRecord, EPISODES_DIR, RECORD_FILE};
use aquagrasp::image::Image;
use aquagrasp::io::file_checksum;
use aquagrasp::labeling::{read_manifest, MANIFEST_FILE};

fn aquagrasp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_aquagrasp")).args(args).env_remove("AQUAGRASP_LOG").output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn write_spec(dir: &Path, n: usize, seed: u64) -> PathBuf {
    let path = dir.join("campaign.toml");
    fs::write(&path, format!("name = \"cli\"\nn_episodes = {n}\nseed_base = {seed}\ndump_frames = \"successes\"\n")).unwrap();
    path
}

const IDENTITY_CALIB: &str = "
[source]
fx = 160.0
fy = 160.0
cx = 15.5
cy = 11.5
width = 32
height = 24

[target]
fx = 160.0
fy = 160.0
cx = 15.5
cy = 11.5
width = 32
height = 24
";

fn test_image() -> Vec<Image<f32>> {
    (0..3).map(|c| Image::from_fn(32, 24, |u, v| ((u * 7 + v * 13 + c * 40) % 256) as f32)).collect()
}

#[test]
fn collect_writes_a_deterministic_report() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(dir.path(), 2, 3);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = aquagrasp(&["collect", "--spec", p(&spec), "--out", p(out), "--jobs", "1"]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        assert!(String::from_utf8_lossy(&o.stdout).contains("success"));
    }
    for f in ["report.json", "report.txt", "successes.manifest"] {
        assert_eq!(file_checksum(&a.join(f)).unwrap(), file_checksum(&b.join(f)).unwrap(), "{f}");
    }
    let rec = Path::new(EPISODES_DIR).join("episode_00001").join(RECORD_FILE);
    assert_eq!(file_checksum(&a.join(&rec)).unwrap(), file_checksum(&b.join(&rec)).unwrap());
}

#[test]
fn seed_override_changes_only_the_seeds() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(dir.path(), 2, 0);
    let over = dir.path().join("override");
    assert_eq!(code(&aquagrasp(&["collect", "--spec", p(&spec), "--seed", "11", "--out", p(&over), "--jobs", "1"])), 0);
    let sub = dir.path().join("native_spec");
    fs::create_dir_all(&sub).unwrap();
    let spec11 = write_spec(&sub, 2, 11);
    let native = dir.path().join("native");
    assert_eq!(code(&aquagrasp(&["collect", "--spec", p(&spec11), "--out", p(&native), "--jobs", "1"])), 0);
    let (a, b) = (CampaignReport::read(&over).unwrap(), CampaignReport::read(&native).unwrap());
    assert_eq!(a, b);
    assert_eq!(a.seed_base, 11);
    assert_eq!(a.episodes.iter().map(|e| e.seed).collect::<Vec<_>>(), [11, 12]);
}

#[test]
fn missing_spec_is_a_config_error_naming_the_path() {
    let o = aquagrasp(&["collect", "--spec", "/nonexistent/spec.toml", "--out", "/tmp/unused"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("/nonexistent/spec.toml"), "{}", stderr(&o));
}

#[test]
fn invalid_spec_and_unknown_flags_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("bad.toml");
    fs::write(&spec, "n_episodes = 2\nbogus_key = 1\n").unwrap();
    assert_eq!(code(&aquagrasp(&["collect", "--spec", p(&spec), "--out", p(dir.path())])), 2);
    assert_eq!(code(&aquagrasp(&["collect", "--spec", p(&spec), "--frobnicate"])), 2);
    assert_eq!(code(&aquagrasp(&[])), 2);
}

#[test]
fn identity_warp_is_bit_exact_and_cache_agnostic() {
    let dir = tempfile::tempdir().unwrap();
    let calib = dir.path().join("calib.toml");
    fs::write(&calib, IDENTITY_CALIB).unwrap();
    let input = dir.path().join("in.png");
    write_png_planes(&input, &test_image()).unwrap();
    let plain = dir.path().join("plain.png");
    let o = aquagrasp(&["warp", "--calib", p(&calib), "--in", p(&input), "--out", p(&plain)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(read_png_planes(&plain).unwrap(), test_image());

    let cache = dir.path().join("cache");
    for name in ["cold.png", "warm.png"] {
        let out = dir.path().join(name);
        let o = aquagrasp(&["warp", "--calib", p(&calib), "--in", p(&input), "--out", p(&out), "--cache", p(&cache)]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        assert_eq!(file_checksum(&out).unwrap(), file_checksum(&plain).unwrap());
    }
    assert_eq!(fs::read_dir(&cache).unwrap().count(), 1);
}

#[test]
fn depth_warp_round_trips_raw_floats() {
    let dir = tempfile::tempdir().unwrap();
    let calib = dir.path().join("calib.toml");
    fs::write(&calib, IDENTITY_CALIB).unwrap();
    let depth = Image::from_fn(32, 24, |u, v| 0.5 + 0.01 * (u + v) as f32);
    let input = dir.path().join("in.f32");
    aquagrasp::camera::write_raw_depth(&input, &depth).unwrap();
    let out = dir.path().join("out.f32");
    let o = aquagrasp(&["warp", "--calib", p(&calib), "--in", p(&input), "--out", p(&out), "--depth", "--nearest"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(aquagrasp::camera::read_raw_depth(&out, 32, 24).unwrap(), depth);
}

#[test]
fn warp_error_codes() {
    let dir = tempfile::tempdir().unwrap();
    let calib = dir.path().join("calib.toml");
    fs::write(&calib, IDENTITY_CALIB).unwrap();
    let missing = dir.path().join("missing.png");
    let out = dir.path().join("out.png");
    assert_eq!(code(&aquagrasp(&["warp", "--calib", p(&calib), "--in", p(&missing), "--out", p(&out)])), 3);
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "[source]\nfx = \"wide\"\n").unwrap();
    let input = dir.path().join("in.png");
    write_png_planes(&input, &test_image()).unwrap();
    let o = aquagrasp(&["warp", "--calib", p(&bad), "--in", p(&input), "--out", p(&out)]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("source"), "{}", stderr(&o));
}

/// One dumped successful episode.
fn recorded_episode(dir: &Path) -> PathBuf {
    let spec = write_spec(dir, 1, 5);
    let out = dir.join("collect");
    assert_eq!(code(&aquagrasp(&["collect", "--spec", p(&spec), "--out", p(&out), "--jobs", "1"])), 0);
    out.join(EPISODES_DIR).join("episode_00000")
}

#[test]
fn label_exports_one_sample_per_visible_frame_and_is_repeatable() {
    let dir = tempfile::tempdir().unwrap();
    let ep = recorded_episode(dir.path());
    let (a, b) = (dir.path().join("la"), dir.path().join("lb"));
    for out in [&a, &b] {
        let o = aquagrasp(&["label", "--episode", p(&ep), "--out", p(out)]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        assert!(String::from_utf8_lossy(&o.stdout).contains("t_star"));
    }
    let m = read_manifest(&a).unwrap();
    assert_eq!(m.checksum, read_manifest(&b).unwrap().checksum);
    assert_eq!(file_checksum(&a.join(MANIFEST_FILE)).unwrap(), file_checksum(&b.join(MANIFEST_FILE)).unwrap());

    let rec = EpisodeRecord::load(&ep).unwrap();
    let t = aquagrasp::harness::labeling_closure(&rec, &Default::default()).unwrap().index;
    let track_file = a.join(format!("episode_{}", rec.episode_id)).join(aquagrasp::harness::CONTACT_TRACK_FILE);
    let track = aquagrasp::labeling::read_track(std::io::BufReader::new(fs::File::open(track_file).unwrap())).unwrap();
    let visible = track.points.iter().filter(|q| q.visible && q.frame <= t).count();
    assert_eq!(m.counts.samples, visible);
}

#[test]
fn label_without_closure_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let ep = recorded_episode(dir.path());
    let mut rec = EpisodeRecord::load(&ep).unwrap();
    rec.frames.iter_mut().for_each(|f| f.aperture = 1.0);
    rec.save(&ep).unwrap();
    let o = aquagrasp(&["label", "--episode", p(&ep), "--out", p(&dir.path().join("l"))]);
    assert_eq!(code(&o), 4, "{}", stderr(&o));
    assert_eq!(code(&aquagrasp(&["label", "--episode", "/nonexistent", "--out", p(dir.path())])), 3);
}

#[test]
fn suite_unknown_name_and_repeatability() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&aquagrasp(&["suite", "--name", "no_such_suite", "--out", p(dir.path())])), 2);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = aquagrasp(&["suite", "--name", "recovery_ablation", "--out", p(out), "--episodes", "2", "--jobs", "1"]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
    }
    assert_eq!(file_checksum(&a.join("suite.json")).unwrap(), file_checksum(&b.join("suite.json")).unwrap());
    assert!(a.join("regrasp_on").join("report.json").exists());
}

#[test]
fn replay_emits_frames() {
    let dir = tempfile::tempdir().unwrap();
    let ep = recorded_episode(dir.path());
    let out = dir.path().join("replay");
    let o = aquagrasp(&["replay", "--record", p(&ep), "--out", p(&out)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let n = EpisodeRecord::load(&ep).unwrap().frames.len();
    let pngs = fs::read_dir(&out).unwrap().filter(|e| e.as_ref().unwrap().path().extension().is_some_and(|x| x == "png")).count();
    assert_eq!(pngs, n);
    assert_eq!(fs::read_to_string(out.join("errors.csv")).unwrap().lines().count(), n + 1);
    assert_eq!(code(&aquagrasp(&["replay", "--record", "/nonexistent", "--out", p(&out)])), 3);
}
