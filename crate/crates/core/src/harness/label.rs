use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::episode::EpisodeRecord;
use super::HarnessError;
use crate::image::Image;
use crate::labeling::{
    backtrack_contact, build_samples, detect_closures, export_dataset, goal_frame_index, split_episodes, write_track,
    ClosureEvent, ClosureParams, ContactTrack, LabelError, Manifest, NormSpec, SampleOptions, WidthSignal,
};
use crate::sim::read_depth;

/// Per-episode contact track, written beside the episode's samples.
pub const CONTACT_TRACK_FILE: &str = "contact_track.jsonl";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LabelOptions {
    pub closure: ClosureParams,
    pub samples: SampleOptions,
    /// Fixed depth anchors. When absent they span every frame of the
    /// training episodes.
    pub anchors: Option<NormSpec>,
    pub val_fraction: f64,
}

impl Default for LabelOptions {
    fn default() -> Self {
        Self { closure: ClosureParams::default(), samples: SampleOptions::default(), anchors: None, val_fraction: 0.2 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeLabel {
    pub episode_id: u64,
    pub closure: ClosureEvent,
    pub goal_frame: usize,
    pub track: ContactTrack,
    pub track_file: PathBuf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabelSummary {
    pub episodes: Vec<EpisodeLabel>,
    pub manifest: Manifest,
}

/// The closure that labels the episode: the last one in the width signal,
/// which is the grasp that was held rather than any earlier miss.
pub fn labeling_closure(rec: &EpisodeRecord, params: &ClosureParams) -> Result<ClosureEvent, HarnessError> {
    let sig = WidthSignal::new(rec.timestamps(), rec.frames.iter().map(|f| f.aperture.clamp(0.0, 1.0)).collect())
        .map_err(|_| LabelError::NoClosureFound)?;
    detect_closures(&sig, params).pop().ok_or_else(|| LabelError::NoClosureFound.into())
}

/// Contact track of a recorded episode, seeded at the gripper anchor's
/// image position in the closure frame.
pub fn episode_contact_track(rec: &EpisodeRecord, closure: &ClosureEvent) -> Result<ContactTrack, HarnessError> {
    let [w, h] = rec.image_size;
    let seed = rec.frames[closure.index].gripper_anchor.ok_or(LabelError::SeedOutOfFrame { u: f64::NAN, v: f64::NAN })?;
    let tracks: Vec<_> = rec.frames.iter().map(|f| f.tracks.clone()).collect();
    Ok(backtrack_contact(&tracks, closure.index, seed, w, h)?)
}

struct Prepared {
    dir: PathBuf,
    rec: EpisodeRecord,
    closure: ClosureEvent,
    track: ContactTrack,
}

impl Prepared {
    fn load(dir: &Path, opts: &LabelOptions) -> Result<Self, HarnessError> {
        let rec = EpisodeRecord::load(dir)?;
        let closure = labeling_closure(&rec, &opts.closure)?;
        let track = episode_contact_track(&rec, &closure)?;
        Ok(Self { dir: dir.to_path_buf(), rec, closure, track })
    }

    /// Raw depth of frames `0..=closure`.
    fn depths(&self) -> Result<Vec<Image<f32>>, HarnessError> {
        let [w, h] = self.rec.image_size;
        self.rec.frames[..=self.closure.index]
            .iter()
            .map(|f| {
                let rel = f.depth.as_ref().ok_or(LabelError::MissingFrame(f.index))?;
                read_depth(&self.dir.join(rel), w, h).map_err(|e| HarnessError::MissingFrameData(e.to_string()))
            })
            .collect()
    }
}

/// Labels one recorded episode directory into a dataset at `out_dir`.
pub fn label_episode(record_dir: &Path, out_dir: &Path, opts: &LabelOptions) -> Result<LabelSummary, HarnessError> {
    label_episodes(&[record_dir.to_path_buf()], out_dir, opts)
}

/// Labels several recorded episodes into one dataset with an episode-wise
/// split. Frames are read twice (anchors, then samples); all samples are
/// held in memory until export.
pub fn label_episodes(record_dirs: &[PathBuf], out_dir: &Path, opts: &LabelOptions) -> Result<LabelSummary, HarnessError> {
    let prepared = record_dirs.iter().map(|d| Prepared::load(d, opts)).collect::<Result<Vec<_>, _>>()?;
    let mut ids: Vec<u64> = prepared.iter().map(|p| p.rec.episode_id).collect();
    ids.sort_unstable();
    if ids.windows(2).any(|w| w[0] == w[1]) {
        return Err(HarnessError::Format("episode ids must be unique within a dataset".into()));
    }
    let split = split_episodes(&ids, opts.val_fraction);

    let norm = match opts.anchors {
        Some(a) => a,
        None => {
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for p in prepared.iter().filter(|p| split.contains_train(p.rec.episode_id)) {
                let a = NormSpec::from_frames(&p.depths()?)?;
                lo = lo.min(a.d_min);
                hi = hi.max(a.d_max);
            }
            NormSpec::new(lo, hi)?
        }
    };

    let mut samples = Vec::new();
    let mut episodes = Vec::with_capacity(prepared.len());
    for p in prepared {
        let depths = p.depths()?;
        let goal_frame = goal_frame_index(&p.rec.timestamps(), p.closure.t_star, opts.samples.goal_offset);
        samples.extend(build_samples(
            p.rec.episode_id,
            &depths,
            &p.track,
            p.closure.index,
            &depths[goal_frame],
            &norm,
            &opts.samples,
        )?);
        let track_file = out_dir.join(format!("episode_{}", p.rec.episode_id)).join(CONTACT_TRACK_FILE);
        episodes.push(EpisodeLabel { episode_id: p.rec.episode_id, closure: p.closure, goal_frame, track: p.track, track_file });
    }
    let manifest = export_dataset(&samples, out_dir, &split, norm)?;
    for e in &episodes {
        let dir = e.track_file.parent().expect("joined path");
        fs::create_dir_all(dir).map_err(HarnessError::io(dir))?;
        let file = fs::File::create(&e.track_file).map_err(HarnessError::io(&e.track_file))?;
        write_track(BufWriter::new(file), &e.track).map_err(HarnessError::io(&e.track_file))?;
    }
    episodes.sort_by_key(|e| e.episode_id);
    Ok(LabelSummary { episodes, manifest })
}
