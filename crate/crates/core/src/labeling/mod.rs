//! Affordance supervision from collected episodes: closure detection on the
//! gripper width signal, contact backtracking along point tracks, sample
//! construction and dataset export, plus the oracle goal heatmap.

mod backtrack;
mod closure;
mod export;
mod heatmap;
mod samples;

pub use backtrack::{backtrack_contact, read_track, write_track, ContactTrack, TrackRecord};
pub use closure::{detect_closure, detect_closures, ClosureDetector, ClosureEvent, ClosureParams, WidthSignal};
pub use export::{
    export_dataset, read_array, read_manifest, split_episodes, verify_dataset, Counts, Manifest, SampleEntry, Split,
    MANIFEST_FILE, MANIFEST_FORMAT, MANIFEST_VERSION,
};
pub use heatmap::{gaussian_splat, oracle_heatmap};
pub use samples::{
    build_samples, goal_frame_index, prepare_depth, target_pixel, AffordanceSample, NormSpec, SampleOptions, SAMPLE_SIZE,
};

use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum LabelError {
    #[error("no gripper closure found in the width signal")]
    NoClosureFound,
    #[error("contact seed ({u:.1}, {v:.1}) lies outside the image")]
    SeedOutOfFrame { u: f64, v: f64 },
    #[error("degenerate depth anchors [{d_min}, {d_max}]")]
    DegenerateAnchors { d_min: f64, d_max: f64 },
    #[error("refusing to export an empty dataset")]
    EmptyDataset,
    #[error("frame {0} has no depth data")]
    MissingFrame(usize),
    #[error("{0}")]
    Format(String),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
}
