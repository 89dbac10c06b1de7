//! Episodes, campaigns, replay and named experiment suites.

mod campaign;
mod episode;
mod label;
mod replay;
mod spec;
mod suites;

pub use campaign::{
    default_jobs, episode_dir_name, run_campaign, run_episodes, CampaignReport, EpisodeSummary, EPISODES_DIR,
    REPORT_JSON, REPORT_TEXT, SUCCESS_MANIFEST,
};
pub use label::{
    episode_contact_track, label_episode, label_episodes, labeling_closure, EpisodeLabel, LabelOptions, LabelSummary,
    CONTACT_TRACK_FILE,
};
pub use replay::{
    depth_to_rgb, draw_overlays, read_rgb_png, replay, target_centroid, write_rgb_png, ReplaySummary, Rgb,
    ANCHOR_RGB, CENTROID_RGB, CSV_HEADER, ERRORS_CSV, SETPOINT_RGB,
};
pub use suites::{
    default_episodes, run_suite, suite_arms, SuiteArm, SuiteReport, ABLATION_GRASPABILITY, HIGH_LAG, SUITE_NAMES,
};

pub use episode::{
    run_episode, run_episode_with, EpisodeOutput, EpisodeRecord, FrameContext, FrameRecord, FRAMES_DIR, RECORD_FILE,
    SIDECAR_FILE, TRACE_FILE,
};
pub use spec::{CampaignSpec, DumpMode, EpisodeSpec, GoalMode, Toggles};

use std::path::{Path, PathBuf};

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("unknown suite `{0}`")]
    UnknownSuite(String),
    #[error("missing frame data: {0}")]
    MissingFrameData(String),
    #[error("{0}")]
    Format(String),
    #[error(transparent)]
    Label(#[from] crate::labeling::LabelError),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
}

impl HarnessError {
    pub(crate) fn io(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
        move |source| HarnessError::Io { path: path.to_path_buf(), source }
    }
}
