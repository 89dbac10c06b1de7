use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::controller::{ControllerConfig, SelectionMode};
use crate::sim::SimConfig;

/// Which episodes keep per-frame depth and mask dumps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DumpMode {
    #[default]
    None,
    Successes,
    All,
}

/// How the goal object of an episode is specified.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum GoalMode {
    /// No goal; any drag-verified grasp counts.
    #[default]
    None,
    /// A goal object is drawn uniformly from the scene.
    Random,
}

/// Toggles applied on top of the controller configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct Toggles {
    pub regrasp_enabled: Option<bool>,
    pub backup_enabled: Option<bool>,
    pub mode: Option<SelectionMode>,
}

/// Everything needed to run one seeded episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EpisodeSpec {
    pub scenario: String,
    pub sim: SimConfig,
    pub controller: ControllerConfig,
    pub goal: GoalMode,
    /// Oracle heatmap splat width (px) in affordance mode.
    pub heatmap_sigma: f64,
}

impl Default for EpisodeSpec {
    fn default() -> Self {
        Self {
            scenario: "default".into(),
            sim: SimConfig::default(),
            controller: ControllerConfig::default(),
            goal: GoalMode::None,
            heatmap_sigma: 3.0,
        }
    }
}

impl EpisodeSpec {
    pub fn validate(&self) -> Result<(), HarnessError> {
        self.sim.validate().map_err(|e| HarnessError::Config(e.to_string()))?;
        let cam = &self.sim.forward_camera.camera;
        self.controller.validate(cam.width, cam.height).map_err(|e| HarnessError::Config(e.to_string()))?;
        if !(self.heatmap_sigma > 0.0) {
            return Err(HarnessError::Config("heatmap_sigma must be positive".into()));
        }
        Ok(())
    }
}

/// A collection campaign, read from TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CampaignSpec {
    pub name: String,
    pub n_episodes: usize,
    pub seed_base: u64,
    /// Default output directory; the command line may override it.
    pub output_dir: Option<PathBuf>,
    /// Reuse the layout of `seed_base` for every episode instead of re-scattering.
    pub persist_layout: bool,
    pub dump_frames: DumpMode,
    pub toggles: Toggles,
    /// Controller configuration file, resolved relative to the spec file.
    /// Inline `[episode.controller]` settings are used when absent.
    pub controller_config: Option<PathBuf>,
    pub episode: EpisodeSpec,
}

impl Default for CampaignSpec {
    fn default() -> Self {
        Self {
            name: "campaign".into(),
            n_episodes: 20,
            seed_base: 0,
            output_dir: None,
            persist_layout: false,
            dump_frames: DumpMode::None,
            toggles: Toggles::default(),
            controller_config: None,
            episode: EpisodeSpec::default(),
        }
    }
}

impl CampaignSpec {
    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        let spec: Self = toml::from_str(text).map_err(|e| HarnessError::Config(e.message().to_string()))?;
        Ok(spec)
    }

    /// Reads a spec file and resolves its controller reference.
    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        let mut spec = Self::from_toml(&text).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        if let Some(rel) = &spec.controller_config {
            let p = path.parent().unwrap_or(Path::new(".")).join(rel);
            let text = std::fs::read_to_string(&p).map_err(|e| HarnessError::Config(format!("{}: {e}", p.display())))?;
            spec.episode.controller =
                ControllerConfig::from_toml(&text).map_err(|e| HarnessError::Config(format!("{}: {e}", p.display())))?;
        }
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.n_episodes == 0 {
            return Err(HarnessError::Config("n_episodes must be at least 1".into()));
        }
        self.resolved_episode().validate()
    }

    /// The episode spec with toggles applied.
    pub fn resolved_episode(&self) -> EpisodeSpec {
        let mut ep = self.episode.clone();
        if let Some(b) = self.toggles.regrasp_enabled {
            ep.controller.regrasp.enabled = b;
        }
        if let Some(b) = self.toggles.backup_enabled {
            ep.controller.backup.enabled = b;
        }
        if let Some(m) = self.toggles.mode {
            ep.controller.mode = m;
        }
        ep
    }

    pub fn seed(&self, index: usize) -> u64 {
        self.seed_base.wrapping_add(index as u64)
    }
}
