use serde::{Deserialize, Serialize};

use super::ControllerError;

/// PD gains for one servo axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PdGains {
    /// Command units per pixel.
    pub kp: f64,
    /// Command units per pixel per second.
    pub kd: f64,
    /// Errors strictly inside this band produce zero output (px).
    pub deadband: f64,
    /// Symmetric output clip, at most 1.
    pub clip: f64,
}

impl Default for PdGains {
    fn default() -> Self {
        Self { kp: 0.01, kd: 0.0, deadband: 5.0, clip: 1.0 }
    }
}

impl PdGains {
    pub fn new(kp: f64, kd: f64, deadband: f64) -> Self {
        Self { kp, kd, deadband, clip: 1.0 }
    }

    pub fn validate(&self, name: &str) -> Result<(), ControllerError> {
        let ok = self.kp >= 0.0 && self.kd >= 0.0 && self.deadband >= 0.0 && self.clip > 0.0 && self.clip <= 1.0;
        if ok {
            Ok(())
        } else {
            Err(ControllerError::Config(format!("{name}: gains must be non-negative and clip in (0, 1]")))
        }
    }
}

/// Image-space setpoints in pixels plus range thresholds in metres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServoReferences {
    pub lower_line_v: f64,
    pub upper_band: [f64; 2],
    pub margin_px: f64,
    /// Creep speed ramps down from this mask-minimum depth.
    pub close_range_depth: f64,
    pub grasp_depth: f64,
}

impl Default for ServoReferences {
    fn default() -> Self {
        Self::for_height(160)
    }
}

impl ServoReferences {
    /// Defaults for an image `height` pixels tall: line at 75 %, band at 20-35 %.
    pub fn for_height(height: u32) -> Self {
        let h = height as f64;
        Self {
            lower_line_v: 0.75 * h,
            upper_band: [0.20 * h, 0.35 * h],
            margin_px: 12.0,
            close_range_depth: 0.6,
            grasp_depth: 0.25,
        }
    }

    pub fn band_mid(&self) -> f64 {
        0.5 * (self.upper_band[0] + self.upper_band[1])
    }

    pub fn validate(&self, width: u32, height: u32) -> Result<(), ControllerError> {
        let h = height as f64;
        let [lo, hi] = self.upper_band;
        if !(0.0 < lo && lo < hi && hi < h) {
            return Err(ControllerError::Config(format!("upper_band [{lo}, {hi}] must satisfy 0 < lo < hi < {h}")));
        }
        if !(0.0..h).contains(&self.lower_line_v) {
            return Err(ControllerError::Config(format!("lower_line_v {} outside image", self.lower_line_v)));
        }
        if !(self.margin_px >= 0.0 && self.margin_px < (width.min(height) as f64) / 2.0) {
            return Err(ControllerError::Config(format!("margin_px {} too large", self.margin_px)));
        }
        if !(self.grasp_depth > 0.0 && self.close_range_depth > self.grasp_depth) {
            return Err(ControllerError::Config("need 0 < grasp_depth < close_range_depth".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SelectionMode {
    #[default]
    CenterBias,
    Affordance,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegraspConfig {
    pub enabled: bool,
    pub max_regrasps: u32,
    /// Back-up duration (s).
    pub t_back: f64,
    pub back_command: f64,
    /// Heave command while backing up.
    pub ascent_command: f64,
    /// Lateral offset magnitude range (m); the side is random.
    pub lateral_offset: [f64; 2],
    pub lateral_command: f64,
    /// Expected sway speed at `lateral_command`, used to time the offset (m/s).
    pub lateral_speed: f64,
}

impl Default for RegraspConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            max_regrasps: 3,
            t_back: 2.0,
            back_command: 0.4,
            ascent_command: 1.0,
            lateral_offset: [0.05, 0.15],
            lateral_command: 0.6,
            lateral_speed: 0.15,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackupConfig {
    pub enabled: bool,
    pub max_backups: u32,
    /// Retreat duration (s); longer than the regrasp back-up.
    pub t_retreat: f64,
    pub retreat_command: f64,
    pub ascent_command: f64,
}

impl Default for BackupConfig {
    fn default() -> Self {
        Self { enabled: true, max_backups: 3, t_retreat: 4.0, retreat_command: 0.8, ascent_command: 0.2 }
    }
}

/// Everything the staged controller needs; serialisable as TOML.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControllerConfig {
    pub mode: SelectionMode,
    pub yaw: PdGains,
    pub forward: PdGains,
    pub depth: PdGains,
    pub refs: ServoReferences,
    /// Forward approach completes when the vertical error is below this (px).
    pub forward_threshold_px: f64,
    /// Creep surge command far from the object.
    pub creep_command: f64,
    /// Creep surge command at `grasp_depth`.
    pub creep_min_command: f64,
    pub drag_command: f64,
    pub drag_duration: f64,
    /// Perception refresh period; PD updates run at this rate (s).
    pub perception_period: f64,
    /// How long a missing target mask is tolerated (s).
    pub coast: f64,
    pub stage_timeout: f64,
    pub episode_timeout: f64,
    pub regrasp: RegraspConfig,
    pub backup: BackupConfig,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        Self {
            mode: SelectionMode::CenterBias,
            yaw: PdGains::new(0.006, 0.001, 5.0),
            forward: PdGains::new(0.008, 0.0, 5.0),
            depth: PdGains::new(0.012, 0.0, 3.0),
            refs: ServoReferences::default(),
            forward_threshold_px: 6.0,
            creep_command: 0.35,
            creep_min_command: 0.12,
            drag_command: 0.5,
            drag_duration: 3.0,
            perception_period: 0.1,
            coast: 0.5,
            stage_timeout: 20.0,
            episode_timeout: 90.0,
            regrasp: RegraspConfig::default(),
            backup: BackupConfig::default(),
        }
    }
}

impl ControllerConfig {
    pub fn from_toml(text: &str) -> Result<Self, ControllerError> {
        toml::from_str(text).map_err(|e| ControllerError::Config(e.message().to_string()))
    }

    pub fn validate(&self, width: u32, height: u32) -> Result<(), ControllerError> {
        self.yaw.validate("yaw")?;
        self.forward.validate("forward")?;
        self.depth.validate("depth")?;
        self.refs.validate(width, height)?;
        let positive = [
            ("perception_period", self.perception_period),
            ("drag_duration", self.drag_duration),
            ("stage_timeout", self.stage_timeout),
            ("episode_timeout", self.episode_timeout),
            ("regrasp.t_back", self.regrasp.t_back),
            ("backup.t_retreat", self.backup.t_retreat),
            ("regrasp.lateral_speed", self.regrasp.lateral_speed),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(ControllerError::Config(format!("{name} must be positive")));
            }
        }
        if self.backup.t_retreat <= self.regrasp.t_back {
            return Err(ControllerError::Config("backup.t_retreat must exceed regrasp.t_back".into()));
        }
        let [a, b] = self.regrasp.lateral_offset;
        if !(0.0 <= a && a <= b) {
            return Err(ControllerError::Config("regrasp.lateral_offset must be an ordered non-negative range".into()));
        }
        let unit = [
            self.creep_command,
            self.creep_min_command,
            self.drag_command,
            self.regrasp.back_command,
            self.regrasp.ascent_command,
            self.regrasp.lateral_command,
            self.backup.retreat_command,
            self.backup.ascent_command,
        ];
        if unit.iter().any(|c| !(0.0..=1.0).contains(c)) {
            return Err(ControllerError::Config("open-loop commands must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_references_for_160_rows() {
        let r = ServoReferences::default();
        assert_eq!(r.lower_line_v, 120.0);
        assert_eq!(r.upper_band, [32.0, 56.0]);
        assert_eq!(r.margin_px, 12.0);
        assert_eq!(r.grasp_depth, 0.25);
        ControllerConfig::default().validate(224, 160).unwrap();
    }

    #[test]
    fn toml_overrides_and_rejects_unknown_keys() {
        let c = ControllerConfig::from_toml("mode = \"affordance\"\n[regrasp]\nenabled = false\n").unwrap();
        assert_eq!(c.mode, SelectionMode::Affordance);
        assert!(!c.regrasp.enabled);
        assert!(c.backup.enabled);
        assert!(ControllerConfig::from_toml("gain = 1").is_err());
    }

    #[test]
    fn retreat_must_outlast_back_up() {
        let mut c = ControllerConfig::default();
        c.backup.t_retreat = 1.0;
        assert!(c.validate(224, 160).is_err());
    }
}
