//! Scenario configuration. Every physical constant here is a tuning knob of
//! the simulator, not a measured property of any real vehicle.

use serde::{Deserialize, Serialize};

use super::shapes::ShapeKind;
use super::SimError;
use crate::camera::{CameraModel, Distortion};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoolExtent {
    pub length: f64,
    pub width: f64,
    pub depth: f64,
}

impl Default for PoolExtent {
    fn default() -> Self {
        Self { length: 4.0, width: 2.0, depth: 1.0 }
    }
}

/// Per-axis constants in (surge, sway, heave, yaw) order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DynamicsConfig {
    /// First-order velocity lag time constants (s).
    pub tau: [f64; 4],
    /// Quadratic drag coefficients (1/m, 1/rad for yaw).
    pub drag: [f64; 4],
    /// Velocity commanded by a unit axis command (m/s, rad/s).
    pub max_speed: [f64; 4],
}

impl Default for DynamicsConfig {
    fn default() -> Self {
        Self { tau: [0.6; 4], drag: [0.8, 0.8, 0.8, 0.5], max_speed: [0.35, 0.25, 0.2, 0.6] }
    }
}

impl DynamicsConfig {
    /// Same constants with every time constant replaced.
    pub fn with_lag(mut self, tau: f64) -> Self {
        self.tau = [tau; 4];
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GripperConfig {
    /// Aperture change per second.
    pub rate: f64,
    /// Aperture at which the jaws meet an object and capture is decided.
    pub contact_aperture: f64,
    /// Capture box centre in the body frame (m).
    pub anchor: [f64; 3],
    /// Capture box half extents along body x, y, z (m).
    pub half_extents: [f64; 3],
}

impl Default for GripperConfig {
    fn default() -> Self {
        Self { rate: 2.5, contact_aperture: 0.3, anchor: [0.27, 0.0, 0.13], half_extents: [0.06, 0.05, 0.04] }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SlipConfig {
    /// Base slip rate (1/s).
    pub lambda: f64,
    /// Acceleration sensitivity (s^2/m).
    pub kappa: f64,
}

impl Default for SlipConfig {
    fn default() -> Self {
        Self { lambda: 0.5, kappa: 0.3 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraMount {
    pub camera: CameraModel,
    /// Optical centre in the body frame (m). The optical axis is body +x.
    pub offset: [f64; 3],
}

impl CameraMount {
    pub fn forward_default() -> Self {
        Self {
            camera: CameraModel { fx: 160.0, fy: 160.0, cx: 112.0, cy: 80.0, width: 224, height: 160, dist: Distortion::NONE },
            offset: [0.0; 3],
        }
    }

    pub fn top_default() -> Self {
        Self {
            camera: CameraModel { fx: 100.0, fy: 100.0, cx: 112.0, cy: 80.0, width: 224, height: 160, dist: Distortion::NONE },
            offset: [0.0, 0.0, 0.10],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RenderConfig {
    pub near: f64,
    /// Depth written to pixels that hit no geometry (m).
    pub far: f64,
    /// Standard deviation of additive depth noise on covered pixels (m).
    pub noise_sigma: f64,
}

impl Default for RenderConfig {
    fn default() -> Self {
        Self { near: 0.01, far: 5.0, noise_sigma: 0.0 }
    }
}

/// Sampling ranges for the episode reset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ResetConfig {
    pub rov_x: [f64; 2],
    pub rov_y: [f64; 2],
    pub rov_z: [f64; 2],
    pub rov_yaw: [f64; 2],
    /// Object placement region on the floor.
    pub object_x: [f64; 2],
    pub object_y: [f64; 2],
    /// Extra clearance between object footprints (m).
    pub min_gap: f64,
    /// Resample until every object's centre projects inside the forward
    /// image, inset by this many pixels. Negative disables the check.
    pub visibility_inset_px: f64,
    pub max_attempts: u32,
}

impl Default for ResetConfig {
    fn default() -> Self {
        Self {
            rov_x: [0.5, 0.8],
            rov_y: [0.85, 1.15],
            rov_z: [0.55, 0.65],
            rov_yaw: [-0.12, 0.12],
            object_x: [2.1, 2.7],
            object_y: [0.65, 1.35],
            min_gap: 0.05,
            visibility_inset_px: 24.0,
            max_attempts: 100,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectSpec {
    pub shape: ShapeKind,
    #[serde(default = "one")]
    pub graspability: f64,
    #[serde(default = "one")]
    pub scale: f64,
}

fn one() -> f64 {
    1.0
}

impl ObjectSpec {
    pub fn new(shape: ShapeKind, graspability: f64) -> Self {
        Self { shape, graspability, scale: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub pool: PoolExtent,
    /// Inner-loop step (s).
    pub dt: f64,
    /// Constant downward vehicle pitch (degrees).
    pub pitch_deg: f64,
    /// Lowest allowed body-origin height above the floor (m).
    pub min_altitude: f64,
    pub dynamics: DynamicsConfig,
    pub gripper: GripperConfig,
    pub slip: SlipConfig,
    pub forward_camera: CameraMount,
    pub top_camera: CameraMount,
    pub render: RenderConfig,
    pub reset: ResetConfig,
    /// Catalogue objects are drawn from at reset.
    pub objects: Vec<ObjectSpec>,
    pub n_objects: usize,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            pool: PoolExtent::default(),
            dt: 0.01,
            pitch_deg: 10.0,
            min_altitude: 0.03,
            dynamics: DynamicsConfig::default(),
            gripper: GripperConfig::default(),
            slip: SlipConfig::default(),
            forward_camera: CameraMount::forward_default(),
            top_camera: CameraMount::top_default(),
            render: RenderConfig::default(),
            reset: ResetConfig::default(),
            objects: ShapeKind::SEEN.iter().map(|&s| ObjectSpec::new(s, 1.0)).collect(),
            n_objects: 1,
            seed: 0,
        }
    }
}

impl SimConfig {
    pub fn from_toml(text: &str) -> Result<Self, SimError> {
        let cfg: SimConfig = toml::from_str(text).map_err(|e| SimError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn pitch(&self) -> f64 {
        self.pitch_deg.to_radians()
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: &str| Err(SimError::Config(m.to_string()));
        if (self.dt - 0.01).abs() > 1e-12 {
            return bad("dt must be 0.01 s (100 Hz inner loop)");
        }
        if self.dynamics.tau.iter().any(|&t| !(t > 0.0)) || self.dynamics.drag.iter().any(|&d| !(d >= 0.0)) {
            return bad("dynamics: tau must be positive and drag non-negative");
        }
        if self.objects.is_empty() && self.n_objects > 0 {
            return bad("objects: catalogue is empty");
        }
        if self.n_objects > 254 {
            return bad("n_objects: at most 254 objects fit the 8-bit label images");
        }
        if self.objects.iter().any(|o| !(o.graspability > 0.0 && o.graspability <= 1.0) || !(o.scale > 0.0)) {
            return bad("objects: graspability must be in (0, 1] and scale positive");
        }
        if !(self.slip.lambda >= 0.0 && self.slip.kappa >= 0.0) {
            return bad("slip: lambda and kappa must be non-negative");
        }
        if !(self.gripper.contact_aperture > 0.0 && self.gripper.contact_aperture < 1.0 && self.gripper.rate > 0.0) {
            return bad("gripper: contact_aperture must be in (0, 1) and rate positive");
        }
        if !(self.render.far > self.render.near && self.render.near > 0.0 && self.render.noise_sigma >= 0.0) {
            return bad("render: require 0 < near < far and noise_sigma >= 0");
        }
        for mount in [&self.forward_camera, &self.top_camera] {
            mount.camera.validate().map_err(|e| SimError::Config(e.to_string()))?;
        }
        Ok(())
    }
}
