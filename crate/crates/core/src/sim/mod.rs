//! Fixed-step pool simulation: vehicle dynamics, gripper capture and slip,
//! seeded scene resets and oracle rendering.

mod config;
mod dump;
mod render;
mod reset;
mod shapes;
mod world;

pub use config::{
    CameraMount, DynamicsConfig, GripperConfig, ObjectSpec, PoolExtent, RenderConfig, ResetConfig, SimConfig, SlipConfig,
};
pub use dump::{read_depth, read_labels_png, write_depth, write_labels_png, DepthSidecar};
pub use render::{camera_pose, ObjectView, Observation, Proprio, Renderer, TrackPoint, BACKGROUND};
pub use reset::{body_point, scatter_reset};
pub use shapes::{Primitive, ShapeGeometry, ShapeKind};
pub use world::{
    attempt_grasp, evaluate_slip, step, ActionCommand, GraspOutcome, ObjectInstance, PoolWorld, RovState, StepEvents,
};

use rand_chacha::ChaCha8Rng;

use crate::rng::{stream, Stream};

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("non-finite state in `{field}` at t = {time:.2} s")]
    NonFinite { field: String, time: f64 },
    #[error("could not place objects after {attempts} attempts")]
    PlacementFailure { attempts: u32 },
    #[error("scenario configuration: {0}")]
    Config(String),
    #[error("frame data: {0}")]
    Frame(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One seeded world with its vehicle, renderer and random streams.
#[derive(Debug, Clone)]
pub struct Simulator {
    pub config: SimConfig,
    pub world: PoolWorld,
    pub rov: RovState,
    forward: Renderer,
    slip_rng: ChaCha8Rng,
    noise_rng: ChaCha8Rng,
}

impl Simulator {
    /// Resets a fresh world from `seed` with the configured object count.
    pub fn new(config: SimConfig, seed: u64) -> Result<Self, SimError> {
        Self::with_layout(config, seed, seed)
    }

    /// Scene layout drawn from `layout_seed`, every other stream from `seed`.
    pub fn with_layout(config: SimConfig, layout_seed: u64, seed: u64) -> Result<Self, SimError> {
        config.validate()?;
        let mut world = PoolWorld::new(config.pool, seed, config.dt);
        let mut rng = stream(layout_seed, Stream::Reset);
        let rov = scatter_reset(&mut world, &mut rng, config.n_objects, &config.objects, &config)?;
        Ok(Self::from_parts(config, world, rov, seed))
    }

    /// Wraps an explicit layout.
    pub fn from_parts(config: SimConfig, world: PoolWorld, mut rov: RovState, seed: u64) -> Self {
        rov.pitch = config.pitch();
        Self {
            forward: Renderer::new(config.forward_camera, config.render),
            slip_rng: stream(seed, Stream::Slip),
            noise_rng: stream(seed, Stream::DepthNoise),
            config,
            world,
            rov,
        }
    }

    pub fn time(&self) -> f64 {
        self.world.time()
    }

    pub fn step(&mut self, cmd: &ActionCommand) -> Result<StepEvents, SimError> {
        step(&mut self.world, &mut self.rov, cmd, &self.config, &mut self.slip_rng)
    }

    /// Forward-camera observation including the gripper anchor projection.
    pub fn observe(&mut self) -> Observation {
        self.forward.render_with_anchor(&self.world, &self.rov, self.config.gripper.anchor, Some(&mut self.noise_rng))
    }

    pub fn renderer(&self) -> &Renderer {
        &self.forward
    }

    pub fn render_top(&self) -> Observation {
        Renderer::new(self.config.top_camera, self.config.render).render(&self.world, &self.rov, None)
    }
}
