use nalgebra::{Isometry3, Point3, Translation3, UnitQuaternion, Vector3};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::config::{GripperConfig, PoolExtent, SimConfig, SlipConfig};
use super::shapes::{ShapeGeometry, ShapeKind};
use super::SimError;

const WALL_MARGIN: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectInstance {
    pub id: u32,
    pub shape: ShapeKind,
    pub scale: f64,
    pub graspability: f64,
    /// Object-local to pool frame.
    pub pose: Isometry3<f64>,
    pub geometry: ShapeGeometry,
}

impl ObjectInstance {
    pub fn new(id: u32, shape: ShapeKind, scale: f64, graspability: f64, pose: Isometry3<f64>) -> Self {
        Self { id, shape, scale, graspability, pose, geometry: shape.geometry(scale) }
    }

    /// Upright at floor position `(x, y)` with heading `yaw`.
    pub fn resting(id: u32, shape: ShapeKind, scale: f64, graspability: f64, x: f64, y: f64, yaw: f64) -> Self {
        Self::new(id, shape, scale, graspability, upright(x, y, yaw))
    }

    pub fn grasp_point_world(&self) -> Point3<f64> {
        self.pose * Point3::from(self.geometry.grasp_point)
    }

    pub fn bound_center_world(&self) -> Point3<f64> {
        self.pose * Point3::from(self.geometry.bound_center)
    }
}

fn upright(x: f64, y: f64, yaw: f64) -> Isometry3<f64> {
    Isometry3::from_parts(Translation3::new(x, y, 0.0), UnitQuaternion::from_axis_angle(&Vector3::z_axis(), yaw))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoolWorld {
    pub extent: PoolExtent,
    pub objects: Vec<ObjectInstance>,
    pub rng_seed: u64,
    /// Completed inner-loop steps; time is derived from it to avoid drift.
    pub steps: u64,
    pub dt: f64,
}

impl PoolWorld {
    pub fn new(extent: PoolExtent, rng_seed: u64, dt: f64) -> Self {
        Self { extent, objects: Vec::new(), rng_seed, steps: 0, dt }
    }

    pub fn time(&self) -> f64 {
        self.steps as f64 * self.dt
    }

    pub fn object(&self, id: u32) -> Option<&ObjectInstance> {
        self.objects.iter().find(|o| o.id == id)
    }

    fn object_mut(&mut self, id: u32) -> Option<&mut ObjectInstance> {
        self.objects.iter_mut().find(|o| o.id == id)
    }
}

/// Vehicle state. Body frame: x forward, y left, z up; positive pitch tips
/// the nose down.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RovState {
    pub position: [f64; 3],
    pub yaw: f64,
    pub pitch: f64,
    /// Surge, sway, heave (m/s) and yaw rate (rad/s).
    pub body_velocity: [f64; 4],
    pub gripper_aperture: f64,
    pub gripper_target: f64,
    pub held_object: Option<u32>,
    /// Object pose relative to the body while held.
    #[serde(skip)]
    pub held_offset: Option<Isometry3<f64>>,
    /// Linear acceleration magnitude over the last step (m/s^2).
    pub last_accel: f64,
}

impl RovState {
    pub fn new(position: [f64; 3], yaw: f64, pitch: f64) -> Self {
        Self {
            position,
            yaw,
            pitch,
            body_velocity: [0.0; 4],
            gripper_aperture: 1.0,
            gripper_target: 1.0,
            held_object: None,
            held_offset: None,
            last_accel: 0.0,
        }
    }

    pub fn orientation(&self) -> UnitQuaternion<f64> {
        UnitQuaternion::from_axis_angle(&Vector3::z_axis(), self.yaw)
            * UnitQuaternion::from_axis_angle(&Vector3::y_axis(), self.pitch)
    }

    /// Body to pool transform.
    pub fn body_pose(&self) -> Isometry3<f64> {
        Isometry3::from_parts(Translation3::from(Vector3::from(self.position)), self.orientation())
    }

    pub fn kinetic_energy(&self) -> f64 {
        self.body_velocity.iter().map(|v| 0.5 * v * v).sum()
    }

    /// Heading wrapped to (-pi, pi].
    pub fn compass(&self) -> f64 {
        let mut a = self.yaw % std::f64::consts::TAU;
        if a > std::f64::consts::PI {
            a -= std::f64::consts::TAU;
        } else if a <= -std::f64::consts::PI {
            a += std::f64::consts::TAU;
        }
        a
    }
}

/// Normalized command. Axis order matches the exported action vector:
/// yaw (+ turns left), forward, vertical (+ up), lateral (+ left), open, close.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ActionCommand {
    pub yaw: f64,
    pub forward: f64,
    pub vertical: f64,
    pub lateral: f64,
    pub open: bool,
    pub close: bool,
}

impl ActionCommand {
    pub fn is_valid(&self) -> bool {
        [self.yaw, self.forward, self.vertical, self.lateral].iter().all(|a| a.abs() <= 1.0) && !(self.open && self.close)
    }

    /// Clips every axis into [-1, 1]; `close` wins over `open`.
    pub fn saturated(mut self) -> Self {
        for a in [&mut self.yaw, &mut self.forward, &mut self.vertical, &mut self.lateral] {
            *a = if a.is_nan() { 0.0 } else { a.clamp(-1.0, 1.0) };
        }
        if self.open && self.close {
            self.open = false;
        }
        self
    }

    pub fn to_vector(&self) -> [f64; 6] {
        [self.yaw, self.forward, self.vertical, self.lateral, self.open as u8 as f64, self.close as u8 as f64]
    }

    pub fn from_vector(v: [f64; 6]) -> Self {
        Self { yaw: v[0], forward: v[1], vertical: v[2], lateral: v[3], open: v[4] > 0.5, close: v[5] > 0.5 }
    }

    fn axes(&self) -> [f64; 4] {
        [self.forward, self.lateral, self.vertical, self.yaw]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraspOutcome {
    pub captured: bool,
    pub object_id: Option<u32>,
}

/// What happened during one inner-loop step.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StepEvents {
    pub grasp: Option<GraspOutcome>,
    pub slipped: Option<u32>,
    pub released: Option<u32>,
}

fn gripper_frame_offset(rov: &RovState, gripper: &GripperConfig, p: &Point3<f64>) -> Vector3<f64> {
    let local = rov.body_pose().inverse_transform_point(p);
    local.coords - Vector3::from(gripper.anchor)
}

/// Decides capture at closure: the first object (closest to the anchor,
/// ties to the lowest id) whose grasp point lies inside the closed capture
/// box is attached rigidly with its grasp point on the anchor.
pub fn attempt_grasp(world: &mut PoolWorld, rov: &mut RovState, gripper: &GripperConfig) -> GraspOutcome {
    let half = Vector3::from(gripper.half_extents);
    let candidate = world
        .objects
        .iter()
        .filter(|o| rov.held_object != Some(o.id))
        .filter_map(|o| {
            let off = gripper_frame_offset(rov, gripper, &o.grasp_point_world());
            let inside = (0..3).all(|i| off[i].abs() <= half[i]);
            inside.then(|| ((off.component_div(&half)).norm(), o.id))
        })
        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let Some((_, id)) = candidate else {
        return GraspOutcome { captured: false, object_id: None };
    };
    let body = rov.body_pose();
    let obj = world.object_mut(id).expect("candidate exists");
    let rel_rot = body.rotation.inverse() * obj.pose.rotation;
    let anchor = Vector3::from(gripper.anchor);
    let rel = Isometry3::from_parts(Translation3::from(anchor - rel_rot * obj.geometry.grasp_point), rel_rot);
    obj.pose = body * rel;
    rov.held_object = Some(id);
    rov.held_offset = Some(rel);
    GraspOutcome { captured: true, object_id: Some(id) }
}

/// Per-step slip test: `p = dt * lambda * (1 - g) * (1 + kappa * |a|)`.
/// Always consumes exactly one uniform draw.
pub fn evaluate_slip(slip: &SlipConfig, graspability: f64, accel: f64, dt: f64, rng: &mut impl Rng) -> bool {
    let p = dt * slip.lambda * (1.0 - graspability) * (1.0 + slip.kappa * accel.abs());
    let u: f64 = rng.random();
    u < p
}

fn drop_to_floor(world: &mut PoolWorld, id: u32) {
    let extent = world.extent;
    if let Some(obj) = world.object_mut(id) {
        let (_, _, yaw) = obj.pose.rotation.euler_angles();
        let x = obj.pose.translation.x.clamp(0.0, extent.length);
        let y = obj.pose.translation.y.clamp(0.0, extent.width);
        obj.pose = upright(x, y, yaw);
    }
}

fn release(world: &mut PoolWorld, rov: &mut RovState) -> Option<u32> {
    let id = rov.held_object.take()?;
    rov.held_offset = None;
    drop_to_floor(world, id);
    Some(id)
}

fn check_finite(world: &PoolWorld, rov: &RovState) -> Result<(), SimError> {
    let fields: [(&str, f64); 10] = [
        ("position.x", rov.position[0]),
        ("position.y", rov.position[1]),
        ("position.z", rov.position[2]),
        ("yaw", rov.yaw),
        ("surge", rov.body_velocity[0]),
        ("sway", rov.body_velocity[1]),
        ("heave", rov.body_velocity[2]),
        ("yaw_rate", rov.body_velocity[3]),
        ("gripper_aperture", rov.gripper_aperture),
        ("time", world.time()),
    ];
    for (name, v) in fields {
        if !v.is_finite() {
            return Err(SimError::NonFinite { field: name.to_string(), time: world.time() });
        }
    }
    for o in &world.objects {
        if o.pose.translation.vector.iter().any(|c| !c.is_finite()) {
            return Err(SimError::NonFinite { field: format!("object[{}].pose", o.id), time: world.time() });
        }
    }
    Ok(())
}

/// Advances world and vehicle by one fixed step.
///
/// Velocity follows a first-order lag toward `command * max_speed` with
/// quadratic drag, integrated implicitly so that a zero command can only
/// shrink every velocity component. Pose integrates with the updated
/// velocity. Pool walls stop the vehicle without rebound.
pub fn step(
    world: &mut PoolWorld,
    rov: &mut RovState,
    cmd: &ActionCommand,
    cfg: &SimConfig,
    slip_rng: &mut impl Rng,
) -> Result<StepEvents, SimError> {
    let dt = cfg.dt;
    let cmd = cmd.saturated();
    let mut events = StepEvents::default();
    rov.pitch = cfg.pitch();

    // Gripper.
    if cmd.open {
        rov.gripper_target = 1.0;
        events.released = release(world, rov);
    } else if cmd.close {
        rov.gripper_target = 0.0;
    }
    let before = rov.gripper_aperture;
    let delta = cfg.gripper.rate * dt;
    let mut after = if rov.gripper_target > before {
        (before + delta).min(rov.gripper_target)
    } else {
        (before - delta).max(rov.gripper_target)
    };
    let contact = cfg.gripper.contact_aperture;
    if rov.held_object.is_some() {
        after = after.max(contact);
    } else if before > contact && after <= contact {
        let outcome = attempt_grasp(world, rov, &cfg.gripper);
        if outcome.captured {
            after = contact;
        }
        events.grasp = Some(outcome);
    }
    rov.gripper_aperture = after;

    // Body velocity.
    let axes = cmd.axes();
    let old = rov.body_velocity;
    for i in 0..4 {
        let tau = cfg.dynamics.tau[i];
        let target = axes[i] * cfg.dynamics.max_speed[i];
        let v = old[i];
        rov.body_velocity[i] = (v + dt * target / tau) / (1.0 + dt / tau + dt * cfg.dynamics.drag[i] * v.abs());
    }

    // Pose.
    let [u, sv, w, r] = rov.body_velocity;
    rov.yaw += r * dt;
    let (s, c) = rov.yaw.sin_cos();
    let mut vx = c * u - s * sv;
    let mut vy = s * u + c * sv;
    rov.position[0] += vx * dt;
    rov.position[1] += vy * dt;
    rov.position[2] += w * dt;

    let ext = cfg.pool;
    let mut clamped = false;
    for (i, (lo, hi)) in [(WALL_MARGIN, ext.length - WALL_MARGIN), (WALL_MARGIN, ext.width - WALL_MARGIN)].into_iter().enumerate() {
        if rov.position[i] < lo || rov.position[i] > hi {
            rov.position[i] = rov.position[i].clamp(lo, hi);
            if i == 0 { vx = 0.0 } else { vy = 0.0 }
            clamped = true;
        }
    }
    if clamped {
        rov.body_velocity[0] = c * vx + s * vy;
        rov.body_velocity[1] = -s * vx + c * vy;
    }
    let (zlo, zhi) = (cfg.min_altitude, ext.depth - 0.05);
    if rov.position[2] < zlo || rov.position[2] > zhi {
        rov.position[2] = rov.position[2].clamp(zlo, zhi);
        rov.body_velocity[2] = 0.0;
    }

    let dv = Vector3::new(
        rov.body_velocity[0] - old[0],
        rov.body_velocity[1] - old[1],
        rov.body_velocity[2] - old[2],
    );
    rov.last_accel = dv.norm() / dt;

    // Held object rides along, then may slip.
    if let (Some(id), Some(rel)) = (rov.held_object, rov.held_offset) {
        let body = rov.body_pose();
        let accel = rov.last_accel;
        let obj = world.object_mut(id).expect("held object exists");
        obj.pose = body * rel;
        if evaluate_slip(&cfg.slip, obj.graspability, accel, dt, slip_rng) {
            release(world, rov);
            events.slipped = Some(id);
        }
    }

    world.steps += 1;
    check_finite(world, rov)?;
    Ok(events)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn setup() -> (PoolWorld, RovState, SimConfig) {
        let cfg = SimConfig::default();
        let world = PoolWorld::new(cfg.pool, 7, cfg.dt);
        let rov = RovState::new([1.0, 1.0, 0.5], 0.0, cfg.pitch());
        (world, rov, cfg)
    }

    fn gripper_point(rov: &RovState, cfg: &SimConfig, off: [f64; 3]) -> Point3<f64> {
        let a = Vector3::from(cfg.gripper.anchor) + Vector3::from(off);
        rov.body_pose() * Point3::from(a)
    }

    /// Places a rock so that its grasp point sits at `p` (floating is fine here).
    fn rock_with_grasp_at(p: Point3<f64>) -> ObjectInstance {
        let mut o = ObjectInstance::resting(0, ShapeKind::Rock, 1.0, 1.0, 0.0, 0.0, 0.0);
        o.pose.translation.vector = p.coords - o.geometry.grasp_point;
        o
    }

    #[test]
    fn zero_command_at_rest_only_advances_time() {
        let (mut world, mut rov, cfg) = setup();
        let before = rov.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        step(&mut world, &mut rov, &ActionCommand::default(), &cfg, &mut rng).unwrap();
        assert_eq!(rov, before);
        assert_eq!(world.steps, 1);
    }

    #[test]
    fn capture_at_anchor_and_not_far_away() {
        let (mut world, mut rov, cfg) = setup();
        world.objects.push(rock_with_grasp_at(gripper_point(&rov, &cfg, [0.0; 3])));
        let out = attempt_grasp(&mut world, &mut rov, &cfg.gripper);
        assert_eq!(out, GraspOutcome { captured: true, object_id: Some(0) });

        let (mut world, mut rov, cfg) = setup();
        let h = cfg.gripper.half_extents;
        world.objects.push(rock_with_grasp_at(gripper_point(&rov, &cfg, [2.0 * h[0], 0.0, 0.0])));
        assert!(!attempt_grasp(&mut world, &mut rov, &cfg.gripper).captured);
    }

    #[test]
    fn boundary_counts_as_inside() {
        let (mut world, mut rov, cfg) = setup();
        let h = cfg.gripper.half_extents;
        let p = gripper_point(&rov, &cfg, [0.0, h[1] * (1.0 - 1e-12), 0.0]);
        world.objects.push(rock_with_grasp_at(p));
        assert!(attempt_grasp(&mut world, &mut rov, &cfg.gripper).captured);
    }

    #[test]
    fn perfect_graspability_never_slips() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let slip = SlipConfig::default();
        assert!((0..100_000).all(|_| !evaluate_slip(&slip, 1.0, 5.0, 0.01, &mut rng)));
    }

    #[test]
    fn held_object_tracks_anchor_exactly() {
        let (mut world, mut rov, mut cfg) = setup();
        cfg.slip.lambda = 0.0;
        world.objects.push(rock_with_grasp_at(gripper_point(&rov, &cfg, [0.01, -0.02, 0.01])));
        assert!(attempt_grasp(&mut world, &mut rov, &cfg.gripper).captured);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let cmd = ActionCommand { yaw: 0.7, forward: -0.5, vertical: 0.3, lateral: 0.2, ..Default::default() };
        for _ in 0..300 {
            step(&mut world, &mut rov, &cmd, &cfg, &mut rng).unwrap();
            let anchor = rov.body_pose() * Point3::from(Vector3::from(cfg.gripper.anchor));
            let grasp = world.objects[0].grasp_point_world();
            assert!((anchor - grasp).norm() < 1e-9);
        }
    }

    #[test]
    fn walls_stop_the_vehicle() {
        let (mut world, mut rov, cfg) = setup();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let cmd = ActionCommand { forward: -1.0, ..Default::default() };
        for _ in 0..2000 {
            step(&mut world, &mut rov, &cmd, &cfg, &mut rng).unwrap();
        }
        assert_eq!(rov.position[0], WALL_MARGIN);
        assert!(rov.body_velocity[0] <= 0.0 && rov.body_velocity[0] > -0.01);
    }

    #[test]
    fn nan_command_is_neutralised_and_nan_state_faults() {
        let (mut world, mut rov, cfg) = setup();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let cmd = ActionCommand { forward: f64::NAN, ..Default::default() };
        step(&mut world, &mut rov, &cmd, &cfg, &mut rng).unwrap();
        rov.body_velocity[3] = f64::NAN;
        let err = step(&mut world, &mut rov, &ActionCommand::default(), &cfg, &mut rng).unwrap_err();
        assert!(matches!(err, SimError::NonFinite { .. }));
    }

    #[test]
    fn command_vector_layout() {
        let c = ActionCommand { yaw: 0.1, forward: 0.2, vertical: 0.3, lateral: 0.4, open: false, close: true };
        assert_eq!(c.to_vector(), [0.1, 0.2, 0.3, 0.4, 0.0, 1.0]);
        assert_eq!(ActionCommand::from_vector(c.to_vector()), c);
        assert!(!ActionCommand { open: true, close: true, ..Default::default() }.is_valid());
    }
}
