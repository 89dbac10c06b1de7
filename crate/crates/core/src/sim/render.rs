//! Oracle perception: analytic ray casting of the primitive scene into
//! metric depth, per-object label masks and point tracks.

use nalgebra::{Isometry3, Matrix3, Point3, Vector2, Vector3};
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::config::{CameraMount, RenderConfig};
use super::world::{PoolWorld, RovState};
use crate::camera::CameraModel;
use crate::image::Image;

/// Label value for pixels that hit no object.
pub const BACKGROUND: u8 = 0;

/// Camera axes expressed in the body frame: image x -> body -y,
/// image y -> body -z, optical axis -> body +x.
fn body_from_camera() -> Matrix3<f64> {
    Matrix3::new(0.0, 0.0, 1.0, -1.0, 0.0, 0.0, 0.0, -1.0, 0.0)
}

/// Camera-to-pool transform for a mount on the given vehicle.
pub fn camera_pose(rov: &RovState, mount: &CameraMount) -> Isometry3<f64> {
    let body = rov.body_pose();
    let rot = nalgebra::UnitQuaternion::from_rotation_matrix(&nalgebra::Rotation3::from_matrix_unchecked(body_from_camera()));
    body * Isometry3::from_parts(nalgebra::Translation3::from(Vector3::from(mount.offset)), rot)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Proprio {
    pub compass: f64,
    pub pitch: f64,
    /// Distance below the surface (m).
    pub vehicle_depth: f64,
}

/// Image-space summary of one visible object.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectView {
    pub id: u32,
    pub pixel_count: usize,
    pub centroid: [f64; 2],
    pub min_depth: f64,
    pub max_depth: f64,
}

/// Projection of an object's contact (grasp) point.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TrackPoint {
    pub object_id: u32,
    /// NaN when the point is behind the camera.
    #[serde(with = "crate::io::nan_pair")]
    pub pixel: [f64; 2],
    pub visible: bool,
}

/// NaN pixels compare equal so that records survive a disk round trip.
impl PartialEq for TrackPoint {
    fn eq(&self, other: &Self) -> bool {
        let same = |a: f64, b: f64| a == b || (a.is_nan() && b.is_nan());
        self.object_id == other.object_id
            && self.visible == other.visible
            && same(self.pixel[0], other.pixel[0])
            && same(self.pixel[1], other.pixel[1])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub timestamp: f64,
    pub depth: Image<f32>,
    /// `0` for background, `id + 1` for object pixels. One label per pixel
    /// keeps masks disjoint.
    pub labels: Image<u8>,
    pub objects: Vec<ObjectView>,
    pub tracks: Vec<TrackPoint>,
    /// Projection of the gripper capture-box centre, when in frame.
    pub gripper_anchor: Option<[f64; 2]>,
    pub proprio: Proprio,
    pub rgb_proxy: Option<Image<f32>>,
}

impl Observation {
    pub fn object(&self, id: u32) -> Option<&ObjectView> {
        self.objects.iter().find(|o| o.id == id)
    }

    pub fn track(&self, id: u32) -> Option<&TrackPoint> {
        self.tracks.iter().find(|t| t.object_id == id)
    }

    pub fn mask(&self, id: u32) -> Image<bool> {
        let label = id as u16 + 1;
        Image {
            width: self.labels.width,
            height: self.labels.height,
            data: self.labels.data.iter().map(|&l| l as u16 == label).collect(),
        }
    }

    pub fn width(&self) -> usize {
        self.depth.width
    }

    pub fn height(&self) -> usize {
        self.depth.height
    }

    /// Recomputes `objects` from the label and depth images.
    pub fn summarize(&mut self) {
        self.objects = summarize_labels(&self.labels, &self.depth);
    }
}

fn summarize_labels(labels: &Image<u8>, depth: &Image<f32>) -> Vec<ObjectView> {
    #[derive(Clone, Copy)]
    struct Acc {
        n: usize,
        su: f64,
        sv: f64,
        dmin: f64,
        dmax: f64,
    }
    let mut acc = [Acc { n: 0, su: 0.0, sv: 0.0, dmin: f64::INFINITY, dmax: f64::NEG_INFINITY }; 256];
    for v in 0..labels.height {
        for u in 0..labels.width {
            let idx = v * labels.width + u;
            let l = labels.data[idx] as usize;
            if l == 0 {
                continue;
            }
            let d = depth.data[idx] as f64;
            let a = &mut acc[l];
            a.n += 1;
            a.su += u as f64;
            a.sv += v as f64;
            a.dmin = a.dmin.min(d);
            a.dmax = a.dmax.max(d);
        }
    }
    acc.iter()
        .enumerate()
        .skip(1)
        .filter(|(_, a)| a.n > 0)
        .map(|(l, a)| ObjectView {
            id: (l - 1) as u32,
            pixel_count: a.n,
            centroid: [a.su / a.n as f64, a.sv / a.n as f64],
            min_depth: a.dmin,
            max_depth: a.dmax,
        })
        .collect()
}

/// Renders one camera mount. Per-pixel rays are undistorted once at
/// construction.
#[derive(Debug, Clone)]
pub struct Renderer {
    pub mount: CameraMount,
    pub settings: RenderConfig,
    rays: Vec<Vector2<f64>>,
}

impl Renderer {
    pub fn new(mount: CameraMount, settings: RenderConfig) -> Self {
        let cam = mount.camera;
        let (w, h) = (cam.width as usize, cam.height as usize);
        let mut rays = Vec::with_capacity(w * h);
        for v in 0..h {
            for u in 0..w {
                let px = Vector2::new(u as f64, v as f64);
                // Pixels without a preimage fall back to the pinhole ray.
                let n = cam
                    .undistort_pixel(px)
                    .unwrap_or_else(|_| Vector2::new((px.x - cam.cx) / cam.fx, (px.y - cam.cy) / cam.fy));
                rays.push(n);
            }
        }
        Self { mount, settings, rays }
    }

    pub fn camera(&self) -> &CameraModel {
        &self.mount.camera
    }

    pub fn render(&self, world: &PoolWorld, rov: &RovState, noise: Option<&mut dyn rand::RngCore>) -> Observation {
        let cam = self.mount.camera;
        let (w, h) = (cam.width as usize, cam.height as usize);
        let mut obs = Observation {
            timestamp: world.time(),
            depth: Image::filled(w, h, self.settings.far as f32),
            labels: Image::filled(w, h, BACKGROUND),
            objects: Vec::new(),
            tracks: Vec::new(),
            gripper_anchor: None,
            proprio: Proprio {
                compass: rov.compass(),
                pitch: rov.pitch,
                vehicle_depth: world.extent.depth - rov.position[2],
            },
            rgb_proxy: None,
        };
        let pose = camera_pose(rov, &self.mount);
        let inv = pose.inverse();
        let r_wc = pose.rotation.to_rotation_matrix().into_inner();
        let cam_pos = pose.translation.vector;
        let near = self.settings.near;
        let far = self.settings.far;

        for obj in &world.objects {
            let center_c = inv * obj.bound_center_world();
            let radius = obj.geometry.bound_radius;
            if center_c.z + radius <= near {
                continue;
            }
            let Some((u0, u1, v0, v1)) = self.bbox(&center_c, radius) else { continue };
            let r_ow = obj.pose.rotation.to_rotation_matrix().into_inner().transpose();
            let origin = r_ow * (cam_pos - obj.pose.translation.vector);
            let m = r_ow * r_wc;
            let label = (obj.id + 1) as u8;
            for v in v0..=v1 {
                for u in u0..=u1 {
                    let idx = v * w + u;
                    let n = self.rays[idx];
                    let dir = m * Vector3::new(n.x, n.y, 1.0);
                    if let Some(s) = obj.geometry.intersect(&origin, &dir, near) {
                        if s < far && (s as f32) < obs.depth.data[idx] {
                            obs.depth.data[idx] = s as f32;
                            obs.labels.data[idx] = label;
                        }
                    }
                }
            }
        }

        if let Some(rng) = noise {
            if self.settings.noise_sigma > 0.0 {
                let normal = Normal::new(0.0, self.settings.noise_sigma).expect("finite sigma");
                for (d, &l) in obs.depth.data.iter_mut().zip(&obs.labels.data) {
                    if l != BACKGROUND {
                        let n: f64 = normal.sample(rng);
                        *d = ((*d as f64 + n).max(near)) as f32;
                    }
                }
            }
        }

        obs.objects = summarize_labels(&obs.labels, &obs.depth);
        obs.tracks = world
            .objects
            .iter()
            .map(|o| {
                let (pixel, visible) = self.project_world(&inv, &o.grasp_point_world());
                TrackPoint { object_id: o.id, pixel, visible }
            })
            .collect();
        obs
    }

    /// Projects a pool-frame point; `visible` means in front and in frame.
    pub fn project_world(&self, world_to_cam: &Isometry3<f64>, p: &Point3<f64>) -> ([f64; 2], bool) {
        let pc = world_to_cam * p;
        match self.mount.camera.project(&pc.coords) {
            Ok(px) => ([px.x, px.y], pc.z > self.settings.near && self.mount.camera.contains(px)),
            Err(_) => ([f64::NAN, f64::NAN], false),
        }
    }

    /// Conservative pixel box covering a camera-frame sphere, or `None` when
    /// it misses the image. Distorted cameras always scan the full image.
    fn bbox(&self, c: &Point3<f64>, r: f64) -> Option<(usize, usize, usize, usize)> {
        let cam = &self.mount.camera;
        let (w, h) = (cam.width as usize, cam.height as usize);
        if !cam.dist.is_zero() || c.z - r <= self.settings.near {
            return Some((0, w - 1, 0, h - 1));
        }
        let (zn, zf) = (c.z - r, c.z + r);
        let lo = |a: f64| (a / zn).min(a / zf);
        let hi = |a: f64| (a / zn).max(a / zf);
        let u_min = (cam.cx + cam.fx * lo(c.x - r)).floor();
        let u_max = (cam.cx + cam.fx * hi(c.x + r)).ceil();
        let v_min = (cam.cy + cam.fy * lo(c.y - r)).floor();
        let v_max = (cam.cy + cam.fy * hi(c.y + r)).ceil();
        if u_max < 0.0 || v_max < 0.0 || u_min > (w - 1) as f64 || v_min > (h - 1) as f64 {
            return None;
        }
        Some((
            u_min.max(0.0) as usize,
            (u_max as usize).min(w - 1),
            v_min.max(0.0) as usize,
            (v_max as usize).min(h - 1),
        ))
    }

    /// Renders and also fills `gripper_anchor` from the gripper anchor point.
    pub fn render_with_anchor(
        &self,
        world: &PoolWorld,
        rov: &RovState,
        anchor_body: [f64; 3],
        noise: Option<&mut dyn rand::RngCore>,
    ) -> Observation {
        let mut obs = self.render(world, rov, noise);
        let inv = camera_pose(rov, &self.mount).inverse();
        let anchor = rov.body_pose() * Point3::from(Vector3::from(anchor_body));
        let (px, visible) = self.project_world(&inv, &anchor);
        obs.gripper_anchor = visible.then_some(px);
        obs
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::config::SimConfig;
    use crate::sim::shapes::{Primitive, ShapeGeometry, ShapeKind};
    use crate::sim::world::ObjectInstance;

    fn level_rov() -> RovState {
        RovState::new([1.0, 1.0, 0.5], 0.0, 0.0)
    }

    fn sphere_object(center: Vector3<f64>, radius: f64) -> ObjectInstance {
        let mut o = ObjectInstance::resting(0, ShapeKind::Rock, 1.0, 1.0, center.x, center.y, 0.0);
        o.geometry = ShapeGeometry::new(vec![Primitive::Sphere { center: Vector3::zeros(), radius }], Vector3::new(0.0, 0.0, radius));
        o.pose.translation.vector = center;
        o
    }

    #[test]
    fn empty_scene_renders_far_plane() {
        let cfg = SimConfig::default();
        let world = PoolWorld::new(cfg.pool, 0, cfg.dt);
        let obs = Renderer::new(cfg.forward_camera, cfg.render).render(&world, &level_rov(), None);
        assert!(obs.objects.is_empty());
        assert!(obs.depth.data.iter().all(|&d| d == cfg.render.far as f32));
        assert!(obs.labels.data.iter().all(|&l| l == BACKGROUND));
    }

    #[test]
    fn sphere_on_axis_depth() {
        let cfg = SimConfig::default();
        let mut world = PoolWorld::new(cfg.pool, 0, cfg.dt);
        world.objects.push(sphere_object(Vector3::new(2.0, 1.0, 0.5), 0.1));
        let obs = Renderer::new(cfg.forward_camera, cfg.render).render(&world, &level_rov(), None);
        let view = obs.object(0).unwrap();
        assert!((view.min_depth - 0.9).abs() < 1e-6, "{}", view.min_depth);
        // On-axis pixel.
        assert!((obs.depth.get(112, 80) as f64 - 0.9).abs() < 1e-6);
    }

    #[test]
    fn object_behind_is_culled() {
        let cfg = SimConfig::default();
        let mut world = PoolWorld::new(cfg.pool, 0, cfg.dt);
        world.objects.push(sphere_object(Vector3::new(0.3, 1.0, 0.5), 0.1));
        let obs = Renderer::new(cfg.forward_camera, cfg.render).render(&world, &level_rov(), None);
        assert!(obs.object(0).is_none());
        assert!(!obs.track(0).unwrap().visible);
    }

    #[test]
    fn bbox_culling_matches_full_scan() {
        let cfg = SimConfig::default();
        let mut world = PoolWorld::new(cfg.pool, 0, cfg.dt);
        world.objects.push(ObjectInstance::resting(0, ShapeKind::Duck, 1.0, 1.0, 1.8, 1.1, 0.4));
        world.objects.push(ObjectInstance::resting(1, ShapeKind::Drill, 1.0, 1.0, 2.2, 0.8, 1.4));
        let rov = RovState::new([1.0, 1.0, 0.4], 0.1, cfg.pitch());
        let fast = Renderer::new(cfg.forward_camera, cfg.render).render(&world, &rov, None);
        // A vanishing distortion term forces the full-image path.
        let mut mount = cfg.forward_camera;
        mount.camera.dist.0[4] = 1e-300;
        let slow = Renderer::new(mount, cfg.render).render(&world, &rov, None);
        assert_eq!(fast.labels, slow.labels);
        assert_eq!(fast.depth, slow.depth);
        assert_eq!(fast.objects.len(), 2);
    }
}
