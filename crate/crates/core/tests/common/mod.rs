//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use aquagrasp::labeling::{ClosureParams, WidthSignal};
use aquagrasp::sim::{CameraMount, RovState};
use nalgebra::{Matrix3, Point3, Vector3};
use rand::Rng;

const EPS: f64 = 1e-9;

/// Closure index by exhaustive scan: the first index whose trailing-window
/// maximum exceeds it by `min_drop` and whose next `min_plateau` seconds
/// stay within `plateau_tol` peak-to-peak.
pub fn brute_force_closure(sig: &WidthSignal, p: &ClosureParams) -> Option<usize> {
    let (t, w) = (&sig.t, &sig.w);
    let last = *t.last()?;
    (0..t.len()).find(|&i| {
        let max = (0..=i).filter(|&j| t[j] >= t[i] - p.window - EPS).map(|j| w[j]).fold(f64::MIN, f64::max);
        if max - w[i] < p.min_drop - EPS || t[i] + p.min_plateau > last + EPS {
            return false;
        }
        let plateau: Vec<f64> = (i..t.len()).filter(|&j| t[j] <= t[i] + p.min_plateau + EPS).map(|j| w[j]).collect();
        let (lo, hi) = plateau.iter().fold((f64::MAX, f64::MIN), |(a, b), &x| (a.min(x), b.max(x)));
        hi - lo <= p.plateau_tol + EPS
    })
}

/// Synthetic gripper-width signal: a step or ramp closure at a random time,
/// optionally noisy, optionally with no closure at all.
pub fn synthetic_width(rng: &mut impl Rng) -> WidthSignal {
    let n = rng.random_range(40..120);
    let noise = [0.0, 0.02, 0.05, 0.1][rng.random_range(0..4)];
    let start = rng.random_range(5..n - 5);
    let depth = rng.random_range(0.1..0.9);
    let ramp = rng.random_range(1..8);
    let kind = rng.random_range(0..3);
    let w: Vec<f64> = (0..n)
        .map(|i| {
            let base = match kind {
                0 => 1.0,
                1 if i >= start => 1.0 - depth,
                1 => 1.0,
                _ => 1.0 - depth * ((i as f64 - start as f64) / ramp as f64).clamp(0.0, 1.0),
            };
            (base + noise * (rng.random::<f64>() - 0.5) * 2.0).clamp(0.0, 1.0)
        })
        .collect();
    WidthSignal::uniform(10.0, w).unwrap()
}

/// Pinhole projection of a pool-frame point seen from a vehicle-mounted
/// camera whose optical axis is body +x, image right is body -y and image
/// down is body -z. Returns `None` behind the camera.
pub fn project_from_vehicle(rov: &RovState, mount: &CameraMount, p: Point3<f64>) -> Option<[f64; 2]> {
    let (sy, cy) = rov.yaw.sin_cos();
    let (sp, cp) = rov.pitch.sin_cos();
    let rz = Matrix3::new(cy, -sy, 0.0, sy, cy, 0.0, 0.0, 0.0, 1.0);
    let ry = Matrix3::new(cp, 0.0, sp, 0.0, 1.0, 0.0, -sp, 0.0, cp);
    let world_from_body = rz * ry;
    let cam_origin = Vector3::from(rov.position) + world_from_body * Vector3::from(mount.offset);
    let body = world_from_body.transpose() * (p.coords - cam_origin);
    let (x, y, z) = (-body.y, -body.z, body.x);
    if z <= 0.0 {
        return None;
    }
    let c = &mount.camera;
    Some([c.fx * x / z + c.cx, c.fy * y / z + c.cy])
}

/// Camera-frame depth (distance along the optical axis) of a pool point.
pub fn camera_depth(rov: &RovState, mount: &CameraMount, p: Point3<f64>) -> f64 {
    let (sy, cy) = rov.yaw.sin_cos();
    let (sp, cp) = rov.pitch.sin_cos();
    let rz = Matrix3::new(cy, -sy, 0.0, sy, cy, 0.0, 0.0, 0.0, 1.0);
    let ry = Matrix3::new(cp, 0.0, sp, 0.0, 1.0, 0.0, -sp, 0.0, cp);
    let world_from_body = rz * ry;
    let cam_origin = Vector3::from(rov.position) + world_from_body * Vector3::from(mount.offset);
    (world_from_body.transpose() * (p.coords - cam_origin)).x
}
