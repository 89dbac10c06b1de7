//! Primitive-composed object geometry and analytic ray casting.
//!
//! Every shape is expressed in an object-local frame with `z` up and the
//! origin on the floor contact patch, so a resting object has its origin at
//! `z = 0`. Rays are parameterised as `o + s * d` with a non-normalised
//! direction; when `d` comes from a camera ray `(x, y, 1)` the returned `s`
//! is the camera-frame depth.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Primitive {
    Sphere { center: Vector3<f64>, radius: f64 },
    Capsule { a: Vector3<f64>, b: Vector3<f64>, radius: f64 },
    Cuboid { center: Vector3<f64>, half: Vector3<f64> },
}

fn sphere_hit(o: &Vector3<f64>, d: &Vector3<f64>, c: &Vector3<f64>, r: f64, near: f64) -> Option<f64> {
    let oc = o - c;
    let a = d.dot(d);
    let b = d.dot(&oc);
    let cc = oc.dot(&oc) - r * r;
    let disc = b * b - a * cc;
    if disc < 0.0 {
        return None;
    }
    let sq = disc.sqrt();
    let s0 = (-b - sq) / a;
    if s0 > near {
        return Some(s0);
    }
    let s1 = (-b + sq) / a;
    (s1 > near).then_some(s1)
}

impl Primitive {
    /// Nearest intersection parameter greater than `near`.
    pub fn intersect(&self, o: &Vector3<f64>, d: &Vector3<f64>, near: f64) -> Option<f64> {
        match *self {
            Primitive::Sphere { center, radius } => sphere_hit(o, d, &center, radius, near),
            Primitive::Capsule { a, b, radius } => {
                // Union of the finite cylinder and the two end spheres.
                let mut best = sphere_hit(o, d, &a, radius, near);
                let end = sphere_hit(o, d, &b, radius, near);
                best = match (best, end) {
                    (Some(x), Some(y)) => Some(x.min(y)),
                    (x, y) => x.or(y),
                };
                let ba = b - a;
                let oa = o - a;
                let baba = ba.dot(&ba);
                let bard = ba.dot(d);
                let baoa = ba.dot(&oa);
                let qa = baba * d.dot(d) - bard * bard;
                if qa > 1e-14 {
                    let qb = baba * d.dot(&oa) - baoa * bard;
                    let qc = baba * oa.dot(&oa) - baoa * baoa - radius * radius * baba;
                    let h = qb * qb - qa * qc;
                    if h >= 0.0 {
                        let sq = h.sqrt();
                        for s in [(-qb - sq) / qa, (-qb + sq) / qa] {
                            let y = baoa + s * bard;
                            if s > near && y > 0.0 && y < baba {
                                best = Some(best.map_or(s, |b: f64| b.min(s)));
                                break;
                            }
                        }
                    }
                }
                best
            }
            Primitive::Cuboid { center, half } => {
                let mut t0 = f64::NEG_INFINITY;
                let mut t1 = f64::INFINITY;
                for i in 0..3 {
                    let lo = center[i] - half[i];
                    let hi = center[i] + half[i];
                    if d[i].abs() < 1e-15 {
                        if o[i] < lo || o[i] > hi {
                            return None;
                        }
                        continue;
                    }
                    let inv = 1.0 / d[i];
                    let (mut a, mut b) = ((lo - o[i]) * inv, (hi - o[i]) * inv);
                    if a > b {
                        std::mem::swap(&mut a, &mut b);
                    }
                    t0 = t0.max(a);
                    t1 = t1.min(b);
                    if t0 > t1 {
                        return None;
                    }
                }
                if t0 > near {
                    Some(t0)
                } else if t1 > near {
                    Some(t1)
                } else {
                    None
                }
            }
        }
    }

    /// Signed distance from `p` to the primitive surface.
    pub fn sdf(&self, p: &Vector3<f64>) -> f64 {
        match *self {
            Primitive::Sphere { center, radius } => (p - center).norm() - radius,
            Primitive::Capsule { a, b, radius } => {
                let pa = p - a;
                let ba = b - a;
                let h = (pa.dot(&ba) / ba.dot(&ba)).clamp(0.0, 1.0);
                (pa - ba * h).norm() - radius
            }
            Primitive::Cuboid { center, half } => {
                let q = (p - center).abs() - half;
                let outside = q.map(|c| c.max(0.0)).norm();
                outside + q.max().min(0.0)
            }
        }
    }

    /// Bounding sphere `(center, radius)`.
    pub fn bounds(&self) -> (Vector3<f64>, f64) {
        match *self {
            Primitive::Sphere { center, radius } => (center, radius),
            Primitive::Capsule { a, b, radius } => ((a + b) * 0.5, (b - a).norm() * 0.5 + radius),
            Primitive::Cuboid { center, half } => (center, half.norm()),
        }
    }
}

/// Object categories: the first three form the tuning set, the last three
/// only appear in transfer experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapeKind {
    Rock,
    Seagrass,
    Duck,
    Pitcher,
    Can,
    Drill,
}

impl ShapeKind {
    pub const ALL: [ShapeKind; 6] =
        [ShapeKind::Rock, ShapeKind::Seagrass, ShapeKind::Duck, ShapeKind::Pitcher, ShapeKind::Can, ShapeKind::Drill];
    pub const SEEN: [ShapeKind; 3] = [ShapeKind::Rock, ShapeKind::Seagrass, ShapeKind::Duck];
    pub const NOVEL: [ShapeKind; 3] = [ShapeKind::Pitcher, ShapeKind::Can, ShapeKind::Drill];

    pub fn name(self) -> &'static str {
        match self {
            ShapeKind::Rock => "rock",
            ShapeKind::Seagrass => "seagrass",
            ShapeKind::Duck => "duck",
            ShapeKind::Pitcher => "pitcher",
            ShapeKind::Can => "can",
            ShapeKind::Drill => "drill",
        }
    }

    pub fn geometry(self, scale: f64) -> ShapeGeometry {
        let v = |x: f64, y: f64, z: f64| Vector3::new(x, y, z) * scale;
        let (prims, grasp) = match self {
            ShapeKind::Rock => (vec![Primitive::Sphere { center: v(0.0, 0.0, 0.06), radius: 0.06 * scale }], v(0.0, 0.0, 0.12)),
            ShapeKind::Seagrass => (
                vec![
                    Primitive::Capsule { a: v(0.0, 0.0, 0.03), b: v(0.0, 0.0, 0.12), radius: 0.03 * scale },
                    Primitive::Capsule { a: v(0.0, 0.0, 0.12), b: v(0.02, 0.01, 0.13), radius: 0.02 * scale },
                ],
                v(0.0, 0.0, 0.15),
            ),
            ShapeKind::Duck => (
                vec![
                    Primitive::Sphere { center: v(0.0, 0.0, 0.05), radius: 0.05 * scale },
                    Primitive::Sphere { center: v(0.03, 0.0, 0.09), radius: 0.03 * scale },
                ],
                v(0.03, 0.0, 0.12),
            ),
            ShapeKind::Pitcher => (
                vec![
                    Primitive::Capsule { a: v(0.0, 0.0, 0.045), b: v(0.0, 0.0, 0.08), radius: 0.045 * scale },
                    Primitive::Cuboid { center: v(-0.055, 0.0, 0.07), half: v(0.012, 0.008, 0.03) },
                ],
                v(0.0, 0.0, 0.125),
            ),
            ShapeKind::Can => (
                vec![Primitive::Capsule { a: v(0.0, 0.0, 0.035), b: v(0.0, 0.0, 0.085), radius: 0.035 * scale }],
                v(0.0, 0.0, 0.12),
            ),
            ShapeKind::Drill => (
                vec![
                    Primitive::Cuboid { center: v(0.0, 0.0, 0.09), half: v(0.07, 0.025, 0.025) },
                    Primitive::Cuboid { center: v(-0.03, 0.0, 0.0325), half: v(0.018, 0.018, 0.0325) },
                ],
                v(0.0, 0.0, 0.115),
            ),
        };
        ShapeGeometry::new(prims, grasp)
    }
}

/// Primitive union plus cached bounds and the grasp point.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapeGeometry {
    pub primitives: Vec<Primitive>,
    pub grasp_point: Vector3<f64>,
    pub bound_center: Vector3<f64>,
    pub bound_radius: f64,
    /// Horizontal radius about the local origin, used for non-overlap.
    pub footprint_radius: f64,
}

impl ShapeGeometry {
    pub fn new(primitives: Vec<Primitive>, grasp_point: Vector3<f64>) -> Self {
        // Bounding sphere about the mean of primitive bound centres.
        let n = primitives.len() as f64;
        let center = primitives.iter().map(|p| p.bounds().0).sum::<Vector3<f64>>() / n;
        let radius = primitives
            .iter()
            .map(|p| {
                let (c, r) = p.bounds();
                (c - center).norm() + r
            })
            .fold(0.0, f64::max);
        let footprint = primitives
            .iter()
            .map(|p| {
                let (c, r) = p.bounds();
                c.xy().norm() + r
            })
            .fold(0.0, f64::max);
        Self { primitives, grasp_point, bound_center: center, bound_radius: radius, footprint_radius: footprint }
    }

    pub fn sdf(&self, p: &Vector3<f64>) -> f64 {
        self.primitives.iter().map(|q| q.sdf(p)).fold(f64::INFINITY, f64::min)
    }

    pub fn intersect(&self, o: &Vector3<f64>, d: &Vector3<f64>, near: f64) -> Option<f64> {
        // Bounding-sphere rejection first.
        sphere_hit(o, d, &self.bound_center, self.bound_radius, f64::NEG_INFINITY)?;
        self.primitives.iter().filter_map(|p| p.intersect(o, d, near)).reduce(f64::min)
    }

    /// Lowest point of the geometry (should be the floor, `z = 0`).
    pub fn min_z(&self) -> f64 {
        self.primitives
            .iter()
            .map(|p| match *p {
                Primitive::Sphere { center, radius } => center.z - radius,
                Primitive::Capsule { a, b, radius } => a.z.min(b.z) - radius,
                Primitive::Cuboid { center, half } => center.z - half.z,
            })
            .fold(f64::INFINITY, f64::min)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grasp_points_lie_on_surfaces_and_shapes_rest_on_floor() {
        for kind in ShapeKind::ALL {
            for scale in [0.8, 1.0, 1.3] {
                let g = kind.geometry(scale);
                assert!(g.sdf(&g.grasp_point).abs() < 1e-9, "{kind:?} grasp point off surface");
                assert!(g.min_z().abs() < 1e-12, "{kind:?} does not touch the floor");
            }
        }
    }

    #[test]
    fn sphere_hit_depth_on_axis() {
        let s = Primitive::Sphere { center: Vector3::new(0.0, 0.0, 1.0), radius: 0.1 };
        let hit = s.intersect(&Vector3::zeros(), &Vector3::new(0.0, 0.0, 1.0), 0.01).unwrap();
        assert!((hit - 0.9).abs() < 1e-12);
    }

    #[test]
    fn capsule_and_box_hits_match_sdf_zero() {
        let prims = [
            Primitive::Capsule { a: Vector3::new(0.0, 0.0, 1.0), b: Vector3::new(0.0, 0.3, 1.2), radius: 0.05 },
            Primitive::Cuboid { center: Vector3::new(0.05, 0.0, 1.0), half: Vector3::new(0.1, 0.2, 0.05) },
        ];
        for p in prims {
            for i in 0..40 {
                let d = Vector3::new(-0.2 + 0.01 * i as f64, 0.05 + 0.003 * i as f64, 1.0);
                if let Some(s) = p.intersect(&Vector3::zeros(), &d, 0.01) {
                    assert!(p.sdf(&(d * s)).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn bounding_sphere_contains_all_primitives() {
        for kind in ShapeKind::ALL {
            let g = kind.geometry(1.0);
            for p in &g.primitives {
                let (c, r) = p.bounds();
                assert!((c - g.bound_center).norm() + r <= g.bound_radius + 1e-12);
            }
        }
    }
}
