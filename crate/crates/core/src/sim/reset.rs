use nalgebra::{Point3, Vector3};
use rand::Rng;

use super::config::{ObjectSpec, SimConfig};
use super::render::camera_pose;
use super::world::{ObjectInstance, PoolWorld, RovState};
use super::SimError;

fn uniform(rng: &mut impl Rng, range: [f64; 2]) -> f64 {
    if range[1] > range[0] {
        rng.random_range(range[0]..range[1])
    } else {
        range[0]
    }
}

/// Scatters `n_objects` drawn from `catalogue` over the placement region
/// and samples a fresh vehicle pose. Layouts are resampled (up to
/// `reset.max_attempts` times) until footprints are disjoint and every
/// object centre projects inside the forward image.
pub fn scatter_reset(
    world: &mut PoolWorld,
    rng: &mut impl Rng,
    n_objects: usize,
    catalogue: &[ObjectSpec],
    cfg: &SimConfig,
) -> Result<RovState, SimError> {
    if n_objects == 0 {
        world.objects.clear();
        return Ok(RovState::new(
            [uniform(rng, cfg.reset.rov_x), uniform(rng, cfg.reset.rov_y), uniform(rng, cfg.reset.rov_z)],
            uniform(rng, cfg.reset.rov_yaw),
            cfg.pitch(),
        ));
    }
    if catalogue.is_empty() {
        return Err(SimError::Config("objects: catalogue is empty".into()));
    }
    let reset = &cfg.reset;
    let cam = cfg.forward_camera.camera;
    'attempt: for _ in 0..reset.max_attempts.max(1) {
        let rov = RovState::new(
            [uniform(rng, reset.rov_x), uniform(rng, reset.rov_y), uniform(rng, reset.rov_z)],
            uniform(rng, reset.rov_yaw),
            cfg.pitch(),
        );
        let mut objects: Vec<ObjectInstance> = Vec::with_capacity(n_objects);
        for id in 0..n_objects {
            let spec = catalogue[rng.random_range(0..catalogue.len())];
            let x = uniform(rng, reset.object_x);
            let y = uniform(rng, reset.object_y);
            let yaw = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
            let obj = ObjectInstance::resting(id as u32, spec.shape, spec.scale, spec.graspability, x, y, yaw);
            let overlaps = objects.iter().any(|o| {
                let d = (o.pose.translation.vector.xy() - obj.pose.translation.vector.xy()).norm();
                d < o.geometry.footprint_radius + obj.geometry.footprint_radius + reset.min_gap
            });
            if overlaps {
                continue 'attempt;
            }
            objects.push(obj);
        }
        if reset.visibility_inset_px >= 0.0 {
            let inv = camera_pose(&rov, &cfg.forward_camera).inverse();
            let inset = reset.visibility_inset_px;
            let visible = objects.iter().all(|o| {
                let pc = inv * o.bound_center_world();
                cam.project(&pc.coords).is_ok_and(|p| {
                    p.x >= inset && p.y >= inset && p.x <= cam.width as f64 - 1.0 - inset && p.y <= cam.height as f64 - 1.0 - inset
                })
            });
            if !visible {
                continue;
            }
        }
        world.objects = objects;
        return Ok(rov);
    }
    Err(SimError::PlacementFailure { attempts: reset.max_attempts })
}

/// Pool-frame position of the point `offset` (body frame) on the vehicle.
pub fn body_point(rov: &RovState, offset: [f64; 3]) -> Point3<f64> {
    rov.body_pose() * Point3::from(Vector3::from(offset))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::shapes::ShapeKind;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn three_objects_disjoint_and_visible() {
        let cfg = SimConfig { n_objects: 3, ..SimConfig::default() };
        for seed in 0..20 {
            let mut world = PoolWorld::new(cfg.pool, seed, cfg.dt);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let rov = scatter_reset(&mut world, &mut rng, 3, &cfg.objects, &cfg).unwrap();
            assert_eq!(world.objects.len(), 3);
            let r = crate::sim::Renderer::new(cfg.forward_camera, cfg.render).render(&world, &rov, None);
            assert_eq!(r.objects.len(), 3, "seed {seed}: not all objects visible");
        }
    }

    #[test]
    fn same_seed_same_layout() {
        let cfg = SimConfig::default();
        let run = |seed| {
            let mut world = PoolWorld::new(cfg.pool, seed, cfg.dt);
            let rov = scatter_reset(&mut world, &mut ChaCha8Rng::seed_from_u64(seed), 2, &cfg.objects, &cfg).unwrap();
            (world, rov)
        };
        assert_eq!(run(11), run(11));
    }

    #[test]
    fn impossible_layout_fails_after_cap() {
        let mut cfg = SimConfig::default();
        cfg.reset.object_x = [2.0, 2.01];
        cfg.reset.object_y = [1.0, 1.01];
        let catalogue = [ObjectSpec::new(ShapeKind::Rock, 1.0)];
        let mut world = PoolWorld::new(cfg.pool, 0, cfg.dt);
        let err = scatter_reset(&mut world, &mut ChaCha8Rng::seed_from_u64(0), 3, &catalogue, &cfg).unwrap_err();
        assert!(matches!(err, SimError::PlacementFailure { attempts: 100 }));
    }

    #[test]
    fn tiny_region_single_object_is_deterministic() {
        let mut cfg = SimConfig::default();
        cfg.reset.object_x = [2.3, 2.3];
        cfg.reset.object_y = [1.0, 1.0];
        let mut w1 = PoolWorld::new(cfg.pool, 0, cfg.dt);
        let mut w2 = PoolWorld::new(cfg.pool, 0, cfg.dt);
        scatter_reset(&mut w1, &mut ChaCha8Rng::seed_from_u64(4), 1, &cfg.objects, &cfg).unwrap();
        scatter_reset(&mut w2, &mut ChaCha8Rng::seed_from_u64(4), 1, &cfg.objects, &cfg).unwrap();
        assert_eq!(w1.objects, w2.objects);
        assert_eq!(w1.objects[0].pose.translation.x, 2.3);
    }
}
