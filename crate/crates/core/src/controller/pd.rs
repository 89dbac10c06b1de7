//! Pixel-error PD laws for the servo stages.

use super::config::{PdGains, ServoReferences};

/// Low-pass weight on the newest backward difference.
pub const DERIVATIVE_ALPHA: f64 = 0.5;

/// Memory of one PD axis between perception updates.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PdState {
    pub prev_error: Option<f64>,
    pub derivative: f64,
}

/// `clip(kp*e + kd*de/dt)` with a filtered backward difference; zero when
/// `|e| < deadband`. The first call after a reset has zero derivative.
pub fn pd_command(error: f64, state: PdState, gains: &PdGains, dt: f64) -> (f64, PdState) {
    let raw = match state.prev_error {
        Some(p) if dt > 0.0 => (error - p) / dt,
        _ => 0.0,
    };
    let derivative = match state.prev_error {
        Some(_) => DERIVATIVE_ALPHA * raw + (1.0 - DERIVATIVE_ALPHA) * state.derivative,
        None => 0.0,
    };
    let next = PdState { prev_error: Some(error), derivative };
    if error.abs() < gains.deadband {
        return (0.0, next);
    }
    let u = (gains.kp * error + gains.kd * derivative).clamp(-gains.clip, gains.clip);
    (u, next)
}

/// Yaw command from the horizontal centroid; error is `centerline - u`, so a
/// positive command turns left toward targets left of centre.
pub fn yaw_step(centroid_u: f64, centerline: f64, state: PdState, gains: &PdGains, dt: f64) -> (f64, PdState) {
    pd_command(centerline - centroid_u, state, gains, dt)
}

/// Surge toward the lower reference line; `done` once within `threshold`.
pub fn forward_step(
    centroid_v: f64,
    refs: &ServoReferences,
    threshold: f64,
    state: PdState,
    gains: &PdGains,
    dt: f64,
) -> (f64, bool, PdState) {
    let e = refs.lower_line_v - centroid_v;
    if e.abs() < threshold {
        let (_, s) = pd_command(e, state, gains, dt);
        return (0.0, true, s);
    }
    let (u, s) = pd_command(e, state, gains, dt);
    (u, false, s)
}

/// Heave toward the middle of the upper band (positive is up); `done` once
/// the centroid lies inside the band.
pub fn depth_step(centroid_v: f64, refs: &ServoReferences, state: PdState, gains: &PdGains, dt: f64) -> (f64, bool, PdState) {
    let [lo, hi] = refs.upper_band;
    let inside = (lo..=hi).contains(&centroid_v);
    let (u, s) = pd_command(refs.band_mid() - centroid_v, state, gains, dt);
    (u, inside, s)
}

/// Creep surge from the target's minimum mask depth, and whether to close.
/// The creep command ramps linearly from `creep_min` at `grasp_depth` to
/// `creep_max` at `close_range_depth` and beyond.
pub fn close_range_step(min_depth: f64, refs: &ServoReferences, creep_max: f64, creep_min: f64) -> (f64, bool) {
    if min_depth <= refs.grasp_depth {
        return (0.0, true);
    }
    let span = refs.close_range_depth - refs.grasp_depth;
    let s = ((min_depth - refs.grasp_depth) / span).clamp(0.0, 1.0);
    (creep_min + s * (creep_max - creep_min), false)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn centred_target_gives_zero() {
        let g = PdGains::new(0.01, 0.0, 5.0);
        assert_eq!(yaw_step(112.0, 112.0, PdState::default(), &g, 0.1).0, 0.0);
    }

    #[test]
    fn proportional_example() {
        let g = PdGains::new(0.01, 0.0, 5.0);
        let (u, _) = yaw_step(72.0, 112.0, PdState::default(), &g, 0.1);
        assert!((u - 0.4).abs() < 1e-12);
    }

    #[test]
    fn clip_and_deadband() {
        let g = PdGains::new(0.1, 0.0, 5.0);
        assert_eq!(pd_command(40.0, PdState::default(), &g, 0.1).0, 1.0);
        assert_eq!(pd_command(-40.0, PdState::default(), &g, 0.1).0, -1.0);
        assert_eq!(pd_command(4.999, PdState::default(), &g, 0.1).0, 0.0);
        assert_eq!(pd_command(5.0, PdState::default(), &g, 0.1).0, 0.5);
    }

    #[test]
    fn derivative_is_filtered_backward_difference() {
        let g = PdGains::new(0.0, 1.0, 0.0);
        let (u0, s0) = pd_command(10.0, PdState::default(), &g, 0.1);
        assert_eq!(u0, 0.0);
        let (u1, s1) = pd_command(10.02, s0, &g, 0.1);
        assert!((u1 - 0.5 * 0.2).abs() < 1e-9);
        let (u2, _) = pd_command(10.02, s1, &g, 0.1);
        assert!((u2 - 0.25 * 0.2).abs() < 1e-9);
    }

    #[test]
    fn forward_examples() {
        let refs = ServoReferences::default();
        let g = PdGains::new(0.01, 0.0, 0.0);
        let (u, done, _) = forward_step(refs.lower_line_v, &refs, 6.0, PdState::default(), &g, 0.1);
        assert!(done);
        assert_eq!(u, 0.0);
        let (u, done, _) = forward_step(refs.lower_line_v - 60.0, &refs, 6.0, PdState::default(), &g, 0.1);
        assert!(!done);
        assert!((u - 0.6).abs() < 1e-12);
    }

    #[test]
    fn depth_examples() {
        let refs = ServoReferences::default();
        let g = PdGains::new(0.01, 0.0, 0.0);
        let (u, done, _) = depth_step(refs.band_mid(), &refs, PdState::default(), &g, 0.1);
        assert!(done);
        assert_eq!(u, 0.0);
        let (u, done, _) = depth_step(refs.band_mid() + 30.0, &refs, PdState::default(), &g, 0.1);
        assert!(!done);
        assert!((u + 0.3).abs() < 1e-12);
    }

    #[test]
    fn close_range_examples() {
        let refs = ServoReferences::default();
        assert_eq!(close_range_step(refs.grasp_depth, &refs, 0.35, 0.1), (0.0, true));
        let (u, trigger) = close_range_step(2.0 * refs.grasp_depth, &refs, 0.35, 0.1);
        assert!(!trigger && u > 0.1 && u < 0.35);
        assert_eq!(close_range_step(3.0, &refs, 0.35, 0.1), (0.35, false));
    }
}
