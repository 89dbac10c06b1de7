//! Seeded simulation of an autonomous underwater grasp-collection loop.
//!
//! * [`camera`]: calibrated projection and plane-at-depth warping between cameras.
//! * [`sim`]: fixed-step pool world, vehicle dynamics, capture and slip, oracle rendering.
//! * [`controller`]: staged visual-servo state machine with regrasp and backup recovery.
//! * [`labeling`]: closure detection, contact backtracking and affordance dataset export.
//! * [`harness`]: episodes, campaigns, replay and experiment suites.

pub mod camera;
pub mod controller;
pub mod harness;
pub mod image;
pub mod io;
pub mod labeling;
pub mod rng;
pub mod sim;
