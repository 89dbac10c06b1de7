//! Staged visual-servo controller with regrasp and backup recovery.
//!
//! The controller sees only camera observations and a gripper sensor
//! ([`Feedback`]); vehicle pose is never exposed to it. It is ticked at the
//! inner-loop rate and recomputes its servo commands whenever an observation
//! arrives, latching them in between.

mod config;
mod pd;
mod select;
mod trace;

pub use config::{BackupConfig, ControllerConfig, PdGains, RegraspConfig, SelectionMode, ServoReferences};
pub use pd::{close_range_step, depth_step, forward_step, pd_command, yaw_step, PdState, DERIVATIVE_ALPHA};
pub use select::{argmax, select_target, select_target_where};
pub use trace::{is_documented, read_trace, write_trace, Stage, Transition};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::image::Image;
use crate::rng::{stream, Stream};
use crate::sim::{ActionCommand, GraspOutcome, ObjectView, Observation};

#[derive(Debug, thiserror::Error)]
pub enum ControllerError {
    #[error("no visible target")]
    NoVisibleTarget,
    #[error("target depth unavailable: mask of object {0} is empty")]
    TargetDepthUnavailable(u32),
    #[error("controller configuration: {0}")]
    Config(String),
}

/// Closed set of reasons an episode can fail.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FailureReason {
    NoVisibleTarget,
    GraspMissed,
    Slipped,
    Timeout,
    LossOfView,
    /// A non-goal object was grasped while a goal was specified.
    WrongTarget,
    SimFault,
}

impl FailureReason {
    pub const ALL: [FailureReason; 7] = [
        FailureReason::NoVisibleTarget,
        FailureReason::GraspMissed,
        FailureReason::Slipped,
        FailureReason::Timeout,
        FailureReason::LossOfView,
        FailureReason::WrongTarget,
        FailureReason::SimFault,
    ];
}

/// Gripper-side sensing available to the controller after each step.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Feedback {
    pub grasp: Option<GraspOutcome>,
    pub holding: bool,
    pub aperture: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EventKind {
    TargetSelected { id: u32 },
    MarginExcursion { id: u32, centroid: [f64; 2] },
    TargetLost { id: u32 },
    TargetSwitch { from: u32, to: u32 },
    GraspClosed { captured: bool, object_id: Option<u32> },
    Slipped { object_id: Option<u32> },
    Regrasp { count: u32, lateral_offset: f64 },
    Backup { count: u32, cause: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControllerEvent {
    pub t: f64,
    #[serde(flatten)]
    pub kind: EventKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StageState {
    pub stage: Stage,
    pub target_id: Option<u32>,
    pub regrasp_count: u32,
    pub backup_count: u32,
    pub entered_at: f64,
}

/// Servo quantities computed on one perception update.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ServoSample {
    pub t: f64,
    pub stage: Stage,
    pub target: u32,
    pub centroid: [f64; 2],
    pub centerline: f64,
    /// Yaw PD memory before this update.
    pub yaw_state_prev: Option<f64>,
    pub yaw_deriv_prev: f64,
    pub yaw_error: f64,
    /// Vertical error of the active stage (px); zero outside the vertical stages.
    pub stage_error: f64,
    pub yaw_command: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub success: bool,
    pub reason: Option<FailureReason>,
    /// Object held at the end of drag verification (or lost during it).
    pub grasped: Option<u32>,
}

#[derive(Debug, Clone)]
pub struct Controller {
    cfg: ControllerConfig,
    dt: f64,
    state: StageState,
    stage_ticks: u64,
    yaw_pd: PdState,
    axis_pd: PdState,
    hold_pd: PdState,
    latched: ActionCommand,
    /// Time the target mask was last non-empty.
    last_seen: Option<f64>,
    missing: bool,
    in_margin: bool,
    rng: ChaCha8Rng,
    lateral: (f64, u64),
    captured: Option<u32>,
    initial_target: Option<u32>,
    outcome: Option<Outcome>,
    trace: Vec<Transition>,
    events: Vec<ControllerEvent>,
    last_servo: Option<ServoSample>,
}

impl Controller {
    /// `dt` is the inner-loop period; `seed` feeds the controller stream
    /// used for regrasp offsets.
    pub fn new(cfg: ControllerConfig, dt: f64, seed: u64) -> Self {
        Self {
            cfg,
            dt,
            state: StageState { stage: Stage::Reset, target_id: None, regrasp_count: 0, backup_count: 0, entered_at: 0.0 },
            stage_ticks: 0,
            yaw_pd: PdState::default(),
            axis_pd: PdState::default(),
            hold_pd: PdState::default(),
            latched: ActionCommand::default(),
            last_seen: None,
            missing: false,
            in_margin: false,
            rng: stream(seed, Stream::Controller),
            lateral: (0.0, 0),
            captured: None,
            initial_target: None,
            outcome: None,
            trace: Vec::new(),
            events: Vec::new(),
            last_servo: None,
        }
    }

    pub fn config(&self) -> &ControllerConfig {
        &self.cfg
    }

    pub fn state(&self) -> &StageState {
        &self.state
    }

    pub fn stage(&self) -> Stage {
        self.state.stage
    }

    pub fn is_done(&self) -> bool {
        self.state.stage == Stage::Done
    }

    pub fn outcome(&self) -> Option<&Outcome> {
        self.outcome.as_ref()
    }

    pub fn trace(&self) -> &[Transition] {
        &self.trace
    }

    pub fn events(&self) -> &[ControllerEvent] {
        &self.events
    }

    /// First target chosen in the episode.
    pub fn initial_target(&self) -> Option<u32> {
        self.initial_target
    }

    /// Servo sample from the most recent perception update, if any.
    pub fn last_servo(&self) -> Option<&ServoSample> {
        self.last_servo.as_ref()
    }

    /// Ends the episode from outside (e.g. on a simulator fault).
    pub fn abort(&mut self, t: f64, reason: FailureReason) {
        if !self.is_done() {
            self.finish(t, Outcome { success: false, reason: Some(reason), grasped: self.captured }, &format!("{reason:?}"));
        }
    }

    /// One inner-loop tick at time `t`. `obs` is present on perception
    /// updates; `heatmap` is only read in affordance mode.
    pub fn tick(&mut self, t: f64, obs: Option<&Observation>, heatmap: Option<&Image<f32>>, fb: &Feedback) -> ActionCommand {
        self.last_servo = None;
        if self.is_done() {
            return ActionCommand::default();
        }
        if t >= self.cfg.episode_timeout - 1e-9 {
            self.finish(t, self.failure(FailureReason::Timeout), "episode time limit");
            return ActionCommand::default();
        }
        self.stage_ticks += 1;

        match self.state.stage {
            Stage::Reset => {
                if let Some(o) = obs {
                    match select_target(o, self.cfg.mode, heatmap) {
                        Ok(id) => {
                            self.initial_target = Some(id);
                            self.state.target_id = Some(id);
                            self.events.push(ControllerEvent { t, kind: EventKind::TargetSelected { id } });
                            self.enter(t, Stage::YawAlign, &format!("selected target {id}"));
                            self.servo(t, o, heatmap);
                        }
                        Err(_) => self.finish(t, self.failure(FailureReason::NoVisibleTarget), "no visible target"),
                    }
                }
            }
            s if s.is_servo() => {
                if let Some(o) = obs {
                    self.servo(t, o, heatmap);
                }
                self.check_stage_timeout(t);
            }
            Stage::Grasp => self.grasp_tick(t, obs, fb),
            Stage::DragVerify => self.drag_tick(t, fb),
            Stage::RecoverRegrasp => self.regrasp_tick(t, obs, heatmap, fb),
            Stage::RecoverBackup => self.backup_tick(t, obs, heatmap),
            _ => {}
        }

        if self.is_done() {
            ActionCommand::default()
        } else {
            self.latched.saturated()
        }
    }

    fn failure(&self, reason: FailureReason) -> Outcome {
        Outcome { success: false, reason: Some(reason), grasped: self.captured }
    }

    fn enter(&mut self, t: f64, to: Stage, reason: &str) {
        let from = self.state.stage;
        debug_assert!(is_documented(from, to), "{from:?} -> {to:?}");
        log::debug!("t={t:.2} {from:?} -> {to:?}: {reason}");
        self.trace.push(Transition { t, from, to, reason: reason.to_string() });
        self.state.stage = to;
        self.state.entered_at = t;
        self.stage_ticks = 0;
        self.axis_pd = PdState::default();
        self.hold_pd = PdState::default();
        self.in_margin = false;
    }

    fn finish(&mut self, t: f64, outcome: Outcome, reason: &str) {
        self.enter(t, Stage::Done, reason);
        self.outcome = Some(outcome);
        self.latched = ActionCommand::default();
    }

    fn ticks_for(&self, seconds: f64) -> u64 {
        (seconds / self.dt).round() as u64
    }

    fn check_stage_timeout(&mut self, t: f64) {
        if self.state.stage.is_servo() || self.state.stage == Stage::Grasp {
            if t - self.state.entered_at >= self.cfg.stage_timeout - 1e-9 {
                if !self.start_backup(t, "stage timeout") {
                    self.finish(t, self.failure(FailureReason::Timeout), "stage timeout");
                }
            }
        }
    }

    /// Enters backup recovery if enabled and not exhausted.
    fn start_backup(&mut self, t: f64, cause: &str) -> bool {
        let b = self.cfg.backup;
        if !b.enabled || self.state.backup_count >= b.max_backups {
            return false;
        }
        self.state.backup_count += 1;
        self.events.push(ControllerEvent { t, kind: EventKind::Backup { count: self.state.backup_count, cause: cause.into() } });
        self.enter(t, Stage::RecoverBackup, cause);
        self.latched = ActionCommand {
            forward: -b.retreat_command,
            vertical: b.ascent_command,
            ..ActionCommand::default()
        };
        true
    }

    fn target_view<'a>(&self, obs: &'a Observation) -> Option<&'a ObjectView> {
        self.state.target_id.and_then(|id| obs.object(id)).filter(|v| v.pixel_count > 0)
    }

    fn yaw_update(&mut self, t: f64, obs: &Observation, view: &ObjectView) -> f64 {
        let centerline = (obs.width() as f64 - 1.0) / 2.0;
        let prev = self.yaw_pd;
        let (u, s) = yaw_step(view.centroid[0], centerline, prev, &self.cfg.yaw, self.cfg.perception_period);
        self.yaw_pd = s;
        self.last_servo = Some(ServoSample {
            t,
            stage: self.state.stage,
            target: view.id,
            centroid: view.centroid,
            centerline,
            yaw_state_prev: prev.prev_error,
            yaw_deriv_prev: prev.derivative,
            yaw_error: centerline - view.centroid[0],
            stage_error: 0.0,
            yaw_command: u,
        });
        u
    }

    fn margin_distance(obs: &Observation, c: [f64; 2]) -> f64 {
        let (w, h) = (obs.width() as f64 - 1.0, obs.height() as f64 - 1.0);
        c[0].min(c[1]).min(w - c[0]).min(h - c[1])
    }

    /// Perception update in a servo stage.
    fn servo(&mut self, t: f64, obs: &Observation, heatmap: Option<&Image<f32>>) {
        let Some(view) = self.target_view(obs).copied() else {
            self.on_target_missing(t, obs, heatmap);
            return;
        };
        self.missing = false;
        self.last_seen = Some(t);

        if Self::margin_distance(obs, view.centroid) < self.cfg.refs.margin_px {
            if !self.in_margin {
                self.events.push(ControllerEvent { t, kind: EventKind::MarginExcursion { id: view.id, centroid: view.centroid } });
            }
            self.in_margin = true;
            if self.start_backup(t, "target near image margin") {
                return;
            }
        } else {
            self.in_margin = false;
        }

        let dt = self.cfg.perception_period;
        let refs = self.cfg.refs;
        let v = view.centroid[1];
        let yaw = self.yaw_update(t, obs, &view);
        // A stage that completes on this update hands the same frame to the
        // next one.
        for _ in 0..4 {
            match self.state.stage {
                Stage::YawAlign => {
                    self.latched = ActionCommand { yaw, ..ActionCommand::default() };
                    let e = (obs.width() as f64 - 1.0) / 2.0 - view.centroid[0];
                    if e.abs() < self.cfg.yaw.deadband {
                        self.enter(t, Stage::ForwardApproach, "centroid on centerline");
                        continue;
                    }
                }
                Stage::ForwardApproach => {
                    let (surge, done, s) =
                        forward_step(v, &refs, self.cfg.forward_threshold_px, self.axis_pd, &self.cfg.forward, dt);
                    self.axis_pd = s;
                    self.latched = ActionCommand { yaw, forward: surge, ..ActionCommand::default() };
                    if done {
                        self.enter(t, Stage::DepthAdjust, "centroid on lower line");
                        continue;
                    }
                    // Low and already close (after a recovery or retarget):
                    // the lower line is out of reach, so hand over early.
                    if view.min_depth <= refs.close_range_depth {
                        self.latched.forward = 0.0;
                        self.enter(t, Stage::DepthAdjust, "target within close range");
                        continue;
                    }
                }
                Stage::DepthAdjust => {
                    let (heave, done, s) = depth_step(v, &refs, self.axis_pd, &self.cfg.depth, dt);
                    self.axis_pd = s;
                    self.latched = ActionCommand { yaw, vertical: heave, ..ActionCommand::default() };
                    if done {
                        self.enter(t, Stage::CloseRange, "centroid inside band");
                        continue;
                    }
                }
                Stage::CloseRange => {
                    let (heave, _, s) = depth_step(v, &refs, self.hold_pd, &self.cfg.depth, dt);
                    self.hold_pd = s;
                    let (surge, trigger) =
                        close_range_step(view.min_depth, &refs, self.cfg.creep_command, self.cfg.creep_min_command);
                    self.latched = ActionCommand { yaw, forward: surge, vertical: heave, ..ActionCommand::default() };
                    if trigger {
                        self.enter(t, Stage::Grasp, &format!("mask depth {:.3} m", view.min_depth));
                        self.latched = ActionCommand { yaw, close: true, ..ActionCommand::default() };
                    }
                }
                _ => {}
            }
            break;
        }
        if let Some(s) = self.last_servo.as_mut() {
            s.stage = self.state.stage;
            s.stage_error = match s.stage {
                Stage::ForwardApproach => refs.lower_line_v - v,
                Stage::DepthAdjust | Stage::CloseRange => refs.band_mid() - v,
                _ => 0.0,
            };
        }
    }

    fn on_target_missing(&mut self, t: f64, obs: &Observation, heatmap: Option<&Image<f32>>) {
        let id = self.state.target_id.expect("servo stages have a target");
        if !self.missing {
            self.missing = true;
            self.events.push(ControllerEvent { t, kind: EventKind::TargetLost { id } });
        }
        let since = self.last_seen.map_or(f64::INFINITY, |s| t - s);
        if since < self.cfg.coast - 1e-9 {
            return; // coast on the latched command
        }
        if self.start_backup(t, "target lost") {
            return;
        }
        let mode = self.cfg.mode;
        match select_target_where(obs, mode, heatmap, |o| o != id) {
            Ok(next) => {
                self.events.push(ControllerEvent { t, kind: EventKind::TargetSwitch { from: id, to: next } });
                self.state.target_id = Some(next);
                self.yaw_pd = PdState::default();
                self.missing = false;
                self.last_seen = None;
                self.enter(t, Stage::YawAlign, &format!("retarget {id} -> {next}"));
                self.servo(t, obs, heatmap);
            }
            Err(_) => self.finish(t, self.failure(FailureReason::LossOfView), "target out of view"),
        }
    }

    fn grasp_tick(&mut self, t: f64, obs: Option<&Observation>, fb: &Feedback) {
        if let Some(o) = obs {
            if let Some(view) = self.target_view(o).copied() {
                let yaw = self.yaw_update(t, o, &view);
                self.latched.yaw = yaw;
            }
        }
        self.latched.close = true;
        self.latched.open = false;
        if let Some(g) = fb.grasp {
            self.events.push(ControllerEvent { t, kind: EventKind::GraspClosed { captured: g.captured, object_id: g.object_id } });
            self.captured = g.object_id.filter(|_| g.captured);
            let reason = match self.captured {
                Some(id) => format!("captured object {id}"),
                None => "closed on nothing".to_string(),
            };
            self.enter(t, Stage::DragVerify, &reason);
            if self.captured.is_none() {
                self.grasp_failed(t, FailureReason::GraspMissed);
                return;
            }
            self.latched = ActionCommand { forward: -self.cfg.drag_command, close: true, ..ActionCommand::default() };
            return;
        }
        self.check_stage_timeout(t);
    }

    fn drag_tick(&mut self, t: f64, fb: &Feedback) {
        if !fb.holding {
            self.events.push(ControllerEvent { t, kind: EventKind::Slipped { object_id: self.captured } });
            self.grasp_failed(t, FailureReason::Slipped);
            return;
        }
        // stage_ticks counts drag steps since entry, each ending with the
        // object held.
        if self.stage_ticks >= self.ticks_for(self.cfg.drag_duration) {
            let grasped = self.captured;
            self.finish(t, Outcome { success: true, reason: None, grasped }, "held through drag");
        }
    }

    fn grasp_failed(&mut self, t: f64, reason: FailureReason) {
        let r = self.cfg.regrasp;
        if !r.enabled || self.state.regrasp_count >= r.max_regrasps {
            let why = if r.enabled { "regrasp limit reached" } else { "grasp failed" };
            self.finish(t, self.failure(reason), why);
            return;
        }
        self.state.regrasp_count += 1;
        let [lo, hi] = r.lateral_offset;
        let magnitude = if hi > lo { self.rng.random_range(lo..=hi) } else { lo };
        let sign = if self.rng.random_bool(0.5) { 1.0 } else { -1.0 };
        let offset = sign * magnitude;
        self.lateral = (sign, self.ticks_for(magnitude / r.lateral_speed));
        self.events.push(ControllerEvent { t, kind: EventKind::Regrasp { count: self.state.regrasp_count, lateral_offset: offset } });
        self.captured = None;
        self.enter(t, Stage::RecoverRegrasp, &format!("{reason:?}"));
        self.latched = ActionCommand { forward: -r.back_command, vertical: r.ascent_command, ..ActionCommand::default() };
    }

    fn regrasp_tick(&mut self, t: f64, obs: Option<&Observation>, heatmap: Option<&Image<f32>>, fb: &Feedback) {
        let r = self.cfg.regrasp;
        let back = self.ticks_for(r.t_back);
        let (sign, lateral) = self.lateral;
        let k = self.stage_ticks - 1;
        self.latched = if k < back {
            ActionCommand { forward: -r.back_command, vertical: r.ascent_command, ..ActionCommand::default() }
        } else if k < back + lateral {
            ActionCommand { lateral: sign * r.lateral_command, ..ActionCommand::default() }
        } else {
            if fb.aperture >= 1.0 - 1e-9 {
                self.yaw_pd = PdState::default();
                self.enter(t, Stage::YawAlign, "gripper reopened");
                if let Some(o) = obs {
                    self.servo(t, o, heatmap);
                }
                return;
            }
            ActionCommand { open: true, ..ActionCommand::default() }
        };
        self.track_during_recovery(obs);
    }

    fn backup_tick(&mut self, t: f64, obs: Option<&Observation>, heatmap: Option<&Image<f32>>) {
        if self.stage_ticks - 1 >= self.ticks_for(self.cfg.backup.t_retreat) {
            self.yaw_pd = PdState::default();
            self.enter(t, Stage::YawAlign, "retreat complete");
            if let Some(o) = obs {
                self.servo(t, o, heatmap);
            }
            return;
        }
        self.track_during_recovery(obs);
    }

    /// Notes sightings while recovering so coasting restarts from fresh data.
    fn track_during_recovery(&mut self, obs: Option<&Observation>) {
        if let Some(o) = obs {
            if self.target_view(o).is_some() {
                self.last_seen = Some(o.timestamp);
                self.missing = false;
            }
        }
    }
}
