use std::fs;
use std::io::BufReader;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::spec::{DumpMode, EpisodeSpec};
use super::HarnessError;
use crate::controller::{
    read_trace, write_trace, Controller, ControllerEvent, EventKind, Feedback, FailureReason, Outcome, SelectionMode,
    ServoReferences, ServoSample, Stage, Transition,
};
use crate::labeling::oracle_heatmap;
use crate::rng::{stream, Stream};
use crate::sim::{
    write_depth, write_labels_png, DepthSidecar, ObjectView, Observation, Proprio, Simulator, TrackPoint,
};

pub const RECORD_FILE: &str = "record.json";
pub const TRACE_FILE: &str = "trace.jsonl";
pub const FRAMES_DIR: &str = "frames";
pub const SIDECAR_FILE: &str = "frames/depth.json";

/// One 10 Hz frame: the observation summary at the start of the bucket and
/// the last inner-loop command issued within it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameRecord {
    pub index: usize,
    pub timestamp: f64,
    pub proprio: Proprio,
    /// `[yaw, forward, vertical, lateral, open, close]`.
    pub action: [f64; 6],
    pub stage: Stage,
    pub target: Option<u32>,
    pub servo: Option<ServoSample>,
    pub aperture: f64,
    pub holding: bool,
    pub objects: Vec<ObjectView>,
    pub tracks: Vec<TrackPoint>,
    #[serde(default)]
    pub gripper_anchor: Option<[f64; 2]>,
    /// Depth file relative to the episode directory, when dumped.
    #[serde(default)]
    pub depth: Option<String>,
    #[serde(default)]
    pub mask: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub episode_id: u64,
    pub seed: u64,
    pub scenario: String,
    pub mode: SelectionMode,
    pub image_size: [usize; 2],
    /// Setpoints the controller servoed to, for replay overlays.
    pub references: ServoReferences,
    pub goal: Option<u32>,
    pub initial_target: Option<u32>,
    pub frames: Vec<FrameRecord>,
    pub transitions: Vec<Transition>,
    pub events: Vec<ControllerEvent>,
    pub outcome: Outcome,
    pub duration: f64,
    /// Length of the final drag verification (s), if one started.
    pub drag_duration: Option<f64>,
    pub regrasp_count: u32,
    pub backup_count: u32,
    pub margin_excursion: bool,
    /// A margin excursion was followed by a capture of a non-initial target.
    pub target_switch: bool,
    pub fault: Option<String>,
}

impl EpisodeRecord {
    pub fn success(&self) -> bool {
        self.outcome.success
    }

    pub fn timestamps(&self) -> Vec<f64> {
        self.frames.iter().map(|f| f.timestamp).collect()
    }

    /// Writes `record.json` and `trace.jsonl` into `dir`.
    pub fn save(&self, dir: &Path) -> Result<(), HarnessError> {
        fs::create_dir_all(dir).map_err(HarnessError::io(dir))?;
        let path = dir.join(RECORD_FILE);
        let text = serde_json::to_string(self).map_err(|e| HarnessError::Format(e.to_string()))?;
        fs::write(&path, text).map_err(HarnessError::io(&path))?;
        let path = dir.join(TRACE_FILE);
        let f = fs::File::create(&path).map_err(HarnessError::io(&path))?;
        write_trace(std::io::BufWriter::new(f), &self.transitions).map_err(HarnessError::io(&path))?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self, HarnessError> {
        let path = dir.join(RECORD_FILE);
        let text = fs::read_to_string(&path).map_err(HarnessError::io(&path))?;
        let rec: Self = serde_json::from_str(&text).map_err(|e| HarnessError::Format(format!("{}: {e}", path.display())))?;
        let path = dir.join(TRACE_FILE);
        if path.exists() {
            let f = fs::File::open(&path).map_err(HarnessError::io(&path))?;
            let trace = read_trace(BufReader::new(f)).map_err(HarnessError::io(&path))?;
            if trace != rec.transitions {
                return Err(HarnessError::Format(format!("{}: disagrees with the record", path.display())));
            }
        }
        Ok(rec)
    }
}

/// What a per-frame hook sees.
pub struct FrameContext<'a> {
    pub frame: usize,
    pub sim: &'a Simulator,
    pub obs: &'a Observation,
    pub controller: &'a Controller,
}

/// Where and what to dump while running.
#[derive(Debug, Clone, Copy)]
pub struct EpisodeOutput<'a> {
    pub dir: &'a Path,
    pub dump: DumpMode,
}

/// Runs one episode. The layout comes from `layout_seed`; slip, noise,
/// goal and controller streams from `seed`.
pub fn run_episode(
    spec: &EpisodeSpec,
    episode_id: u64,
    seed: u64,
    layout_seed: u64,
    output: Option<EpisodeOutput<'_>>,
) -> Result<EpisodeRecord, HarnessError> {
    run_episode_with(spec, episode_id, seed, layout_seed, output, &mut |_| {})
}

/// [`run_episode`] with a hook called on every perception frame.
pub fn run_episode_with(
    spec: &EpisodeSpec,
    episode_id: u64,
    seed: u64,
    layout_seed: u64,
    output: Option<EpisodeOutput<'_>>,
    hook: &mut dyn FnMut(&FrameContext<'_>),
) -> Result<EpisodeRecord, HarnessError> {
    spec.validate()?;
    let cfg = &spec.controller;
    let cam = spec.sim.forward_camera.camera;
    let mut controller = Controller::new(*cfg, spec.sim.dt, seed);
    let mut sim = match Simulator::with_layout(spec.sim.clone(), layout_seed, seed) {
        Ok(s) => s,
        Err(e) => return Ok(faulted(spec, episode_id, seed, e.to_string())),
    };
    let goal = match spec.goal {
        super::spec::GoalMode::Random if !sim.world.objects.is_empty() => {
            let n = sim.world.objects.len() as u32;
            Some(stream(seed, Stream::Goal).random_range(0..n))
        }
        _ => None,
    };

    let dump = output.filter(|o| o.dump != DumpMode::None);
    if let Some(o) = dump {
        let frames = o.dir.join(FRAMES_DIR);
        fs::create_dir_all(&frames).map_err(HarnessError::io(&frames))?;
    }
    let far = spec.sim.render.far;
    let mut sidecar = DepthSidecar::new(cam.width as usize, cam.height as usize, far);

    let period = (cfg.perception_period / spec.sim.dt).round().max(1.0) as u64;
    let mut fb = Feedback { grasp: None, holding: false, aperture: sim.rov.gripper_aperture };
    let mut frames: Vec<FrameRecord> = Vec::new();
    let mut fault = None;
    let mut k: u64 = 0;
    loop {
        let t = sim.time();
        let obs = (k % period == 0).then(|| sim.observe());
        let heat = match (cfg.mode, goal, obs.as_ref()) {
            (SelectionMode::Affordance, Some(g), Some(o)) => Some(oracle_heatmap(o, g, spec.heatmap_sigma)),
            _ => None,
        };
        let cmd = controller.tick(t, obs.as_ref(), heat.as_ref(), &fb);
        if let Some(o) = &obs {
            let index = frames.len();
            let (depth, mask) = match dump {
                Some(out) => {
                    let d = format!("{FRAMES_DIR}/frame_{index:05}.depth");
                    let m = format!("{FRAMES_DIR}/frame_{index:05}.png");
                    write_depth(&out.dir.join(&d), &o.depth).map_err(|e| HarnessError::Format(e.to_string()))?;
                    write_labels_png(&out.dir.join(&m), &o.labels).map_err(|e| HarnessError::Format(e.to_string()))?;
                    sidecar.timestamps.push(t);
                    (Some(d), Some(m))
                }
                None => (None, None),
            };
            frames.push(FrameRecord {
                index,
                timestamp: t,
                proprio: o.proprio,
                action: cmd.to_vector(),
                stage: controller.stage(),
                target: controller.state().target_id,
                servo: controller.last_servo().copied(),
                aperture: sim.rov.gripper_aperture,
                holding: sim.rov.held_object.is_some(),
                objects: o.objects.clone(),
                tracks: o.tracks.clone(),
                gripper_anchor: o.gripper_anchor,
                depth,
                mask,
            });
            hook(&FrameContext { frame: index, sim: &sim, obs: o, controller: &controller });
        } else if let Some(f) = frames.last_mut() {
            f.action = cmd.to_vector();
        }
        if controller.is_done() {
            break;
        }
        match sim.step(&cmd) {
            Ok(ev) => {
                fb = Feedback { grasp: ev.grasp, holding: sim.rov.held_object.is_some(), aperture: sim.rov.gripper_aperture };
            }
            Err(e) => {
                log::warn!("episode {episode_id} (seed {seed}): {e}");
                fault = Some(e.to_string());
                controller.abort(sim.time(), FailureReason::SimFault);
                break;
            }
        }
        k += 1;
    }

    let mut outcome = *controller.outcome().expect("finished controller has an outcome");
    if let (true, Some(g)) = (outcome.success, goal) {
        if outcome.grasped != Some(g) {
            outcome = Outcome { success: false, reason: Some(FailureReason::WrongTarget), grasped: outcome.grasped };
        }
    }
    let transitions = controller.trace().to_vec();
    let events = controller.events().to_vec();
    let record = EpisodeRecord {
        episode_id,
        seed,
        scenario: spec.scenario.clone(),
        mode: cfg.mode,
        image_size: [cam.width as usize, cam.height as usize],
        references: cfg.refs,
        goal,
        initial_target: controller.initial_target(),
        drag_duration: drag_duration(&transitions),
        regrasp_count: controller.state().regrasp_count,
        backup_count: controller.state().backup_count,
        margin_excursion: events.iter().any(|e| matches!(e.kind, EventKind::MarginExcursion { .. })),
        target_switch: target_switch(&events, controller.initial_target()),
        frames,
        transitions,
        events,
        outcome,
        duration: sim.time(),
        fault,
    };

    if let Some(out) = output {
        let keep_frames = match out.dump {
            DumpMode::All => true,
            DumpMode::Successes => record.success(),
            DumpMode::None => false,
        };
        let mut record = record;
        if dump.is_some() {
            if keep_frames {
                let path = out.dir.join(SIDECAR_FILE);
                let text = serde_json::to_string_pretty(&sidecar).map_err(|e| HarnessError::Format(e.to_string()))?;
                fs::write(&path, text).map_err(HarnessError::io(&path))?;
            } else {
                let frames = out.dir.join(FRAMES_DIR);
                fs::remove_dir_all(&frames).map_err(HarnessError::io(&frames))?;
                for f in &mut record.frames {
                    f.depth = None;
                    f.mask = None;
                }
            }
        }
        record.save(out.dir)?;
        return Ok(record);
    }
    Ok(record)
}

fn faulted(spec: &EpisodeSpec, episode_id: u64, seed: u64, message: String) -> EpisodeRecord {
    let cam = spec.sim.forward_camera.camera;
    EpisodeRecord {
        episode_id,
        seed,
        scenario: spec.scenario.clone(),
        mode: spec.controller.mode,
        image_size: [cam.width as usize, cam.height as usize],
        references: spec.controller.refs,
        goal: None,
        initial_target: None,
        frames: Vec::new(),
        transitions: Vec::new(),
        events: Vec::new(),
        outcome: Outcome { success: false, reason: Some(FailureReason::SimFault), grasped: None },
        duration: 0.0,
        drag_duration: None,
        regrasp_count: 0,
        backup_count: 0,
        margin_excursion: false,
        target_switch: false,
        fault: Some(message),
    }
}

fn drag_duration(trace: &[Transition]) -> Option<f64> {
    let i = trace.iter().rposition(|t| t.to == Stage::DragVerify)?;
    trace.get(i + 1).map(|next| next.t - trace[i].t)
}

fn target_switch(events: &[ControllerEvent], initial: Option<u32>) -> bool {
    let Some(first_margin) = events.iter().position(|e| matches!(e.kind, EventKind::MarginExcursion { .. })) else {
        return false;
    };
    events[first_margin..].iter().any(|e| match e.kind {
        EventKind::GraspClosed { captured: true, object_id: Some(id) } => Some(id) != initial,
        _ => false,
    })
}
