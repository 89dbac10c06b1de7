use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::episode::{run_episode, EpisodeOutput, EpisodeRecord};
use super::spec::{CampaignSpec, EpisodeSpec};
use super::HarnessError;
use crate::controller::FailureReason;

pub const REPORT_JSON: &str = "report.json";
pub const REPORT_TEXT: &str = "report.txt";
pub const SUCCESS_MANIFEST: &str = "successes.manifest";
pub const EPISODES_DIR: &str = "episodes";

/// Per-episode line of a campaign report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSummary {
    pub episode_id: u64,
    pub seed: u64,
    pub success: bool,
    pub reason: Option<FailureReason>,
    pub duration: f64,
    pub drag_duration: Option<f64>,
    pub goal: Option<u32>,
    pub initial_target: Option<u32>,
    pub grasped: Option<u32>,
    pub regrasps: u32,
    pub backups: u32,
    pub margin_excursion: bool,
    pub target_switch: bool,
}

impl EpisodeSummary {
    pub fn of(r: &EpisodeRecord) -> Self {
        Self {
            episode_id: r.episode_id,
            seed: r.seed,
            success: r.success(),
            reason: r.outcome.reason,
            duration: r.duration,
            drag_duration: r.drag_duration,
            goal: r.goal,
            initial_target: r.initial_target,
            grasped: r.outcome.grasped,
            regrasps: r.regrasp_count,
            backups: r.backup_count,
            margin_excursion: r.margin_excursion,
            target_switch: r.target_switch,
        }
    }

    /// Held an object through the whole drag, whichever object it was.
    pub fn held_through_drag(&self) -> bool {
        self.success || self.reason == Some(FailureReason::WrongTarget)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignReport {
    pub name: String,
    pub n_episodes: usize,
    pub seed_base: u64,
    pub successes: usize,
    pub success_rate: f64,
    /// Mean simulated episode length (s).
    pub mean_duration: f64,
    /// Every failure reason, zero counts included.
    pub failures: BTreeMap<FailureReason, usize>,
    pub regrasps_per_episode: f64,
    pub backups_per_episode: f64,
    /// Goal-conditioned episodes that held an object through the drag.
    pub goal_grasps: usize,
    /// Fraction of `goal_grasps` that held the goal; `None` without goals.
    pub target_fidelity: Option<f64>,
    pub margin_excursions: usize,
    pub target_switches: usize,
    pub episodes: Vec<EpisodeSummary>,
}

impl CampaignReport {
    pub fn from_summaries(name: &str, seed_base: u64, mut episodes: Vec<EpisodeSummary>) -> Self {
        episodes.sort_by_key(|e| e.episode_id);
        let n = episodes.len();
        let denom = n.max(1) as f64;
        let mut failures: BTreeMap<FailureReason, usize> = FailureReason::ALL.iter().map(|&r| (r, 0)).collect();
        for e in &episodes {
            if let Some(r) = e.reason {
                *failures.entry(r).or_default() += 1;
            }
        }
        let successes = episodes.iter().filter(|e| e.success).count();
        let held: Vec<_> = episodes.iter().filter(|e| e.goal.is_some() && e.held_through_drag()).collect();
        let on_goal = held.iter().filter(|e| e.grasped == e.goal).count();
        Self {
            name: name.to_string(),
            n_episodes: n,
            seed_base,
            successes,
            success_rate: successes as f64 / denom,
            mean_duration: episodes.iter().map(|e| e.duration).sum::<f64>() / denom,
            failures,
            regrasps_per_episode: episodes.iter().map(|e| e.regrasps as f64).sum::<f64>() / denom,
            backups_per_episode: episodes.iter().map(|e| e.backups as f64).sum::<f64>() / denom,
            goal_grasps: held.len(),
            target_fidelity: (!held.is_empty()).then(|| on_goal as f64 / held.len() as f64),
            margin_excursions: episodes.iter().filter(|e| e.margin_excursion).count(),
            target_switches: episodes.iter().filter(|e| e.target_switch).count(),
            episodes,
        }
    }

    pub fn failure_count(&self, reason: FailureReason) -> usize {
        self.failures.get(&reason).copied().unwrap_or(0)
    }

    /// Successes plus all failure counts; equals `n_episodes`.
    pub fn accounted(&self) -> usize {
        self.successes + self.failures.values().sum::<usize>()
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        let pct = |x: f64| 100.0 * x;
        let _ = writeln!(s, "campaign        {}", self.name);
        let _ = writeln!(
            s,
            "episodes        {} (seeds {}..={})",
            self.n_episodes,
            self.seed_base,
            self.seed_base.wrapping_add(self.n_episodes.saturating_sub(1) as u64)
        );
        let _ = writeln!(s, "success         {}/{} ({:.1}%)", self.successes, self.n_episodes, pct(self.success_rate));
        let _ = writeln!(s, "mean duration   {:.2} s", self.mean_duration);
        let _ = writeln!(s, "regrasps/ep     {:.3}", self.regrasps_per_episode);
        let _ = writeln!(s, "backups/ep      {:.3}", self.backups_per_episode);
        match self.target_fidelity {
            Some(f) => {
                let _ = writeln!(s, "target fidelity {:.1}% of {} goal grasps", pct(f), self.goal_grasps);
            }
            None => {
                let _ = writeln!(s, "target fidelity n/a");
            }
        }
        let _ = writeln!(s, "margin events   {}", self.margin_excursions);
        let _ = writeln!(s, "target switches {}", self.target_switches);
        let _ = writeln!(s, "failures");
        for (r, c) in &self.failures {
            let _ = writeln!(s, "  {:<16}{}", format!("{r:?}"), c);
        }
        s
    }

    /// Writes `report.json`, `report.txt` and `successes.manifest`.
    pub fn write(&self, dir: &Path) -> Result<(), HarnessError> {
        fs::create_dir_all(dir).map_err(HarnessError::io(dir))?;
        let json = serde_json::to_string_pretty(self).map_err(|e| HarnessError::Format(e.to_string()))?;
        let path = dir.join(REPORT_JSON);
        fs::write(&path, json).map_err(HarnessError::io(&path))?;
        let path = dir.join(REPORT_TEXT);
        fs::write(&path, self.summary()).map_err(HarnessError::io(&path))?;
        let mut manifest = String::new();
        for e in self.episodes.iter().filter(|e| e.success) {
            let _ = writeln!(manifest, "{}/{}", EPISODES_DIR, episode_dir_name(e.episode_id));
        }
        let path = dir.join(SUCCESS_MANIFEST);
        fs::write(&path, manifest).map_err(HarnessError::io(&path))?;
        Ok(())
    }

    pub fn read(dir: &Path) -> Result<Self, HarnessError> {
        let path = dir.join(REPORT_JSON);
        let text = fs::read_to_string(&path).map_err(HarnessError::io(&path))?;
        serde_json::from_str(&text).map_err(|e| HarnessError::Format(format!("{}: {e}", path.display())))
    }
}

pub fn episode_dir_name(id: u64) -> String {
    format!("episode_{id:05}")
}

/// Runs `n` episodes of `episode` with seeds `seed_base + i` on `jobs`
/// workers. Records go under `out/episodes/` when `out` is given.
pub fn run_episodes(
    name: &str,
    episode: &EpisodeSpec,
    n: usize,
    seed_base: u64,
    persist_layout: bool,
    out: Option<(&Path, super::DumpMode)>,
    jobs: usize,
) -> Result<CampaignReport, HarnessError> {
    episode.validate()?;
    let run_one = |i: usize| -> Result<EpisodeSummary, HarnessError> {
        let seed = seed_base.wrapping_add(i as u64);
        let layout = if persist_layout { seed_base } else { seed };
        let dir: Option<PathBuf> = out.map(|(d, _)| d.join(EPISODES_DIR).join(episode_dir_name(i as u64)));
        let output = match (&dir, out) {
            (Some(d), Some((_, dump))) => Some(EpisodeOutput { dir: d, dump }),
            _ => None,
        };
        let rec = run_episode(episode, i as u64, seed, layout, output)?;
        log::info!("{name}: episode {i} seed {seed} -> {:?}", rec.outcome.reason);
        Ok(EpisodeSummary::of(&rec))
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| HarnessError::Config(format!("worker pool: {e}")))?;
    let summaries: Vec<EpisodeSummary> =
        pool.install(|| (0..n).into_par_iter().map(run_one).collect::<Result<Vec<_>, _>>())?;
    let report = CampaignReport::from_summaries(name, seed_base, summaries);
    if let Some((dir, _)) = out {
        report.write(dir)?;
    }
    Ok(report)
}

/// Runs a campaign spec. `out` overrides the spec's output directory.
pub fn run_campaign(spec: &CampaignSpec, out: Option<&Path>, jobs: usize) -> Result<CampaignReport, HarnessError> {
    spec.validate()?;
    let dir = out.or(spec.output_dir.as_deref());
    run_episodes(
        &spec.name,
        &spec.resolved_episode(),
        spec.n_episodes,
        spec.seed_base,
        spec.persist_layout,
        dir.map(|d| (d, spec.dump_frames)),
        jobs,
    )
}

/// Worker count when none is given: the machine's logical cores.
pub fn default_jobs() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}
