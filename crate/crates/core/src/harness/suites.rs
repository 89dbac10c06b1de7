use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::campaign::{run_episodes, CampaignReport};
use super::spec::{EpisodeSpec, GoalMode};
use super::HarnessError;
use crate::controller::SelectionMode;
use crate::sim::{ObjectSpec, ShapeKind};

pub const SUITE_NAMES: [&str; 4] = ["goal_disambiguation", "overshoot_failure", "recovery_ablation", "novel_shape_transfer"];

/// Velocity lag (s) of the overshoot suite.
pub const HIGH_LAG: f64 = 1.2;
/// Graspability of the recovery ablation.
pub const ABLATION_GRASPABILITY: f64 = 0.7;

/// One configuration of a suite; all arms of a suite share seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct SuiteArm {
    pub label: String,
    pub spec: EpisodeSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub name: String,
    pub n_episodes: usize,
    pub seed_base: u64,
    pub arms: Vec<(String, CampaignReport)>,
}

impl SuiteReport {
    pub fn arm(&self, label: &str) -> Option<&CampaignReport> {
        self.arms.iter().find(|(l, _)| l == label).map(|(_, r)| r)
    }

    pub fn summary(&self) -> String {
        let mut s = format!("suite {} ({} paired episodes per arm)\n", self.name, self.n_episodes);
        for (label, r) in &self.arms {
            s.push_str(&format!("\n[{label}]\n{}", r.summary()));
        }
        s
    }

    pub fn write(&self, dir: &Path) -> Result<(), HarnessError> {
        fs::create_dir_all(dir).map_err(HarnessError::io(dir))?;
        let path = dir.join("suite.json");
        let text = serde_json::to_string_pretty(self).map_err(|e| HarnessError::Format(e.to_string()))?;
        fs::write(&path, text).map_err(HarnessError::io(&path))?;
        let path = dir.join("suite.txt");
        fs::write(&path, self.summary()).map_err(HarnessError::io(&path))?;
        Ok(())
    }
}

fn three_objects(base: &EpisodeSpec) -> EpisodeSpec {
    let mut s = base.clone();
    s.sim.n_objects = 3;
    s
}

fn arm(label: &str, spec: EpisodeSpec) -> SuiteArm {
    SuiteArm { label: label.into(), spec }
}

/// The arms of a named suite, derived from `base`.
pub fn suite_arms(name: &str, base: &EpisodeSpec) -> Result<Vec<SuiteArm>, HarnessError> {
    let mut base = base.clone();
    base.scenario = name.to_string();
    match name {
        "goal_disambiguation" => {
            let mut s = three_objects(&base);
            s.goal = GoalMode::Random;
            let mut aff = s.clone();
            aff.controller.mode = SelectionMode::Affordance;
            let mut cb = s;
            cb.controller.mode = SelectionMode::CenterBias;
            Ok(vec![arm("affordance", aff), arm("center_bias", cb)])
        }
        "overshoot_failure" => {
            let mut s = three_objects(&base);
            s.sim.dynamics = s.sim.dynamics.with_lag(HIGH_LAG);
            let mut off = s.clone();
            off.controller.backup.enabled = false;
            let mut on = s;
            on.controller.backup.enabled = true;
            Ok(vec![arm("backup_off", off), arm("backup_on", on)])
        }
        "recovery_ablation" => {
            let mut s = base;
            s.sim.n_objects = 1;
            s.sim.objects.iter_mut().for_each(|o| o.graspability = ABLATION_GRASPABILITY);
            let mut off = s.clone();
            off.controller.regrasp.enabled = false;
            let mut on = s;
            on.controller.regrasp.enabled = true;
            Ok(vec![arm("regrasp_off", off), arm("regrasp_on", on)])
        }
        "novel_shape_transfer" => {
            let mut s = three_objects(&base);
            s.goal = GoalMode::Random;
            s.controller.mode = SelectionMode::Affordance;
            let mut seen = s.clone();
            seen.sim.objects = ShapeKind::SEEN.iter().map(|&k| ObjectSpec::new(k, 1.0)).collect();
            let mut novel = s;
            novel.sim.objects = ShapeKind::NOVEL.iter().map(|&k| ObjectSpec::new(k, 1.0)).collect();
            Ok(vec![arm("seen_shapes", seen), arm("novel_shapes", novel)])
        }
        other => Err(HarnessError::UnknownSuite(other.to_string())),
    }
}

/// Runs every arm of a suite on the same seeds. Arm records go under
/// `out/<label>/` when `out` is given.
pub fn run_suite(
    name: &str,
    base: &EpisodeSpec,
    n_episodes: usize,
    seed_base: u64,
    out: Option<&Path>,
    jobs: usize,
) -> Result<SuiteReport, HarnessError> {
    let arms = suite_arms(name, base)?;
    let mut reports = Vec::with_capacity(arms.len());
    for a in arms {
        let dir = out.map(|d| d.join(&a.label));
        let r = run_episodes(
            &format!("{name}/{}", a.label),
            &a.spec,
            n_episodes,
            seed_base,
            false,
            dir.as_deref().map(|d| (d, super::DumpMode::None)),
            jobs,
        )?;
        reports.push((a.label, r));
    }
    let report = SuiteReport { name: name.to_string(), n_episodes, seed_base, arms: reports };
    if let Some(d) = out {
        report.write(d)?;
    }
    Ok(report)
}

/// Episodes per arm when the caller does not choose.
pub fn default_episodes(name: &str) -> usize {
    match name {
        "recovery_ablation" => 200,
        "novel_shape_transfer" => 50,
        _ => 100,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_registered_suite_has_two_arms() {
        for name in SUITE_NAMES {
            let arms = suite_arms(name, &EpisodeSpec::default()).unwrap();
            assert_eq!(arms.len(), 2, "{name}");
            assert_ne!(arms[0].spec, arms[1].spec);
            for a in &arms {
                a.spec.validate().unwrap();
            }
        }
    }

    #[test]
    fn unknown_suite_is_an_error() {
        let err = suite_arms("nope", &EpisodeSpec::default()).unwrap_err();
        assert!(matches!(err, HarnessError::UnknownSuite(n) if n == "nope"));
    }

    #[test]
    fn overshoot_arms_differ_only_in_backup() {
        let arms = suite_arms("overshoot_failure", &EpisodeSpec::default()).unwrap();
        let mut a = arms[0].spec.clone();
        a.controller.backup.enabled = true;
        assert_eq!(a, arms[1].spec);
        assert_eq!(a.sim.dynamics.tau, [HIGH_LAG; 4]);
    }
}
