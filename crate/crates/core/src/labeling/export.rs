use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::samples::{AffordanceSample, NormSpec, SAMPLE_SIZE};
use super::LabelError;
use crate::image::Image;
use crate::io::{f32_from_le_bytes, f32_to_le_bytes, fnv1a64};

pub const MANIFEST_FORMAT: &str = "aquagrasp-affordance";
pub const MANIFEST_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";

/// Episode-wise partition; no id appears in both lists.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct Split {
    pub train: Vec<u64>,
    pub validation: Vec<u64>,
}

impl Split {
    pub fn contains_train(&self, id: u64) -> bool {
        self.train.binary_search(&id).is_ok()
    }

    pub fn name_of(&self, id: u64) -> Option<&'static str> {
        if self.train.binary_search(&id).is_ok() {
            Some("train")
        } else if self.validation.binary_search(&id).is_ok() {
            Some("validation")
        } else {
            None
        }
    }
}

/// Deterministic episode-wise split. Episodes are ordered by the FNV-1a hash
/// of their id and the first `round(n * val_fraction)` go to validation,
/// keeping at least one training episode.
pub fn split_episodes(ids: &[u64], val_fraction: f64) -> Split {
    let mut ids = ids.to_vec();
    ids.sort_unstable();
    ids.dedup();
    let n = ids.len();
    let mut n_val = ((n as f64) * val_fraction.clamp(0.0, 1.0)).round() as usize;
    if n_val >= n {
        n_val = n.saturating_sub(1);
    }
    let mut order = ids.clone();
    order.sort_by_key(|id| (fnv1a64(&id.to_le_bytes()), *id));
    let mut validation: Vec<u64> = order[..n_val].to_vec();
    let mut train: Vec<u64> = order[n_val..].to_vec();
    validation.sort_unstable();
    train.sort_unstable();
    Split { train, validation }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleEntry {
    pub episode: u64,
    pub frame: usize,
    pub split: String,
    pub target_pixel: [usize; 2],
    pub depth: String,
    pub goal: String,
    pub target: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub target_splat: Option<String>,
    /// FNV-1a 64 of each file, hex, in the order depth, goal, target, splat.
    pub checksums: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Counts {
    pub samples: usize,
    pub episodes: usize,
    pub train_samples: usize,
    pub validation_samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub version: u32,
    /// `[width, height]` of every array.
    pub resolution: [usize; 2],
    pub dtype: String,
    pub byte_order: String,
    pub anchors: NormSpec,
    pub splits: Split,
    pub counts: Counts,
    pub samples: Vec<SampleEntry>,
    /// FNV-1a 64 over the concatenated per-file checksums, hex.
    pub checksum: String,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> LabelError + '_ {
    move |source| LabelError::Io { path: path.to_path_buf(), source }
}

fn write_array(path: &Path, img: &Image<f32>) -> Result<u64, LabelError> {
    let bytes = f32_to_le_bytes(&img.data);
    fs::write(path, &bytes).map_err(io_err(path))?;
    Ok(fnv1a64(&bytes))
}

/// Reads one exported `SAMPLE_SIZE`-square array.
pub fn read_array(path: &Path) -> Result<Image<f32>, LabelError> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    let data = f32_from_le_bytes(&bytes)
        .filter(|d| d.len() == SAMPLE_SIZE * SAMPLE_SIZE)
        .ok_or_else(|| LabelError::Format(format!("{}: expected {} floats", path.display(), SAMPLE_SIZE * SAMPLE_SIZE)))?;
    Ok(Image { width: SAMPLE_SIZE, height: SAMPLE_SIZE, data })
}

pub fn read_manifest(dir: &Path) -> Result<Manifest, LabelError> {
    let path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path).map_err(io_err(&path))?;
    serde_json::from_str(&text).map_err(|e| LabelError::Format(format!("{}: {e}", path.display())))
}

/// Writes every sample under `dir/episode_<id>/frame_<k>.{depth,goal,target}`
/// plus `dir/manifest.json`. Samples from episodes outside `split` are an
/// error; nothing is written for an empty sample list.
pub fn export_dataset(samples: &[AffordanceSample], dir: &Path, split: &Split, anchors: NormSpec) -> Result<Manifest, LabelError> {
    if samples.is_empty() {
        return Err(LabelError::EmptyDataset);
    }
    let overlap = split.train.iter().any(|id| split.validation.binary_search(id).is_ok());
    if overlap {
        return Err(LabelError::Format("train and validation splits share an episode".into()));
    }
    let mut order: Vec<&AffordanceSample> = samples.iter().collect();
    order.sort_by_key(|s| (s.episode_id, s.frame_index));
    for s in &order {
        if split.name_of(s.episode_id).is_none() {
            return Err(LabelError::Format(format!("episode {} is in neither split", s.episode_id)));
        }
    }

    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut entries = Vec::with_capacity(order.len());
    let mut all_sums = Vec::new();
    for s in order {
        let ep_dir = format!("episode_{}", s.episode_id);
        let ep_path = dir.join(&ep_dir);
        fs::create_dir_all(&ep_path).map_err(io_err(&ep_path))?;
        let rel = |ext: &str| format!("{ep_dir}/frame_{}.{ext}", s.frame_index);
        let mut sums = vec![
            write_array(&dir.join(rel("depth")), &s.depth_current)?,
            write_array(&dir.join(rel("goal")), &s.depth_goal)?,
            write_array(&dir.join(rel("target")), &s.target_map)?,
        ];
        let splat = match &s.target_splat {
            Some(img) => {
                sums.push(write_array(&dir.join(rel("target_splat")), img)?);
                Some(rel("target_splat"))
            }
            None => None,
        };
        all_sums.extend(sums.iter().flat_map(|c| c.to_le_bytes()));
        entries.push(SampleEntry {
            episode: s.episode_id,
            frame: s.frame_index,
            split: split.name_of(s.episode_id).expect("checked").to_string(),
            target_pixel: s.target_pixel,
            depth: rel("depth"),
            goal: rel("goal"),
            target: rel("target"),
            target_splat: splat,
            checksums: sums.iter().map(|c| format!("{c:016x}")).collect(),
        });
    }
    let mut episodes: Vec<u64> = entries.iter().map(|e| e.episode).collect();
    episodes.dedup();
    let train_samples = entries.iter().filter(|e| e.split == "train").count();
    let manifest = Manifest {
        format: MANIFEST_FORMAT.into(),
        version: MANIFEST_VERSION,
        resolution: [SAMPLE_SIZE, SAMPLE_SIZE],
        dtype: "f32".into(),
        byte_order: "little".into(),
        anchors,
        splits: split.clone(),
        counts: Counts {
            samples: entries.len(),
            episodes: episodes.len(),
            train_samples,
            validation_samples: entries.len() - train_samples,
        },
        samples: entries,
        checksum: format!("{:016x}", fnv1a64(&all_sums)),
    };
    let path = dir.join(MANIFEST_FILE);
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| LabelError::Format(e.to_string()))?;
    fs::write(&path, text).map_err(io_err(&path))?;
    Ok(manifest)
}

/// Re-reads every file listed in a manifest and checks its checksum.
pub fn verify_dataset(dir: &Path, manifest: &Manifest) -> Result<(), LabelError> {
    for e in &manifest.samples {
        let files: Vec<&String> = [&e.depth, &e.goal, &e.target].into_iter().chain(e.target_splat.as_ref()).collect();
        for (f, sum) in files.iter().zip(&e.checksums) {
            let path: PathBuf = dir.join(f);
            let bytes = fs::read(&path).map_err(io_err(&path))?;
            if format!("{:016x}", fnv1a64(&bytes)) != *sum {
                return Err(LabelError::Format(format!("{}: checksum mismatch", path.display())));
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(ep: u64, k: usize) -> AffordanceSample {
        let img = |s: f32| Image::from_fn(SAMPLE_SIZE, SAMPLE_SIZE, |u, v| s + (u * 3 + v) as f32 * 1e-4);
        let mut target = Image::filled(SAMPLE_SIZE, SAMPLE_SIZE, 0.0);
        target.set(k, 7, 1.0);
        AffordanceSample {
            episode_id: ep,
            frame_index: k,
            depth_current: img(k as f32 * 0.01),
            depth_goal: img(0.5),
            target_map: target,
            target_splat: None,
            target_pixel: [k, 7],
        }
    }

    #[test]
    fn export_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let samples = vec![sample(3, 0), sample(3, 1), sample(8, 0)];
        let split = split_episodes(&[3, 8], 0.5);
        let m = export_dataset(&samples, dir.path(), &split, NormSpec::new(0.1, 5.0).unwrap()).unwrap();
        assert_eq!(m.counts.samples, 3);
        verify_dataset(dir.path(), &m).unwrap();
        assert_eq!(read_manifest(dir.path()).unwrap(), m);
        for (e, s) in m.samples.iter().zip([&samples[0], &samples[1], &samples[2]]) {
            assert_eq!(read_array(&dir.path().join(&e.depth)).unwrap(), s.depth_current);
            assert_eq!(read_array(&dir.path().join(&e.target)).unwrap(), s.target_map);
        }
    }

    #[test]
    fn split_has_no_leakage() {
        let s = split_episodes(&[1, 2], 0.2);
        assert_eq!(s.train.len() + s.validation.len(), 2);
        let ids: Vec<u64> = (0..50).collect();
        let s = split_episodes(&ids, 0.2);
        assert_eq!(s.validation.len(), 10);
        assert!(s.train.iter().all(|id| !s.validation.contains(id)));
    }

    #[test]
    fn empty_export_writes_nothing() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("ds");
        let r = export_dataset(&[], &out, &Split::default(), NormSpec::new(0.0, 1.0).unwrap());
        assert!(matches!(r, Err(LabelError::EmptyDataset)));
        assert!(!out.exists());
    }
}
