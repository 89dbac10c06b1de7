use serde::{Deserialize, Serialize};

use super::backtrack::ContactTrack;
use super::heatmap::gaussian_splat;
use super::LabelError;
use crate::image::Image;

/// Side length of every exported array.
pub const SAMPLE_SIZE: usize = 112;

/// Depth anchors for clamped min-max normalisation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormSpec {
    pub d_min: f64,
    pub d_max: f64,
}

impl NormSpec {
    pub fn new(d_min: f64, d_max: f64) -> Result<Self, LabelError> {
        if !(d_max - d_min >= 1e-6) {
            return Err(LabelError::DegenerateAnchors { d_min, d_max });
        }
        Ok(Self { d_min, d_max })
    }

    /// Anchors spanning every value of every frame.
    pub fn from_frames<'a>(frames: impl IntoIterator<Item = &'a Image<f32>>) -> Result<Self, LabelError> {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for f in frames {
            let (a, b) = f.min_max();
            lo = lo.min(a as f64);
            hi = hi.max(b as f64);
        }
        Self::new(lo, hi)
    }

    pub fn normalize(&self, d: f64) -> f64 {
        ((d - self.d_min) / (self.d_max - self.d_min)).clamp(0.0, 1.0)
    }

    pub fn denormalize(&self, x: f64) -> f64 {
        self.d_min + x * (self.d_max - self.d_min)
    }

    pub fn normalize_image(&self, img: &Image<f32>) -> Image<f32> {
        Image { width: img.width, height: img.height, data: img.data.iter().map(|&d| self.normalize(d as f64) as f32).collect() }
    }
}

/// Bilinear resize to the sample grid followed by clamped normalisation.
pub fn prepare_depth(depth: &Image<f32>, norm: &NormSpec) -> Image<f32> {
    norm.normalize_image(&depth.resize_bilinear(SAMPLE_SIZE, SAMPLE_SIZE))
}

/// Nearest-neighbour image of a full-resolution pixel on the sample grid.
pub fn target_pixel(pixel: [f64; 2], width: usize, height: usize) -> Option<[usize; 2]> {
    let u = (pixel[0] * SAMPLE_SIZE as f64 / width as f64).floor();
    let v = (pixel[1] * SAMPLE_SIZE as f64 / height as f64).floor();
    let max = SAMPLE_SIZE as f64;
    (u >= 0.0 && v >= 0.0 && u < max && v < max).then_some([u as usize, v as usize])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SampleOptions {
    /// Goal frame lead before the closure (s).
    pub goal_offset: f64,
    /// Also produce a Gaussian-splatted target with this sigma (px on the sample grid).
    pub splat_sigma: Option<f64>,
}

impl Default for SampleOptions {
    fn default() -> Self {
        Self { goal_offset: 1.0, splat_sigma: Some(2.0) }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AffordanceSample {
    pub episode_id: u64,
    pub frame_index: usize,
    pub depth_current: Image<f32>,
    pub depth_goal: Image<f32>,
    /// One-hot keypoint map.
    pub target_map: Image<f32>,
    pub target_splat: Option<Image<f32>>,
    pub target_pixel: [usize; 2],
}

/// Index of the last frame at or before `t_star - offset` (frame 0 if none).
pub fn goal_frame_index(timestamps: &[f64], t_star: f64, offset: f64) -> usize {
    let t = t_star - offset + 1e-9;
    timestamps.iter().rposition(|&x| x <= t).unwrap_or(0)
}

/// One sample per frame up to `t_star_frame` whose contact pixel is visible.
/// `depths[k]` is the raw depth of frame `k`; `goal` is the raw goal depth
/// (a recorded frame or a pre-warped frame from another camera).
pub fn build_samples(
    episode_id: u64,
    depths: &[Image<f32>],
    track: &ContactTrack,
    t_star_frame: usize,
    goal: &Image<f32>,
    norm: &NormSpec,
    opts: &SampleOptions,
) -> Result<Vec<AffordanceSample>, LabelError> {
    let goal = prepare_depth(goal, norm);
    let mut out = Vec::new();
    for p in track.points.iter().filter(|p| p.visible && p.frame <= t_star_frame) {
        let depth = depths.get(p.frame).ok_or(LabelError::MissingFrame(p.frame))?;
        let Some(px) = target_pixel([p.u, p.v], depth.width, depth.height) else { continue };
        let mut target = Image::filled(SAMPLE_SIZE, SAMPLE_SIZE, 0.0f32);
        target.set(px[0], px[1], 1.0);
        out.push(AffordanceSample {
            episode_id,
            frame_index: p.frame,
            depth_current: prepare_depth(depth, norm),
            depth_goal: goal.clone(),
            target_map: target,
            target_splat: opts.splat_sigma.map(|s| gaussian_splat(SAMPLE_SIZE, SAMPLE_SIZE, [px[0] as f64, px[1] as f64], s)),
            target_pixel: px,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::labeling::backtrack::TrackRecord;

    #[test]
    fn anchors_and_clamping() {
        let n = NormSpec::new(0.5, 2.5).unwrap();
        let low = prepare_depth(&Image::filled(224, 160, 0.5f32), &n);
        assert!(low.data.iter().all(|&x| x == 0.0));
        let high = prepare_depth(&Image::filled(224, 160, 4.0f32), &n);
        assert!(high.data.iter().all(|&x| x == 1.0));
        assert!(matches!(NormSpec::new(1.0, 1.0 + 1e-7), Err(LabelError::DegenerateAnchors { .. })));
    }

    #[test]
    fn normalisation_is_idempotent_on_round_trip() {
        let n = NormSpec::new(0.2, 5.0).unwrap();
        for i in 0..=100 {
            let x = i as f64 / 100.0;
            assert!((n.normalize(n.denormalize(x)) - x).abs() < 1e-6);
        }
    }

    #[test]
    fn target_pixel_index_arithmetic() {
        assert_eq!(target_pixel([0.0, 0.0], 224, 160), Some([0, 0]));
        assert_eq!(target_pixel([101.0, 77.0], 224, 160), Some([50, 53]));
        assert_eq!(target_pixel([223.9, 159.9], 224, 160), Some([111, 111]));
        assert_eq!(target_pixel([-0.5, 10.0], 224, 160), None);
    }

    #[test]
    fn samples_only_for_visible_frames_up_to_closure() {
        let depths: Vec<_> = (0..6).map(|k| Image::filled(224, 160, 1.0 + k as f32 * 0.1)).collect();
        let track = ContactTrack {
            object_id: Some(0),
            points: (0..6).map(|k| TrackRecord { frame: k, u: 100.0, v: 50.0, visible: k != 2 }).collect(),
        };
        let norm = NormSpec::new(0.0, 2.0).unwrap();
        let s = build_samples(9, &depths, &track, 4, &depths[1], &norm, &SampleOptions::default()).unwrap();
        let frames: Vec<_> = s.iter().map(|x| x.frame_index).collect();
        assert_eq!(frames, vec![0, 1, 3, 4]);
        for x in &s {
            assert_eq!(x.target_map.data.iter().filter(|&&v| v > 0.0).count(), 1);
            assert_eq!(x.target_map.get(50, 35), 1.0);
            assert_eq!(x.target_splat.as_ref().unwrap().get(50, 35), 1.0);
            assert!(x.depth_goal.data.iter().all(|&d| (d - 0.55).abs() < 1e-6));
        }
    }

    #[test]
    fn goal_frame_is_one_second_before_closure() {
        let ts: Vec<f64> = (0..100).map(|k| k as f64 * 0.1).collect();
        assert_eq!(goal_frame_index(&ts, 5.0, 1.0), 40);
        assert_eq!(goal_frame_index(&ts, 0.5, 1.0), 0);
    }
}
