use super::config::SelectionMode;
use super::ControllerError;
use crate::image::Image;
use crate::sim::{Observation, BACKGROUND};

/// Picks the target object for an observation.
///
/// Center-bias picks the visible object whose centroid is closest to the
/// image centre. Affordance mode picks the object whose mask contains the
/// heatmap argmax, or the mask nearest to it. Without a heatmap it falls
/// back to center-bias; a heatmap with no positive pixel means the goal is
/// not in view and yields `NoVisibleTarget`. Ties go to the lowest id.
pub fn select_target(obs: &Observation, mode: SelectionMode, heatmap: Option<&Image<f32>>) -> Result<u32, ControllerError> {
    select_target_where(obs, mode, heatmap, |_| true)
}

/// [`select_target`] restricted to ids accepted by `allow`.
pub fn select_target_where(
    obs: &Observation,
    mode: SelectionMode,
    heatmap: Option<&Image<f32>>,
    allow: impl Fn(u32) -> bool,
) -> Result<u32, ControllerError> {
    let visible: Vec<_> = obs.objects.iter().filter(|o| o.pixel_count > 0 && allow(o.id)).collect();
    if visible.is_empty() {
        return Err(ControllerError::NoVisibleTarget);
    }
    if mode == SelectionMode::Affordance {
        if let Some(map) = heatmap {
            let (u, v) = argmax(map).ok_or(ControllerError::NoVisibleTarget)?;
            return nearest_mask(&obs.labels, u, v, &allow).ok_or(ControllerError::NoVisibleTarget);
        }
    }
    let cx = (obs.width() as f64 - 1.0) / 2.0;
    let cy = (obs.height() as f64 - 1.0) / 2.0;
    let best = visible
        .iter()
        .map(|o| ((o.centroid[0] - cx).hypot(o.centroid[1] - cy), o.id))
        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
        .expect("non-empty");
    Ok(best.1)
}

/// First maximal pixel in row-major order, `None` when the map has no
/// positive value.
pub fn argmax(map: &Image<f32>) -> Option<(usize, usize)> {
    let mut best: Option<(usize, f32)> = None;
    for (i, &x) in map.data.iter().enumerate() {
        if x > 0.0 && best.is_none_or(|(_, b)| x > b) {
            best = Some((i, x));
        }
    }
    best.map(|(i, _)| (i % map.width, i / map.width))
}

fn nearest_mask(labels: &Image<u8>, u: usize, v: usize, allow: &impl Fn(u32) -> bool) -> Option<u32> {
    let at = labels.get(u, v);
    if at != BACKGROUND && allow((at - 1) as u32) {
        return Some((at - 1) as u32);
    }
    let mut best: Option<(usize, u32)> = None;
    for y in 0..labels.height {
        for x in 0..labels.width {
            let l = labels.get(x, y);
            if l == BACKGROUND || !allow((l - 1) as u32) {
                continue;
            }
            let d2 = x.abs_diff(u).pow(2) + y.abs_diff(v).pow(2);
            let id = (l - 1) as u32;
            if best.is_none_or(|(bd, bid)| d2 < bd || (d2 == bd && id < bid)) {
                best = Some((d2, id));
            }
        }
    }
    best.map(|(_, id)| id)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{ObjectView, Proprio};

    fn scene(blobs: &[(u32, [usize; 2])]) -> Observation {
        let mut labels = Image::filled(40, 30, BACKGROUND);
        for &(id, [u, v]) in blobs {
            for y in v - 1..=v + 1 {
                for x in u - 1..=u + 1 {
                    labels.set(x, y, (id + 1) as u8);
                }
            }
        }
        let mut obs = Observation {
            timestamp: 0.0,
            depth: Image::filled(40, 30, 1.0),
            labels,
            objects: Vec::<ObjectView>::new(),
            tracks: Vec::new(),
            gripper_anchor: None,
            proprio: Proprio::default(),
            rgb_proxy: None,
        };
        obs.summarize();
        obs
    }

    #[test]
    fn single_object_both_modes() {
        let obs = scene(&[(4, [5, 5])]);
        assert_eq!(select_target(&obs, SelectionMode::CenterBias, None).unwrap(), 4);
        let mut heat = Image::filled(40, 30, 0.0f32);
        heat.set(30, 20, 1.0);
        assert_eq!(select_target(&obs, SelectionMode::Affordance, Some(&heat)).unwrap(), 4);
    }

    #[test]
    fn heatmap_delta_overrides_centring() {
        let obs = scene(&[(0, [20, 15]), (1, [5, 5]), (2, [33, 24])]);
        assert_eq!(select_target(&obs, SelectionMode::CenterBias, None).unwrap(), 0);
        let mut heat = Image::filled(40, 30, 0.0f32);
        heat.set(5, 5, 1.0);
        assert_eq!(select_target(&obs, SelectionMode::Affordance, Some(&heat)).unwrap(), 1);
    }

    #[test]
    fn equidistant_tie_goes_to_lowest_id() {
        // Centre of a 40x30 image is (19.5, 14.5).
        let obs = scene(&[(2, [9, 14]), (1, [30, 14]), (3, [19, 4])]);
        let d: Vec<_> = obs.objects.iter().map(|o| (o.centroid[0] - 19.5).hypot(o.centroid[1] - 14.5)).collect();
        assert!((d[0] - d[1]).abs() < 1e-12);
        assert_eq!(select_target(&obs, SelectionMode::CenterBias, None).unwrap(), 1);
    }

    #[test]
    fn empty_scene_has_no_target() {
        let obs = scene(&[]);
        assert!(matches!(select_target(&obs, SelectionMode::CenterBias, None), Err(ControllerError::NoVisibleTarget)));
    }

    #[test]
    fn blank_heatmap_selects_nothing() {
        let obs = scene(&[(0, [20, 15]), (1, [5, 5])]);
        let heat = Image::filled(40, 30, 0.0f32);
        assert!(matches!(
            select_target(&obs, SelectionMode::Affordance, Some(&heat)),
            Err(ControllerError::NoVisibleTarget)
        ));
        assert_eq!(select_target(&obs, SelectionMode::Affordance, None).unwrap(), 0);
    }
}
