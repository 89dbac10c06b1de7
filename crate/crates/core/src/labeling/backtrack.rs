use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::LabelError;
use crate::sim::TrackPoint;

/// Contact pixel per frame from the episode start through the closure frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContactTrack {
    /// Object whose oracle track was followed, when known.
    pub object_id: Option<u32>,
    pub points: Vec<TrackRecord>,
}

/// One line of an imported or exported track file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackRecord {
    pub frame: usize,
    pub u: f64,
    pub v: f64,
    pub visible: bool,
}

impl ContactTrack {
    pub fn at(&self, frame: usize) -> Option<&TrackRecord> {
        self.points.iter().find(|p| p.frame == frame)
    }

    pub fn visible_frames(&self) -> impl Iterator<Item = &TrackRecord> {
        self.points.iter().filter(|p| p.visible)
    }
}

/// Follows the oracle track nearest to `seed` at frame `t_star_frame` back to
/// frame 0. `frames[k]` holds every object's track point at frame `k`.
pub fn backtrack_contact(
    frames: &[Vec<TrackPoint>],
    t_star_frame: usize,
    seed: [f64; 2],
    width: usize,
    height: usize,
) -> Result<ContactTrack, LabelError> {
    let in_frame = |p: [f64; 2]| p[0] >= 0.0 && p[1] >= 0.0 && p[0] <= (width - 1) as f64 && p[1] <= (height - 1) as f64;
    if !seed.iter().all(|c| c.is_finite()) || !in_frame(seed) {
        return Err(LabelError::SeedOutOfFrame { u: seed[0], v: seed[1] });
    }
    let at_star = frames.get(t_star_frame).ok_or_else(|| LabelError::Format(format!("no frame {t_star_frame}")))?;
    let id = at_star
        .iter()
        .filter(|p| p.pixel.iter().all(|c| c.is_finite()))
        .map(|p| ((p.pixel[0] - seed[0]).hypot(p.pixel[1] - seed[1]), p.object_id))
        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
        .map(|(_, id)| id)
        .ok_or_else(|| LabelError::Format("no track points at the closure frame".into()))?;
    let points = frames[..=t_star_frame]
        .iter()
        .enumerate()
        .map(|(k, pts)| match pts.iter().find(|p| p.object_id == id) {
            Some(p) => TrackRecord { frame: k, u: p.pixel[0], v: p.pixel[1], visible: p.visible },
            None => TrackRecord { frame: k, u: f64::NAN, v: f64::NAN, visible: false },
        })
        .collect();
    Ok(ContactTrack { object_id: Some(id), points })
}

/// Reads line-delimited `{frame, u, v, visible}` records.
pub fn read_track(r: impl BufRead) -> Result<ContactTrack, LabelError> {
    let mut points = Vec::new();
    for (n, line) in r.lines().enumerate() {
        let line = line.map_err(|e| LabelError::Format(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: TrackRecord =
            serde_json::from_str(&line).map_err(|e| LabelError::Format(format!("track line {}: {e}", n + 1)))?;
        points.push(rec);
    }
    points.sort_by_key(|p| p.frame);
    Ok(ContactTrack { object_id: None, points })
}

pub fn write_track(mut w: impl Write, track: &ContactTrack) -> std::io::Result<()> {
    for p in &track.points {
        // NaN is not valid JSON; invisible points without a position write zeros.
        let rec = if p.u.is_finite() && p.v.is_finite() { *p } else { TrackRecord { u: 0.0, v: 0.0, ..*p } };
        serde_json::to_writer(&mut w, &rec)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tp(id: u32, u: f64, v: f64) -> TrackPoint {
        TrackPoint { object_id: id, pixel: [u, v], visible: (0.0..=223.0).contains(&u) && (0.0..=159.0).contains(&v) }
    }

    #[test]
    fn static_scene_gives_constant_track() {
        let frames: Vec<_> = (0..20).map(|_| vec![tp(0, 50.0, 60.0), tp(1, 150.0, 40.0)]).collect();
        let tr = backtrack_contact(&frames, 19, [149.0, 41.0], 224, 160).unwrap();
        assert_eq!(tr.object_id, Some(1));
        assert_eq!(tr.points.len(), 20);
        assert!(tr.points.iter().all(|p| p.u == 150.0 && p.v == 40.0 && p.visible));
    }

    #[test]
    fn visibility_window_after_exit() {
        // Point enters from the left at 12 px per frame.
        let frames: Vec<_> = (0..20).map(|k| vec![tp(3, -60.0 + 12.0 * k as f64, 80.0)]).collect();
        let tr = backtrack_contact(&frames, 19, [168.0, 80.0], 224, 160).unwrap();
        let first_visible = tr.points.iter().position(|p| p.visible).unwrap();
        assert_eq!(first_visible, 5);
        assert!(tr.points[first_visible..].iter().all(|p| p.visible));
    }

    #[test]
    fn seed_outside_image() {
        let frames = vec![vec![tp(0, 10.0, 10.0)]];
        assert!(matches!(backtrack_contact(&frames, 0, [-1.0, 5.0], 224, 160), Err(LabelError::SeedOutOfFrame { .. })));
        assert!(matches!(backtrack_contact(&frames, 0, [10.0, 160.0], 224, 160), Err(LabelError::SeedOutOfFrame { .. })));
    }

    #[test]
    fn track_file_round_trip() {
        let track = ContactTrack {
            object_id: None,
            points: vec![
                TrackRecord { frame: 0, u: 1.5, v: 2.25, visible: true },
                TrackRecord { frame: 1, u: 0.0, v: 0.0, visible: false },
            ],
        };
        let mut buf = Vec::new();
        write_track(&mut buf, &track).unwrap();
        assert_eq!(read_track(&buf[..]).unwrap(), track);
    }
}
