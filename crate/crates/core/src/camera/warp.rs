use std::collections::HashMap;
use std::io::{Read, Write};
use std::sync::{Arc, Mutex};

use nalgebra::{Matrix3, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use super::{CameraError, CameraModel};
use crate::image::Image;

/// Magic bytes opening a serialized [`RemapTable`].
pub const REMAP_MAGIC: &[u8; 4] = b"AQRT";
pub const REMAP_VERSION: u32 = 1;

/// Source camera, target camera and the rigid transform between them, plus
/// the depth of the fronto-parallel plane every target ray is cut with.
///
/// `rotation` and `translation` map target-camera coordinates into the
/// source-camera frame: `X_src = R * X_tgt + t`.
#[derive(Debug, Clone, PartialEq)]
pub struct WarpSpec {
    pub source: CameraModel,
    pub target: CameraModel,
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
    pub plane_depth: f64,
}

impl WarpSpec {
    pub fn new(
        source: CameraModel,
        target: CameraModel,
        rotation: Matrix3<f64>,
        translation: Vector3<f64>,
        plane_depth: f64,
    ) -> Result<Self, CameraError> {
        source.validate()?;
        target.validate()?;
        let ortho = (rotation.transpose() * rotation - Matrix3::identity()).abs().max();
        if ortho > 1e-9 || (rotation.determinant() - 1.0).abs() > 1e-9 {
            return Err(CameraError::InvalidRotation);
        }
        if !(plane_depth > 0.0 && plane_depth.is_finite()) {
            return Err(CameraError::InvalidDepth(plane_depth));
        }
        if translation.iter().any(|c| !c.is_finite()) {
            return Err(CameraError::InvalidTranslation);
        }
        Ok(Self { source, target, rotation, translation, plane_depth })
    }

    /// Translation-only alignment between two cameras.
    pub fn translation_only(
        source: CameraModel,
        target: CameraModel,
        translation: Vector3<f64>,
        plane_depth: f64,
    ) -> Result<Self, CameraError> {
        Self::new(source, target, Matrix3::identity(), translation, plane_depth)
    }

    /// Same camera on both sides, no motion.
    pub fn identity(camera: CameraModel, plane_depth: f64) -> Result<Self, CameraError> {
        Self::translation_only(camera, camera, Vector3::zeros(), plane_depth)
    }

    /// Stable key over the bit patterns of every parameter.
    pub fn cache_key(&self) -> u64 {
        let mut h = fnv::FnvHasher::default();
        use std::hash::Hasher;
        let mut put = |x: f64| h.write(&x.to_bits().to_le_bytes());
        for cam in [&self.source, &self.target] {
            for x in [cam.fx, cam.fy, cam.cx, cam.cy, cam.width as f64, cam.height as f64] {
                put(x);
            }
            cam.dist.0.iter().for_each(|&c| put(c));
        }
        self.rotation.iter().for_each(|&c| put(c));
        self.translation.iter().for_each(|&c| put(c));
        put(self.plane_depth);
        h.finish()
    }
}

/// Intersects the ray through normalized coordinates `n` with the plane at
/// depth `z`: returns `z * [x, y, 1]`.
pub fn ray_plane_point(n: Vector2<f64>, z: f64) -> Result<Vector3<f64>, CameraError> {
    if !(z > 0.0) {
        return Err(CameraError::InvalidDepth(z));
    }
    Ok(Vector3::new(z * n.x, z * n.y, z))
}

/// Moves a target-frame point into the source frame and projects it with the
/// source camera's distortion model.
pub fn transform_and_project(spec: &WarpSpec, x_target: &Vector3<f64>) -> Result<Vector2<f64>, CameraError> {
    let x_source = spec.rotation * x_target + spec.translation;
    spec.source.project(&x_source)
}

/// Per-target-pixel source coordinates for backward sampling.
#[derive(Debug, Clone, PartialEq)]
pub struct RemapTable {
    pub width: u32,
    pub height: u32,
    pub map_u: Vec<f32>,
    pub map_v: Vec<f32>,
    pub valid: Vec<bool>,
    pub source_width: u32,
    pub source_height: u32,
}

impl RemapTable {
    #[inline]
    pub fn source_coord(&self, idx: usize) -> Option<(f64, f64)> {
        self.valid[idx].then(|| (self.map_u[idx] as f64, self.map_v[idx] as f64))
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|&&v| v).count()
    }

    /// Serializes into the `AQRT` cache layout: header, `map_u`, `map_v` as
    /// little-endian f32, then the validity mask packed LSB-first.
    pub fn write_to(&self, mut w: impl Write) -> std::io::Result<()> {
        w.write_all(REMAP_MAGIC)?;
        for x in [REMAP_VERSION, self.width, self.height] {
            w.write_all(&x.to_le_bytes())?;
        }
        let mut buf = Vec::with_capacity(self.map_u.len() * 8 + self.valid.len() / 8 + 1);
        for &x in self.map_u.iter().chain(&self.map_v) {
            buf.extend_from_slice(&x.to_le_bytes());
        }
        let mut packed = vec![0u8; self.valid.len().div_ceil(8)];
        for (i, &ok) in self.valid.iter().enumerate() {
            if ok {
                packed[i / 8] |= 1 << (i % 8);
            }
        }
        buf.extend_from_slice(&packed);
        w.write_all(&buf)
    }

    /// Reads a cache file. The source resolution is not part of the layout,
    /// so the caller supplies it and every valid entry is re-checked against it.
    pub fn read_from(mut r: impl Read, source_width: u32, source_height: u32) -> Result<Self, CameraError> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        let bad = |msg: &str| CameraError::CorruptTable(msg.to_string());
        if bytes.len() < 16 || &bytes[..4] != REMAP_MAGIC {
            return Err(bad("missing AQRT magic"));
        }
        let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap());
        if word(4) != REMAP_VERSION {
            return Err(bad("unsupported version"));
        }
        let (width, height) = (word(8), word(12));
        let n = width as usize * height as usize;
        let expected = 16 + n * 8 + n.div_ceil(8);
        if bytes.len() != expected {
            return Err(bad("length does not match header"));
        }
        let floats = |off: usize| -> Vec<f32> {
            bytes[off..off + n * 4]
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                .collect()
        };
        let map_u = floats(16);
        let map_v = floats(16 + n * 4);
        let packed = &bytes[16 + n * 8..];
        let valid: Vec<bool> = (0..n).map(|i| packed[i / 8] & (1 << (i % 8)) != 0).collect();
        let table = Self { width, height, map_u, map_v, valid, source_width, source_height };
        if !table.entries_in_bounds() {
            return Err(bad("valid entry outside source image"));
        }
        Ok(table)
    }

    fn entries_in_bounds(&self) -> bool {
        let (w, h) = ((self.source_width - 1) as f32, (self.source_height - 1) as f32);
        (0..self.valid.len())
            .filter(|&i| self.valid[i])
            .all(|i| (0.0..=w).contains(&self.map_u[i]) && (0.0..=h).contains(&self.map_v[i]))
    }
}

/// Builds the dense backward map: target pixel -> undistort -> plane point ->
/// source frame -> distorted source pixel. Pixels whose chain fails or whose
/// source coordinate leaves `[0, w-1] x [0, h-1]` are marked invalid.
pub fn build_remap_table(spec: &WarpSpec) -> RemapTable {
    let (tw, th) = (spec.target.width, spec.target.height);
    let n = tw as usize * th as usize;
    let mut table = RemapTable {
        width: tw,
        height: th,
        map_u: vec![0.0; n],
        map_v: vec![0.0; n],
        valid: vec![false; n],
        source_width: spec.source.width,
        source_height: spec.source.height,
    };
    let max_u = (spec.source.width - 1) as f32;
    let max_v = (spec.source.height - 1) as f32;
    for v in 0..th as usize {
        for u in 0..tw as usize {
            let idx = v * tw as usize + u;
            let src = spec
                .target
                .undistort_pixel(Vector2::new(u as f64, v as f64))
                .and_then(|n| ray_plane_point(n, spec.plane_depth))
                .and_then(|x| transform_and_project(spec, &x));
            if let Ok(p) = src {
                let (su, sv) = (p.x as f32, p.y as f32);
                table.map_u[idx] = su;
                table.map_v[idx] = sv;
                table.valid[idx] = (0.0..=max_u).contains(&su) && (0.0..=max_v).contains(&sv);
            }
        }
    }
    table
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Interpolation {
    #[default]
    Bilinear,
    Nearest,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RemapOptions {
    pub fill: f32,
    pub interpolation: Interpolation,
}

impl Default for RemapOptions {
    fn default() -> Self {
        Self { fill: 0.0, interpolation: Interpolation::Bilinear }
    }
}

/// Resamples `image` (source resolution) into the target geometry.
pub fn remap_image(table: &RemapTable, image: &Image<f32>, opts: RemapOptions) -> Result<Image<f32>, CameraError> {
    if image.width != table.source_width as usize || image.height != table.source_height as usize {
        return Err(CameraError::DimensionMismatch {
            expected: (table.source_width as usize, table.source_height as usize),
            got: image.dims(),
        });
    }
    let data = (0..table.valid.len())
        .map(|i| match table.source_coord(i) {
            Some((u, v)) => match opts.interpolation {
                Interpolation::Bilinear => image.sample_bilinear(u, v),
                Interpolation::Nearest => image.sample_nearest(u, v),
            },
            None => opts.fill,
        })
        .collect();
    Ok(Image { width: table.width as usize, height: table.height as usize, data })
}

/// Process-wide memo of remap tables keyed by [`WarpSpec::cache_key`].
#[derive(Debug, Default)]
pub struct RemapCache {
    tables: Mutex<HashMap<u64, Arc<RemapTable>>>,
}

impl RemapCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get_or_build(&self, spec: &WarpSpec) -> Arc<RemapTable> {
        let key = spec.cache_key();
        if let Some(t) = self.tables.lock().unwrap().get(&key) {
            return Arc::clone(t);
        }
        // Built outside the lock; a racing builder produces the same table.
        let table = Arc::new(build_remap_table(spec));
        Arc::clone(self.tables.lock().unwrap().entry(key).or_insert(table))
    }

    pub fn len(&self) -> usize {
        self.tables.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::camera::Distortion;

    fn cam() -> CameraModel {
        CameraModel::pinhole(200.0, 200.0, 32.0, 24.0, 64, 48).unwrap()
    }

    #[test]
    fn ray_plane_examples() {
        assert_eq!(ray_plane_point(Vector2::new(0.0, 0.0), 1.0).unwrap(), Vector3::new(0.0, 0.0, 1.0));
        assert_eq!(ray_plane_point(Vector2::new(0.5, -0.25), 2.0).unwrap(), Vector3::new(1.0, -0.5, 2.0));
        assert!(matches!(ray_plane_point(Vector2::new(0.0, 0.0), 0.0), Err(CameraError::InvalidDepth(_))));
    }

    #[test]
    fn optical_axis_lands_on_principal_point() {
        let spec = WarpSpec::identity(cam(), 1.0).unwrap();
        let p = transform_and_project(&spec, &Vector3::new(0.0, 0.0, 3.0)).unwrap();
        assert_eq!(p, Vector2::new(32.0, 24.0));
    }

    #[test]
    fn point_behind_source_camera() {
        let spec = WarpSpec::translation_only(cam(), cam(), Vector3::new(0.0, 0.0, -2.0), 1.0).unwrap();
        let err = transform_and_project(&spec, &Vector3::new(0.0, 0.0, 1.0)).unwrap_err();
        assert!(matches!(err, CameraError::BehindCamera { .. }));
    }

    #[test]
    fn rejects_improper_rotation() {
        let flip = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, -1.0));
        assert!(matches!(
            WarpSpec::new(cam(), cam(), flip, Vector3::zeros(), 1.0),
            Err(CameraError::InvalidRotation)
        ));
        assert!(matches!(WarpSpec::identity(cam(), -1.0), Err(CameraError::InvalidDepth(_))));
    }

    #[test]
    fn remap_dimension_mismatch() {
        let table = build_remap_table(&WarpSpec::identity(cam(), 1.0).unwrap());
        let img = Image::filled(10, 10, 0.0f32);
        assert!(matches!(
            remap_image(&table, &img, RemapOptions::default()),
            Err(CameraError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn constant_image_stays_constant_on_valid_pixels() {
        let mut src = cam();
        src.dist = Distortion([-0.2, 0.05, 0.0, 0.0, 0.0]);
        let spec = WarpSpec::translation_only(src, cam(), Vector3::new(0.03, -0.01, 0.0), 1.0).unwrap();
        let table = build_remap_table(&spec);
        let out = remap_image(&table, &Image::filled(64, 48, 2.5), RemapOptions { fill: -1.0, ..Default::default() }).unwrap();
        for (i, &p) in out.data.iter().enumerate() {
            if table.valid[i] {
                assert!((p - 2.5).abs() < 1e-6);
            } else {
                assert_eq!(p, -1.0);
            }
        }
    }

    #[test]
    fn cache_round_trip_is_bit_exact() {
        let spec = WarpSpec::translation_only(cam(), cam(), Vector3::new(0.02, 0.0, 0.0), 0.7).unwrap();
        let table = build_remap_table(&spec);
        let mut bytes = Vec::new();
        table.write_to(&mut bytes).unwrap();
        assert_eq!(&bytes[..4], b"AQRT");
        let back = RemapTable::read_from(bytes.as_slice(), 64, 48).unwrap();
        assert_eq!(back, table);
        assert!(RemapTable::read_from(&bytes[..20], 64, 48).is_err());
    }

    #[test]
    fn memo_returns_shared_table() {
        let cache = RemapCache::new();
        let spec = WarpSpec::identity(cam(), 1.0).unwrap();
        let a = cache.get_or_build(&spec);
        let b = cache.get_or_build(&spec);
        assert!(Arc::ptr_eq(&a, &b));
        assert_eq!(cache.len(), 1);
    }
}
