//! File front end for the warp: cached remap tables, PNG images and raw
//! `f32` depth maps.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use super::{build_remap_table, remap_image, CameraError, Interpolation, RemapOptions, RemapTable, WarpSpec};
use crate::image::Image;
use crate::io::{f32_from_le_bytes, f32_to_le_bytes};

/// Cache file for a spec inside `dir`.
pub fn table_cache_path(dir: &Path, spec: &WarpSpec) -> PathBuf {
    dir.join(format!("remap_{:016x}.aqrt", spec.cache_key()))
}

/// Reads the spec's table from `cache_dir` if present, otherwise builds it
/// and stores it there.
pub fn load_or_build_table(spec: &WarpSpec, cache_dir: Option<&Path>) -> Result<Arc<RemapTable>, CameraError> {
    let Some(dir) = cache_dir else { return Ok(Arc::new(build_remap_table(spec))) };
    let path = table_cache_path(dir, spec);
    if path.exists() {
        log::debug!("remap table from {}", path.display());
        let table = RemapTable::read_from(BufReader::new(File::open(&path)?), spec.source.width, spec.source.height)?;
        return Ok(Arc::new(table));
    }
    let table = build_remap_table(spec);
    fs::create_dir_all(dir)?;
    table.write_to(BufWriter::new(File::create(&path)?))?;
    Ok(Arc::new(table))
}

/// Planes of an 8-bit grayscale or RGB PNG as `f32` images.
pub fn read_png_planes(path: &Path) -> Result<Vec<Image<f32>>, CameraError> {
    let bad = |m: String| CameraError::Image(format!("{}: {m}", path.display()));
    let mut reader = png::Decoder::new(BufReader::new(File::open(path)?)).read_info().map_err(|e| bad(e.to_string()))?;
    let info = reader.info();
    let (w, h) = (info.width as usize, info.height as usize);
    let channels = match (info.color_type, info.bit_depth) {
        (png::ColorType::Grayscale, png::BitDepth::Eight) => 1,
        (png::ColorType::Rgb, png::BitDepth::Eight) => 3,
        _ => return Err(bad("expected 8-bit grayscale or RGB".into())),
    };
    let mut buf = vec![0u8; reader.output_buffer_size().unwrap_or(w * h * channels)];
    let frame = reader.next_frame(&mut buf).map_err(|e| bad(e.to_string()))?;
    buf.truncate(frame.buffer_size());
    Ok((0..channels)
        .map(|c| Image { width: w, height: h, data: buf.iter().skip(c).step_by(channels).map(|&x| x as f32).collect() })
        .collect())
}

/// Writes one or three planes as an 8-bit PNG, rounding and clamping.
pub fn write_png_planes(path: &Path, planes: &[Image<f32>]) -> Result<(), CameraError> {
    let color = match planes.len() {
        1 => png::ColorType::Grayscale,
        3 => png::ColorType::Rgb,
        n => return Err(CameraError::Image(format!("cannot write {n} planes as PNG"))),
    };
    let (w, h) = planes[0].dims();
    let mut data = Vec::with_capacity(w * h * planes.len());
    for i in 0..w * h {
        data.extend(planes.iter().map(|p| p.data[i].round().clamp(0.0, 255.0) as u8));
    }
    let bad = |e: png::EncodingError| CameraError::Image(format!("{}: {e}", path.display()));
    let mut enc = png::Encoder::new(BufWriter::new(File::create(path)?), w as u32, h as u32);
    enc.set_color(color);
    enc.set_depth(png::BitDepth::Eight);
    let mut writer = enc.write_header().map_err(bad)?;
    writer.write_image_data(&data).map_err(bad)?;
    writer.finish().map_err(bad)?;
    Ok(())
}

pub fn read_raw_depth(path: &Path, width: usize, height: usize) -> Result<Image<f32>, CameraError> {
    let bytes = fs::read(path)?;
    f32_from_le_bytes(&bytes)
        .and_then(|d| Image::from_vec(width, height, d))
        .ok_or_else(|| CameraError::Image(format!("{}: expected {width}x{height} little-endian f32", path.display())))
}

pub fn write_raw_depth(path: &Path, depth: &Image<f32>) -> Result<(), CameraError> {
    Ok(fs::write(path, f32_to_le_bytes(&depth.data))?)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WarpFileOptions {
    /// Raw little-endian `f32` depth in and out instead of PNG.
    pub depth: bool,
    pub interpolation: Interpolation,
    /// Value of target pixels with no valid source.
    pub fill: f32,
}

impl Default for WarpFileOptions {
    fn default() -> Self {
        Self { depth: false, interpolation: Interpolation::Bilinear, fill: 0.0 }
    }
}

/// Warps `input` (source camera) into `output` (target camera). Returns the
/// number of valid target pixels.
pub fn warp_file(
    spec: &WarpSpec,
    input: &Path,
    output: &Path,
    opts: WarpFileOptions,
    cache_dir: Option<&Path>,
) -> Result<usize, CameraError> {
    let planes = if opts.depth {
        vec![read_raw_depth(input, spec.source.width as usize, spec.source.height as usize)?]
    } else {
        read_png_planes(input)?
    };
    let table = load_or_build_table(spec, cache_dir)?;
    let ropts = RemapOptions { fill: opts.fill, interpolation: opts.interpolation };
    let out = planes.iter().map(|p| remap_image(&table, p, ropts)).collect::<Result<Vec<_>, _>>()?;
    if opts.depth {
        write_raw_depth(output, &out[0])?;
    } else {
        write_png_planes(output, &out)?;
    }
    Ok(table.valid_count())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::camera::CameraModel;

    #[test]
    fn png_planes_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let planes: Vec<_> = (0..3).map(|c| Image::from_fn(7, 5, |u, v| ((u * 31 + v * 7 + c * 50) % 256) as f32)).collect();
        let path = dir.path().join("x.png");
        write_png_planes(&path, &planes).unwrap();
        assert_eq!(read_png_planes(&path).unwrap(), planes);
    }

    #[test]
    fn cached_table_matches_fresh_build() {
        let dir = tempfile::tempdir().unwrap();
        let cam = CameraModel::pinhole(80.0, 80.0, 16.0, 12.0, 32, 24).unwrap();
        let spec = WarpSpec::translation_only(cam.clone(), cam, nalgebra::Vector3::new(0.05, 0.0, 0.0), 1.0).unwrap();
        let fresh = load_or_build_table(&spec, Some(dir.path())).unwrap();
        assert!(table_cache_path(dir.path(), &spec).exists());
        let cached = load_or_build_table(&spec, Some(dir.path())).unwrap();
        assert_eq!(*fresh, *cached);
    }
}
