//! Frame dump formats: depth as raw little-endian f32 (row-major) with a JSON
//! sidecar, label masks as 8-bit grayscale PNG.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::SimError;
use crate::image::Image;

/// Sidecar describing every depth file of an episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepthSidecar {
    pub width: usize,
    pub height: usize,
    pub units: String,
    pub dtype: String,
    pub byte_order: String,
    pub far_plane: f64,
    pub timestamps: Vec<f64>,
}

impl DepthSidecar {
    pub fn new(width: usize, height: usize, far_plane: f64) -> Self {
        Self {
            width,
            height,
            units: "m".into(),
            dtype: "f32".into(),
            byte_order: "little".into(),
            far_plane,
            timestamps: Vec::new(),
        }
    }
}

pub fn write_depth(path: &Path, depth: &Image<f32>) -> Result<(), SimError> {
    let mut w = BufWriter::new(File::create(path)?);
    for &d in &depth.data {
        w.write_all(&d.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_depth(path: &Path, width: usize, height: usize) -> Result<Image<f32>, SimError> {
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.len() != width * height * 4 {
        return Err(SimError::Frame(format!(
            "{}: expected {} bytes, found {}",
            path.display(),
            width * height * 4,
            bytes.len()
        )));
    }
    let data = bytes.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect();
    Ok(Image { width, height, data })
}

pub fn write_labels_png(path: &Path, labels: &Image<u8>) -> Result<(), SimError> {
    let file = BufWriter::new(File::create(path)?);
    let mut enc = png::Encoder::new(file, labels.width as u32, labels.height as u32);
    enc.set_color(png::ColorType::Grayscale);
    enc.set_depth(png::BitDepth::Eight);
    let mut writer = enc.write_header().map_err(|e| SimError::Frame(e.to_string()))?;
    writer.write_image_data(&labels.data).map_err(|e| SimError::Frame(e.to_string()))?;
    Ok(())
}

pub fn read_labels_png(path: &Path) -> Result<Image<u8>, SimError> {
    let decoder = png::Decoder::new(std::io::BufReader::new(File::open(path)?));
    let mut reader = decoder.read_info().map_err(|e| SimError::Frame(format!("{}: {e}", path.display())))?;
    let info = reader.info();
    if info.color_type != png::ColorType::Grayscale || info.bit_depth != png::BitDepth::Eight {
        return Err(SimError::Frame(format!("{}: expected 8-bit grayscale", path.display())));
    }
    let (w, h) = (info.width as usize, info.height as usize);
    let mut buf = vec![0u8; reader.output_buffer_size().unwrap_or(w * h)];
    let frame = reader.next_frame(&mut buf).map_err(|e| SimError::Frame(e.to_string()))?;
    buf.truncate(frame.buffer_size());
    Image::from_vec(w, h, buf).ok_or_else(|| SimError::Frame(format!("{}: size mismatch", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn depth_and_labels_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let depth = Image::from_fn(7, 5, |u, v| u as f32 * 0.125 + v as f32 * 3.5);
        let p = dir.path().join("f.depth");
        write_depth(&p, &depth).unwrap();
        assert_eq!(std::fs::metadata(&p).unwrap().len(), 7 * 5 * 4);
        assert_eq!(read_depth(&p, 7, 5).unwrap(), depth);
        assert!(read_depth(&p, 5, 5).is_err());

        let labels = Image::from_fn(7, 5, |u, v| ((u + v) % 4) as u8);
        let q = dir.path().join("m.png");
        write_labels_png(&q, &labels).unwrap();
        assert_eq!(read_labels_png(&q).unwrap(), labels);
    }
}
