use std::fmt::Write as _;
use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use super::episode::{EpisodeRecord, FrameRecord, SIDECAR_FILE};
use super::HarnessError;
use crate::controller::Stage;
use crate::image::Image;
use crate::sim::{read_depth, DepthSidecar};

pub const ERRORS_CSV: &str = "errors.csv";

pub const CENTROID_RGB: [u8; 3] = [255, 48, 48];
pub const SETPOINT_RGB: [u8; 3] = [48, 220, 48];
pub const ANCHOR_RGB: [u8; 3] = [64, 128, 255];

pub const CSV_HEADER: &str = "index,timestamp,stage,target,centroid_u,centroid_v,centerline,yaw_prev_error,\
yaw_prev_derivative,yaw_error,stage_error,yaw_command,act_yaw,act_forward,act_vertical,act_lateral,act_open,act_close";

#[derive(Debug, Clone, PartialEq)]
pub struct ReplaySummary {
    pub frames: usize,
    pub csv: PathBuf,
}

/// Three-channel 8-bit raster used for overlays.
#[derive(Debug, Clone, PartialEq)]
pub struct Rgb {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u8>,
}

impl Rgb {
    pub fn get(&self, u: usize, v: usize) -> [u8; 3] {
        let i = 3 * (v * self.width + u);
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    fn put(&mut self, u: i64, v: i64, c: [u8; 3]) {
        if u < 0 || v < 0 || u as usize >= self.width || v as usize >= self.height {
            return;
        }
        let i = 3 * (v as usize * self.width + u as usize);
        self.data[i..i + 3].copy_from_slice(&c);
    }
}

/// Near surfaces bright, background black.
pub fn depth_to_rgb(depth: &Image<f32>, far: f64) -> Rgb {
    let mut data = Vec::with_capacity(depth.data.len() * 3);
    for &d in &depth.data {
        let g = if (d as f64) >= far || !d.is_finite() { 0 } else { (255.0 * (1.0 - d as f64 / far)).round().clamp(0.0, 255.0) as u8 };
        data.extend_from_slice(&[g, g, g]);
    }
    Rgb { width: depth.width, height: depth.height, data }
}

/// Draws the active stage's setpoints, the gripper anchor and the target
/// centroid (a cross centred on the rounded centroid).
pub fn draw_overlays(img: &mut Rgb, frame: &FrameRecord, lower_line: f64, band: [f64; 2]) {
    let (w, h) = (img.width as i64, img.height as i64);
    let hline = |img: &mut Rgb, v: f64| {
        let v = v.round() as i64;
        for u in (0..w).step_by(2) {
            img.put(u, v, SETPOINT_RGB);
        }
    };
    if let Some(s) = &frame.servo {
        let c = s.centerline.round() as i64;
        for v in (0..h).step_by(2) {
            img.put(c, v, SETPOINT_RGB);
        }
    }
    match frame.stage {
        Stage::ForwardApproach => hline(img, lower_line),
        Stage::DepthAdjust | Stage::CloseRange => {
            hline(img, band[0]);
            hline(img, band[1]);
        }
        _ => {}
    }
    if let Some([u, v]) = frame.gripper_anchor {
        let (u, v) = (u.round() as i64, v.round() as i64);
        for d in -2..=2 {
            img.put(u + d, v + d, ANCHOR_RGB);
            img.put(u + d, v - d, ANCHOR_RGB);
        }
    }
    if let Some([u, v]) = target_centroid(frame) {
        let (u, v) = (u.round() as i64, v.round() as i64);
        for d in -3..=3 {
            img.put(u + d, v, CENTROID_RGB);
            img.put(u, v + d, CENTROID_RGB);
        }
    }
}

/// Centroid of the frame's target: the logged servo input when present,
/// else the target's object summary.
pub fn target_centroid(frame: &FrameRecord) -> Option<[f64; 2]> {
    if let Some(s) = &frame.servo {
        return Some(s.centroid);
    }
    let id = frame.target?;
    frame.objects.iter().find(|o| o.id == id && o.pixel_count > 0).map(|o| o.centroid)
}

pub fn write_rgb_png(path: &Path, img: &Rgb) -> Result<(), HarnessError> {
    let file = fs::File::create(path).map_err(HarnessError::io(path))?;
    let mut enc = png::Encoder::new(BufWriter::new(file), img.width as u32, img.height as u32);
    enc.set_color(png::ColorType::Rgb);
    enc.set_depth(png::BitDepth::Eight);
    let fmt = |e: png::EncodingError| HarnessError::Format(format!("{}: {e}", path.display()));
    let mut writer = enc.write_header().map_err(fmt)?;
    writer.write_image_data(&img.data).map_err(fmt)?;
    writer.finish().map_err(fmt)?;
    Ok(())
}

pub fn read_rgb_png(path: &Path) -> Result<Rgb, HarnessError> {
    let file = fs::File::open(path).map_err(HarnessError::io(path))?;
    let fmt = |e: png::DecodingError| HarnessError::Format(format!("{}: {e}", path.display()));
    let mut reader = png::Decoder::new(std::io::BufReader::new(file)).read_info().map_err(fmt)?;
    let (w, h) = (reader.info().width as usize, reader.info().height as usize);
    let mut data = vec![0; reader.output_buffer_size().unwrap_or(w * h * 3)];
    let info = reader.next_frame(&mut data).map_err(fmt)?;
    if info.color_type != png::ColorType::Rgb || info.bit_depth != png::BitDepth::Eight {
        return Err(HarnessError::Format(format!("{}: expected 8-bit RGB", path.display())));
    }
    data.truncate(info.buffer_size());
    Ok(Rgb { width: w, height: h, data })
}

fn csv_row(f: &FrameRecord) -> String {
    let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
    let mut row = format!("{},{},{:?},{}", f.index, f.timestamp, f.stage, f.target.map(|t| t.to_string()).unwrap_or_default());
    match &f.servo {
        Some(s) => {
            let _ = write!(
                row,
                ",{},{},{},{},{},{},{},{}",
                s.centroid[0],
                s.centroid[1],
                s.centerline,
                opt(s.yaw_state_prev),
                s.yaw_deriv_prev,
                s.yaw_error,
                s.stage_error,
                s.yaw_command
            );
        }
        None => row.push_str(",,,,,,,,"),
    }
    for a in f.action {
        let _ = write!(row, ",{a}");
    }
    row
}

/// Renders every recorded frame of the episode in `record_dir` with
/// overlays and writes the per-frame error/command table.
pub fn replay(record_dir: &Path, out_dir: &Path) -> Result<ReplaySummary, HarnessError> {
    let rec = EpisodeRecord::load(record_dir)?;
    let sidecar_path = record_dir.join(SIDECAR_FILE);
    let far = match fs::read_to_string(&sidecar_path) {
        Ok(text) => serde_json::from_str::<DepthSidecar>(&text)
            .map_err(|e| HarnessError::Format(format!("{}: {e}", sidecar_path.display())))?
            .far_plane,
        Err(_) if rec.frames.is_empty() => 1.0,
        Err(_) => return Err(HarnessError::MissingFrameData(format!("{} not found", sidecar_path.display()))),
    };
    fs::create_dir_all(out_dir).map_err(HarnessError::io(out_dir))?;
    let [w, h] = rec.image_size;
    let mut csv = String::from(CSV_HEADER);
    csv.push('\n');
    for f in &rec.frames {
        let rel = f.depth.as_ref().ok_or_else(|| HarnessError::MissingFrameData(format!("frame {} has no depth dump", f.index)))?;
        let path = record_dir.join(rel);
        if !path.exists() {
            return Err(HarnessError::MissingFrameData(format!("{} not found", path.display())));
        }
        let depth = read_depth(&path, w, h).map_err(|e| HarnessError::MissingFrameData(e.to_string()))?;
        let mut img = depth_to_rgb(&depth, far);
        draw_overlays(&mut img, f, rec.references.lower_line_v, rec.references.upper_band);
        write_rgb_png(&out_dir.join(format!("frame_{:05}.png", f.index)), &img)?;
        csv.push_str(&csv_row(f));
        csv.push('\n');
    }
    let path = out_dir.join(ERRORS_CSV);
    fs::write(&path, csv).map_err(HarnessError::io(&path))?;
    Ok(ReplaySummary { frames: rec.frames.len(), csv: path })
}
