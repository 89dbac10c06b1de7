//! Calibration documents for the cross-camera warp.
//!
//! ```toml
//! plane_depth = 1.0                       # metres, optional (default 1.0)
//! rotation = [1, 0, 0, 0, 1, 0, 0, 0, 1]  # row-major, optional (identity)
//! translation = [0.0, 0.0, 0.0]           # metres, optional (zero)
//!
//! [source]                                # camera the images come from
//! fx = 300.0
//! fy = 300.0
//! cx = 112.0
//! cy = 80.0
//! width = 224
//! height = 160
//! dist = [0.0, 0.0, 0.0, 0.0, 0.0]        # k1 k2 p1 p2 k3, optional
//!
//! [target]                                # camera the images are warped into
//! # same keys as [source]
//! ```

use nalgebra::{Matrix3, Vector3};
use toml::{Table, Value};

use super::{CameraError, CameraModel, Distortion, WarpSpec};

fn key_err(key: &str, message: impl Into<String>) -> CameraError {
    CameraError::Calibration { key: key.to_string(), message: message.into() }
}

fn number(v: &Value, key: &str) -> Result<f64, CameraError> {
    match v {
        Value::Float(f) => Ok(*f),
        Value::Integer(i) => Ok(*i as f64),
        _ => Err(key_err(key, "expected a number")),
    }
}

fn numbers<const N: usize>(table: &Table, key: &str, path: &str) -> Result<Option<[f64; N]>, CameraError> {
    let Some(v) = table.get(key) else { return Ok(None) };
    let arr = v.as_array().ok_or_else(|| key_err(path, format!("expected an array of {N} numbers")))?;
    if arr.len() != N {
        return Err(key_err(path, format!("expected {N} numbers, found {}", arr.len())));
    }
    let mut out = [0.0; N];
    for (o, x) in out.iter_mut().zip(arr) {
        *o = number(x, path)?;
    }
    Ok(Some(out))
}

fn camera(root: &Table, name: &str) -> Result<CameraModel, CameraError> {
    let t = root
        .get(name)
        .ok_or_else(|| key_err(name, "missing camera table"))?
        .as_table()
        .ok_or_else(|| key_err(name, "expected a table"))?;
    let req = |k: &str| -> Result<f64, CameraError> {
        let path = format!("{name}.{k}");
        number(t.get(k).ok_or_else(|| key_err(&path, "missing key"))?, &path)
    };
    let dims = |k: &str| -> Result<u32, CameraError> {
        let path = format!("{name}.{k}");
        match t.get(k) {
            Some(Value::Integer(i)) if *i > 0 && *i <= u32::MAX as i64 => Ok(*i as u32),
            Some(_) => Err(key_err(&path, "expected a positive integer")),
            None => Err(key_err(&path, "missing key")),
        }
    };
    for k in t.keys() {
        if !["fx", "fy", "cx", "cy", "width", "height", "dist"].contains(&k.as_str()) {
            return Err(key_err(&format!("{name}.{k}"), "unknown key"));
        }
    }
    let dist = numbers::<5>(t, "dist", &format!("{name}.dist"))?.unwrap_or([0.0; 5]);
    let cam = CameraModel {
        fx: req("fx")?,
        fy: req("fy")?,
        cx: req("cx")?,
        cy: req("cy")?,
        width: dims("width")?,
        height: dims("height")?,
        dist: Distortion(dist),
    };
    cam.validate().map_err(|e| key_err(name, e.to_string()))?;
    Ok(cam)
}

/// Parses a calibration document into a validated [`WarpSpec`].
pub fn parse_calibration(text: &str) -> Result<WarpSpec, CameraError> {
    let root: Table = text.parse().map_err(|e: toml::de::Error| key_err("<document>", e.to_string()))?;
    for k in root.keys() {
        if !["source", "target", "rotation", "translation", "plane_depth"].contains(&k.as_str()) {
            return Err(key_err(k, "unknown key"));
        }
    }
    let source = camera(&root, "source")?;
    let target = camera(&root, "target")?;
    let rotation = match numbers::<9>(&root, "rotation", "rotation")? {
        Some(r) => Matrix3::from_row_slice(&r),
        None => Matrix3::identity(),
    };
    let translation = numbers::<3>(&root, "translation", "translation")?.map(Vector3::from).unwrap_or_else(Vector3::zeros);
    let plane_depth = match root.get("plane_depth") {
        Some(v) => number(v, "plane_depth")?,
        None => 1.0,
    };
    WarpSpec::new(source, target, rotation, translation, plane_depth).map_err(|e| match e {
        CameraError::InvalidRotation => key_err("rotation", e.to_string()),
        CameraError::InvalidDepth(_) => key_err("plane_depth", e.to_string()),
        CameraError::InvalidTranslation => key_err("translation", e.to_string()),
        other => other,
    })
}

/// Renders a [`WarpSpec`] back into the calibration document format.
pub fn format_calibration(spec: &WarpSpec) -> String {
    let cam = |name: &str, c: &CameraModel| {
        format!(
            "[{name}]\nfx = {:?}\nfy = {:?}\ncx = {:?}\ncy = {:?}\nwidth = {}\nheight = {}\ndist = {:?}\n",
            c.fx, c.fy, c.cx, c.cy, c.width, c.height, c.dist.0
        )
    };
    let r: Vec<f64> = (0..3).flat_map(|i| (0..3).map(move |j| (i, j))).map(|(i, j)| spec.rotation[(i, j)]).collect();
    format!(
        "plane_depth = {:?}\nrotation = {:?}\ntranslation = {:?}\n\n{}\n{}",
        spec.plane_depth,
        r,
        [spec.translation.x, spec.translation.y, spec.translation.z],
        cam("source", &spec.source),
        cam("target", &spec.target)
    )
}
