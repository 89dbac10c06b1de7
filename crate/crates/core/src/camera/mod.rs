//! Calibrated projection and the plane-at-depth cross-camera warp.
//!
//! A target pixel is undistorted to normalized coordinates, the resulting
//! ray is cut with the fronto-parallel plane `Z = plane_depth`, the 3-D point
//! is moved into the source camera with `R * X + t` and projected with the
//! source distortion model. The resulting dense table drives backward
//! bilinear resampling.

mod calib;
mod files;
mod model;
mod warp;

pub use calib::{format_calibration, parse_calibration};
pub use files::{
    load_or_build_table, read_png_planes, read_raw_depth, table_cache_path, warp_file, write_png_planes, write_raw_depth,
    WarpFileOptions,
};
pub use model::{CameraModel, Distortion};
pub use warp::{
    build_remap_table, ray_plane_point, remap_image, transform_and_project, Interpolation, RemapCache,
    RemapOptions, RemapTable, WarpSpec, REMAP_MAGIC, REMAP_VERSION,
};

#[derive(Debug, thiserror::Error)]
pub enum CameraError {
    #[error("invalid camera: {0}")]
    InvalidCamera(String),
    #[error("pixel ({u}, {v}) lies outside the image")]
    PixelOutOfBounds { u: f64, v: f64 },
    #[error("undistortion of ({u}, {v}) did not converge (residual {residual:e})")]
    NonConvergent { u: f64, v: f64, residual: f64 },
    #[error("plane depth must be positive, got {0}")]
    InvalidDepth(f64),
    #[error("point is behind the camera (z = {z})")]
    BehindCamera { z: f64 },
    #[error("rotation must be orthonormal with determinant +1")]
    InvalidRotation,
    #[error("translation must be finite")]
    InvalidTranslation,
    #[error("image is {got:?}, table expects {expected:?}")]
    DimensionMismatch { expected: (usize, usize), got: (usize, usize) },
    #[error("calibration key `{key}`: {message}")]
    Calibration { key: String, message: String },
    #[error("image: {0}")]
    Image(String),
    #[error("corrupt remap table: {0}")]
    CorruptTable(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
