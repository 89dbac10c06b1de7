use nalgebra::{Vector2, Vector3};
use serde::{Deserialize, Serialize};

use super::CameraError;

const UNDISTORT_MAX_ITERS: usize = 50;
const UNDISTORT_TOL: f64 = 1e-8;

/// Brown-Conrady coefficients in OpenCV order `[k1, k2, p1, p2, k3]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Distortion(pub [f64; 5]);

impl Distortion {
    pub const NONE: Distortion = Distortion([0.0; 5]);

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&c| c == 0.0)
    }

    /// Maps undistorted normalized coordinates to distorted ones.
    pub fn apply(&self, x: f64, y: f64) -> (f64, f64) {
        let [k1, k2, p1, p2, k3] = self.0;
        let r2 = x * x + y * y;
        let radial = 1.0 + r2 * (k1 + r2 * (k2 + r2 * k3));
        let dx = 2.0 * p1 * x * y + p2 * (r2 + 2.0 * x * x);
        let dy = p1 * (r2 + 2.0 * y * y) + 2.0 * p2 * x * y;
        (x * radial + dx, y * radial + dy)
    }
}

/// Pinhole intrinsics with Brown-Conrady lens distortion.
///
/// Pixel coordinates put the centre of pixel `(i, j)` at `(i, j)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraModel {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
    #[serde(default)]
    pub dist: Distortion,
}

impl CameraModel {
    pub fn new(
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        width: u32,
        height: u32,
        dist: Distortion,
    ) -> Result<Self, CameraError> {
        let cam = Self { fx, fy, cx, cy, width, height, dist };
        cam.validate()?;
        Ok(cam)
    }

    /// Distortion-free camera.
    pub fn pinhole(fx: f64, fy: f64, cx: f64, cy: f64, width: u32, height: u32) -> Result<Self, CameraError> {
        Self::new(fx, fy, cx, cy, width, height, Distortion::NONE)
    }

    pub fn validate(&self) -> Result<(), CameraError> {
        let bad = |what: &str| Err(CameraError::InvalidCamera(what.to_string()));
        if !(self.fx > 0.0 && self.fx.is_finite()) {
            return bad("fx must be positive");
        }
        if !(self.fy > 0.0 && self.fy.is_finite()) {
            return bad("fy must be positive");
        }
        if self.width == 0 || self.height == 0 {
            return bad("resolution must be non-zero");
        }
        if !(self.cx >= 0.0 && self.cx < self.width as f64) {
            return bad("cx must lie in [0, width)");
        }
        if !(self.cy >= 0.0 && self.cy < self.height as f64) {
            return bad("cy must lie in [0, height)");
        }
        if self.dist.0.iter().any(|c| !c.is_finite()) {
            return bad("distortion coefficients must be finite");
        }
        Ok(())
    }

    pub fn contains(&self, pixel: Vector2<f64>) -> bool {
        pixel.x >= 0.0 && pixel.y >= 0.0 && pixel.x < self.width as f64 && pixel.y < self.height as f64
    }

    /// Projects normalized (undistorted) coordinates through distortion and K.
    pub fn project_normalized(&self, n: Vector2<f64>) -> Vector2<f64> {
        let (xd, yd) = self.dist.apply(n.x, n.y);
        Vector2::new(self.fx * xd + self.cx, self.fy * yd + self.cy)
    }

    /// Full perspective projection with lens distortion of a camera-frame point.
    pub fn project(&self, p: &Vector3<f64>) -> Result<Vector2<f64>, CameraError> {
        if !(p.z > 0.0) {
            return Err(CameraError::BehindCamera { z: p.z });
        }
        Ok(self.project_normalized(Vector2::new(p.x / p.z, p.y / p.z)))
    }

    /// Inverts distortion for a pixel, returning normalized coordinates.
    ///
    /// Damped fixed-point iteration on `x = (x_d - tangential(x)) / radial(x)`;
    /// the damping factor halves whenever a step increases the residual.
    pub fn undistort_pixel(&self, pixel: Vector2<f64>) -> Result<Vector2<f64>, CameraError> {
        if !self.contains(pixel) {
            return Err(CameraError::PixelOutOfBounds { u: pixel.x, v: pixel.y });
        }
        let xd = (pixel.x - self.cx) / self.fx;
        let yd = (pixel.y - self.cy) / self.fy;
        if self.dist.is_zero() {
            return Ok(Vector2::new(xd, yd));
        }
        let residual = |x: f64, y: f64| {
            let (ux, uy) = self.dist.apply(x, y);
            ((ux - xd).powi(2) + (uy - yd).powi(2)).sqrt()
        };
        let [k1, k2, p1, p2, k3] = self.dist.0;
        let (mut x, mut y) = (xd, yd);
        let mut err = residual(x, y);
        let mut damping = 1.0;
        for _ in 0..UNDISTORT_MAX_ITERS {
            if err < UNDISTORT_TOL {
                return Ok(Vector2::new(x, y));
            }
            let r2 = x * x + y * y;
            let radial = 1.0 + r2 * (k1 + r2 * (k2 + r2 * k3));
            let dx = 2.0 * p1 * x * y + p2 * (r2 + 2.0 * x * x);
            let dy = p1 * (r2 + 2.0 * y * y) + 2.0 * p2 * x * y;
            let (fx, fy) = ((xd - dx) / radial, (yd - dy) / radial);
            loop {
                let nx = x + damping * (fx - x);
                let ny = y + damping * (fy - y);
                let next = residual(nx, ny);
                if next.is_finite() && (next < err || damping < 1e-3) {
                    x = nx;
                    y = ny;
                    err = next;
                    break;
                }
                damping *= 0.5;
            }
        }
        if err < UNDISTORT_TOL {
            Ok(Vector2::new(x, y))
        } else {
            Err(CameraError::NonConvergent { u: pixel.x, v: pixel.y, residual: err })
        }
    }
}
