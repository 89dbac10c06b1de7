//! Row-major single-channel rasters shared by the renderer, the warp and the
//! labeling pipeline.

use serde::{Deserialize, Serialize};

/// A row-major single-channel image. Pixel `(u, v)` lives at `v * width + u`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Image<T> {
    pub width: usize,
    pub height: usize,
    pub data: Vec<T>,
}

impl<T: Copy> Image<T> {
    pub fn filled(width: usize, height: usize, value: T) -> Self {
        Self { width, height, data: vec![value; width * height] }
    }

    /// Wraps an existing buffer; `None` when the length does not match.
    pub fn from_vec(width: usize, height: usize, data: Vec<T>) -> Option<Self> {
        (data.len() == width * height).then_some(Self { width, height, data })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for v in 0..height {
            for u in 0..width {
                data.push(f(u, v));
            }
        }
        Self { width, height, data }
    }

    #[inline]
    pub fn get(&self, u: usize, v: usize) -> T {
        self.data[v * self.width + u]
    }

    #[inline]
    pub fn set(&mut self, u: usize, v: usize, value: T) {
        self.data[v * self.width + u] = value;
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn fill(&mut self, value: T) {
        self.data.iter_mut().for_each(|p| *p = value);
    }
}

impl Image<f32> {
    /// Bilinear sample at fractional pixel coordinates. Integer coordinates
    /// return the stored value exactly; neighbours past the last row or
    /// column are clamped to the edge.
    pub fn sample_bilinear(&self, u: f64, v: f64) -> f32 {
        let x0 = u.floor();
        let y0 = v.floor();
        let ax = u - x0;
        let ay = v - y0;
        let x0 = x0 as usize;
        let y0 = y0 as usize;
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let p00 = self.get(x0, y0) as f64;
        if ax == 0.0 && ay == 0.0 {
            return p00 as f32;
        }
        let p10 = self.get(x1, y0) as f64;
        let p01 = self.get(x0, y1) as f64;
        let p11 = self.get(x1, y1) as f64;
        let top = p00 + ax * (p10 - p00);
        let bottom = p01 + ax * (p11 - p01);
        (top + ay * (bottom - top)) as f32
    }

    pub fn sample_nearest(&self, u: f64, v: f64) -> f32 {
        let x = (u.round() as usize).min(self.width - 1);
        let y = (v.round() as usize).min(self.height - 1);
        self.get(x, y)
    }

    /// Resizes with bilinear interpolation using pixel-centre alignment.
    pub fn resize_bilinear(&self, width: usize, height: usize) -> Image<f32> {
        let sx = self.width as f64 / width as f64;
        let sy = self.height as f64 / height as f64;
        Image::from_fn(width, height, |u, v| {
            let su = ((u as f64 + 0.5) * sx - 0.5).clamp(0.0, (self.width - 1) as f64);
            let sv = ((v as f64 + 0.5) * sy - 0.5).clamp(0.0, (self.height - 1) as f64);
            self.sample_bilinear(su, sv)
        })
    }

    pub fn min_max(&self) -> (f32, f32) {
        self.data
            .iter()
            .fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &p| (lo.min(p), hi.max(p)))
    }
}
