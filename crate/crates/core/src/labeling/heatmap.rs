use crate::image::Image;
use crate::sim::{Observation, BACKGROUND};

/// Isotropic Gaussian centred on `center`, scaled so its largest pixel is 1.
pub fn gaussian_splat(width: usize, height: usize, center: [f64; 2], sigma: f64) -> Image<f32> {
    let inv = 1.0 / (2.0 * sigma * sigma);
    let profile = |n: usize, c: f64| -> Vec<f64> { (0..n).map(|i| (-(i as f64 - c).powi(2) * inv).exp()).collect() };
    let (gu, gv) = (profile(width, center[0]), profile(height, center[1]));
    let mut map = Image::from_fn(width, height, |u, v| (gu[u] * gv[v]) as f32);
    let (_, peak) = map.min_max();
    if peak > 0.0 {
        map.data.iter_mut().for_each(|x| *x /= peak);
    }
    map
}

/// Goal heatmap for `target`: a splat on its projected grasp point, or all
/// zeros when the object is not in view or another object covers that point.
pub fn oracle_heatmap(obs: &Observation, target: u32, sigma: f64) -> Image<f32> {
    let (w, h) = (obs.width(), obs.height());
    let in_view = obs.object(target).is_some_and(|o| o.pixel_count > 0);
    match obs.track(target) {
        Some(tp) if tp.visible && in_view && !covered(obs, target, tp.pixel) => gaussian_splat(w, h, tp.pixel, sigma),
        _ => Image::filled(w, h, 0.0),
    }
}

fn covered(obs: &Observation, target: u32, pixel: [f64; 2]) -> bool {
    let u = (pixel[0].round() as usize).min(obs.width() - 1);
    let v = (pixel[1].round() as usize).min(obs.height() - 1);
    let l = obs.labels.get(u, v);
    l != BACKGROUND && (l - 1) as u32 != target
}
