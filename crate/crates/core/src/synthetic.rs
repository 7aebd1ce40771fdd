//! Procedural piecewise-smooth test images: a background gradient overlaid
//! with soft discs and rectangles.

use rand::Rng as _;

use crate::image::Image;
use crate::rng::derived_rng;
use crate::scalar::Scalar;

/// One grayscale-or-color image in `[0, peak]`, fully determined by
/// `(seed, index)`.
pub fn synthetic_image<T: Scalar>(
    height: usize,
    width: usize,
    channels: usize,
    peak: f64,
    seed: u64,
    index: usize,
) -> Image<T> {
    let mut rng = derived_rng(seed, "synthetic", &[index as u64]);
    let (h, w) = (height as f64, width as f64);
    let base: Vec<f64> = (0..channels).map(|_| rng.random_range(0.2..0.8)).collect();
    let (gy, gx) = (rng.random_range(-0.3..0.3), rng.random_range(-0.3..0.3));
    let mut canvas: Vec<f64> = (0..height * width * channels)
        .map(|i| {
            let (r, c, k) = (i / (width * channels), (i / channels) % width, i % channels);
            base[k] + gy * (r as f64 / h - 0.5) + gx * (c as f64 / w - 0.5)
        })
        .collect();
    let shapes = rng.random_range(3..7);
    for _ in 0..shapes {
        let level: Vec<f64> = (0..channels).map(|_| rng.random_range(0.0..1.0)).collect();
        let (cy, cx) = (rng.random_range(0.0..h), rng.random_range(0.0..w));
        let disc = rng.random_bool(0.5);
        let (ry, rx) = (rng.random_range(0.1..0.35) * h, rng.random_range(0.1..0.35) * w);
        let soft = 1.0 + rng.random_range(0.0..2.0);
        for r in 0..height {
            for c in 0..width {
                let (dy, dx) = (r as f64 + 0.5 - cy, c as f64 + 0.5 - cx);
                // signed distance to the shape boundary, negative inside
                let d = if disc {
                    ((dy / ry).powi(2) + (dx / rx).powi(2)).sqrt() * ry.min(rx) - ry.min(rx)
                } else {
                    (dy.abs() - ry).max(dx.abs() - rx)
                };
                let a = 1.0 / (1.0 + (d / soft).exp());
                for k in 0..channels {
                    let v = &mut canvas[(r * width + c) * channels + k];
                    *v = (1.0 - a) * *v + a * level[k];
                }
            }
        }
    }
    let data = canvas.into_iter().map(|v| T::of(v.clamp(0.0, 1.0) * peak)).collect();
    Image::new(height, width, channels, data, T::of(peak)).expect("consistent shape")
}

/// `count` synthetic images with indices `0..count`.
pub fn synthetic_corpus<T: Scalar>(
    count: usize,
    height: usize,
    width: usize,
    channels: usize,
    peak: f64,
    seed: u64,
) -> Vec<Image<T>> {
    (0..count).map(|i| synthetic_image(height, width, channels, peak, seed, i)).collect()
}
