//! Minimal CPU convolutional network machinery with hand-written reverse mode.

pub mod checkpoint;
pub mod layers;
pub mod unet;

use crate::error::{Error, Result};
use crate::image::Image;
use crate::scalar::Scalar;

/// Planar `channels × height × width` activation.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMap<T> {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub data: Vec<T>,
}

impl<T: Scalar> FeatureMap<T> {
    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        Self { channels, height, width, data: vec![T::zero(); channels * height * width] }
    }

    pub fn from_vec(channels: usize, height: usize, width: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != channels * height * width {
            return Err(Error::Dimension("feature map size".into()));
        }
        Ok(Self { channels, height, width, data })
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.channels, self.height, self.width)
    }

    pub fn plane(&self, c: usize) -> &[T] {
        let n = self.height * self.width;
        &self.data[c * n..(c + 1) * n]
    }

    pub fn plane_mut(&mut self, c: usize) -> &mut [T] {
        let n = self.height * self.width;
        &mut self.data[c * n..(c + 1) * n]
    }

    pub fn add_assign(&mut self, other: &Self) {
        debug_assert_eq!(self.shape(), other.shape());
        self.data.iter_mut().zip(&other.data).for_each(|(a, &b)| *a += b);
    }

    /// Interleaved image to planar map.
    pub fn from_image(image: &Image<T>) -> Self {
        let (h, w, c) = image.shape();
        let mut data = Vec::with_capacity(h * w * c);
        for k in 0..c {
            data.extend(image.plane(k));
        }
        Self { channels: c, height: h, width: w, data }
    }

    pub fn to_image(&self, peak: T) -> Result<Image<T>> {
        let (c, h, w) = self.shape();
        let n = h * w;
        let mut data = Vec::with_capacity(c * n);
        for p in 0..n {
            for k in 0..c {
                data.push(self.data[k * n + p]);
            }
        }
        Image::new(h, w, c, data, peak)
    }
}
