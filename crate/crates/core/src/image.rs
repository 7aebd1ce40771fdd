//! Image container, geometric augmentation, patch tiling and PSNR.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// PSNR reported when the two images are identical.
pub const PSNR_CAP_DB: f64 = 300.0;

/// Row-major `height × width × channels` grid of real intensities.
#[derive(Clone, Debug, PartialEq)]
pub struct Image<T> {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<T>,
    peak: T,
}

impl<T: Scalar> Image<T> {
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<T>, peak: T) -> Result<Self> {
        if height == 0 || width == 0 || channels == 0 {
            return Err(Error::Dimension(format!("empty image {height}x{width}x{channels}")));
        }
        if data.len() != height * width * channels {
            return Err(Error::Dimension(format!("data length {} != {height}*{width}*{channels}", data.len())));
        }
        if !(peak > T::zero()) || !peak.is_finite() {
            return Err(Error::Dimension(format!("peak must be positive, got {peak}")));
        }
        if let Some(v) = data.iter().find(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!("non-finite intensity {v}")));
        }
        Ok(Self { height, width, channels, data, peak })
    }

    pub fn filled(height: usize, width: usize, channels: usize, value: T, peak: T) -> Self {
        Self::new(height, width, channels, vec![value; height * width * channels], peak).expect("valid filled image")
    }

    pub fn zeros_like(&self) -> Self {
        Self { data: vec![T::zero(); self.data.len()], ..self.clone() }
    }

    /// Builds an image from a per-pixel function `f(row, col, channel)`.
    pub fn from_fn(
        height: usize,
        width: usize,
        channels: usize,
        peak: T,
        mut f: impl FnMut(usize, usize, usize) -> T,
    ) -> Self {
        let mut data = Vec::with_capacity(height * width * channels);
        for r in 0..height {
            for c in 0..width {
                for ch in 0..channels {
                    data.push(f(r, c, ch));
                }
            }
        }
        Self::new(height, width, channels, data, peak).expect("valid generated image")
    }

    pub fn height(&self) -> usize {
        self.height
    }
    pub fn width(&self) -> usize {
        self.width
    }
    pub fn channels(&self) -> usize {
        self.channels
    }
    pub fn peak(&self) -> T {
        self.peak
    }
    pub fn shape(&self) -> (usize, usize, usize) {
        (self.height, self.width, self.channels)
    }
    pub fn pixels(&self) -> usize {
        self.height * self.width
    }
    pub fn data(&self) -> &[T] {
        &self.data
    }
    /// Mutable access. Callers must keep values finite.
    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }
    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn index(&self, row: usize, col: usize, ch: usize) -> usize {
        (row * self.width + col) * self.channels + ch
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize, ch: usize) -> T {
        self.data[self.index(row, col, ch)]
    }

    /// Same geometry, new intensities.
    pub fn with_data(&self, data: Vec<T>) -> Result<Self> {
        Self::new(self.height, self.width, self.channels, data, self.peak)
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self { data: self.data.iter().map(|&v| f(v)).collect(), ..self.clone() }
    }

    /// Rescales intensities to a peak of 1.
    pub fn normalized(&self) -> Self {
        self.rescaled(T::one())
    }

    /// Rescales intensities so that the dynamic range maps onto `peak`.
    pub fn rescaled(&self, peak: T) -> Self {
        let s = peak / self.peak;
        Self { data: self.data.iter().map(|&v| v * s).collect(), peak, ..self.clone() }
    }

    pub fn clamped(&self) -> Self {
        let p = self.peak;
        self.map(|v| v.max(T::zero()).min(p))
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.shape() == other.shape()
    }

    pub(crate) fn check_shape(&self, other: &Self) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::Dimension(format!("{:?} vs {:?}", self.shape(), other.shape())))
        }
    }

    /// Extracts one channel as a row-major plane.
    pub fn plane(&self, ch: usize) -> Vec<T> {
        self.data.iter().skip(ch).step_by(self.channels).copied().collect()
    }

    pub fn set_plane(&mut self, ch: usize, plane: &[T]) {
        let c = self.channels;
        for (dst, &src) in self.data.iter_mut().skip(ch).step_by(c).zip(plane) {
            *dst = src;
        }
    }

    pub fn mean(&self) -> T {
        self.data.iter().copied().sum::<T>() / T::of(self.data.len() as f64)
    }

    /// 90° counter-clockwise rotation.
    pub fn rot90(&self) -> Self {
        let (h, w) = (self.height, self.width);
        let mut out = Vec::with_capacity(self.data.len());
        for r in 0..w {
            for c in 0..h {
                for ch in 0..self.channels {
                    out.push(self.get(c, w - 1 - r, ch));
                }
            }
        }
        Self { height: w, width: h, data: out, ..self.clone() }
    }

    /// Left-right mirror.
    pub fn mirrored(&self) -> Self {
        let mut out = Vec::with_capacity(self.data.len());
        for r in 0..self.height {
            for c in (0..self.width).rev() {
                for ch in 0..self.channels {
                    out.push(self.get(r, c, ch));
                }
            }
        }
        Self { data: out, ..self.clone() }
    }

    /// Copies the `size × size` window whose top-left corner is `(row, col)`.
    pub fn crop(&self, row: usize, col: usize, height: usize, width: usize) -> Result<Self> {
        if row + height > self.height || col + width > self.width {
            return Err(Error::Dimension("crop window outside image".into()));
        }
        let mut out = Vec::with_capacity(height * width * self.channels);
        for r in row..row + height {
            let start = self.index(r, col, 0);
            out.extend_from_slice(&self.data[start..start + width * self.channels]);
        }
        Self::new(height, width, self.channels, out, self.peak)
    }
}

/// Mean squared error over all pixels and channels jointly.
pub fn mse<T: Scalar>(reference: &Image<T>, test: &Image<T>) -> Result<f64> {
    reference.check_shape(test)?;
    let n = reference.data.len() as f64;
    let s: f64 = reference
        .data
        .iter()
        .zip(&test.data)
        .map(|(&a, &b)| {
            let d = (a - b).as_f64();
            d * d
        })
        .sum();
    Ok(s / n)
}

/// Peak signal-to-noise ratio in dB, `10 log10(peak² / MSE)`, capped at [`PSNR_CAP_DB`].
pub fn psnr<T: Scalar>(reference: &Image<T>, test: &Image<T>) -> Result<f64> {
    if reference.peak != test.peak {
        return Err(Error::Dimension(format!("peak mismatch {} vs {}", reference.peak, test.peak)));
    }
    let m = mse(reference, test)?;
    if m == 0.0 {
        return Ok(PSNR_CAP_DB);
    }
    let p = reference.peak.as_f64();
    Ok((10.0 * (p * p / m).log10()).min(PSNR_CAP_DB))
}

/// The eight dihedral transforms: rotations by 0/90/180/270 degrees, then
/// the same four applied to the mirrored image.
pub fn augment_eightfold<T: Scalar>(image: &Image<T>) -> Vec<Image<T>> {
    let mut out = Vec::with_capacity(8);
    for base in [image.clone(), image.mirrored()] {
        let mut cur = base;
        for _ in 0..4 {
            let next = cur.rot90();
            out.push(cur);
            cur = next;
        }
    }
    out
}

/// Row-major tiling with `size × size` windows at the given stride.
/// Tiles that would run past the right or bottom edge are dropped.
pub fn extract_patches<T: Scalar>(image: &Image<T>, size: usize, stride: usize) -> Result<Vec<Image<T>>> {
    if size == 0 || stride == 0 {
        return Err(Error::Dimension("patch size and stride must be positive".into()));
    }
    if size > image.height || size > image.width {
        return Err(Error::Dimension(format!("patch {size} larger than image {}x{}", image.height, image.width)));
    }
    let mut out = Vec::new();
    let mut r = 0;
    while r + size <= image.height {
        let mut c = 0;
        while c + size <= image.width {
            out.push(image.crop(r, c, size, size)?);
            c += stride;
        }
        r += stride;
    }
    Ok(out)
}

/// Inverse of non-overlapping tiling: places `tiles` (row-major) back into a
/// `rows × cols` grid of tiles.
pub fn assemble_tiles<T: Scalar>(tiles: &[Image<T>], rows: usize, cols: usize) -> Result<Image<T>> {
    let first = tiles.first().ok_or_else(|| Error::Dimension("no tiles".into()))?;
    if tiles.len() != rows * cols {
        return Err(Error::Dimension(format!("{} tiles for a {rows}x{cols} grid", tiles.len())));
    }
    let (th, tw, ch) = first.shape();
    Ok(Image::from_fn(rows * th, cols * tw, ch, first.peak, |r, c, k| {
        tiles[(r / th) * cols + c / tw].get(r % th, c % tw, k)
    }))
}

/// Ordered collection of images sharing a channel count.
#[derive(Clone, Debug)]
pub struct Dataset<T> {
    pub items: Vec<Image<T>>,
    pub patch_size: usize,
    pub provenance: String,
}

impl<T: Scalar> Dataset<T> {
    pub fn new(items: Vec<Image<T>>, patch_size: usize, provenance: impl Into<String>) -> Result<Self> {
        if let Some(first) = items.first() {
            for img in &items {
                if img.channels != first.channels {
                    return Err(Error::Dimension("dataset mixes channel counts".into()));
                }
                if patch_size > img.height.min(img.width) {
                    return Err(Error::Dimension(format!(
                        "patch size {patch_size} exceeds image {}x{}",
                        img.height, img.width
                    )));
                }
            }
        }
        Ok(Self { items, patch_size, provenance: provenance.into() })
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Non-overlapping patches of every item, optionally with the eightfold
    /// augmentation applied to each patch.
    pub fn training_patches(&self, augment: bool) -> Result<Vec<Image<T>>> {
        let mut out = Vec::new();
        for img in &self.items {
            for p in extract_patches(img, self.patch_size, self.patch_size)? {
                if augment {
                    out.extend(augment_eightfold(&p));
                } else {
                    out.push(p);
                }
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(h: usize, w: usize) -> Image<f64> {
        Image::from_fn(h, w, 1, 255.0, |r, c, _| (r * w + c) as f64)
    }

    #[test]
    fn psnr_identical_is_cap() {
        let a = ramp(4, 5);
        assert_eq!(psnr(&a, &a).unwrap(), PSNR_CAP_DB);
    }

    #[test]
    fn psnr_uniform_error_25() {
        let a = Image::filled(8, 8, 1, 100.0, 255.0);
        let b = a.map(|v| v + 25.0);
        let p = psnr(&a, &b).unwrap();
        assert!((p - 20.0 * (255.0f64 / 25.0).log10()).abs() < 1e-12);
        assert!((p - 20.17).abs() < 0.01);
    }

    #[test]
    fn psnr_full_scale_error_is_zero_db() {
        let a = Image::filled(3, 3, 1, 0.0, 255.0);
        let b = a.map(|_| 255.0);
        assert!(psnr(&a, &b).unwrap().abs() < 1e-12);
    }

    #[test]
    fn psnr_shape_mismatch() {
        assert!(matches!(psnr(&ramp(2, 3), &ramp(3, 2)), Err(Error::Dimension(_))));
    }

    #[test]
    fn psnr_symmetric() {
        let a = ramp(5, 5);
        let b = a.map(|v| v * 0.9 + 3.0);
        assert_eq!(psnr(&a, &b).unwrap(), psnr(&b, &a).unwrap());
    }

    #[test]
    fn rejects_bad_images() {
        assert!(Image::new(2, 2, 1, vec![0.0; 3], 1.0).is_err());
        assert!(Image::new(1, 1, 1, vec![0.0], 0.0).is_err());
        assert!(Image::new(1, 1, 1, vec![f64::NAN], 1.0).is_err());
    }

    #[test]
    fn rot90_shape_and_group_identity() {
        let a = ramp(2, 3);
        let r = a.rot90();
        assert_eq!((r.height(), r.width()), (3, 2));
        assert_eq!(r.rot90().rot90().rot90(), a);
        // top-right corner moves to top-left under a counter-clockwise turn
        assert_eq!(r.get(0, 0, 0), a.get(0, 2, 0));
    }

    #[test]
    fn augment_constant_and_distinct() {
        let c = Image::filled(3, 3, 1, 7.0, 255.0);
        assert!(augment_eightfold(&c).iter().all(|x| *x == c));
        let a = ramp(3, 3);
        let aug = augment_eightfold(&a);
        assert_eq!(aug.len(), 8);
        for i in 0..8 {
            for j in i + 1..8 {
                assert_ne!(aug[i], aug[j], "transforms {i} and {j} coincide");
            }
        }
        assert_eq!(aug[0], a);
    }

    #[test]
    fn augment_preserves_multiset() {
        let a = ramp(3, 4);
        let mut base: Vec<f64> = a.data().to_vec();
        base.sort_by(f64::total_cmp);
        for t in augment_eightfold(&a) {
            let mut d = t.data().to_vec();
            d.sort_by(f64::total_cmp);
            assert_eq!(d, base);
        }
    }

    #[test]
    fn patch_counts() {
        assert_eq!(extract_patches(&ramp(180, 180), 180, 180).unwrap().len(), 1);
        assert_eq!(extract_patches(&ramp(4, 4), 2, 2).unwrap().len(), 4);
        assert_eq!(extract_patches(&ramp(5, 5), 2, 2).unwrap().len(), 4);
        assert!(extract_patches(&ramp(4, 4), 5, 1).is_err());
    }

    #[test]
    fn tiling_reassembles() {
        let a = Image::from_fn(6, 9, 3, 255.0, |r, c, k| (r * 31 + c * 7 + k) as f64);
        let tiles = extract_patches(&a, 3, 3).unwrap();
        assert_eq!(assemble_tiles(&tiles, 2, 3).unwrap(), a);
    }
}
