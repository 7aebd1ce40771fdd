//! Pixel partitions `J` / `J^c`, the projections onto each side, and
//! construction of network inputs that only depend on `J^c`.

use rand::Rng as _;

use crate::error::{Error, Result};
use crate::image::Image;
use crate::rng::derived_rng;
use crate::scalar::Scalar;

const RLE_MAGIC: &[u8; 8] = b"N2IMASK1";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MaskMode {
    Uniform,
    Stratified,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    /// Held-out pixels.
    J,
    /// Observed pixels.
    Jc,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FillStrategy {
    Zero,
    LocalMean { radius: usize },
    RandomNeighbor { radius: usize },
}

impl Default for FillStrategy {
    fn default() -> Self {
        FillStrategy::LocalMean { radius: 1 }
    }
}

impl FillStrategy {
    pub fn validate(&self) -> Result<()> {
        match *self {
            FillStrategy::LocalMean { radius: 0 } | FillStrategy::RandomNeighbor { radius: 0 } => {
                Err(Error::Config("fill radius must be at least 1".into()))
            }
            _ => Ok(()),
        }
    }
}

/// Split of the `height × width` pixel grid into `J` (masked) and `J^c`.
#[derive(Clone, Debug, PartialEq)]
pub struct MaskPartition {
    height: usize,
    width: usize,
    masked: Vec<usize>,
    indicator: Vec<bool>,
    density: f64,
}

impl MaskPartition {
    /// Builds a partition from a row-major indicator of `J`. Unlike
    /// [`sample_mask`], either side may be empty.
    pub fn from_indicator(height: usize, width: usize, indicator: Vec<bool>) -> Result<Self> {
        if indicator.len() != height * width {
            return Err(Error::Dimension(format!("indicator length {} for {height}x{width}", indicator.len())));
        }
        let masked: Vec<usize> = indicator.iter().enumerate().filter(|(_, &m)| m).map(|(i, _)| i).collect();
        let density = masked.len() as f64 / indicator.len().max(1) as f64;
        Ok(Self { height, width, masked, indicator, density })
    }

    /// `J = ∅`: every pixel observed (full-image inference).
    pub fn empty(height: usize, width: usize) -> Self {
        Self::from_indicator(height, width, vec![false; height * width]).expect("sized")
    }

    /// `J` = every pixel.
    pub fn full(height: usize, width: usize) -> Self {
        Self::from_indicator(height, width, vec![true; height * width]).expect("sized")
    }

    pub fn height(&self) -> usize {
        self.height
    }
    pub fn width(&self) -> usize {
        self.width
    }
    pub fn masked(&self) -> &[usize] {
        &self.masked
    }
    pub fn indicator(&self) -> &[bool] {
        &self.indicator
    }
    /// Realized fraction of masked pixels.
    pub fn density(&self) -> f64 {
        self.density
    }

    #[inline]
    pub fn is_masked(&self, pixel: usize) -> bool {
        self.indicator[pixel]
    }

    pub fn complement(&self) -> Vec<usize> {
        (0..self.indicator.len()).filter(|&i| !self.indicator[i]).collect()
    }

    pub(crate) fn check_image<T: Scalar>(&self, image: &Image<T>) -> Result<()> {
        if image.height() != self.height || image.width() != self.width {
            return Err(Error::Dimension(format!(
                "image {}x{} vs partition {}x{}",
                image.height(),
                image.width(),
                self.height,
                self.width
            )));
        }
        Ok(())
    }

    /// Run-length encoding: magic `N2IMASK1`, height and width as u32 LE, run
    /// count as u32 LE, then run lengths as u32 LE alternating between
    /// unmasked and masked, starting with unmasked (possibly a zero-length run).
    pub fn to_rle(&self) -> Vec<u8> {
        let mut runs = Vec::new();
        let mut current = false;
        let mut len = 0u32;
        for &m in &self.indicator {
            if m == current {
                len += 1;
            } else {
                runs.push(len);
                current = m;
                len = 1;
            }
        }
        runs.push(len);
        let mut out = RLE_MAGIC.to_vec();
        for v in [self.height as u32, self.width as u32, runs.len() as u32] {
            out.extend(v.to_le_bytes());
        }
        for r in runs {
            out.extend(r.to_le_bytes());
        }
        out
    }

    pub fn from_rle(bytes: &[u8]) -> Result<Self> {
        let bad = || Error::Format("malformed mask RLE".into());
        if bytes.len() < 20 || &bytes[..8] != RLE_MAGIC {
            return Err(bad());
        }
        let word = |i: usize| -> Result<u32> {
            bytes.get(i..i + 4).map(|b| u32::from_le_bytes(b.try_into().unwrap())).ok_or_else(bad)
        };
        let (h, w, n) = (word(8)? as usize, word(12)? as usize, word(16)? as usize);
        let mut indicator = Vec::with_capacity(h * w);
        for k in 0..n {
            let len = word(20 + 4 * k)? as usize;
            indicator.extend(std::iter::repeat_n(k % 2 == 1, len));
        }
        if indicator.len() != h * w || bytes.len() != 20 + 4 * n {
            return Err(bad());
        }
        Self::from_indicator(h, w, indicator)
    }
}

/// Draws a partition of a `height × width` grid.
///
/// `Uniform` masks each pixel independently with probability `density`,
/// redrawing until both sides are non-empty. `Stratified` tiles the grid
/// with cells of side `ceil(1/sqrt(density))` (edge cells may be partial)
/// and masks exactly one uniformly chosen pixel per cell.
pub fn sample_mask(height: usize, width: usize, density: f64, mode: MaskMode, seed: u64) -> Result<MaskPartition> {
    if height < 2 || width < 2 {
        return Err(Error::Dimension(format!("mask shape {height}x{width} must be at least 2x2")));
    }
    if !(density > 0.0 && density < 1.0) {
        return Err(Error::Config(format!("mask density {density} outside (0, 1)")));
    }
    let mut rng = derived_rng(seed, "mask", &[]);
    let n = height * width;
    match mode {
        MaskMode::Uniform => loop {
            let ind: Vec<bool> = (0..n).map(|_| rng.random_bool(density)).collect();
            let k = ind.iter().filter(|&&m| m).count();
            if k > 0 && k < n {
                return MaskPartition::from_indicator(height, width, ind);
            }
        },
        MaskMode::Stratified => {
            let cell = (1.0 / density.sqrt()).ceil().max(2.0) as usize;
            let mut ind = vec![false; n];
            for r0 in (0..height).step_by(cell) {
                for c0 in (0..width).step_by(cell) {
                    let r = r0 + rng.random_range(0..cell.min(height - r0));
                    let c = c0 + rng.random_range(0..cell.min(width - c0));
                    ind[r * width + c] = true;
                }
            }
            MaskPartition::from_indicator(height, width, ind)
        }
    }
}

/// `P_J y` or `P_{J^c} y`: keeps one side, zeroes the other.
pub fn project<T: Scalar>(image: &Image<T>, partition: &MaskPartition, side: Side) -> Result<Image<T>> {
    partition.check_image(image)?;
    let keep_masked = side == Side::J;
    let c = image.channels();
    let mut out = image.clone();
    for (p, px) in out.data_mut().chunks_mut(c).enumerate() {
        if partition.is_masked(p) != keep_masked {
            px.iter_mut().for_each(|v| *v = T::zero());
        }
    }
    Ok(out)
}

/// Replaces every `J` pixel using only `J^c` values; `J^c` pixels are copied.
pub fn fill_masked<T: Scalar>(
    image: &Image<T>,
    partition: &MaskPartition,
    strategy: FillStrategy,
    seed: u64,
) -> Result<Image<T>> {
    partition.check_image(image)?;
    strategy.validate()?;
    let (h, w, ch) = image.shape();
    let mut out = project(image, partition, Side::Jc)?;
    let radius = match strategy {
        FillStrategy::Zero => return Ok(out),
        FillStrategy::LocalMean { radius } | FillStrategy::RandomNeighbor { radius } => radius,
    };
    let mut rng = derived_rng(seed, "fill", &[]);
    let mut neighbors = Vec::with_capacity((2 * radius + 1).pow(2));
    for &p in partition.masked() {
        let (r, c) = (p / w, p % w);
        neighbors.clear();
        for rr in r.saturating_sub(radius)..=(r + radius).min(h - 1) {
            for cc in c.saturating_sub(radius)..=(c + radius).min(w - 1) {
                if !partition.is_masked(rr * w + cc) {
                    neighbors.push(rr * w + cc);
                }
            }
        }
        if neighbors.is_empty() {
            continue;
        }
        match strategy {
            FillStrategy::LocalMean { .. } => {
                let inv = T::one() / T::of(neighbors.len() as f64);
                for k in 0..ch {
                    let s: T = neighbors.iter().map(|&q| image.data()[q * ch + k]).sum();
                    out.data_mut()[p * ch + k] = s * inv;
                }
            }
            FillStrategy::RandomNeighbor { .. } => {
                let q = neighbors[rng.random_range(0..neighbors.len())];
                for k in 0..ch {
                    out.data_mut()[p * ch + k] = image.data()[q * ch + k];
                }
            }
            FillStrategy::Zero => unreachable!(),
        }
    }
    Ok(out)
}
