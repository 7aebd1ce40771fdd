//! A trained denoiser: either a plain network or a network unrolled inside
//! the variable-splitting solver.

use crate::error::Result;
use crate::image::Image;
use crate::mask::MaskPartition;
use crate::nn::checkpoint::Checkpoint;
use crate::nn::unet::UNet;
use crate::nn::FeatureMap;
use crate::noise::ColoredCovariance;
use crate::scalar::Scalar;
use crate::unroll::{unroll_apply, DfVariant, UnrollConfig};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Unrolled<T> {
    pub mu_log: T,
    pub iterations: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Model<T> {
    pub net: UNet<T>,
    pub unrolled: Option<Unrolled<T>>,
}

impl<T: Scalar> Model<T> {
    pub fn plain(net: UNet<T>) -> Self {
        Self { net, unrolled: None }
    }

    pub fn unrolled(net: UNet<T>, mu_log: T, iterations: usize) -> Self {
        Self { net, unrolled: Some(Unrolled { mu_log, iterations }) }
    }

    pub fn mu(&self) -> Option<T> {
        self.unrolled.map(|u| u.mu_log.exp())
    }

    /// Trainable scalar count, including the penalty for unrolled models.
    pub fn param_count(&self) -> usize {
        self.net.param_count() + usize::from(self.unrolled.is_some())
    }

    /// Runs the network on `input` already normalized to a peak of 1.
    pub fn network(&self, input: &Image<T>) -> Result<Image<T>> {
        self.net.forward(&FeatureMap::from_image(input))?.to_image(input.peak())
    }

    /// Denoises a full noisy image in its native intensity scale.
    ///
    /// Unrolled models observe every pixel (`J = ∅`). When `covariance` is
    /// given (one plane) the colored data-fidelity update replaces the
    /// quadratic one. Only its shape matters: it is rescaled to unit mean
    /// energy per pixel, the same scale the quadratic update assumes and `μ`
    /// was trained against, so a white covariance reproduces the quadratic
    /// update. The result is clamped to `[0, peak]`.
    pub fn denoise(
        &self,
        noisy: &Image<T>,
        covariance: Option<&ColoredCovariance<T>>,
        cg: (f64, usize),
    ) -> Result<Image<T>> {
        let peak = noisy.peak();
        let y = noisy.normalized();
        let out = match self.unrolled {
            None => self.network(&y)?,
            Some(u) => {
                let scaled = covariance.map(|c| c.scaled(T::one() / c.energy_per_pixel()));
                let config = UnrollConfig {
                    iterations: u.iterations,
                    df_variant: if scaled.is_some() { DfVariant::ColoredCg } else { DfVariant::FullImage },
                    cg_tol: cg.0,
                    cg_max_iter: cg.1,
                    ..UnrollConfig::default()
                };
                let part = MaskPartition::empty(y.height(), y.width());
                unroll_apply(&y, &part, u.mu_log.exp(), &config, &self.net, scaled.as_ref())?
            }
        };
        Ok(out.rescaled(peak).clamped())
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        Checkpoint::from_model(&self.net, self.unrolled.map(|u| u.mu_log), self.unrolled.map(|u| u.iterations))
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        let m = ck.to_model()?;
        Ok(Self {
            net: m.net,
            unrolled: m.mu_log.map(|mu_log| Unrolled { mu_log, iterations: m.iterations.unwrap_or(10) }),
        })
    }
}
