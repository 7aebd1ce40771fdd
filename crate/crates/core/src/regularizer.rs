//! Regularizer units for the unrolled solver: the learnable U-Net, a
//! learning-free DCT soft-thresholding operator, and the identity.

use crate::dct::DctPlan;
use crate::error::{Error, Result};
use crate::image::Image;
use crate::nn::unet::{Tape, UNet, UNetConfig, UNetGrads};
use crate::nn::FeatureMap;
use crate::scalar::Scalar;

/// Default penalty before training.
pub const MU_INIT: f64 = 0.05;

/// A differentiable image-to-image map `z = R(x)`.
pub trait Regularizer<T: Scalar> {
    type Tape;
    type Grad;

    fn forward(&self, x: &Image<T>) -> Result<(Image<T>, Self::Tape)>;

    /// Adds parameter gradients into `grad` and returns the input gradient.
    fn backward(&self, tape: &Self::Tape, grad_out: &Image<T>, grad: &mut Self::Grad) -> Result<Image<T>>;

    fn zero_grad(&self) -> Self::Grad;

    fn apply(&self, x: &Image<T>) -> Result<Image<T>> {
        self.forward(x).map(|(y, _)| y)
    }
}

impl<T: Scalar> Regularizer<T> for UNet<T> {
    type Tape = (Tape<T>, T);
    type Grad = UNetGrads<T>;

    fn forward(&self, x: &Image<T>) -> Result<(Image<T>, Self::Tape)> {
        let tape = self.forward_tape(&FeatureMap::from_image(x))?;
        let y = tape.output().to_image(x.peak())?;
        Ok((y, (tape, x.peak())))
    }

    fn backward(&self, tape: &Self::Tape, grad_out: &Image<T>, grad: &mut Self::Grad) -> Result<Image<T>> {
        let gx = UNet::backward(self, &tape.0, &FeatureMap::from_image(grad_out), grad)?;
        gx.to_image(tape.1)
    }

    fn zero_grad(&self) -> Self::Grad {
        self.zero_grads()
    }
}

/// Learnable parameters of an unrolled model: the shared network and the
/// penalty `mu = exp(mu_log)`.
#[derive(Clone, Debug, PartialEq)]
pub struct RegularizerParams<T> {
    pub net: UNet<T>,
    pub mu_log: T,
}

impl<T: Scalar> RegularizerParams<T> {
    pub fn new(config: UNetConfig, mu: f64, seed: u64) -> Result<Self> {
        if !(mu > 0.0) {
            return Err(Error::Config(format!("mu must be positive, got {mu}")));
        }
        Ok(Self { net: UNet::new(config, seed)?, mu_log: T::of(mu.ln()) })
    }

    pub fn mu(&self) -> T {
        self.mu_log.exp()
    }

    /// Trainable scalars: network weights plus the penalty.
    pub fn param_count(&self) -> usize {
        self.net.param_count() + 1
    }
}

/// `idct2(shrink(dct2(x), tau))` per channel with the DC coefficient left untouched.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DctSoftThreshold<T> {
    pub tau: T,
}

/// Identity map, used to test the unrolling machinery in isolation.
#[derive(Clone, Copy, Debug, Default)]
pub struct IdentityRegularizer;

pub fn dct_soft_threshold<T: Scalar>(x: &Image<T>, tau: T) -> Result<Image<T>> {
    DctSoftThreshold { tau }.apply(x)
}

impl<T: Scalar> Regularizer<T> for DctSoftThreshold<T> {
    /// Per channel, which coefficients passed the threshold.
    type Tape = Vec<Vec<bool>>;
    type Grad = ();

    fn forward(&self, x: &Image<T>) -> Result<(Image<T>, Self::Tape)> {
        if !(self.tau >= T::zero()) {
            return Err(Error::Config(format!("threshold must be non-negative, got {}", self.tau)));
        }
        let plan = DctPlan::new(x.height(), x.width());
        let mut out = x.clone();
        let mut tape = Vec::with_capacity(x.channels());
        for ch in 0..x.channels() {
            let mut c = plan.forward(&x.plane(ch));
            let mut keep = vec![true; c.len()];
            for (i, v) in c.iter_mut().enumerate().skip(1) {
                let mag = v.abs() - self.tau;
                if mag > T::zero() {
                    *v = v.signum() * mag;
                } else {
                    *v = T::zero();
                    keep[i] = false;
                }
            }
            out.set_plane(ch, &plan.inverse(&c));
            tape.push(keep);
        }
        Ok((out, tape))
    }

    fn backward(&self, tape: &Self::Tape, grad_out: &Image<T>, _grad: &mut ()) -> Result<Image<T>> {
        let plan = DctPlan::new(grad_out.height(), grad_out.width());
        let mut out = grad_out.clone();
        for (ch, keep) in tape.iter().enumerate() {
            let mut c = plan.forward(&grad_out.plane(ch));
            c.iter_mut().zip(keep).for_each(|(v, &k)| {
                if !k {
                    *v = T::zero()
                }
            });
            out.set_plane(ch, &plan.inverse(&c));
        }
        Ok(out)
    }

    fn zero_grad(&self) {}
}

impl<T: Scalar> Regularizer<T> for IdentityRegularizer {
    type Tape = ();
    type Grad = ();

    fn forward(&self, x: &Image<T>) -> Result<(Image<T>, ())> {
        Ok((x.clone(), ()))
    }

    fn backward(&self, _tape: &(), grad_out: &Image<T>, _grad: &mut ()) -> Result<Image<T>> {
        Ok(grad_out.clone())
    }

    fn zero_grad(&self) {}
}
