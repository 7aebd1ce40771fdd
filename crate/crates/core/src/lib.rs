//! Self-supervised image denoising by unrolled regularized inpainting.
//!
//! Noisy pixels are split into a held-out set `J` and its complement. An
//! unrolled variable-splitting solver sees only `J^c` through its
//! data-fidelity units and is trained so that its output on `J` predicts the
//! held-out noisy values. Baseline supervised, paired-noisy and blind-spot
//! training modes share the same network.
//!
//! All numerical code is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix the common choices.

pub mod adam;
pub mod cg;
pub mod dct;
pub mod error;
pub mod image;
pub mod io;
pub mod loss;
pub mod mask;
pub mod model;
pub mod nn;
pub mod noise;
pub mod regularizer;
pub mod rng;
pub mod scalar;
pub mod synthetic;
pub mod train;
pub mod unroll;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Image32 = image::Image<f32>;
pub type Image64 = image::Image<f64>;
pub type UNet32 = nn::unet::UNet<f32>;
pub type UNet64 = nn::unet::UNet<f64>;
pub type Covariance64 = noise::ColoredCovariance<f64>;
