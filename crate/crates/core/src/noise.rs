//! Corruption processes: additive Gaussian (fixed or blind level), Bernoulli
//! blackout, multiplicative Poisson, ordered mixtures, and band-limited
//! colored Gaussian noise defined in the DCT domain.
//!
//! Noise parameters are expressed in the image's own intensity units, so
//! `sigma = 25` on a peak-255 image matches `sigma = 25/255` on a normalized one.

use rand::Rng as _;
use rand_distr::{Distribution, Normal, Poisson, StandardNormal};

use crate::dct::DctPlan;
use crate::error::{Error, Result};
use crate::image::Image;
use crate::rng::{derived_rng, Rng};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq)]
pub enum NoiseKind {
    Gaussian {
        sigma: f64,
    },
    BlindGaussian {
        sigma_min: f64,
        sigma_max: f64,
    },
    Bernoulli {
        p: f64,
    },
    Poisson {
        lambda: f64,
    },
    /// Components applied in listed order, each with its own derived stream.
    Mixture(Vec<NoiseKind>),
    /// DCT band `band_lo <= max(u, v) < band_hi`; expected energy per pixel `energy`.
    Colored {
        band_lo: usize,
        band_hi: usize,
        energy: f64,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    pub seed: u64,
}

impl NoiseKind {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidSpec(m));
        match *self {
            NoiseKind::Gaussian { sigma } if !(sigma >= 0.0 && sigma.is_finite()) => bad(format!("sigma {sigma}")),
            NoiseKind::BlindGaussian { sigma_min, sigma_max }
                if !(sigma_min >= 0.0 && sigma_min <= sigma_max && sigma_max.is_finite()) =>
            {
                bad(format!("sigma range [{sigma_min}, {sigma_max}]"))
            }
            NoiseKind::Bernoulli { p } if !(0.0..=1.0).contains(&p) => bad(format!("p {p}")),
            NoiseKind::Poisson { lambda } if !(lambda > 0.0 && lambda.is_finite()) => bad(format!("lambda {lambda}")),
            NoiseKind::Colored { band_lo, band_hi, energy } => {
                if band_lo >= band_hi {
                    bad(format!("empty band [{band_lo}, {band_hi})"))
                } else if !(energy > 0.0 && energy.is_finite()) {
                    bad(format!("energy {energy}"))
                } else {
                    Ok(())
                }
            }
            NoiseKind::Mixture(ref parts) => parts.iter().try_for_each(NoiseKind::validate),
            _ => Ok(()),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            NoiseKind::Gaussian { .. } => "gaussian",
            NoiseKind::BlindGaussian { .. } => "blind_gaussian",
            NoiseKind::Bernoulli { .. } => "bernoulli",
            NoiseKind::Poisson { .. } => "poisson",
            NoiseKind::Mixture(_) => "mixture",
            NoiseKind::Colored { .. } => "colored",
        }
    }
}

impl NoiseSpec {
    pub fn new(kind: NoiseKind, seed: u64) -> Self {
        Self { kind, seed }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { kind: self.kind.clone(), seed }
    }
}

/// Result of a corruption together with the noise level drawn for blind mode.
#[derive(Clone, Debug)]
pub struct Corrupted<T> {
    pub image: Image<T>,
    pub drawn_sigma: Option<f64>,
}

pub fn corrupt<T: Scalar>(image: &Image<T>, spec: &NoiseSpec) -> Result<Image<T>> {
    corrupt_traced(image, spec).map(|c| c.image)
}

pub fn corrupt_traced<T: Scalar>(image: &Image<T>, spec: &NoiseSpec) -> Result<Corrupted<T>> {
    spec.kind.validate()?;
    let mut out = image.clone();
    let mut drawn = None;
    apply_kind(&mut out, &spec.kind, spec.seed, &mut drawn)?;
    Ok(Corrupted { image: out, drawn_sigma: drawn })
}

fn add_gaussian<T: Scalar>(img: &mut Image<T>, sigma: f64, rng: &mut Rng) {
    if sigma == 0.0 {
        return;
    }
    let normal = Normal::new(0.0, sigma).expect("validated sigma");
    for v in img.data_mut() {
        *v += T::of(normal.sample(rng));
    }
}

fn apply_kind<T: Scalar>(img: &mut Image<T>, kind: &NoiseKind, seed: u64, drawn: &mut Option<f64>) -> Result<()> {
    match *kind {
        NoiseKind::Gaussian { sigma } => add_gaussian(img, sigma, &mut derived_rng(seed, "gaussian", &[])),
        NoiseKind::BlindGaussian { sigma_min, sigma_max } => {
            let mut rng = derived_rng(seed, "blind_gaussian", &[]);
            let sigma = if sigma_max > sigma_min { rng.random_range(sigma_min..=sigma_max) } else { sigma_min };
            *drawn = Some(sigma);
            add_gaussian(img, sigma, &mut rng);
        }
        NoiseKind::Bernoulli { p } => {
            let mut rng = derived_rng(seed, "bernoulli", &[]);
            let c = img.channels();
            for px in img.data_mut().chunks_mut(c) {
                if rng.random_bool(p) {
                    px.iter_mut().for_each(|v| *v = T::zero());
                }
            }
        }
        NoiseKind::Poisson { lambda } => {
            let mut rng = derived_rng(seed, "poisson", &[]);
            let peak = img.peak().as_f64();
            for v in img.data_mut() {
                let x = v.as_f64().clamp(0.0, peak);
                let rate = lambda * x / peak;
                let k = if rate > 0.0 {
                    Poisson::new(rate).map_err(|e| Error::InvalidSpec(e.to_string()))?.sample(&mut rng)
                } else {
                    0.0
                };
                *v = T::of(peak * k / lambda);
            }
        }
        NoiseKind::Mixture(ref parts) => {
            for (i, part) in parts.iter().enumerate() {
                apply_kind(img, part, crate::rng::derive_seed(seed, "mixture", &[i as u64]), drawn)?;
            }
        }
        NoiseKind::Colored { band_lo, band_hi, energy } => {
            let cov = ColoredCovariance::<T>::band_pass(img.height(), img.width(), band_lo, band_hi, energy)?;
            for ch in 0..img.channels() {
                let noise = sample_colored(&cov, crate::rng::derive_seed(seed, "colored", &[ch as u64]));
                let plane: Vec<T> = img.plane(ch).iter().zip(&noise).map(|(&a, &b)| a + b).collect();
                img.set_plane(ch, &plane);
            }
        }
    }
    Ok(())
}

/// Noise covariance `K` that is diagonal in the orthonormal DCT basis.
#[derive(Clone, Debug)]
pub struct ColoredCovariance<T> {
    height: usize,
    width: usize,
    passband: Vec<bool>,
    variance: Vec<T>,
    floor: T,
    plan: DctPlan<T>,
}

impl<T: Scalar> ColoredCovariance<T> {
    /// Ideal band-pass covariance: flat variance on `band_lo <= max(u, v) < band_hi`
    /// (clipped to the grid), zero elsewhere, scaled so the expected energy per
    /// pixel is `energy`.
    pub fn band_pass(height: usize, width: usize, band_lo: usize, band_hi: usize, energy: f64) -> Result<Self> {
        NoiseKind::Colored { band_lo, band_hi, energy }.validate()?;
        let passband: Vec<bool> =
            (0..height).flat_map(|u| (0..width).map(move |v| (band_lo..band_hi).contains(&u.max(v)))).collect();
        let count = passband.iter().filter(|&&b| b).count();
        if count == 0 {
            return Err(Error::InvalidSpec(format!(
                "band [{band_lo}, {band_hi}) has no coefficients in a {height}x{width} grid"
            )));
        }
        let var = energy * (height * width) as f64 / count as f64;
        let variance = passband.iter().map(|&b| if b { T::of(var) } else { T::zero() }).collect();
        Self::from_variance(height, width, variance)
    }

    /// Covariance with the given per-coefficient variances; the pass-band is
    /// where the variance is positive.
    pub fn from_variance(height: usize, width: usize, variance: Vec<T>) -> Result<Self> {
        if variance.len() != height * width {
            return Err(Error::Dimension("variance grid size".into()));
        }
        if variance.iter().any(|v| !(*v >= T::zero()) || !v.is_finite()) {
            return Err(Error::InvalidSpec("variances must be finite and non-negative".into()));
        }
        let max = variance.iter().copied().fold(T::zero(), T::max);
        if max == T::zero() {
            return Err(Error::InvalidSpec("empty passband".into()));
        }
        let passband = variance.iter().map(|&v| v > T::zero()).collect();
        Ok(Self { height, width, passband, variance, floor: max * T::of(1e-3), plan: DctPlan::new(height, width) })
    }

    /// Unit variance on every coefficient, i.e. `K = I`.
    pub fn identity(height: usize, width: usize) -> Self {
        Self::from_variance(height, width, vec![T::one(); height * width]).expect("non-empty")
    }

    /// Same band with every variance multiplied by `factor`.
    pub fn scaled(&self, factor: T) -> Self {
        let variance = self.variance.iter().map(|&v| v * factor).collect();
        Self::from_variance(self.height, self.width, variance).expect("positive scaling keeps passband")
    }

    pub fn height(&self) -> usize {
        self.height
    }
    pub fn width(&self) -> usize {
        self.width
    }
    pub fn passband(&self) -> &[bool] {
        &self.passband
    }
    pub fn variance(&self) -> &[T] {
        &self.variance
    }
    /// Whitening floor used in place of zero or tiny variances when inverting.
    pub fn floor(&self) -> T {
        self.floor
    }
    pub fn plan(&self) -> &DctPlan<T> {
        &self.plan
    }

    /// Expected energy per pixel of a sample, `sum(variance) / (H W)`.
    pub fn energy_per_pixel(&self) -> T {
        self.variance.iter().copied().sum::<T>() / T::of((self.height * self.width) as f64)
    }

    fn filter(&self, v: &[T], gain: impl Fn(usize) -> T) -> Result<Vec<T>> {
        if v.len() != self.height * self.width {
            return Err(Error::Dimension(format!(
                "vector of length {} for a {}x{} covariance",
                v.len(),
                self.height,
                self.width
            )));
        }
        let mut c = self.plan.forward(v);
        c.iter_mut().enumerate().for_each(|(i, x)| *x *= gain(i));
        Ok(self.plan.inverse(&c))
    }

    /// Per-coefficient gain of `K⁻¹` (floored).
    pub fn inverse_gain(&self, i: usize) -> T {
        if self.passband[i] {
            T::one() / self.variance[i].max(self.floor)
        } else {
            T::one() / self.floor
        }
    }
}

/// `K v`.
pub fn apply_covariance<T: Scalar>(cov: &ColoredCovariance<T>, v: &[T]) -> Result<Vec<T>> {
    cov.filter(v, |i| cov.variance[i])
}

/// `K⁻¹ v` with the whitening floor applied to small and stop-band variances.
pub fn apply_inverse_covariance<T: Scalar>(cov: &ColoredCovariance<T>, v: &[T]) -> Result<Vec<T>> {
    cov.filter(v, |i| cov.inverse_gain(i))
}

/// DCT coefficients of one draw of [`sample_colored`]; stop-band entries are exactly zero.
pub fn colored_coefficients<T: Scalar>(cov: &ColoredCovariance<T>, seed: u64) -> Vec<T> {
    let mut rng = derived_rng(seed, "colored_sample", &[]);
    cov.variance
        .iter()
        .map(|&var| {
            let g: f64 = StandardNormal.sample(&mut rng);
            if var > T::zero() {
                T::of(g) * var.sqrt()
            } else {
                T::zero()
            }
        })
        .collect()
}

/// One draw of zero-mean Gaussian noise with covariance `K`, as a row-major plane.
pub fn sample_colored<T: Scalar>(cov: &ColoredCovariance<T>, seed: u64) -> Vec<T> {
    cov.plan.inverse(&colored_coefficients(cov, seed))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat(h: usize, w: usize, v: f64) -> Image<f64> {
        Image::filled(h, w, 1, v, 255.0)
    }

    #[test]
    fn zero_sigma_is_identity() {
        let img = Image::from_fn(8, 8, 1, 255.0, |r, c, _| (r * 8 + c) as f64);
        let out = corrupt(&img, &NoiseSpec::new(NoiseKind::Gaussian { sigma: 0.0 }, 3)).unwrap();
        assert_eq!(out, img);
    }

    #[test]
    fn corrupt_is_reproducible() {
        let img = flat(16, 16, 100.0);
        let spec = NoiseSpec::new(
            NoiseKind::Mixture(vec![
                NoiseKind::Poisson { lambda: 30.0 },
                NoiseKind::Gaussian { sigma: 80.0 },
                NoiseKind::Bernoulli { p: 0.2 },
            ]),
            99,
        );
        assert_eq!(corrupt(&img, &spec).unwrap(), corrupt(&img, &spec).unwrap());
        assert_ne!(corrupt(&img, &spec).unwrap(), corrupt(&img, &spec.with_seed(100)).unwrap());
    }

    #[test]
    fn gaussian_statistics() {
        let img = flat(1000, 1000, 128.0);
        let out = corrupt(&img, &NoiseSpec::new(NoiseKind::Gaussian { sigma: 25.0 }, 1)).unwrap();
        let d: Vec<f64> = out.data().iter().zip(img.data()).map(|(a, b)| a - b).collect();
        let n = d.len() as f64;
        let mean = d.iter().sum::<f64>() / n;
        let std = (d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
        assert!((std - 25.0).abs() < 0.5, "std {std}");
        assert!(mean.abs() < 3.0 * 25.0 / n.sqrt(), "mean {mean}");
    }

    #[test]
    fn bernoulli_half_blackout() {
        let img = Image::filled(256, 256, 1, 1.0, 1.0);
        let out = corrupt(&img, &NoiseSpec::new(NoiseKind::Bernoulli { p: 0.5 }, 5)).unwrap();
        let frac = out.data().iter().filter(|&&v| v == 0.0).count() as f64 / out.data().len() as f64;
        assert!((frac - 0.5).abs() < 0.01, "fraction {frac}");
    }

    #[test]
    fn bernoulli_blacks_out_whole_pixels() {
        let img = Image::filled(32, 32, 3, 1.0, 1.0);
        let out = corrupt(&img, &NoiseSpec::new(NoiseKind::Bernoulli { p: 0.5 }, 5)).unwrap();
        for px in out.data().chunks(3) {
            assert!(px.iter().all(|&v| v == px[0]));
        }
    }

    #[test]
    fn poisson_preserves_mean() {
        let img = flat(1000, 1000, 200.0);
        let out = corrupt(&img, &NoiseSpec::new(NoiseKind::Poisson { lambda: 30.0 }, 2)).unwrap();
        let ratio = out.mean() / img.mean();
        assert!((ratio - 1.0).abs() < 0.01, "ratio {ratio}");
    }

    #[test]
    fn blind_sigma_within_range() {
        let img = flat(8, 8, 100.0);
        for seed in 0..50 {
            let c = corrupt_traced(
                &img,
                &NoiseSpec::new(NoiseKind::BlindGaussian { sigma_min: 0.0, sigma_max: 50.0 }, seed),
            )
            .unwrap();
            let s = c.drawn_sigma.unwrap();
            assert!((0.0..=50.0).contains(&s));
        }
    }

    #[test]
    fn rejects_invalid_specs() {
        let img = flat(8, 8, 1.0);
        for kind in [
            NoiseKind::Gaussian { sigma: -1.0 },
            NoiseKind::Bernoulli { p: 1.5 },
            NoiseKind::Poisson { lambda: 0.0 },
            NoiseKind::BlindGaussian { sigma_min: 5.0, sigma_max: 1.0 },
            NoiseKind::Colored { band_lo: 4, band_hi: 4, energy: 1.0 },
            NoiseKind::Colored { band_lo: 1, band_hi: 4, energy: 0.0 },
            NoiseKind::Colored { band_lo: 20, band_hi: 30, energy: 1.0 },
        ] {
            assert!(matches!(corrupt(&img, &NoiseSpec::new(kind.clone(), 0)), Err(Error::InvalidSpec(_))), "{kind:?}");
        }
    }

    #[test]
    fn colored_sample_has_empty_stopband() {
        let cov = ColoredCovariance::<f64>::band_pass(16, 12, 2, 6, 100.0).unwrap();
        let s = sample_colored(&cov, 4);
        let c = cov.plan().forward(&s);
        let scale = c.iter().map(|x| x.abs()).fold(0.0, f64::max);
        for (i, &x) in c.iter().enumerate() {
            if !cov.passband()[i] {
                assert!(x.abs() < 1e-12 * scale);
            }
        }
        assert!((cov.energy_per_pixel() - 100.0).abs() < 1e-9);
    }

    #[test]
    fn covariance_kills_stopband_dc() {
        let cov = ColoredCovariance::<f64>::band_pass(8, 8, 1, 4, 10.0).unwrap();
        let out = apply_covariance(&cov, &vec![2.5; 64]).unwrap();
        assert!(out.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn inverse_on_range() {
        let cov = ColoredCovariance::<f64>::band_pass(8, 8, 1, 5, 100.0).unwrap();
        let v = sample_colored(&cov, 11);
        let back = apply_inverse_covariance(&cov, &apply_covariance(&cov, &v).unwrap()).unwrap();
        let err: f64 = v.iter().zip(&back).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let nv: f64 = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        assert!(err <= 1e-8 * nv);
    }

    #[test]
    fn covariance_length_mismatch() {
        let cov = ColoredCovariance::<f64>::identity(4, 4);
        assert!(matches!(apply_covariance(&cov, &[0.0; 5]), Err(Error::Dimension(_))));
    }
}
