//! Unrolled variable-splitting solver for regularized inpainting.
//!
//! Each iteration alternates a data-fidelity update
//! `x = argmin ‖y_{J^c} − P_{J^c} x‖² + μ‖x − z‖²` with a regularizer step
//! `z = R(x)`. The sequence starts from `z⁰ = fill(y)` and ends with one more
//! data-fidelity step, so the output on `J` is exactly the last regularizer
//! output there.

use nalgebra::{DMatrix, DVector};

use crate::cg::cg_solve;
use crate::error::{Error, Result};
use crate::image::Image;
use crate::mask::{fill_masked, FillStrategy, MaskPartition};
use crate::noise::{apply_inverse_covariance, ColoredCovariance};
use crate::regularizer::Regularizer;
use crate::scalar::{dot, Scalar};

/// Largest image (in pixels) accepted by the dense masked colored update.
pub const DENSE_COLORED_MAX_PIXELS: usize = 32 * 32;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DfVariant {
    /// Closed-form update observing only `J^c`.
    MaskedQuadratic,
    /// Closed-form update observing every pixel (`J = ∅`).
    FullImage,
    /// Whitened update for colored Gaussian noise, solved by CG.
    ColoredCg,
}

impl DfVariant {
    pub fn name(&self) -> &'static str {
        match self {
            DfVariant::MaskedQuadratic => "masked_quadratic",
            DfVariant::FullImage => "full_image",
            DfVariant::ColoredCg => "colored_cg",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "masked_quadratic" => Ok(DfVariant::MaskedQuadratic),
            "full_image" => Ok(DfVariant::FullImage),
            "colored_cg" => Ok(DfVariant::ColoredCg),
            other => Err(Error::Config(format!("unknown data-fidelity variant '{other}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct UnrollConfig {
    pub iterations: usize,
    pub df_variant: DfVariant,
    pub fill: FillStrategy,
    pub cg_tol: f64,
    pub cg_max_iter: usize,
    /// Seed for randomized fill strategies.
    pub fill_seed: u64,
}

impl Default for UnrollConfig {
    fn default() -> Self {
        Self {
            iterations: 10,
            df_variant: DfVariant::MaskedQuadratic,
            fill: FillStrategy::default(),
            cg_tol: 1e-6,
            cg_max_iter: 200,
            fill_seed: 0,
        }
    }
}

impl UnrollConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::Config("unroll iterations must be at least 1".into()));
        }
        if !(self.cg_tol > 0.0) {
            return Err(Error::Config(format!("cg_tol must be positive, got {}", self.cg_tol)));
        }
        self.fill.validate()
    }
}

fn check_pair<T: Scalar>(y: &Image<T>, z: &Image<T>) -> Result<()> {
    y.check_shape(z)
}

/// Closed-form minimizer of `‖y_{J^c} − P_{J^c} x‖² + μ‖x − z‖²`:
/// `x_j = z_j` on `J`, `(y_j + μ z_j)/(1 + μ)` on `J^c`.
pub fn df_update<T: Scalar>(y: &Image<T>, z: &Image<T>, partition: &MaskPartition, mu: T) -> Result<Image<T>> {
    check_pair(y, z)?;
    partition.check_image(y)?;
    let c = y.channels();
    let inv = T::one() / (T::one() + mu);
    let data = y
        .data()
        .iter()
        .zip(z.data())
        .enumerate()
        .map(|(i, (&yv, &zv))| if partition.is_masked(i / c) { zv } else { blend(yv, zv, mu, inv) })
        .collect();
    z.with_data(data)
}

/// `x = (y + μ z)/(1 + μ)` everywhere.
pub fn df_update_full<T: Scalar>(y: &Image<T>, z: &Image<T>, mu: T) -> Result<Image<T>> {
    check_pair(y, z)?;
    let inv = T::one() / (T::one() + mu);
    z.with_data(y.data().iter().zip(z.data()).map(|(&a, &b)| blend(a, b, mu, inv)).collect())
}

/// `(y + μ z) inv`, kept inside `[min(y, z), max(y, z)]` despite rounding.
fn blend<T: Scalar>(y: T, z: T, mu: T, inv: T) -> T {
    ((y + mu * z) * inv).max(y.min(z)).min(y.max(z))
}

fn check_cov<T: Scalar>(y: &Image<T>, cov: &ColoredCovariance<T>) -> Result<()> {
    if cov.height() != y.height() || cov.width() != y.width() {
        return Err(Error::Dimension(format!(
            "covariance {}x{} vs image {}x{}",
            cov.height(),
            cov.width(),
            y.height(),
            y.width()
        )));
    }
    Ok(())
}

/// Solves `(K⁻¹ + μ I) x = K⁻¹ y + μ z` per channel by CG: the minimizer of
/// `‖K^{-1/2}(y − x)‖² + μ‖x − z‖²`.
pub fn df_update_colored<T: Scalar>(
    y: &Image<T>,
    z: &Image<T>,
    cov: &ColoredCovariance<T>,
    mu: T,
    tol: T,
    max_iter: usize,
) -> Result<Image<T>> {
    check_pair(y, z)?;
    check_cov(y, cov)?;
    let mut out = z.clone();
    for ch in 0..y.channels() {
        let (yp, zp) = (y.plane(ch), z.plane(ch));
        let kiy = apply_inverse_covariance(cov, &yp)?;
        let b: Vec<T> = kiy.iter().zip(&zp).map(|(&a, &zv)| a + mu * zv).collect();
        let sol = solve_colored_normal(cov, mu, &b, Some(&zp), tol, max_iter)?;
        out.set_plane(ch, &sol);
    }
    Ok(out)
}

fn solve_colored_normal<T: Scalar>(
    cov: &ColoredCovariance<T>,
    mu: T,
    b: &[T],
    x0: Option<&[T]>,
    tol: T,
    max_iter: usize,
) -> Result<Vec<T>> {
    let op = |v: &[T]| -> Result<Vec<T>> {
        let kv = apply_inverse_covariance(cov, v)?;
        Ok(kv.iter().zip(v).map(|(&a, &vi)| a + mu * vi).collect())
    };
    let out = cg_solve(op, b, x0, tol, max_iter)?;
    Ok(out.x)
}

/// Dense `K` with the whitening floor applied, as used by the masked update.
fn floored_covariance_matrix<T: Scalar>(cov: &ColoredCovariance<T>) -> DMatrix<f64> {
    let n = cov.height() * cov.width();
    let plan = cov.plan();
    let mut k = DMatrix::zeros(n, n);
    let mut e = vec![T::zero(); n];
    for j in 0..n {
        e[j] = T::one();
        let mut c = plan.forward(&e);
        c.iter_mut().enumerate().for_each(|(i, v)| *v /= cov.inverse_gain(i));
        for (i, v) in plan.inverse(&c).into_iter().enumerate() {
            k[(i, j)] = v.as_f64();
        }
        e[j] = T::zero();
    }
    k
}

/// System matrix `Pᵀ K_{J^c}⁻¹ P + μ I` and the weighting `Pᵀ K_{J^c}⁻¹ P`.
fn dense_masked_system<T: Scalar>(
    partition: &MaskPartition,
    cov: &ColoredCovariance<T>,
    mu: f64,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let n = cov.height() * cov.width();
    if n > DENSE_COLORED_MAX_PIXELS {
        return Err(Error::Config(format!(
            "masked colored data fidelity is limited to {DENSE_COLORED_MAX_PIXELS} pixels, got {n}"
        )));
    }
    let k = floored_covariance_matrix(cov);
    let obs = partition.complement();
    let m = obs.len();
    let sub = DMatrix::from_fn(m, m, |a, b| k[(obs[a], obs[b])]);
    let inv = sub.cholesky().ok_or_else(|| Error::Numeric("K restricted to J^c is not SPD".into()))?.inverse();
    let mut w = DMatrix::zeros(n, n);
    for a in 0..m {
        for b in 0..m {
            w[(obs[a], obs[b])] = inv[(a, b)];
        }
    }
    let sys = &w + DMatrix::identity(n, n) * mu;
    Ok((sys, w))
}

/// Masked colored update `argmin ‖K_{J^c}^{-1/2}(y_{J^c} − P_{J^c} x)‖² + μ‖x − z‖²`,
/// solved densely; only for images up to [`DENSE_COLORED_MAX_PIXELS`] pixels.
pub fn df_update_colored_masked<T: Scalar>(
    y: &Image<T>,
    z: &Image<T>,
    partition: &MaskPartition,
    cov: &ColoredCovariance<T>,
    mu: T,
) -> Result<Image<T>> {
    check_pair(y, z)?;
    check_cov(y, cov)?;
    partition.check_image(y)?;
    let (sys, w) = dense_masked_system(partition, cov, mu.as_f64())?;
    let chol = sys.cholesky().ok_or_else(|| Error::Numeric("masked colored system is not SPD".into()))?;
    let mut out = z.clone();
    for ch in 0..y.channels() {
        let yv = DVector::from_iterator(y.pixels(), y.plane(ch).iter().map(|v| v.as_f64()));
        let zv = DVector::from_iterator(z.pixels(), z.plane(ch).iter().map(|v| v.as_f64()));
        let rhs = &w * yv + zv * mu.as_f64();
        let x = chol.solve(&rhs);
        out.set_plane(ch, &x.iter().map(|&v| T::of(v)).collect::<Vec<_>>());
    }
    Ok(out)
}

/// A data-fidelity unit together with its adjoint.
pub trait DataFidelity<T: Scalar> {
    fn update(&self, y: &Image<T>, z: &Image<T>, mu: T) -> Result<Image<T>>;

    /// Given `g = ∂L/∂x` at `x = update(y, z, mu)`, returns `(∂L/∂z, ∂L/∂μ)`.
    fn backward(&self, y: &Image<T>, z: &Image<T>, x: &Image<T>, mu: T, g: &Image<T>) -> Result<(Image<T>, T)>;
}

/// Quadratic data fidelity, observing `J^c` (or every pixel when `partition` is `None`).
pub struct QuadraticDf<'a> {
    pub partition: Option<&'a MaskPartition>,
}

impl<T: Scalar> DataFidelity<T> for QuadraticDf<'_> {
    fn update(&self, y: &Image<T>, z: &Image<T>, mu: T) -> Result<Image<T>> {
        match self.partition {
            Some(p) => df_update(y, z, p, mu),
            None => df_update_full(y, z, mu),
        }
    }

    fn backward(&self, y: &Image<T>, z: &Image<T>, _x: &Image<T>, mu: T, g: &Image<T>) -> Result<(Image<T>, T)> {
        let c = y.channels();
        let opu = T::one() + mu;
        let w = mu / opu;
        let mut dmu = T::zero();
        let mut gz = g.clone();
        for (i, v) in gz.data_mut().iter_mut().enumerate() {
            if self.partition.is_some_and(|p| p.is_masked(i / c)) {
                continue;
            }
            dmu += *v * (z.data()[i] - y.data()[i]) / (opu * opu);
            *v *= w;
        }
        Ok((gz, dmu))
    }
}

/// Colored Gaussian data fidelity. With an empty (or absent) partition the
/// update is solved by CG; otherwise the dense masked solver is used.
pub struct ColoredDf<'a, T> {
    pub covariance: &'a ColoredCovariance<T>,
    pub partition: Option<&'a MaskPartition>,
    pub tol: T,
    pub max_iter: usize,
}

impl<T: Scalar> ColoredDf<'_, T> {
    fn masked(&self) -> Option<&MaskPartition> {
        self.partition.filter(|p| !p.masked().is_empty())
    }
}

impl<T: Scalar> DataFidelity<T> for ColoredDf<'_, T> {
    fn update(&self, y: &Image<T>, z: &Image<T>, mu: T) -> Result<Image<T>> {
        match self.masked() {
            Some(p) => df_update_colored_masked(y, z, p, self.covariance, mu),
            None => df_update_colored(y, z, self.covariance, mu, self.tol, self.max_iter),
        }
    }

    /// With `A` the (symmetric) system matrix: `∂L/∂z = μ A⁻¹ g` and `∂L/∂μ = ⟨A⁻¹ g, z − x⟩`.
    fn backward(&self, _y: &Image<T>, z: &Image<T>, x: &Image<T>, mu: T, g: &Image<T>) -> Result<(Image<T>, T)> {
        let mut gz = g.clone();
        let mut dmu = T::zero();
        let dense = match self.masked() {
            Some(p) => Some(
                dense_masked_system(p, self.covariance, mu.as_f64())?
                    .0
                    .cholesky()
                    .ok_or_else(|| Error::Numeric("masked colored system is not SPD".into()))?,
            ),
            None => None,
        };
        for ch in 0..g.channels() {
            let gp = g.plane(ch);
            let w: Vec<T> = match &dense {
                Some(chol) => {
                    let v = DVector::from_iterator(gp.len(), gp.iter().map(|v| v.as_f64()));
                    chol.solve(&v).iter().map(|&v| T::of(v)).collect()
                }
                None => {
                    // tighter tolerance so the adjoint is accurate to the forward solve's precision
                    solve_colored_normal(self.covariance, mu, &gp, None, self.tol * T::of(1e-3), self.max_iter)?
                }
            };
            let diff: Vec<T> = z.plane(ch).iter().zip(x.plane(ch)).map(|(&a, b)| a - b).collect();
            dmu += dot(&w, &diff);
            gz.set_plane(ch, &w.iter().map(|&v| v * mu).collect::<Vec<_>>());
        }
        Ok((gz, dmu))
    }
}

/// Intermediate states of one unrolled pass.
#[derive(Clone, Debug)]
pub struct UnrollTrace<T, Tape> {
    pub z_init: Image<T>,
    /// `x^{(k)}` for `k = 1..=iterations`.
    pub x: Vec<Image<T>>,
    /// `z^{(k)} = R(x^{(k)})`.
    pub z: Vec<Image<T>>,
    pub tapes: Vec<Tape>,
    pub output: Image<T>,
    pub mu: T,
}

/// Selects the data-fidelity unit named by `config.df_variant`.
pub fn data_fidelity<'a, T: Scalar>(
    config: &UnrollConfig,
    partition: &'a MaskPartition,
    covariance: Option<&'a ColoredCovariance<T>>,
) -> Result<Box<dyn DataFidelity<T> + 'a>> {
    Ok(match config.df_variant {
        DfVariant::MaskedQuadratic => Box::new(QuadraticDf { partition: Some(partition) }),
        DfVariant::FullImage => Box::new(QuadraticDf { partition: None }),
        DfVariant::ColoredCg => Box::new(ColoredDf {
            covariance: covariance
                .ok_or_else(|| Error::Config("colored_cg data fidelity needs a noise covariance".into()))?,
            partition: Some(partition),
            tol: T::of(config.cg_tol),
            max_iter: config.cg_max_iter,
        }),
    })
}

fn run<T: Scalar, R: Regularizer<T>>(
    y: &Image<T>,
    partition: &MaskPartition,
    mu: T,
    config: &UnrollConfig,
    regularizer: &R,
    covariance: Option<&ColoredCovariance<T>>,
    keep: bool,
) -> Result<UnrollTrace<T, R::Tape>> {
    config.validate()?;
    partition.check_image(y)?;
    let df = data_fidelity(config, partition, covariance)?;
    let z_init = fill_masked(y, partition, config.fill, config.fill_seed)?;
    let mut trace = UnrollTrace {
        z_init: z_init.clone(),
        x: Vec::new(),
        z: Vec::new(),
        tapes: Vec::new(),
        output: z_init.clone(),
        mu,
    };
    let mut z = z_init;
    for _ in 0..config.iterations {
        let x = df.update(y, &z, mu)?;
        let (znew, tape) = regularizer.forward(&x)?;
        if znew.data().iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("regularizer produced non-finite values".into()));
        }
        if keep {
            trace.x.push(x);
            trace.z.push(znew.clone());
            trace.tapes.push(tape);
        }
        z = znew;
    }
    trace.output = df.update(y, &z, mu)?;
    Ok(trace)
}

/// Runs the unrolled network and records everything needed by [`unroll_backward`].
pub fn unroll_forward<T: Scalar, R: Regularizer<T>>(
    y: &Image<T>,
    partition: &MaskPartition,
    mu: T,
    config: &UnrollConfig,
    regularizer: &R,
    covariance: Option<&ColoredCovariance<T>>,
) -> Result<UnrollTrace<T, R::Tape>> {
    run(y, partition, mu, config, regularizer, covariance, true)
}

/// Inference-only pass that keeps no intermediate state.
pub fn unroll_apply<T: Scalar, R: Regularizer<T>>(
    y: &Image<T>,
    partition: &MaskPartition,
    mu: T,
    config: &UnrollConfig,
    regularizer: &R,
    covariance: Option<&ColoredCovariance<T>>,
) -> Result<Image<T>> {
    run(y, partition, mu, config, regularizer, covariance, false).map(|t| t.output)
}

/// Reverse pass through a recorded unroll. Returns the regularizer parameter
/// gradients (summed over iterations, since the weights are shared) and `∂L/∂μ`.
pub fn unroll_backward<T: Scalar, R: Regularizer<T>>(
    trace: &UnrollTrace<T, R::Tape>,
    y: &Image<T>,
    partition: &MaskPartition,
    config: &UnrollConfig,
    regularizer: &R,
    covariance: Option<&ColoredCovariance<T>>,
    grad_output: &Image<T>,
) -> Result<(R::Grad, T)> {
    let k = config.iterations;
    if trace.x.len() != k || trace.z.len() != k || trace.tapes.len() != k {
        return Err(Error::Config("unroll trace is missing or does not match the configuration".into()));
    }
    grad_output.check_shape(&trace.output)?;
    let df = data_fidelity(config, partition, covariance)?;
    let mu = trace.mu;
    let mut grad = regularizer.zero_grad();
    let (mut gz, mut gmu) = df.backward(y, &trace.z[k - 1], &trace.output, mu, grad_output)?;
    for it in (0..k).rev() {
        let gx = regularizer.backward(&trace.tapes[it], &gz, &mut grad)?;
        let z_prev = if it == 0 { &trace.z_init } else { &trace.z[it - 1] };
        let (g, dm) = df.backward(y, z_prev, &trace.x[it], mu, &gx)?;
        gz = g;
        gmu += dm;
    }
    Ok((grad, gmu))
}
