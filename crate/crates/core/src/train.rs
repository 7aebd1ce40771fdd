//! Training loops for supervised (N2T), paired-noisy (N2N), blind-spot (N2S)
//! and unrolled-inpainting (N2I) modes.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::time::Instant;

use rand::seq::SliceRandom;

use crate::adam::{adam_step, AdamState};
use crate::error::{Error, Result};
use crate::image::{psnr, Dataset, Image};
use crate::loss::{full_loss, masked_loss};
use crate::mask::{fill_masked, sample_mask, MaskMode, MaskPartition};
use crate::model::Model;
use crate::nn::unet::{UNet, UNetConfig, UNetGrads};
use crate::noise::{corrupt, NoiseSpec};
use crate::regularizer::{Regularizer, MU_INIT};
use crate::rng::{derive_seed, derived_rng};
use crate::scalar::Scalar;
use crate::unroll::{unroll_backward, unroll_forward, DfVariant, UnrollConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TrainMode {
    N2t,
    N2n,
    N2s,
    N2i,
}

impl TrainMode {
    pub fn name(&self) -> &'static str {
        match self {
            TrainMode::N2t => "n2t",
            TrainMode::N2n => "n2n",
            TrainMode::N2s => "n2s",
            TrainMode::N2i => "n2i",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "n2t" => Ok(TrainMode::N2t),
            "n2n" => Ok(TrainMode::N2n),
            "n2s" => Ok(TrainMode::N2s),
            "n2i" => Ok(TrainMode::N2i),
            other => Err(Error::Config(format!("unknown training mode '{other}'"))),
        }
    }

    fn masked(&self) -> bool {
        matches!(self, TrainMode::N2s | TrainMode::N2i)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub mode: TrainMode,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub mask_density: f64,
    pub mask_mode: MaskMode,
    /// Synthesized corruption. `None` means the dataset already holds noisy
    /// observations and no clean references exist.
    pub noise: Option<NoiseSpec>,
    /// Second corruption for N2N; defaults to `noise` on an independent stream.
    pub noise_pair: Option<NoiseSpec>,
    pub seed: u64,
    /// Write a checkpoint every this many epochs (0 disables).
    pub checkpoint_every: usize,
    pub checkpoint_dir: Option<PathBuf>,
    pub unet: UNetConfig,
    pub unroll: UnrollConfig,
    pub mu_init: f64,
    pub augment: bool,
    /// Number of dataset items used for validation PSNR.
    pub validation_count: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            mode: TrainMode::N2i,
            epochs: 100,
            batch_size: 8,
            learning_rate: 1e-5,
            mask_density: 1.0 / 25.0,
            mask_mode: MaskMode::Stratified,
            noise: None,
            noise_pair: None,
            seed: 0,
            checkpoint_every: 0,
            checkpoint_dir: None,
            unet: UNetConfig::default(),
            unroll: UnrollConfig::default(),
            mu_init: MU_INIT,
            augment: true,
            validation_count: 8,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!("learning rate {} must be non-negative", self.learning_rate)));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be at least 1".into()));
        }
        if self.mode.masked() && !(self.mask_density > 0.0 && self.mask_density < 1.0) {
            return Err(Error::Config(format!("mask density {} outside (0, 1)", self.mask_density)));
        }
        if matches!(self.mode, TrainMode::N2t | TrainMode::N2n) && self.noise.is_none() {
            return Err(Error::Config(format!(
                "mode {} needs clean references (configure noise synthesis)",
                self.mode.name()
            )));
        }
        if !(self.mu_init > 0.0) {
            return Err(Error::Config(format!("mu_init {} must be positive", self.mu_init)));
        }
        if let Some(n) = &self.noise {
            n.kind.validate()?;
        }
        self.unet.validate()?;
        self.unroll.validate()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean per-image loss over the epoch.
    pub loss: f64,
    pub psnr: Option<f64>,
    pub mu: Option<f64>,
    pub seconds: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainLog {
    pub records: Vec<EpochRecord>,
}

fn opt(v: Option<f64>, prec: usize) -> String {
    v.map_or_else(|| "nan".to_string(), |x| format!("{x:.prec$}"))
}

impl TrainLog {
    pub const HEADER: &'static str = "# epoch loss psnr mu seconds";

    /// Whitespace-separated table, one row per epoch; absent values are `nan`.
    pub fn to_text(&self) -> String {
        let mut s = format!("{}\n", Self::HEADER);
        for r in &self.records {
            let _ = writeln!(s, "{} {:.12e} {} {} {:.3}", r.epoch, r.loss, opt(r.psnr, 6), opt(r.mu, 9), r.seconds);
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let bad = |l: &str| Error::Format(format!("bad log line '{l}'"));
        let mut records = Vec::new();
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 5 {
                return Err(bad(line));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|_| bad(line));
            let maybe = |s: &str| num(s).map(|v| if v.is_nan() { None } else { Some(v) });
            records.push(EpochRecord {
                epoch: f[0].parse().map_err(|_| bad(line))?,
                loss: num(f[1])?,
                psnr: maybe(f[2])?,
                mu: maybe(f[3])?,
                seconds: num(f[4])?,
            });
        }
        Ok(Self { records })
    }
}

/// One prepared training example in normalized intensities.
struct Sample<T> {
    input: Image<T>,
    target: Image<T>,
    partition: Option<MaskPartition>,
    fill_seed: u64,
}

struct Trainer<'a, T: Scalar> {
    config: &'a TrainConfig,
    net: UNet<T>,
    mu_log: Option<T>,
}

impl<T: Scalar> Trainer<'_, T> {
    fn prepare(&self, item: &Image<T>, epoch: usize, index: usize) -> Result<Sample<T>> {
        let c = self.config;
        let ids = [epoch as u64, index as u64];
        let (noisy, clean) = match &c.noise {
            Some(spec) => (corrupt(item, &spec.with_seed(derive_seed(c.seed, "noise", &ids)))?, Some(item)),
            None => (item.clone(), None),
        };
        let y = noisy.normalized();
        let fill_seed = derive_seed(c.seed, "fill", &ids);
        Ok(match c.mode {
            TrainMode::N2t => {
                Sample { input: y, target: clean.expect("validated").normalized(), partition: None, fill_seed }
            }
            TrainMode::N2n => {
                let pair = c.noise_pair.as_ref().or(c.noise.as_ref()).expect("validated");
                let second = corrupt(item, &pair.with_seed(derive_seed(c.seed, "noise_pair", &ids)))?;
                Sample { input: y, target: second.normalized(), partition: None, fill_seed }
            }
            TrainMode::N2s | TrainMode::N2i => {
                let part =
                    sample_mask(y.height(), y.width(), c.mask_density, c.mask_mode, derive_seed(c.seed, "mask", &ids))?;
                let input = if c.mode == TrainMode::N2s {
                    fill_masked(&y, &part, c.unroll.fill, fill_seed)?
                } else {
                    y.clone()
                };
                Sample { input, target: y, partition: Some(part), fill_seed }
            }
        })
    }

    /// Loss and gradients for one sample.
    fn gradient(&self, s: &Sample<T>) -> Result<(T, UNetGrads<T>, T)> {
        let mut grads = self.net.zero_grads();
        match self.config.mode {
            TrainMode::N2i => {
                let part = s.partition.as_ref().expect("masked mode");
                let unroll = UnrollConfig {
                    df_variant: DfVariant::MaskedQuadratic,
                    fill_seed: s.fill_seed,
                    ..self.config.unroll.clone()
                };
                let mu = self.mu_log.expect("n2i has mu").exp();
                let trace = unroll_forward(&s.input, part, mu, &unroll, &self.net, None)?;
                let (loss, g) = masked_loss(&trace.output, &s.target, part)?;
                let (gn, gmu) = unroll_backward(&trace, &s.input, part, &unroll, &self.net, None, &g)?;
                // d/d(mu_log) = mu d/d(mu)
                Ok((loss, gn, gmu * mu))
            }
            mode => {
                let (out, tape) = Regularizer::forward(&self.net, &s.input)?;
                let (loss, g) = match (&s.partition, mode) {
                    (Some(p), TrainMode::N2s) => masked_loss(&out, &s.target, p)?,
                    _ => full_loss(&out, &s.target)?,
                };
                Regularizer::backward(&self.net, &tape, &g, &mut grads)?;
                Ok((loss, grads, T::zero()))
            }
        }
    }

    fn model(&self) -> Model<T> {
        match self.mu_log {
            Some(m) => Model::unrolled(self.net.clone(), m, self.config.unroll.iterations),
            None => Model::plain(self.net.clone()),
        }
    }
}

/// Mean PSNR of `model` on fixed corruptions of the first `count` clean images.
pub fn validation_psnr<T: Scalar>(model: &Model<T>, clean: &[Image<T>], noise: &NoiseSpec, seed: u64) -> Result<f64> {
    let mut total = 0.0;
    for (i, img) in clean.iter().enumerate() {
        let noisy = corrupt(img, &noise.with_seed(derive_seed(seed, "validation", &[i as u64])))?;
        total += psnr(img, &model.denoise(&noisy, None, (1e-6, 200))?)?;
    }
    Ok(total / clean.len().max(1) as f64)
}

/// Untrained model for `config`, as produced at epoch 0 of [`train`].
pub fn initial_model<T: Scalar>(config: &TrainConfig, channels: usize) -> Result<Model<T>> {
    let unet = UNetConfig { in_channels: channels, out_channels: channels, ..config.unet };
    let net = UNet::new(unet, derive_seed(config.seed, "init", &[]))?;
    Ok(match config.mode {
        TrainMode::N2i => Model::unrolled(net, T::of(config.mu_init.ln()), config.unroll.iterations),
        _ => Model::plain(net),
    })
}

/// Trains a model on `dataset`. With `config.noise` set, dataset items are
/// clean images corrupted afresh every epoch; otherwise they are used as the
/// noisy observations directly.
pub fn train<T: Scalar>(dataset: &Dataset<T>, config: &TrainConfig) -> Result<(Model<T>, TrainLog)> {
    config.validate()?;
    if dataset.is_empty() {
        return Err(Error::Config("training dataset is empty".into()));
    }
    let channels = dataset.items[0].channels();
    let init = initial_model::<T>(config, channels)?;
    let mut trainer = Trainer { config, net: init.net, mu_log: init.unrolled.map(|u| u.mu_log) };
    let patches = dataset.training_patches(config.augment)?;
    let mut state = AdamState::<T>::new(trainer.net.params().iter().map(Vec::len).chain(trainer.mu_log.map(|_| 1)));
    let validation: Vec<Image<T>> = dataset.items.iter().take(config.validation_count).cloned().collect();
    let lr = T::of(config.learning_rate);
    let mut log = TrainLog::default();
    let mut order: Vec<usize> = (0..patches.len()).collect();
    for epoch in 1..=config.epochs {
        let start = Instant::now();
        order.sort_unstable();
        order.shuffle(&mut derived_rng(config.seed, "shuffle", &[epoch as u64]));
        let mut epoch_loss = 0.0;
        for batch in order.chunks(config.batch_size) {
            let mut acc = trainer.net.zero_grads();
            let mut acc_mu = T::zero();
            for &i in batch {
                let sample = trainer.prepare(&patches[i], epoch, i)?;
                let (loss, g, gmu) = trainer.gradient(&sample)?;
                if !loss.is_finite() {
                    return Err(Error::Numeric(format!("non-finite loss at epoch {epoch}, sample {i}")));
                }
                epoch_loss += loss.as_f64();
                acc.iter_mut().zip(&g).for_each(|(a, b)| a.iter_mut().zip(b).for_each(|(x, &y)| *x += y));
                acc_mu += gmu;
            }
            let scale = T::one() / T::of(batch.len() as f64);
            acc.iter_mut().flatten().for_each(|v| *v *= scale);
            let mu_grad = [acc_mu * scale];
            let mut grads: Vec<&[T]> = acc.iter().map(Vec::as_slice).collect();
            if trainer.mu_log.is_some() {
                grads.push(&mu_grad);
            }
            let Trainer { net, mu_log, .. } = &mut trainer;
            let mut mu_slot = mu_log.map(|m| [m]);
            let mut params: Vec<&mut [T]> = net.params_mut().iter_mut().map(Vec::as_mut_slice).collect();
            if let Some(slot) = mu_slot.as_mut() {
                params.push(slot);
            }
            adam_step(&mut params, &grads, &mut state, lr)?;
            if let Some([m]) = mu_slot {
                *mu_log = Some(m);
            }
        }
        let model = trainer.model();
        let psnr = match &config.noise {
            Some(spec) if !validation.is_empty() => Some(validation_psnr(&model, &validation, spec, config.seed)?),
            _ => None,
        };
        log.records.push(EpochRecord {
            epoch,
            loss: epoch_loss / patches.len() as f64,
            psnr,
            mu: model.mu().map(Scalar::as_f64),
            seconds: start.elapsed().as_secs_f64(),
        });
        if config.checkpoint_every > 0 && epoch % config.checkpoint_every == 0 {
            if let Some(dir) = &config.checkpoint_dir {
                model.to_checkpoint().save(&dir.join(format!("epoch_{epoch:05}.ckpt")))?;
            }
        }
    }
    Ok((trainer.model(), log))
}
