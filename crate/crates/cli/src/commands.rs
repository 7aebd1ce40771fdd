//! Implementations of the `synth`, `train`, `denoise`, `eval` and `compare`
//! commands. Every command is a pure function of its [`RunConfig`].

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use n2i_core::image::{psnr, Image};
use n2i_core::io::{list_images, load_dataset, load_image, save_image, write_atomic};
use n2i_core::model::Model;
use n2i_core::nn::checkpoint::Checkpoint;
use n2i_core::noise::{corrupt, corrupt_traced, ColoredCovariance, NoiseKind};
use n2i_core::rng::derive_seed;
use n2i_core::synthetic::synthetic_image;
use n2i_core::train::train;
use n2i_core::{Error, Result};

use crate::config::{Command, RunConfig};

/// Scalar type used by the command-line tools.
pub type Real = f32;

pub const MANIFEST: &str = "manifest.txt";
pub const MODEL_FILE: &str = "model.ckpt";
pub const LOG_FILE: &str = "train_log.txt";
pub const EVAL_FILE: &str = "eval.txt";
pub const COMPARE_FILE: &str = "compare.txt";
pub const DENOISED_SUFFIX: &str = "_denoised";

pub fn run(config: &RunConfig) -> Result<()> {
    match config.command {
        Some(Command::Synth) => cmd_synth(config),
        Some(Command::Train) => cmd_train(config).map(|_| ()),
        Some(Command::Denoise) => cmd_denoise(config).map(|_| ()),
        Some(Command::Eval) => cmd_eval(config).map(|_| ()),
        Some(Command::Compare) => cmd_compare(config).map(|_| ()),
        None => Err(Error::Config("no command given".into())),
    }
}

fn required<'a>(p: &'a Option<PathBuf>, key: &str) -> Result<&'a Path> {
    p.as_deref().ok_or_else(|| Error::Config(format!("missing {key}")))
}

fn output_dir(config: &RunConfig) -> Result<&Path> {
    let out = required(&config.paths.output, "paths.output (--out)")?;
    fs::create_dir_all(out)?;
    Ok(out)
}

fn file_name(p: &Path) -> String {
    p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default()
}

fn fmt_f64(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |v| format!("{v:.6}"))
}

/// Clean images named by their file names: from `paths.input`, or generated
/// procedurally when `synth.count > 0` and no input folder is given.
fn synth_sources(config: &RunConfig) -> Result<Vec<(String, Image<Real>)>> {
    match &config.paths.input {
        Some(dir) => list_images(dir)?.iter().map(|p| Ok((file_name(p), load_image(p)?))).collect(),
        None if config.synth.count > 0 => {
            let s = &config.synth;
            let width = s.count.to_string().len().max(3);
            Ok((0..s.count)
                .map(|i| {
                    let img = synthetic_image(s.height, s.width, s.channels, 255.0, config.seed, i);
                    (format!("img_{i:0width$}.{}", s.format), img)
                })
                .collect())
        }
        None => Err(Error::Config("synth needs paths.input or synth.count > 0".into())),
    }
}

/// Writes `noisy/` (and `clean/`) copies plus a manifest of per-image seeds
/// and drawn noise levels.
pub fn cmd_synth(config: &RunConfig) -> Result<()> {
    let kind = config.noise.clone().ok_or_else(|| Error::Config("synth needs noise.kind".into()))?;
    let out = output_dir(config)?;
    let sources = synth_sources(config)?;
    let noisy_dir = out.join("noisy");
    fs::create_dir_all(&noisy_dir)?;
    if config.synth.write_clean {
        fs::create_dir_all(out.join("clean"))?;
    }
    let mut manifest = String::from("# filename seed sigma\n");
    for (i, (name, img)) in sources.iter().enumerate() {
        let seed = derive_seed(config.seed, "synth", &[i as u64]);
        let c = corrupt_traced(img, &n2i_core::noise::NoiseSpec::new(kind.clone(), seed))?;
        let sigma = c.drawn_sigma.or(match kind {
            NoiseKind::Gaussian { sigma } => Some(sigma),
            _ => None,
        });
        save_image(&c.image, &noisy_dir.join(name))?;
        if config.synth.write_clean {
            save_image(img, &out.join("clean").join(name))?;
        }
        let _ = writeln!(manifest, "{name} {seed} {}", fmt_f64(sigma));
    }
    write_atomic(&out.join(MANIFEST), manifest.as_bytes())
}

/// Trains on `paths.input` and writes the final checkpoint and the log.
/// With noise configured the folder holds clean images; otherwise noisy ones.
pub fn cmd_train(config: &RunConfig) -> Result<Model<Real>> {
    let input = required(&config.paths.input, "paths.input")?;
    let out = output_dir(config)?;
    let patch = (config.patch_size > 0).then_some(config.patch_size);
    let dataset = load_dataset::<Real>(input, patch)?;
    let tc = config.train_config();
    if let Some(dir) = tc.checkpoint_dir.as_ref().filter(|_| tc.checkpoint_every > 0) {
        fs::create_dir_all(dir)?;
    }
    let (model, log) = train(&dataset, &tc)?;
    model.to_checkpoint().save(&out.join(MODEL_FILE))?;
    write_atomic(&out.join(LOG_FILE), log.to_text().as_bytes())?;
    Ok(model)
}

fn load_model(path: &Path) -> Result<Model<Real>> {
    Model::from_checkpoint(&Checkpoint::load(path)?)
}

/// Covariance to use at inference for an image, when the configured noise is colored.
fn inference_covariance(config: &RunConfig, img: &Image<Real>) -> Result<Option<ColoredCovariance<Real>>> {
    match config.noise {
        Some(NoiseKind::Colored { band_lo, band_hi, energy }) => {
            ColoredCovariance::band_pass(img.height(), img.width(), band_lo, band_hi, energy).map(Some)
        }
        _ => Ok(None),
    }
}

fn denoise_one(config: &RunConfig, model: &Model<Real>, noisy: &Image<Real>) -> Result<Image<Real>> {
    let cov = inference_covariance(config, noisy)?;
    let u = config.unroll();
    model.denoise(noisy, cov.as_ref(), (u.cg_tol, u.cg_max_iter))
}

fn denoised_name(name: &str) -> String {
    match name.rsplit_once('.') {
        Some((stem, ext)) => format!("{stem}{DENOISED_SUFFIX}.{ext}"),
        None => format!("{name}{DENOISED_SUFFIX}"),
    }
}

/// Denoises every image of `paths.input` with `paths.checkpoint`; returns the
/// written paths.
pub fn cmd_denoise(config: &RunConfig) -> Result<Vec<PathBuf>> {
    let input = required(&config.paths.input, "paths.input")?;
    let model = load_model(required(&config.paths.checkpoint, "paths.checkpoint")?)?;
    let out = output_dir(config)?;
    let mut written = Vec::new();
    for path in list_images(input)? {
        let noisy = load_image::<Real>(&path)?;
        let target = out.join(denoised_name(&file_name(&path)));
        save_image(&denoise_one(config, &model, &noisy)?, &target)?;
        written.push(target);
    }
    Ok(written)
}

/// Per-image PSNR table with a trailing `average` row.
#[derive(Clone, Debug, PartialEq)]
pub struct PsnrTable {
    pub columns: Vec<String>,
    pub rows: Vec<(String, Vec<f64>)>,
}

impl PsnrTable {
    pub fn averages(&self) -> Vec<f64> {
        let n = self.rows.len().max(1) as f64;
        (0..self.columns.len()).map(|c| self.rows.iter().map(|r| r.1[c]).sum::<f64>() / n).collect()
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("# image {}\n", self.columns.join(" "));
        let line = |s: &mut String, name: &str, vals: &[f64]| {
            let vals: Vec<String> = vals.iter().map(|v| format!("{v:.6}")).collect();
            let _ = writeln!(s, "{name} {}", vals.join(" "));
        };
        for (name, vals) in &self.rows {
            line(&mut s, name, vals);
        }
        line(&mut s, "average", &self.averages());
        s
    }
}

/// Matches `clean/x.png` with `x.png` or `x_denoised.png` in the test folder.
fn pair_files(clean: &Path, test: &Path) -> Result<Vec<(PathBuf, PathBuf)>> {
    let clean_files = list_images(clean)?;
    let test_files = list_images(test)?;
    if clean_files.is_empty() {
        return Err(Error::Config(format!("no images in {}", clean.display())));
    }
    let mut pairs = Vec::new();
    let mut used = vec![false; test_files.len()];
    for c in &clean_files {
        let name = file_name(c);
        let want = [name.clone(), denoised_name(&name)];
        let hit = test_files.iter().position(|t| want.contains(&file_name(t)));
        match hit {
            Some(i) if !used[i] => {
                used[i] = true;
                pairs.push((c.clone(), test_files[i].clone()));
            }
            _ => return Err(Error::Config(format!("no counterpart for {name} in {}", test.display()))),
        }
    }
    if let Some(i) = used.iter().position(|u| !u) {
        return Err(Error::Config(format!("unpaired file {}", test_files[i].display())));
    }
    Ok(pairs)
}

/// PSNR of every image in `paths.input` against its reference in `paths.clean`.
pub fn cmd_eval(config: &RunConfig) -> Result<PsnrTable> {
    let clean = required(&config.paths.clean, "paths.clean")?;
    let test = required(&config.paths.input, "paths.input")?;
    let mut rows = Vec::new();
    for (c, t) in pair_files(clean, test)? {
        let reference = load_image::<Real>(&c)?;
        let mut candidate = load_image::<Real>(&t)?;
        if candidate.peak() != reference.peak() {
            candidate = candidate.rescaled(reference.peak());
        }
        rows.push((file_name(&c), vec![psnr(&reference, &candidate)?]));
    }
    let table = PsnrTable { columns: vec!["psnr".into()], rows };
    if let Some(out) = &config.paths.output {
        fs::create_dir_all(out)?;
        write_atomic(&out.join(EVAL_FILE), table.to_text().as_bytes())?;
    }
    Ok(table)
}

/// Column label for a checkpoint: its file stem, made unique by position.
fn column_labels(paths: &[PathBuf]) -> Vec<String> {
    paths
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let stem = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            format!("{}:{stem}", i + 1)
        })
        .collect()
}

/// One PSNR column per checkpoint on a shared test set. Noisy inputs come
/// from `paths.input` when given, otherwise they are synthesized from the
/// clean references with the configured noise.
pub fn cmd_compare(config: &RunConfig) -> Result<PsnrTable> {
    let clean_dir = required(&config.paths.clean, "paths.clean")?;
    if config.paths.checkpoints.is_empty() {
        return Err(Error::Config("compare needs paths.checkpoints".into()));
    }
    let cases: Vec<(String, Image<Real>, Image<Real>)> = match &config.paths.input {
        Some(noisy_dir) => pair_files(clean_dir, noisy_dir)?
            .into_iter()
            .map(|(c, n)| Ok((file_name(&c), load_image(&c)?, load_image(&n)?)))
            .collect::<Result<_>>()?,
        None => {
            let files = list_images(clean_dir)?;
            if files.is_empty() {
                return Err(Error::Config(format!("no images in {}", clean_dir.display())));
            }
            files
                .iter()
                .enumerate()
                .map(|(i, p)| {
                    let clean = load_image::<Real>(p)?;
                    let spec = config
                        .noise_spec(derive_seed(config.seed, "compare", &[i as u64]))
                        .ok_or_else(|| Error::Config("compare without paths.input needs noise.kind".into()))?;
                    let noisy = corrupt(&clean, &spec)?;
                    Ok((file_name(p), clean, noisy))
                })
                .collect::<Result<_>>()?
        }
    };
    let models = config.paths.checkpoints.iter().map(|p| load_model(p)).collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::new();
    for (name, clean, noisy) in &cases {
        let vals = models.iter().map(|m| psnr(clean, &denoise_one(config, m, noisy)?)).collect::<Result<Vec<f64>>>()?;
        rows.push((name.clone(), vals));
    }
    let table = PsnrTable { columns: column_labels(&config.paths.checkpoints), rows };
    if let Some(out) = &config.paths.output {
        fs::create_dir_all(out)?;
        write_atomic(&out.join(COMPARE_FILE), table.to_text().as_bytes())?;
    }
    Ok(table)
}
