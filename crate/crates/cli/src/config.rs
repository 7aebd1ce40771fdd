//! Flat `key=value` run configuration with dotted section prefixes.
//!
//! Precedence, lowest first: built-in defaults, the config file, `--set`
//! overrides in command-line order, then the dedicated `--seed` / `--out` flags.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use n2i_core::mask::{FillStrategy, MaskMode};
use n2i_core::nn::unet::UNetConfig;
use n2i_core::noise::{NoiseKind, NoiseSpec};
use n2i_core::train::{TrainConfig, TrainMode};
use n2i_core::unroll::{DfVariant, UnrollConfig};
use n2i_core::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Synth,
    Train,
    Denoise,
    Eval,
    Compare,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Synth => "synth",
            Command::Train => "train",
            Command::Denoise => "denoise",
            Command::Eval => "eval",
            Command::Compare => "compare",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "synth" => Command::Synth,
            "train" => Command::Train,
            "denoise" => Command::Denoise,
            "eval" => Command::Eval,
            "compare" => Command::Compare,
            other => return Err(Error::Config(format!("unknown command '{other}'"))),
        })
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Paths {
    /// Images read by the command (clean for synth/train with noise, noisy otherwise).
    pub input: Option<PathBuf>,
    /// Clean references for eval and compare.
    pub clean: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    /// Checkpoints compared side by side, in column order.
    pub checkpoints: Vec<PathBuf>,
}

/// Procedural corpus used by `synth` when no input folder is given.
#[derive(Clone, Debug, PartialEq)]
pub struct SynthOptions {
    pub count: usize,
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub write_clean: bool,
    /// File extension of written images.
    pub format: String,
}

impl Default for SynthOptions {
    fn default() -> Self {
        Self { count: 0, height: 64, width: 64, channels: 1, write_clean: true, format: "png".into() }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunConfig {
    pub command: Option<Command>,
    pub seed: u64,
    pub paths: Paths,
    /// `None` when inputs are already noisy.
    pub noise: Option<NoiseKind>,
    pub synth: SynthOptions,
    pub train: TrainConfig,
    /// Training patch side; 0 uses the smallest image side.
    pub patch_size: usize,
}

fn bad(key: &str, value: &str) -> Error {
    Error::Config(format!("invalid value '{value}' for key '{key}'"))
}

fn num<V: std::str::FromStr>(key: &str, value: &str) -> Result<V> {
    value.parse().map_err(|_| bad(key, value))
}

fn boolean(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(bad(key, value)),
    }
}

fn mask_mode_name(m: MaskMode) -> &'static str {
    match m {
        MaskMode::Uniform => "uniform",
        MaskMode::Stratified => "stratified",
    }
}

fn fill_name(f: FillStrategy) -> String {
    match f {
        FillStrategy::Zero => "zero".into(),
        FillStrategy::LocalMean { radius } => format!("local_mean:{radius}"),
        FillStrategy::RandomNeighbor { radius } => format!("random_neighbor:{radius}"),
    }
}

fn parse_fill(key: &str, value: &str) -> Result<FillStrategy> {
    let (name, radius) = value.split_once(':').unwrap_or((value, "1"));
    let radius = num(key, radius)?;
    match name {
        "zero" => Ok(FillStrategy::Zero),
        "local_mean" => Ok(FillStrategy::LocalMean { radius }),
        "random_neighbor" => Ok(FillStrategy::RandomNeighbor { radius }),
        _ => Err(bad(key, value)),
    }
}

/// Compact one-token form of a non-mixture noise kind, e.g. `gaussian:25`.
fn compact(kind: &NoiseKind) -> Result<String> {
    Ok(match kind {
        NoiseKind::Gaussian { sigma } => format!("gaussian:{sigma}"),
        NoiseKind::BlindGaussian { sigma_min, sigma_max } => format!("blind_gaussian:{sigma_min}:{sigma_max}"),
        NoiseKind::Bernoulli { p } => format!("bernoulli:{p}"),
        NoiseKind::Poisson { lambda } => format!("poisson:{lambda}"),
        NoiseKind::Colored { band_lo, band_hi, energy } => format!("colored:{band_lo}:{band_hi}:{energy}"),
        NoiseKind::Mixture(_) => return Err(Error::Config("nested noise mixtures are not supported".into())),
    })
}

fn parse_compact(key: &str, token: &str) -> Result<NoiseKind> {
    let f: Vec<&str> = token.split(':').collect();
    let arg = |i: usize| f.get(i).copied().ok_or_else(|| bad(key, token));
    let kind = match (f[0], f.len()) {
        ("gaussian", 2) => NoiseKind::Gaussian { sigma: num(key, arg(1)?)? },
        ("blind_gaussian", 3) => {
            NoiseKind::BlindGaussian { sigma_min: num(key, arg(1)?)?, sigma_max: num(key, arg(2)?)? }
        }
        ("bernoulli", 2) => NoiseKind::Bernoulli { p: num(key, arg(1)?)? },
        ("poisson", 2) => NoiseKind::Poisson { lambda: num(key, arg(1)?)? },
        ("colored", 4) => {
            NoiseKind::Colored { band_lo: num(key, arg(1)?)?, band_hi: num(key, arg(2)?)?, energy: num(key, arg(3)?)? }
        }
        _ => return Err(bad(key, token)),
    };
    Ok(kind)
}

/// Noise keys are collected first and assembled once the whole file is read,
/// so their order in the file does not matter.
#[derive(Default)]
struct NoiseKeys {
    kind: Option<String>,
    sigma: Option<f64>,
    sigma_min: Option<f64>,
    sigma_max: Option<f64>,
    p: Option<f64>,
    lambda: Option<f64>,
    band_lo: Option<usize>,
    band_hi: Option<usize>,
    energy: Option<f64>,
    components: Option<String>,
}

impl NoiseKeys {
    fn from_kind(kind: &Option<NoiseKind>) -> Self {
        let mut k = NoiseKeys::default();
        match kind {
            None => k.kind = Some("none".into()),
            Some(kind) => {
                k.kind = Some(kind.name().into());
                match *kind {
                    NoiseKind::Gaussian { sigma } => k.sigma = Some(sigma),
                    NoiseKind::BlindGaussian { sigma_min, sigma_max } => {
                        k.sigma_min = Some(sigma_min);
                        k.sigma_max = Some(sigma_max);
                    }
                    NoiseKind::Bernoulli { p } => k.p = Some(p),
                    NoiseKind::Poisson { lambda } => k.lambda = Some(lambda),
                    NoiseKind::Colored { band_lo, band_hi, energy } => {
                        k.band_lo = Some(band_lo);
                        k.band_hi = Some(band_hi);
                        k.energy = Some(energy);
                    }
                    NoiseKind::Mixture(ref parts) => {
                        let tokens: Vec<String> = parts.iter().map(|p| compact(p).unwrap_or_default()).collect();
                        k.components = Some(tokens.join(","));
                    }
                }
            }
        }
        k
    }

    fn build(self) -> Result<Option<NoiseKind>> {
        let kind = self.kind.as_deref().unwrap_or("none");
        let need = |v: Option<f64>, name: &str| {
            v.ok_or_else(|| Error::Config(format!("noise.kind={kind} requires noise.{name}")))
        };
        let kind = match kind {
            "none" => return Ok(None),
            "gaussian" => NoiseKind::Gaussian { sigma: need(self.sigma, "sigma")? },
            "blind_gaussian" => NoiseKind::BlindGaussian {
                sigma_min: need(self.sigma_min, "sigma_min")?,
                sigma_max: need(self.sigma_max, "sigma_max")?,
            },
            "bernoulli" => NoiseKind::Bernoulli { p: need(self.p, "p")? },
            "poisson" => NoiseKind::Poisson { lambda: need(self.lambda, "lambda")? },
            "colored" => NoiseKind::Colored {
                band_lo: need(self.band_lo.map(|v| v as f64), "band_lo")? as usize,
                band_hi: need(self.band_hi.map(|v| v as f64), "band_hi")? as usize,
                energy: need(self.energy, "energy")?,
            },
            "mixture" => {
                let list = self
                    .components
                    .ok_or_else(|| Error::Config("noise.kind=mixture requires noise.components".into()))?;
                NoiseKind::Mixture(
                    list.split(',')
                        .filter(|t| !t.is_empty())
                        .map(|t| parse_compact("noise.components", t.trim()))
                        .collect::<Result<_>>()?,
                )
            }
            other => return Err(bad("noise.kind", other)),
        };
        kind.validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(Some(kind))
    }
}

fn path_list(value: &str) -> Vec<PathBuf> {
    value.split(',').map(str::trim).filter(|s| !s.is_empty()).map(PathBuf::from).collect()
}

impl RunConfig {
    /// Parses a config file body. Blank lines and `#` comments are ignored;
    /// unknown keys are errors.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        cfg.apply_lines(text.lines())?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Applies `key=value` lines on top of the current values.
    pub fn apply_lines<'a>(&mut self, lines: impl IntoIterator<Item = &'a str>) -> Result<()> {
        let mut noise = NoiseKeys::from_kind(&self.noise);
        let mut noise_touched = false;
        for (n, raw) in lines.into_iter().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key=value, got '{line}'", n + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            if let Some(nk) = key.strip_prefix("noise.") {
                noise_touched = true;
                match nk {
                    "kind" => noise.kind = Some(value.to_string()),
                    "sigma" => noise.sigma = Some(num(key, value)?),
                    "sigma_min" => noise.sigma_min = Some(num(key, value)?),
                    "sigma_max" => noise.sigma_max = Some(num(key, value)?),
                    "p" => noise.p = Some(num(key, value)?),
                    "lambda" => noise.lambda = Some(num(key, value)?),
                    "band_lo" => noise.band_lo = Some(num(key, value)?),
                    "band_hi" => noise.band_hi = Some(num(key, value)?),
                    "energy" => noise.energy = Some(num(key, value)?),
                    "components" => noise.components = Some(value.to_string()),
                    _ => return Err(Error::Config(format!("unknown key '{key}'"))),
                }
                continue;
            }
            self.set(key, value)?;
        }
        if noise_touched {
            self.noise = noise.build()?;
        }
        Ok(())
    }

    fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let t = &mut self.train;
        let opt_path = || (!value.is_empty()).then(|| PathBuf::from(value));
        match key {
            "command" => self.command = Some(Command::parse(value)?),
            "seed" => self.seed = num(key, value)?,
            "paths.input" => self.paths.input = opt_path(),
            "paths.clean" => self.paths.clean = opt_path(),
            "paths.output" => self.paths.output = opt_path(),
            "paths.checkpoint" => self.paths.checkpoint = opt_path(),
            "paths.checkpoints" => self.paths.checkpoints = path_list(value),
            "synth.count" => self.synth.count = num(key, value)?,
            "synth.height" => self.synth.height = num(key, value)?,
            "synth.width" => self.synth.width = num(key, value)?,
            "synth.channels" => self.synth.channels = num(key, value)?,
            "synth.write_clean" => self.synth.write_clean = boolean(key, value)?,
            "synth.format" => self.synth.format = value.to_ascii_lowercase(),
            "train.mode" => t.mode = TrainMode::parse(value)?,
            "train.epochs" => t.epochs = num(key, value)?,
            "train.batch_size" => t.batch_size = num(key, value)?,
            "train.learning_rate" => t.learning_rate = num(key, value)?,
            "train.mask_density" => t.mask_density = num(key, value)?,
            "train.mask_mode" => {
                t.mask_mode = match value {
                    "uniform" => MaskMode::Uniform,
                    "stratified" => MaskMode::Stratified,
                    _ => return Err(bad(key, value)),
                }
            }
            "train.checkpoint_every" => t.checkpoint_every = num(key, value)?,
            "train.mu_init" => t.mu_init = num(key, value)?,
            "train.augment" => t.augment = boolean(key, value)?,
            "train.validation_count" => t.validation_count = num(key, value)?,
            "train.patch_size" => self.patch_size = num(key, value)?,
            "train.depth" => t.unet.depth = num(key, value)?,
            "train.base_channels" => t.unet.base_channels = num(key, value)?,
            "train.kernel" => t.unet.kernel = num(key, value)?,
            "train.batch_norm" => t.unet.batch_norm = boolean(key, value)?,
            "unroll.iterations" => t.unroll.iterations = num(key, value)?,
            "unroll.df_variant" => t.unroll.df_variant = DfVariant::parse(value)?,
            "unroll.fill" => t.unroll.fill = parse_fill(key, value)?,
            "unroll.cg_tol" => t.unroll.cg_tol = num(key, value)?,
            "unroll.cg_max_iter" => t.unroll.cg_max_iter = num(key, value)?,
            _ => return Err(Error::Config(format!("unknown key '{key}'"))),
        }
        Ok(())
    }

    /// Serializes every setting; `parse(serialize())` reproduces `self`.
    pub fn serialize(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: &dyn std::fmt::Display| {
            let _ = writeln!(s, "{k}={v}");
        };
        if let Some(c) = self.command {
            kv("command", &c.name());
        }
        kv("seed", &self.seed);
        let p = &self.paths;
        for (k, v) in [
            ("paths.input", &p.input),
            ("paths.clean", &p.clean),
            ("paths.output", &p.output),
            ("paths.checkpoint", &p.checkpoint),
        ] {
            if let Some(v) = v {
                kv(k, &v.display());
            }
        }
        if !p.checkpoints.is_empty() {
            let list: Vec<String> = p.checkpoints.iter().map(|c| c.display().to_string()).collect();
            kv("paths.checkpoints", &list.join(","));
        }
        let n = NoiseKeys::from_kind(&self.noise);
        kv("noise.kind", &n.kind.unwrap_or_default());
        let floats = [
            ("noise.sigma", n.sigma),
            ("noise.sigma_min", n.sigma_min),
            ("noise.sigma_max", n.sigma_max),
            ("noise.p", n.p),
            ("noise.lambda", n.lambda),
        ];
        for (k, v) in floats {
            if let Some(v) = v {
                kv(k, &v);
            }
        }
        if let (Some(lo), Some(hi), Some(e)) = (n.band_lo, n.band_hi, n.energy) {
            kv("noise.band_lo", &lo);
            kv("noise.band_hi", &hi);
            kv("noise.energy", &e);
        }
        if let Some(c) = n.components {
            kv("noise.components", &c);
        }
        let sy = &self.synth;
        kv("synth.count", &sy.count);
        kv("synth.height", &sy.height);
        kv("synth.width", &sy.width);
        kv("synth.channels", &sy.channels);
        kv("synth.write_clean", &sy.write_clean);
        kv("synth.format", &sy.format);
        let t = &self.train;
        kv("train.mode", &t.mode.name());
        kv("train.epochs", &t.epochs);
        kv("train.batch_size", &t.batch_size);
        kv("train.learning_rate", &t.learning_rate);
        kv("train.mask_density", &t.mask_density);
        kv("train.mask_mode", &mask_mode_name(t.mask_mode));
        kv("train.checkpoint_every", &t.checkpoint_every);
        kv("train.mu_init", &t.mu_init);
        kv("train.augment", &t.augment);
        kv("train.validation_count", &t.validation_count);
        kv("train.patch_size", &self.patch_size);
        kv("train.depth", &t.unet.depth);
        kv("train.base_channels", &t.unet.base_channels);
        kv("train.kernel", &t.unet.kernel);
        kv("train.batch_norm", &t.unet.batch_norm);
        kv("unroll.iterations", &t.unroll.iterations);
        kv("unroll.df_variant", &t.unroll.df_variant.name());
        kv("unroll.fill", &fill_name(t.unroll.fill));
        kv("unroll.cg_tol", &t.unroll.cg_tol);
        kv("unroll.cg_max_iter", &t.unroll.cg_max_iter);
        s
    }

    /// Noise spec for stream `seed`, if noise synthesis is configured.
    pub fn noise_spec(&self, seed: u64) -> Option<NoiseSpec> {
        self.noise.clone().map(|k| NoiseSpec::new(k, seed))
    }

    /// Trainer settings with the global seed, noise and output directory merged in.
    pub fn train_config(&self) -> TrainConfig {
        let mut t = self.train.clone();
        t.seed = self.seed;
        t.noise = self.noise_spec(self.seed);
        t.noise_pair = None;
        t.checkpoint_dir = self.paths.output.as_ref().map(|o| o.join("checkpoints"));
        t
    }

    pub fn unet(&self) -> &UNetConfig {
        &self.train.unet
    }

    pub fn unroll(&self) -> &UnrollConfig {
        &self.train.unroll
    }
}
