use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use n2i_cli::{run, Command, RunConfig};
use n2i_core::Result;

#[derive(Parser)]
#[command(name = "n2i", version, about = "Self-supervised denoising by unrolled inpainting")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Corrupt a folder (or a procedural corpus) and write a manifest
    Synth(Common),
    /// Train a denoiser
    Train(Common),
    /// Denoise a folder with a checkpoint
    Denoise(Common),
    /// PSNR of a folder against clean references
    Eval(Common),
    /// PSNR table for several checkpoints on one test set
    Compare(Common),
}

#[derive(Args)]
struct Common {
    /// Config file of key=value lines
    #[arg(long)]
    config: Option<PathBuf>,
    /// Global seed, overriding the config file
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory, overriding paths.output
    #[arg(long)]
    out: Option<PathBuf>,
    /// Extra key=value setting applied after the config file (repeatable)
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

fn resolve(command: Command, flags: &Common) -> Result<RunConfig> {
    let mut cfg = match &flags.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    cfg.apply_lines(flags.set.iter().map(String::as_str))?;
    if let Some(seed) = flags.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &flags.out {
        cfg.paths.output = Some(out.clone());
    }
    cfg.command = Some(command);
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, flags) = match &cli.command {
        Cmd::Synth(f) => (Command::Synth, f),
        Cmd::Train(f) => (Command::Train, f),
        Cmd::Denoise(f) => (Command::Denoise, f),
        Cmd::Eval(f) => (Command::Eval, f),
        Cmd::Compare(f) => (Command::Compare, f),
    };
    match resolve(command, flags).and_then(|cfg| run(&cfg)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = e.message().replace('\n', " ");
            eprintln!("error: {}: {msg}", e.category());
            ExitCode::FAILURE
        }
    }
}
