use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};
use gcgan::config::{parse_resolution, RunConfig};
use gcgan::evaluate::{evaluate_dirs, load_palette, Mode, DEFAULT_DELTAS};
use gcgan::toy::{write_toy, ToyKind};
use gcgan::{run, stats, translate};
use gcgan_core::data::precompute_distance_stats;
use gcgan_core::GeoTransform;

#[derive(Parser)]
#[command(name = "gcgan", version, about = "Geometry-consistent unpaired image translation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a translator from two image folders.
    Train {
        /// `key = value` config file.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        data_x: Option<PathBuf>,
        #[arg(long)]
        data_y: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Constraint list, e.g. `geo`, `geo,cycle`, `none`.
        #[arg(long)]
        constraint: Option<String>,
        /// Transform pool, e.g. `rot`, `vf`, `mix`.
        #[arg(long)]
        transform: Option<String>,
        #[arg(long)]
        sharing: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        max_steps: Option<String>,
        /// Any config key, repeatable: `--set lambda_geo=10`.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        /// Continue from a checkpoint.
        #[arg(long)]
        resume: Option<PathBuf>,
        /// Suppress progress lines.
        #[arg(long)]
        quiet: bool,
    },
    /// Translate a folder of source images with G_XY.
    Translate {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Resize inputs to `N` or `HxW` first.
        #[arg(long)]
        resize: Option<String>,
        /// Also report the equivariance residual under this transform.
        #[arg(long)]
        residual: Option<GeoTransform>,
    },
    /// Score predictions against references with matching file names.
    Evaluate {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        #[arg(long, value_enum)]
        mode: EvalMode,
        /// Palette file (`class_id r g b name [ignore]` rows), parsing mode.
        #[arg(long)]
        palette: Option<PathBuf>,
        /// Resize predicted label maps to the reference size.
        #[arg(long)]
        upsample: bool,
        /// Map-mode thresholds.
        #[arg(long, value_delimiter = ',')]
        delta: Vec<f64>,
        /// Report path without extension; `.csv` and `.json` are written.
        #[arg(long, default_value = "report")]
        report: PathBuf,
    },
    /// Precompute distance statistics for two folders.
    Stats {
        #[arg(long)]
        data_x: PathBuf,
        #[arg(long)]
        data_y: PathBuf,
        /// `N` or `HxW`; images are resized to it.
        #[arg(long, default_value = "256")]
        resolution: String,
        #[arg(long, default_value_t = 10_000)]
        max_pairs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write a synthetic unpaired dataset.
    MakeToy {
        #[arg(long, default_value = "recolor")]
        kind: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 64)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum EvalMode {
    Parsing,
    Map,
}

fn set(cfg: &mut RunConfig, key: &str, value: &str) -> anyhow::Result<()> {
    cfg.set(key, value).map_err(|e| anyhow::anyhow!("--{key}: {e}"))
}

fn main() -> ExitCode {
    match real_main() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn real_main() -> anyhow::Result<()> {
    match Cli::parse().command {
        Command::Train { config, data_x, data_y, out, constraint, transform, sharing, seed, max_steps, set: sets, resume, quiet } => {
            let mut cfg = match &config {
                Some(p) => RunConfig::from_file(p)?,
                None => RunConfig::default(),
            };
            let paths = [("data_x", data_x), ("data_y", data_y), ("out_dir", out)];
            for (k, v) in paths {
                if let Some(v) = v {
                    set(&mut cfg, k, &v.to_string_lossy())?;
                }
            }
            let strings = [("constraints", constraint), ("transforms", transform), ("sharing", sharing), ("max_steps", max_steps)];
            for (k, v) in strings {
                if let Some(v) = v {
                    set(&mut cfg, k, &v)?;
                }
            }
            if let Some(s) = seed {
                set(&mut cfg, "seed", &s.to_string())?;
            }
            for kv in &sets {
                let (k, v) = kv.split_once('=').with_context(|| format!("--set expects KEY=VALUE, got `{kv}`"))?;
                set(&mut cfg, k.trim(), v.trim())?;
            }
            let every = cfg.log_every.max(1);
            let manifest = run::train(&cfg, resume.as_deref(), |seed, r| {
                if !quiet && r.step % every == 0 {
                    let rep = &r.report;
                    eprintln!(
                        "seed {seed} epoch {} step {} lr {:.2e} gan_g {:.4} gan_d {:.4} geo {:.4} total_g {:.4}",
                        r.epoch, r.step, r.lr, rep.gan_g, rep.gan_d, rep.geo, rep.total_g
                    );
                }
            })?;
            println!("{}", cfg.out_dir.join(run::MANIFEST).display());
            for r in &manifest.runs {
                println!("{}", r.final_checkpoint.display());
            }
        }
        Command::Translate { checkpoint, input, output, resize, residual } => {
            let size = resize.as_deref().map(parse_resolution).transpose().map_err(anyhow::Error::msg)?;
            let s = translate::translate_dir(&checkpoint, &input, &output, size, residual)?;
            println!("translated {} images into {}", s.written, output.display());
            if let Some(r) = s.residual {
                println!("equivariance residual {r:.6}");
            }
        }
        Command::Evaluate { pred, gt, mode, palette, upsample, delta, report } => {
            let mode = match mode {
                EvalMode::Parsing => {
                    let p = palette.context("--palette is required in parsing mode")?;
                    Mode::Parsing { palette: load_palette(&p)?, upsample }
                }
                EvalMode::Map => Mode::Map { deltas: if delta.is_empty() { DEFAULT_DELTAS.to_vec() } else { delta } },
            };
            let r = evaluate_dirs(&pred, &gt, &mode)?;
            r.save(&report)?;
            print!("{}", r.to_csv()?.lines().last().map(|l| format!("{l}\n")).unwrap_or_default());
        }
        Command::Stats { data_x, data_y, resolution, max_pairs, seed, out } => {
            let (h, w) = parse_resolution(&resolution).map_err(anyhow::Error::msg)?;
            let load = |dir: &PathBuf| -> anyhow::Result<Vec<_>> {
                gcgan::images::list_images(dir)?
                    .iter()
                    .map(|p| Ok(gcgan::images::load_tensor(p, 3, Some((h, w)))?))
                    .collect()
            };
            let s = precompute_distance_stats(&load(&data_x)?, &load(&data_y)?, max_pairs, seed)?;
            stats::save(&out, &s)?;
            print!("{}", stats::render(&s));
        }
        Command::MakeToy { kind, out, n, seed } => {
            let dirs = write_toy(kind.parse::<ToyKind>()?, &out, n, seed)?;
            println!("{}\n{}", dirs.x.display(), dirs.y.display());
        }
    }
    Ok(())
}
