//! Flat `key = value` run configuration.
//!
//! One setting per line, `#` starts a comment. Keys:
//!
//! | key | value |
//! |---|---|
//! | `data_x`, `data_y` | source / target image folders |
//! | `out_dir` | where checkpoints, logs and the manifest go |
//! | `constraints` | comma list of `geo`, `cycle`, `distance`, `identity`, or `none` |
//! | `transforms` | comma list of `rot90`, `vflip`, `mix`, ... |
//! | `sharing` | `shared` or `separate` |
//! | `lambda_geo`, `lambda_cycle`, `lambda_distance`, `lambda_identity` | loss weights |
//! | `lr`, `beta1`, `beta2` | Adam settings |
//! | `epochs_const`, `epochs_decay` | schedule lengths |
//! | `buffer_capacity`, `batch_size` | |
//! | `resolution` | `N` or `HxW` |
//! | `seed` / `seeds` | one seed, or a comma list run one after another |
//! | `generator` | `auto`, `resnet`, `compact` or `passthrough` |
//! | `blocks` | residual blocks (implies `generator = resnet`) |
//! | `gen_width`, `disc_width` | base channel widths |
//! | `in_channels`, `out_channels` | image channels of the two domains |
//! | `affine_norm` | learned instance-norm scale and shift |
//! | `stem_padding` | `reflect` or `zero` |
//! | `max_steps` | step budget, `none` for unlimited |
//! | `distance_max_pairs` | pair budget for the distance statistics |
//! | `distance_stats` | precomputed statistics file; computed when absent |
//! | `augment` | random crop + mirror |
//! | `checkpoint_every` | epochs between checkpoints, `0` for final only |
//! | `log_every` | steps between progress lines on stderr |

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use gcgan_core::models::{GeneratorArch, GeneratorSpec, Padding, SharingMode};
use gcgan_core::training::{Constraints, TrainConfig};
use gcgan_core::GeoTransform;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub train: TrainConfig,
    pub data_x: Option<PathBuf>,
    pub data_y: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub seeds: Vec<u64>,
    pub distance_stats: Option<PathBuf>,
    pub checkpoint_every: usize,
    pub log_every: usize,
    /// Pick the generator layout from the resolution when resolving.
    pub auto_generator: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            train: TrainConfig::default(),
            data_x: None,
            data_y: None,
            out_dir: PathBuf::from("runs/gcgan"),
            seeds: vec![0],
            distance_stats: None,
            checkpoint_every: 10,
            log_every: 100,
            auto_generator: true,
        }
    }
}

fn num<T: std::str::FromStr>(key: &str, v: &str) -> std::result::Result<T, String> {
    v.parse().map_err(|_| format!("`{key}` expects a number, got `{v}`"))
}

fn flag(key: &str, v: &str) -> std::result::Result<bool, String> {
    match v.to_ascii_lowercase().as_str() {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(format!("`{key}` expects true or false, got `{v}`")),
    }
}

/// `N` or `HxW`.
pub fn parse_resolution(v: &str) -> std::result::Result<(usize, usize), String> {
    let bad = || format!("resolution must be `N` or `HxW`, got `{v}`");
    match v.split_once(['x', 'X']) {
        Some((h, w)) => Ok((h.trim().parse().map_err(|_| bad())?, w.trim().parse().map_err(|_| bad())?)),
        None => {
            let n = v.trim().parse().map_err(|_| bad())?;
            Ok((n, n))
        }
    }
}

/// Splits `key = value` lines, skipping blanks and comments.
pub(crate) fn key_values(text: &str, origin: &str) -> Result<Vec<(usize, String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| Error::Config {
            origin: origin.into(),
            line: i + 1,
            msg: format!("expected `key = value`, got `{line}`"),
        })?;
        out.push((i + 1, k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

impl RunConfig {
    /// Applies one setting.
    pub fn set(&mut self, key: &str, v: &str) -> std::result::Result<(), String> {
        let t = &mut self.train;
        let g = &mut t.generator;
        match key {
            "data_x" => self.data_x = Some(v.into()),
            "data_y" => self.data_y = Some(v.into()),
            "out_dir" => self.out_dir = v.into(),
            "constraints" | "constraint" => t.constraints = Constraints::parse(v).map_err(|e| e.to_string())?,
            "transforms" | "transform" => t.transforms = GeoTransform::parse_pool(v).map_err(|e| e.to_string())?,
            "sharing" => t.sharing = v.parse::<SharingMode>().map_err(|e| e.to_string())?,
            "lambda_geo" => t.weights.geo = num(key, v)?,
            "lambda_cycle" => t.weights.cycle = num(key, v)?,
            "lambda_distance" => t.weights.distance = num(key, v)?,
            "lambda_identity" => t.weights.identity = num(key, v)?,
            "lr" => t.lr = num(key, v)?,
            "beta1" => t.adam.beta1 = num(key, v)?,
            "beta2" => t.adam.beta2 = num(key, v)?,
            "epochs_const" => t.epochs_const = num(key, v)?,
            "epochs_decay" => t.epochs_decay = num(key, v)?,
            "buffer_capacity" => t.buffer_capacity = num(key, v)?,
            "batch_size" => t.batch_size = num(key, v)?,
            "resolution" => t.resolution = parse_resolution(v)?,
            "seed" => self.seeds = vec![num(key, v)?],
            "seeds" => {
                self.seeds = v.split(',').map(|s| num(key, s.trim())).collect::<std::result::Result<_, _>>()?;
                if self.seeds.is_empty() {
                    return Err("`seeds` needs at least one seed".into());
                }
            }
            "generator" => {
                self.auto_generator = false;
                g.arch = match v {
                    "auto" => {
                        self.auto_generator = true;
                        g.arch
                    }
                    "resnet" => match g.arch {
                        GeneratorArch::Resnet { blocks } => GeneratorArch::Resnet { blocks },
                        _ => GeneratorArch::Resnet { blocks: 9 },
                    },
                    "compact" => GeneratorArch::Compact,
                    "passthrough" => GeneratorArch::Passthrough,
                    _ => return Err(format!("unknown generator `{v}`")),
                };
            }
            "blocks" => {
                self.auto_generator = false;
                g.arch = GeneratorArch::Resnet { blocks: num(key, v)? };
            }
            "gen_width" => g.base_width = num(key, v)?,
            "disc_width" => t.discriminator.base_width = num(key, v)?,
            "in_channels" => g.in_channels = num(key, v)?,
            "out_channels" => g.out_channels = num(key, v)?,
            "affine_norm" => {
                g.affine_norm = flag(key, v)?;
                t.discriminator.affine_norm = g.affine_norm;
            }
            "stem_padding" => {
                g.stem_padding = match v {
                    "reflect" => Padding::Reflect,
                    "zero" => Padding::Zero,
                    _ => return Err(format!("`stem_padding` is `reflect` or `zero`, got `{v}`")),
                }
            }
            "max_steps" => t.max_steps = if v == "none" { None } else { Some(num(key, v)?) },
            "distance_max_pairs" => t.distance_max_pairs = num(key, v)?,
            "distance_stats" => self.distance_stats = Some(v.into()),
            "augment" => t.augment = flag(key, v)?,
            "checkpoint_every" => self.checkpoint_every = num(key, v)?,
            "log_every" => self.log_every = num(key, v)?,
            _ => return Err(format!("unknown key `{key}`")),
        }
        Ok(())
    }

    /// Applies every line of `text`; `origin` names the source in errors.
    pub fn apply_text(&mut self, text: &str, origin: &str) -> Result<()> {
        for (line, k, v) in key_values(text, origin)? {
            self.set(&k, &v).map_err(|msg| Error::Config { origin: origin.into(), line, msg })?;
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(Error::io(path))?;
        let mut cfg = RunConfig::default();
        cfg.apply_text(&text, &path.display().to_string())?;
        Ok(cfg)
    }

    /// Fills in derived settings and validates. Call after every override.
    pub fn resolve(&mut self) -> Result<()> {
        let t = &mut self.train;
        if self.auto_generator {
            let g = GeneratorSpec::for_resolution(t.resolution.0.min(t.resolution.1));
            t.generator.arch = g.arch;
        }
        t.discriminator.in_channels = t.generator.out_channels;
        t.seed = self.seeds[0];
        t.validate()?;
        Ok(())
    }

    /// Settings in the file format, such that reading them back gives the
    /// same configuration.
    pub fn render(&self) -> String {
        let t = &self.train;
        let g = &t.generator;
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        if let Some(p) = &self.data_x {
            kv("data_x", p.display().to_string());
        }
        if let Some(p) = &self.data_y {
            kv("data_y", p.display().to_string());
        }
        kv("out_dir", self.out_dir.display().to_string());
        kv("constraints", t.constraints.to_string());
        kv("transforms", t.transforms.iter().map(|f| f.name()).collect::<Vec<_>>().join(","));
        kv("sharing", t.sharing.to_string());
        kv("lambda_geo", t.weights.geo.to_string());
        kv("lambda_cycle", t.weights.cycle.to_string());
        kv("lambda_distance", t.weights.distance.to_string());
        kv("lambda_identity", t.weights.identity.to_string());
        kv("lr", t.lr.to_string());
        kv("beta1", t.adam.beta1.to_string());
        kv("beta2", t.adam.beta2.to_string());
        kv("epochs_const", t.epochs_const.to_string());
        kv("epochs_decay", t.epochs_decay.to_string());
        kv("buffer_capacity", t.buffer_capacity.to_string());
        kv("batch_size", t.batch_size.to_string());
        kv("resolution", format!("{}x{}", t.resolution.0, t.resolution.1));
        kv("seeds", self.seeds.iter().map(u64::to_string).collect::<Vec<_>>().join(","));
        match (self.auto_generator, g.arch) {
            (true, _) => kv("generator", "auto".into()),
            (false, GeneratorArch::Resnet { blocks }) => kv("blocks", blocks.to_string()),
            (false, GeneratorArch::Compact) => kv("generator", "compact".into()),
            (false, GeneratorArch::Passthrough) => kv("generator", "passthrough".into()),
        }
        kv("gen_width", g.base_width.to_string());
        kv("disc_width", t.discriminator.base_width.to_string());
        kv("in_channels", g.in_channels.to_string());
        kv("out_channels", g.out_channels.to_string());
        kv("affine_norm", g.affine_norm.to_string());
        kv("stem_padding", if g.stem_padding == Padding::Reflect { "reflect" } else { "zero" }.into());
        kv("max_steps", t.max_steps.map_or("none".into(), |m| m.to_string()));
        kv("distance_max_pairs", t.distance_max_pairs.to_string());
        if let Some(p) = &self.distance_stats {
            kv("distance_stats", p.display().to_string());
        }
        kv("augment", t.augment.to_string());
        kv("checkpoint_every", self.checkpoint_every.to_string());
        kv("log_every", self.log_every.to_string());
        s
    }
}
