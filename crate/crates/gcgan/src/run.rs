//! Full training runs on disk: data loading, statistics, checkpoints, the
//! step log and the run manifest.

use std::fs;
use std::path::{Path, PathBuf};

use gcgan_core::data::precompute_distance_stats;
use gcgan_core::losses::DistanceStats;
use gcgan_core::training::{StepRecord, Trainer};
use serde::{Deserialize, Serialize};

use crate::checkpoint;
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::images::{load_unpaired, Dataset};
use crate::log::StepLog;
use crate::stats;

/// Artifacts of one seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedRun {
    pub seed: u64,
    pub dir: PathBuf,
    pub log: PathBuf,
    pub checkpoints: Vec<PathBuf>,
    pub final_checkpoint: PathBuf,
    pub distance_stats: Option<PathBuf>,
    pub steps: usize,
}

/// Index of everything a `train` invocation wrote.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub library_version: String,
    pub config_snapshot: PathBuf,
    pub config: String,
    pub seeds: Vec<u64>,
    pub runs: Vec<SeedRun>,
}

pub const MANIFEST: &str = "manifest.json";
pub const CONFIG_SNAPSHOT: &str = "config.cfg";

impl RunManifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(Error::io(path))?;
        serde_json::from_str(&text).map_err(|e| Error::Invalid(format!("{}: {e}", path.display())))
    }
}

fn seed_dir(cfg: &RunConfig, seed: u64) -> PathBuf {
    if cfg.seeds.len() == 1 {
        cfg.out_dir.clone()
    } else {
        cfg.out_dir.join(format!("seed_{seed}"))
    }
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(Error::io(dir))
}

/// Loads both folders named by the config.
pub fn load_data(cfg: &RunConfig) -> Result<Dataset> {
    let missing = |k: &str| Error::Invalid(format!("`{k}` is not set"));
    let x = cfg.data_x.as_deref().ok_or_else(|| missing("data_x"))?;
    let y = cfg.data_y.as_deref().ok_or_else(|| missing("data_y"))?;
    for dir in [x, y] {
        if !dir.is_dir() {
            return Err(Error::Invalid(format!("dataset directory {} does not exist", dir.display())));
        }
    }
    load_unpaired(x, y, &cfg.train)
}

/// Statistics from the configured file, or computed from the data.
pub fn distance_stats(cfg: &RunConfig, data: &Dataset, seed: u64) -> Result<DistanceStats> {
    match &cfg.distance_stats {
        Some(p) => stats::load(p),
        None => Ok(precompute_distance_stats(&data.data.x, &data.data.y, cfg.train.distance_max_pairs, seed)?),
    }
}

/// Trains one model per seed. With `resume`, the single seed run continues
/// from that checkpoint instead of starting fresh, appending to its log.
pub fn train(cfg: &RunConfig, resume: Option<&Path>, mut progress: impl FnMut(u64, &StepRecord)) -> Result<RunManifest> {
    let mut cfg = cfg.clone();
    cfg.resolve()?;
    if resume.is_some() && cfg.seeds.len() > 1 {
        return Err(Error::Invalid("resume works on a single-seed run".into()));
    }
    let data = load_data(&cfg)?;
    ensure_dir(&cfg.out_dir)?;
    let snapshot = cfg.out_dir.join(CONFIG_SNAPSHOT);
    fs::write(&snapshot, cfg.render()).map_err(Error::io(&snapshot))?;
    let mut runs = Vec::new();
    for &seed in &cfg.seeds {
        let dir = seed_dir(&cfg, seed);
        ensure_dir(&dir)?;
        let mut train_cfg = cfg.train.clone();
        train_cfg.seed = seed;
        let mut trainer = match resume {
            Some(p) => checkpoint::load(p)?,
            None => Trainer::new(train_cfg)?,
        };
        let stats = if trainer.cfg.constraints.distance {
            let s = distance_stats(&cfg, &data, seed)?;
            let p = dir.join("distance_stats.txt");
            stats::save(&p, &s)?;
            Some((s, p))
        } else {
            None
        };
        let log_path = dir.join("log.csv");
        let mut log = StepLog::open(&log_path, resume.is_some())?;
        let ckpt_dir = dir.join("checkpoints");
        let mut checkpoints = Vec::new();
        while !trainer.finished() {
            trainer.run_epoch(&data.data, stats.as_ref().map(|s| &s.0), |r, _| {
                progress(seed, r);
                log.write(r)
            })?;
            log.flush()?;
            let periodic = cfg.checkpoint_every > 0 && trainer.epoch % cfg.checkpoint_every == 0;
            if periodic && !trainer.finished() {
                ensure_dir(&ckpt_dir)?;
                let p = ckpt_dir.join(format!("epoch_{:04}.ckpt", trainer.epoch));
                checkpoint::save(&p, &trainer)?;
                checkpoints.push(p);
            }
        }
        let final_checkpoint = dir.join("final.ckpt");
        checkpoint::save(&final_checkpoint, &trainer)?;
        runs.push(SeedRun {
            seed,
            dir,
            log: log_path,
            checkpoints,
            final_checkpoint,
            distance_stats: stats.map(|s| s.1),
            steps: trainer.step,
        });
    }
    let manifest = RunManifest {
        library_version: env!("CARGO_PKG_VERSION").into(),
        config_snapshot: snapshot,
        config: cfg.render(),
        seeds: cfg.seeds.clone(),
        runs,
    };
    let path = cfg.out_dir.join(MANIFEST);
    let json = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Invalid(e.to_string()))?;
    fs::write(&path, json).map_err(Error::io(&path))?;
    Ok(manifest)
}
