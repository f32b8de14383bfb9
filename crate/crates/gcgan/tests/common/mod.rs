#![allow(dead_code)]

use std::path::Path;

use gcgan::config::RunConfig;
use gcgan::toy::{write_toy, ToyDirs, ToyKind};

pub fn toy(root: &Path, n: usize, seed: u64) -> ToyDirs {
    write_toy(ToyKind::Recolor, &root.join("toy"), n, seed).unwrap()
}

/// A run small enough to finish in well under a second per epoch.
pub fn tiny_run(dirs: &ToyDirs, out: &Path) -> RunConfig {
    let mut cfg = RunConfig {
        data_x: Some(dirs.x.clone()),
        data_y: Some(dirs.y.clone()),
        out_dir: out.to_path_buf(),
        ..RunConfig::default()
    };
    for (k, v) in [
        ("resolution", "32"),
        ("blocks", "1"),
        ("gen_width", "4"),
        ("disc_width", "4"),
        ("epochs_const", "1"),
        ("epochs_decay", "1"),
        ("checkpoint_every", "1"),
        ("seed", "3"),
    ] {
        cfg.set(k, v).unwrap();
    }
    cfg
}

pub fn write_png(path: &Path, w: u32, h: u32, f: impl Fn(u32, u32) -> [u8; 3]) {
    image::RgbImage::from_fn(w, h, |x, y| image::Rgb(f(x, y))).save(path).unwrap();
}
