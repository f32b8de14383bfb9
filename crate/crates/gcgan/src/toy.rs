//! Synthetic unpaired domains for smoke tests and acceptance runs.
//!
//! `recolor`: every image is a flat background with a few random convex
//! polygons in colours from a small set. Target images are drawn
//! independently of the source images and then passed through
//! [`recolor_pixel`], a cyclic rotation of the colour channels. The ideal
//! translator is therefore that same per-pixel map, which commutes with
//! every rotation and flip.

use std::fs;
use std::path::{Path, PathBuf};

use image::RgbImage;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub const TOY_SIZE: u32 = 32;

const BACKGROUND: [u8; 3] = [24, 56, 150];
const INKS: [[u8; 3]; 4] = [[230, 70, 40], [240, 210, 50], [60, 200, 110], [245, 245, 245]];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ToyKind {
    Recolor,
}

impl std::str::FromStr for ToyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "recolor" => Ok(ToyKind::Recolor),
            _ => Err(Error::Invalid(format!("unknown toy kind `{s}` (expected `recolor`)"))),
        }
    }
}

/// `(r, g, b) -> (b, r, g)`.
pub fn recolor_pixel(p: [u8; 3]) -> [u8; 3] {
    [p[2], p[0], p[1]]
}

fn polygon<R: Rng>(rng: &mut R, size: f64) -> Vec<(f64, f64)> {
    let n = rng.random_range(3..=5);
    let (cx, cy) = (rng.random_range(0.2..0.8) * size, rng.random_range(0.2..0.8) * size);
    let radius = rng.random_range(0.12..0.3) * size;
    let mut angles: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..std::f64::consts::TAU)).collect();
    angles.sort_by(f64::total_cmp);
    angles
        .into_iter()
        .map(|a| {
            let r = radius * rng.random_range(0.6..1.0);
            (cx + r * a.cos(), cy + r * a.sin())
        })
        .collect()
}

/// Point-in-polygon for vertices sorted by angle around an interior point.
fn inside(poly: &[(f64, f64)], x: f64, y: f64) -> bool {
    (0..poly.len()).all(|i| {
        let (ax, ay) = poly[i];
        let (bx, by) = poly[(i + 1) % poly.len()];
        (bx - ax) * (y - ay) - (by - ay) * (x - ax) >= 0.0
    })
}

/// One source-style image.
pub fn sprite<R: Rng>(rng: &mut R, size: u32) -> RgbImage {
    let mut img = RgbImage::from_pixel(size, size, image::Rgb(BACKGROUND));
    for _ in 0..rng.random_range(1..=3) {
        let poly = polygon(rng, size as f64);
        let ink = INKS[rng.random_range(0..INKS.len())];
        for (x, y, px) in img.enumerate_pixels_mut() {
            if inside(&poly, x as f64 + 0.5, y as f64 + 0.5) {
                *px = image::Rgb(ink);
            }
        }
    }
    img
}

/// `n` source and `n` target images, a pure function of `seed`.
pub fn make_toy(kind: ToyKind, n: usize, seed: u64, size: u32) -> Result<(Vec<RgbImage>, Vec<RgbImage>)> {
    if n == 0 {
        return Err(Error::Invalid("toy dataset needs at least one image per domain".into()));
    }
    let ToyKind::Recolor = kind;
    let mut rx = ChaCha8Rng::seed_from_u64(seed);
    let mut ry = ChaCha8Rng::seed_from_u64(seed);
    ry.set_stream(1);
    let xs = (0..n).map(|_| sprite(&mut rx, size)).collect();
    let ys = (0..n)
        .map(|_| {
            let mut img = sprite(&mut ry, size);
            img.pixels_mut().for_each(|p| p.0 = recolor_pixel(p.0));
            img
        })
        .collect();
    Ok((xs, ys))
}

/// Directories written by [`write_toy`].
#[derive(Clone, Debug)]
pub struct ToyDirs {
    pub x: PathBuf,
    pub y: PathBuf,
}

/// Writes `out/x/0000.png ...` and `out/y/0000.png ...`.
pub fn write_toy(kind: ToyKind, out: &Path, n: usize, seed: u64) -> Result<ToyDirs> {
    let (xs, ys) = make_toy(kind, n, seed, TOY_SIZE)?;
    let dirs = ToyDirs { x: out.join("x"), y: out.join("y") };
    for (dir, imgs) in [(&dirs.x, xs), (&dirs.y, ys)] {
        fs::create_dir_all(dir).map_err(Error::io(dir))?;
        for (i, img) in imgs.iter().enumerate() {
            let path = dir.join(format!("{i:04}.png"));
            img.save(&path).map_err(|e| Error::Decode { path: path.clone(), msg: e.to_string() })?;
        }
    }
    Ok(dirs)
}
