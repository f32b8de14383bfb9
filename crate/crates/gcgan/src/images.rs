//! Image files in and out, and two-folder datasets.

use std::fs;
use std::path::{Path, PathBuf};

use gcgan_core::data::{image_from_interleaved, to_interleaved, UnpairedData};
use gcgan_core::training::TrainConfig;
use gcgan_core::Tensor;
use image::imageops::FilterType;
use image::{DynamicImage, GrayImage, RgbImage};

use crate::error::{Error, Result};

/// Side length that training crops are cut from when augmenting, for a
/// 256 crop. Other crop sizes scale proportionally.
pub const AUGMENT_LOAD: usize = 286;
pub const AUGMENT_CROP: usize = 256;

fn is_image(path: &Path) -> bool {
    matches!(
        path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref(),
        Some("png" | "jpg" | "jpeg")
    )
}

/// PNG and JPEG files directly inside `dir`, sorted by file name.
pub fn list_images(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for entry in fs::read_dir(dir).map_err(Error::io(dir))? {
        let path = entry.map_err(Error::io(dir))?.path();
        if path.is_file() && is_image(&path) {
            files.push(path);
        }
    }
    if files.is_empty() {
        return Err(Error::EmptyDir(dir.to_path_buf()));
    }
    files.sort_by(|a, b| a.file_name().cmp(&b.file_name()));
    Ok(files)
}

pub fn file_name(path: &Path) -> String {
    path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default()
}

pub fn decode(path: &Path) -> Result<DynamicImage> {
    image::open(path).map_err(|e| Error::Decode { path: path.to_path_buf(), msg: e.to_string() })
}

/// Decodes `path` into a `[1, channels, H, W]` tensor in `[-1, 1]`,
/// resized to `size = (H, W)` when given and different.
pub fn load_tensor(path: &Path, channels: usize, size: Option<(usize, usize)>) -> Result<Tensor<f32>> {
    let img = decode(path)?;
    let img = match size {
        Some((h, w)) if (img.height() as usize, img.width() as usize) != (h, w) => {
            img.resize_exact(w as u32, h as u32, FilterType::Triangle)
        }
        _ => img,
    };
    let (w, h) = (img.width() as usize, img.height() as usize);
    let gray = img.color().channel_count() < 3;
    let t = if gray {
        image_from_interleaved(img.to_luma8().as_raw(), w, h, 1, channels)
    } else {
        image_from_interleaved(img.to_rgb8().as_raw(), w, h, 3, channels)
    };
    t.map_err(|e| Error::Decode { path: path.to_path_buf(), msg: e.to_string() })
}

/// 8-bit image of item `n` of a one- or three-channel batch.
pub fn to_image(batch: &Tensor<f32>, n: usize) -> Result<DynamicImage> {
    let [_, c, h, w] = batch.shape();
    let px = to_interleaved(batch, n);
    let bad = || Error::Invalid(format!("cannot store a {c}-channel {h}x{w} image"));
    match c {
        1 => GrayImage::from_raw(w as u32, h as u32, px).map(DynamicImage::ImageLuma8).ok_or_else(bad),
        3 => RgbImage::from_raw(w as u32, h as u32, px).map(DynamicImage::ImageRgb8).ok_or_else(bad),
        _ => Err(bad()),
    }
}

/// Writes item `n` of `batch`; the format follows the file extension.
pub fn save_tensor(path: &Path, batch: &Tensor<f32>, n: usize) -> Result<()> {
    to_image(batch, n)?
        .save(path)
        .map_err(|e| Error::Decode { path: path.to_path_buf(), msg: e.to_string() })
}

/// Size images are stored at in memory: the training crop, or the larger
/// load size when augmenting.
pub fn load_size(cfg: &TrainConfig) -> (usize, usize) {
    let (h, w) = cfg.resolution;
    if cfg.augment {
        let up = |s: usize| (s * AUGMENT_LOAD).div_ceil(AUGMENT_CROP);
        (up(h), up(w))
    } else {
        (h, w)
    }
}

/// Both training domains, decoded and held in memory.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub x_files: Vec<PathBuf>,
    pub y_files: Vec<PathBuf>,
    pub data: UnpairedData<f32>,
}

impl Dataset {
    pub fn sizes(&self) -> (usize, usize) {
        (self.data.x.len(), self.data.y.len())
    }
}

/// Loads every image of both folders at [`load_size`]. The source domain
/// uses the generator's input channel count, the target domain its output
/// channel count.
pub fn load_unpaired(dir_x: &Path, dir_y: &Path, cfg: &TrainConfig) -> Result<Dataset> {
    let x_files = list_images(dir_x)?;
    let y_files = list_images(dir_y)?;
    let size = Some(load_size(cfg));
    let load = |files: &[PathBuf], c: usize| files.iter().map(|p| load_tensor(p, c, size)).collect::<Result<Vec<_>>>();
    let x = load(&x_files, cfg.generator.in_channels)?;
    let y = load(&y_files, cfg.generator.out_channels)?;
    Ok(Dataset { x_files, y_files, data: UnpairedData { x, y } })
}
