//! Pixel conversion, augmentation and the unpaired sampling plan.
//!
//! Images live in memory as `[1, C, H, W]` tensors with values in
//! `[-1, 1]`. Decoding files is left to the caller.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::losses::{image_distance, DistanceStats, SIGMA_FLOOR};
use crate::scalar::Real;
use crate::tensor::Tensor;
use crate::transforms::{sample_transform, GeoTransform};

/// `2v/255 - 1`.
pub fn normalize_u8(v: u8) -> f64 {
    2.0 * v as f64 / 255.0 - 1.0
}

/// Inverse of [`normalize_u8`], rounding half away from zero and clamping.
pub fn denormalize_to_u8(v: f64) -> u8 {
    if v.is_nan() {
        return 0;
    }
    let p = num_traits::Float::round((v + 1.0) * 255.0 / 2.0);
    p.clamp(0.0, 255.0) as u8
}

/// Builds a `[1, dst_channels, h, w]` tensor from interleaved 8-bit pixels
/// with `src_channels` per pixel. Gray sources are replicated into every
/// output channel; extra source channels (alpha) are dropped; colour
/// sources collapse to luma for a one-channel target.
pub fn image_from_interleaved<T: Real>(
    pixels: &[u8],
    width: usize,
    height: usize,
    src_channels: usize,
    dst_channels: usize,
) -> Result<Tensor<T>> {
    let shape = [1, dst_channels, height, width];
    if src_channels == 0 || dst_channels == 0 || pixels.len() != width * height * src_channels {
        return Err(Error::BadLength { shape: [1, src_channels, height, width], len: pixels.len() });
    }
    let px = |i: usize, j: usize, c: usize| pixels[(i * width + j) * src_channels + c];
    Ok(Tensor::from_fn(shape, |_, c, i, j| {
        let v = if src_channels < 3 {
            normalize_u8(px(i, j, 0))
        } else if dst_channels == 1 {
            let (r, g, b) = (px(i, j, 0) as f64, px(i, j, 1) as f64, px(i, j, 2) as f64);
            2.0 * (0.299 * r + 0.587 * g + 0.114 * b) / 255.0 - 1.0
        } else {
            normalize_u8(px(i, j, c.min(2)))
        };
        T::of(v)
    }))
}

/// Interleaved 8-bit pixels of item `n` of a batch, channels last.
pub fn to_interleaved<T: Real>(batch: &Tensor<T>, n: usize) -> Vec<u8> {
    let [_, c, h, w] = batch.shape();
    let mut out = Vec::with_capacity(c * h * w);
    for i in 0..h {
        for j in 0..w {
            for k in 0..c {
                out.push(denormalize_to_u8(batch.at(n, k, i, j).as_f64()));
            }
        }
    }
    out
}

/// Random-crop and mirror parameters for one image.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Augment {
    pub top: usize,
    pub left: usize,
    pub flip: bool,
}

impl Augment {
    pub const NONE: Augment = Augment { top: 0, left: 0, flip: false };

    /// Draws a crop of `out` inside `src` and a coin for the mirror.
    pub fn sample<R: Rng + ?Sized>(src: (usize, usize), out: (usize, usize), rng: &mut R) -> Self {
        let top = rng.random_range(0..=src.0.saturating_sub(out.0));
        let left = rng.random_range(0..=src.1.saturating_sub(out.1));
        Augment { top, left, flip: rng.random_bool(0.5) }
    }

    /// Crops `img` to `out` at the drawn offset and mirrors it
    /// left-right when `flip` is set.
    pub fn apply<T: Real>(&self, img: &Tensor<T>, out: (usize, usize)) -> Result<Tensor<T>> {
        let [n, c, h, w] = img.shape();
        if self.top + out.0 > h || self.left + out.1 > w {
            return Err(Error::ShapeMismatch { expected: [n, c, self.top + out.0, self.left + out.1], actual: img.shape() });
        }
        Ok(Tensor::from_fn([n, c, out.0, out.1], |b, k, i, j| {
            let j = if self.flip { out.1 - 1 - j } else { j };
            img.at(b, k, self.top + i, self.left + j)
        }))
    }
}

/// Everything needed to assemble one training step.
#[derive(Clone, Debug, PartialEq)]
pub struct StepPlan {
    pub x: Vec<usize>,
    pub y: Vec<usize>,
    /// Second source image per `x`, for the distance constraint.
    pub x_partner: Vec<usize>,
    pub transform: GeoTransform,
    pub augment_x: Vec<Augment>,
    pub augment_y: Vec<Augment>,
    pub augment_partner: Vec<Augment>,
}

/// Per-epoch sampling: every `X` image once in shuffled order, `Y` drawn
/// from back-to-back reshuffled passes so unequal set sizes pair freely.
#[derive(Clone, Debug)]
pub struct EpochPlan {
    pub steps: Vec<StepPlan>,
}

/// Sizes and options the plan depends on.
#[derive(Clone, Debug, PartialEq)]
pub struct PlanSpec<'a> {
    pub n_x: usize,
    pub n_y: usize,
    pub batch_size: usize,
    pub transforms: &'a [GeoTransform],
    /// Size of stored images and of the training crop; equal sizes with
    /// `augment = false` mean no cropping.
    pub stored_hw: (usize, usize),
    pub crop_hw: (usize, usize),
    pub augment: bool,
}

/// Stream of the epoch RNG; keeps epoch plans independent of each other
/// and of every other consumer of the run seed.
fn epoch_rng(seed: u64, epoch: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(0x1000 + epoch as u64);
    rng
}

impl EpochPlan {
    /// The plan of `epoch`, a pure function of `seed` and `epoch`.
    pub fn new(spec: &PlanSpec<'_>, seed: u64, epoch: usize) -> Result<Self> {
        if spec.n_x == 0 {
            return Err(Error::TooFewImages { needed: 1, got: 0 });
        }
        if spec.n_y == 0 {
            return Err(Error::TooFewImages { needed: 1, got: 0 });
        }
        if spec.batch_size == 0 {
            return Err(Error::InvalidConfig("batch size must be positive".into()));
        }
        let mut rng = epoch_rng(seed, epoch);
        let mut order: Vec<usize> = (0..spec.n_x).collect();
        order.shuffle(&mut rng);
        let n_steps = spec.n_x.div_ceil(spec.batch_size);
        let mut y_seq = Vec::with_capacity(spec.n_x + spec.n_y);
        while y_seq.len() < spec.n_x {
            let mut pass: Vec<usize> = (0..spec.n_y).collect();
            pass.shuffle(&mut rng);
            y_seq.extend(pass);
        }
        let identity = [GeoTransform::Identity];
        let pool: &[GeoTransform] = if spec.transforms.is_empty() { &identity } else { spec.transforms };
        let mut steps = Vec::with_capacity(n_steps);
        for s in 0..n_steps {
            let range = s * spec.batch_size..((s + 1) * spec.batch_size).min(spec.n_x);
            let x = order[range.clone()].to_vec();
            let y = y_seq[range].to_vec();
            let x_partner = x
                .iter()
                .map(|&i| {
                    if spec.n_x < 2 {
                        return i;
                    }
                    let j = rng.random_range(0..spec.n_x - 1);
                    if j >= i {
                        j + 1
                    } else {
                        j
                    }
                })
                .collect();
            let transform = sample_transform(pool, &mut rng)?;
            let mut draw = |k: usize| -> Vec<Augment> {
                (0..k)
                    .map(|_| {
                        if spec.augment {
                            Augment::sample(spec.stored_hw, spec.crop_hw, &mut rng)
                        } else {
                            Augment::NONE
                        }
                    })
                    .collect()
            };
            let augment_x = draw(x.len());
            let augment_y = draw(x.len());
            let augment_partner = draw(x.len());
            steps.push(StepPlan { x, y, x_partner, transform, augment_x, augment_y, augment_partner });
        }
        Ok(EpochPlan { steps })
    }
}

/// Source and target images held in memory.
#[derive(Clone, Debug, Default)]
pub struct UnpairedData<T> {
    pub x: Vec<Tensor<T>>,
    pub y: Vec<Tensor<T>>,
}

impl<T: Real> UnpairedData<T> {
    /// Stacks the images named by `idx` after applying their augmentation.
    pub fn gather(
        images: &[Tensor<T>],
        idx: &[usize],
        augment: &[Augment],
        crop_hw: (usize, usize),
    ) -> Result<Tensor<T>> {
        let items = idx
            .iter()
            .zip(augment)
            .map(|(&i, a)| {
                let img = images.get(i).ok_or(Error::TooFewImages { needed: i + 1, got: images.len() })?;
                if *a == Augment::NONE && (img.shape()[2], img.shape()[3]) == crop_hw {
                    Ok(img.clone())
                } else {
                    a.apply(img, crop_hw)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Tensor::stack(&items)
    }
}

/// `(mean, population std)` of `d` over image pairs of one domain. All
/// `i < j` pairs are used when there are at most `max_pairs` of them,
/// otherwise `max_pairs` pairs are drawn uniformly with replacement.
pub fn pairwise_distance_moments<T: Real, R: Rng + ?Sized>(
    images: &[Tensor<T>],
    max_pairs: usize,
    rng: &mut R,
) -> Result<(f64, f64)> {
    let n = images.len();
    if n < 2 {
        return Err(Error::TooFewImages { needed: 2, got: n });
    }
    let total = n * (n - 1) / 2;
    let mut ds = Vec::with_capacity(total.min(max_pairs.max(1)));
    if total <= max_pairs {
        for i in 0..n {
            for j in i + 1..n {
                ds.push(image_distance(&images[i], &images[j]));
            }
        }
    } else {
        for _ in 0..max_pairs.max(1) {
            let i = rng.random_range(0..n);
            let j = (i + 1 + rng.random_range(0..n - 1)) % n;
            ds.push(image_distance(&images[i], &images[j]));
        }
    }
    let m = ds.len() as f64;
    let mu = ds.iter().sum::<f64>() / m;
    let var = ds.iter().map(|d| (d - mu) * (d - mu)).sum::<f64>() / m;
    Ok((mu, num_traits::Float::sqrt(var)))
}

/// Distance statistics for both domains with the default sigma floor.
pub fn precompute_distance_stats<T: Real>(
    x: &[Tensor<T>],
    y: &[Tensor<T>],
    max_pairs: usize,
    seed: u64,
) -> Result<DistanceStats> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(0x2000);
    let (mu_x, sigma_x) = pairwise_distance_moments(x, max_pairs, &mut rng)?;
    let (mu_y, sigma_y) = pairwise_distance_moments(y, max_pairs, &mut rng)?;
    let stats = DistanceStats { mu_x, sigma_x, mu_y, sigma_y, sigma_floor: Some(SIGMA_FLOOR) };
    Ok(stats)
}

/// Nearest-neighbour resize of a label map.
pub fn resize_labels_nearest(labels: &[u32], h: usize, w: usize, oh: usize, ow: usize) -> Vec<u32> {
    let mut out = vec![0; oh * ow];
    for i in 0..oh {
        let si = (i * h / oh.max(1)).min(h.saturating_sub(1));
        for j in 0..ow {
            let sj = (j * w / ow.max(1)).min(w.saturating_sub(1));
            out[i * ow + j] = labels[si * w + sj];
        }
    }
    out
}
