//! Translation quality metrics.
//!
//! Colour images are interleaved 8-bit RGB slices; label maps are `u32`
//! slices of the same pixel count.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Colour of each class, indexed by class id.
#[derive(Clone, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LabelPalette {
    colors: Vec<[u8; 3]>,
    names: Vec<String>,
    ignore: Option<u32>,
}

impl LabelPalette {
    /// Entries may come in any order but their ids must be exactly
    /// `0..n` and their colours distinct.
    pub fn new(mut entries: Vec<(u32, [u8; 3], String)>, ignore: Option<u32>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::Palette("no classes".into()));
        }
        entries.sort_by_key(|e| e.0);
        for (i, e) in entries.iter().enumerate() {
            if e.0 as usize != i {
                return Err(Error::Palette(format!("class ids must be contiguous from 0, found {} at position {i}", e.0)));
            }
        }
        for (i, a) in entries.iter().enumerate() {
            if let Some(b) = entries[..i].iter().find(|b| b.1 == a.1) {
                return Err(Error::Palette(format!("classes {} and {} share colour {:?}", b.0, a.0, a.1)));
            }
        }
        if let Some(ig) = ignore {
            if ig as usize >= entries.len() {
                return Err(Error::Palette(format!("ignore class {ig} is not in the palette")));
            }
        }
        let (colors, names) = entries.into_iter().map(|(_, c, n)| (c, n)).unzip();
        Ok(LabelPalette { colors, names, ignore })
    }

    /// Palette with unnamed classes `0..colors.len()`.
    pub fn from_colors(colors: &[[u8; 3]], ignore: Option<u32>) -> Result<Self> {
        let entries = colors.iter().enumerate().map(|(i, &c)| (i as u32, c, format!("class{i}"))).collect();
        Self::new(entries, ignore)
    }

    pub fn len(&self) -> usize {
        self.colors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.colors.is_empty()
    }

    pub fn colors(&self) -> &[[u8; 3]] {
        &self.colors
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn ignore(&self) -> Option<u32> {
        self.ignore
    }
}

fn check_rgb(len: usize) -> Result<usize> {
    if !len.is_multiple_of(3) {
        return Err(Error::SizeMismatch { expected: len - len % 3, actual: len });
    }
    Ok(len / 3)
}

fn check_same(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::SizeMismatch { expected: b, actual: a });
    }
    Ok(())
}

/// Class of each pixel: the palette colour nearest in Euclidean RGB
/// distance, ties going to the lower class id.
pub fn rgb_to_labels(rgb: &[u8], palette: &LabelPalette) -> Result<Vec<u32>> {
    check_rgb(rgb.len())?;
    Ok(rgb
        .chunks_exact(3)
        .map(|p| {
            let mut best = (u32::MAX, 0u32);
            for (id, c) in palette.colors.iter().enumerate() {
                let d: u32 = (0..3).map(|k| (p[k] as i32 - c[k] as i32).pow(2) as u32).sum();
                if d < best.0 {
                    best = (d, id as u32);
                }
            }
            best.1
        })
        .collect())
}

/// Paints a label map with its palette colours.
pub fn render(labels: &[u32], palette: &LabelPalette) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(labels.len() * 3);
    for &l in labels {
        let c = palette.colors.get(l as usize).ok_or(Error::LabelOutOfRange { label: l, classes: palette.len() })?;
        out.extend_from_slice(c);
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SegScores {
    pub pixel_acc: f64,
    pub class_acc: f64,
    pub mean_iou: f64,
}

/// Counts of (ground truth, prediction) pairs, accumulated over any
/// number of images.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Confusion {
    classes: usize,
    ignore: Option<u32>,
    /// Row = ground truth, column = prediction.
    counts: Vec<u64>,
}

impl Confusion {
    pub fn new(classes: usize, ignore: Option<u32>) -> Self {
        Confusion { classes, ignore, counts: vec![0; classes * classes] }
    }

    pub fn count(&self, gt: usize, pred: usize) -> u64 {
        self.counts[gt * self.classes + pred]
    }

    /// Adds one image. Pixels whose ground truth is the ignore class are
    /// skipped.
    pub fn add(&mut self, pred: &[u32], gt: &[u32]) -> Result<()> {
        check_same(pred.len(), gt.len())?;
        for (&p, &g) in pred.iter().zip(gt) {
            if Some(g) == self.ignore {
                continue;
            }
            for l in [p, g] {
                if l as usize >= self.classes {
                    return Err(Error::LabelOutOfRange { label: l, classes: self.classes });
                }
            }
            self.counts[g as usize * self.classes + p as usize] += 1;
        }
        Ok(())
    }

    pub fn merge(&mut self, other: &Confusion) {
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
    }

    /// Pixel accuracy over counted pixels; class accuracy averaged over
    /// classes present in the ground truth; IoU averaged over classes with
    /// a non-empty union. The ignore class never enters an average.
    pub fn scores(&self) -> SegScores {
        let n = self.classes;
        let total: u64 = self.counts.iter().sum();
        let diag: u64 = (0..n).map(|c| self.count(c, c)).sum();
        let (mut acc_sum, mut acc_n, mut iou_sum, mut iou_n) = (0.0, 0usize, 0.0, 0usize);
        for c in 0..n {
            if Some(c as u32) == self.ignore {
                continue;
            }
            let tp = self.count(c, c);
            let gt: u64 = (0..n).map(|p| self.count(c, p)).sum();
            let pred: u64 = (0..n).map(|g| self.count(g, c)).sum();
            if gt > 0 {
                acc_sum += tp as f64 / gt as f64;
                acc_n += 1;
            }
            let union = gt + pred - tp;
            if union > 0 {
                iou_sum += tp as f64 / union as f64;
                iou_n += 1;
            }
        }
        let ratio = |a: f64, b: usize| if b == 0 { 0.0 } else { a / b as f64 };
        SegScores {
            pixel_acc: ratio(diag as f64, total as usize),
            class_acc: ratio(acc_sum, acc_n),
            mean_iou: ratio(iou_sum, iou_n),
        }
    }
}

/// Scores of a single label-map pair.
pub fn segmentation_scores(pred: &[u32], gt: &[u32], classes: usize, ignore: Option<u32>) -> Result<SegScores> {
    let mut c = Confusion::new(classes, ignore);
    c.add(pred, gt)?;
    Ok(c.scores())
}

/// Mean of pixel accuracy, class accuracy and mean IoU.
pub fn aggregate_score(s: &SegScores) -> f64 {
    (s.pixel_acc + s.class_acc + s.mean_iou) / 3.0
}

/// Number of pixels whose largest channel deviation is strictly below
/// `delta`, and the pixel count.
pub fn map_hits(pred: &[u8], gt: &[u8], delta: f64) -> Result<(u64, u64)> {
    check_same(pred.len(), gt.len())?;
    let n = check_rgb(gt.len())?;
    if !(delta > 0.0) {
        return Err(Error::InvalidConfig(format!("delta must be positive, got {delta}")));
    }
    let hits = pred
        .chunks_exact(3)
        .zip(gt.chunks_exact(3))
        .filter(|(p, g)| {
            let dev = (0..3).map(|k| p[k].abs_diff(g[k])).max().unwrap_or(0);
            (dev as f64) < delta
        })
        .count();
    Ok((hits as u64, n as u64))
}

/// Fraction of pixels whose largest channel deviation is strictly below
/// `delta` (8-bit units).
pub fn map_accuracy(pred: &[u8], gt: &[u8], delta: f64) -> Result<f64> {
    let (hits, n) = map_hits(pred, gt, delta)?;
    Ok(if n == 0 { 1.0 } else { hits as f64 / n as f64 })
}

/// Sum of squared channel deviations and the value count, for pooling
/// over several images.
pub fn squared_error(pred: &[u8], gt: &[u8]) -> Result<(f64, u64)> {
    check_same(pred.len(), gt.len())?;
    let sse = pred.iter().zip(gt).map(|(&p, &g)| { let d = p as f64 - g as f64; d * d }).sum();
    Ok((sse, gt.len() as u64))
}

/// Root mean squared channel deviation in 8-bit units.
pub fn rmse(pred: &[u8], gt: &[u8]) -> Result<f64> {
    let (sse, n) = squared_error(pred, gt)?;
    Ok(if n == 0 { 0.0 } else { num_traits::Float::sqrt(sse / n as f64) })
}
