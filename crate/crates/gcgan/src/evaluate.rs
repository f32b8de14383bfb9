//! Scoring a folder of translations against a folder of references.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use gcgan_core::data::resize_labels_nearest;
use gcgan_core::eval::{aggregate_score, map_accuracy, rgb_to_labels, rmse, Confusion, LabelPalette, SegScores};
use image::RgbImage;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::images::{decode, file_name, list_images};

/// Map-mode thresholds used when none are given.
pub const DEFAULT_DELTAS: [f64; 2] = [5.0, 10.0];

/// Reads `class_id r g b name [ignore]` rows; `#` starts a comment. At
/// most one row may carry the `ignore` marker.
pub fn parse_palette(text: &str, origin: &str) -> Result<LabelPalette> {
    let mut entries = Vec::new();
    let mut ignore = None;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |msg: String| Error::Config { origin: origin.into(), line: i + 1, msg };
        let cols: Vec<&str> = line.split_whitespace().collect();
        if cols.len() < 5 || cols.len() > 6 {
            return Err(err(format!("expected `class_id r g b name [ignore]`, got `{line}`")));
        }
        let id: u32 = cols[0].parse().map_err(|_| err(format!("bad class id `{}`", cols[0])))?;
        let mut rgb = [0u8; 3];
        for k in 0..3 {
            rgb[k] = cols[1 + k].parse().map_err(|_| err(format!("bad colour component `{}`", cols[1 + k])))?;
        }
        if let Some(&flag) = cols.get(5) {
            if flag != "ignore" {
                return Err(err(format!("unexpected `{flag}` (only `ignore` may follow the name)")));
            }
            if ignore.replace(id).is_some() {
                return Err(err("more than one ignore class".into()));
            }
        }
        entries.push((id, rgb, cols[4].to_string()));
    }
    Ok(LabelPalette::new(entries, ignore)?)
}

pub fn load_palette(path: &Path) -> Result<LabelPalette> {
    let text = fs::read_to_string(path).map_err(Error::io(path))?;
    parse_palette(&text, &path.display().to_string())
}

#[derive(Clone, Debug)]
pub enum Mode {
    /// Label images painted with a palette. `upsample` resizes predicted
    /// label maps to the reference size with nearest neighbour.
    Parsing { palette: LabelPalette, upsample: bool },
    /// Colour maps compared pixel by pixel.
    Map { deltas: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ImageScore {
    pub name: String,
    #[serde(flatten)]
    pub parsing: Option<ParsingScore>,
    pub map_accuracy: Vec<(f64, f64)>,
    pub rmse: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ParsingScore {
    pub pixel_acc: f64,
    pub class_acc: f64,
    pub mean_iou: f64,
    pub score: f64,
}

impl From<SegScores> for ParsingScore {
    fn from(s: SegScores) -> Self {
        ParsingScore { pixel_acc: s.pixel_acc, class_acc: s.class_acc, mean_iou: s.mean_iou, score: aggregate_score(&s) }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Report {
    pub mode: &'static str,
    pub images: Vec<ImageScore>,
    /// Parsing: scores of the confusion matrix pooled over all images.
    /// Map: accuracies and RMSE averaged over images.
    pub overall: ImageScore,
}

fn pair_files(pred: &Path, gt: &Path) -> Result<Vec<String>> {
    let names = |d: &Path| -> Result<BTreeSet<String>> { Ok(list_images(d)?.iter().map(|p| file_name(p)).collect()) };
    let (p, g) = (names(pred)?, names(gt)?);
    let missing_gt: Vec<String> = p.difference(&g).cloned().collect();
    if !missing_gt.is_empty() {
        return Err(Error::Unmatched { dir: gt.to_path_buf(), names: missing_gt });
    }
    let missing_pred: Vec<String> = g.difference(&p).cloned().collect();
    if !missing_pred.is_empty() {
        return Err(Error::Unmatched { dir: pred.to_path_buf(), names: missing_pred });
    }
    Ok(p.into_iter().collect())
}

fn rgb(path: &Path) -> Result<RgbImage> {
    Ok(decode(path)?.to_rgb8())
}

fn size_mismatch(name: &str, a: &RgbImage, b: &RgbImage) -> Error {
    Error::Invalid(format!(
        "{name}: prediction is {}x{}, reference is {}x{}",
        a.width(),
        a.height(),
        b.width(),
        b.height()
    ))
}

pub fn evaluate_dirs(pred: &Path, gt: &Path, mode: &Mode) -> Result<Report> {
    let names = pair_files(pred, gt)?;
    let mut images = Vec::new();
    match mode {
        Mode::Parsing { palette, upsample } => {
            let mut pooled = Confusion::new(palette.len(), palette.ignore());
            for name in &names {
                let (p, g) = (rgb(&pred.join(name))?, rgb(&gt.join(name))?);
                let mut lp = rgb_to_labels(p.as_raw(), palette)?;
                let lg = rgb_to_labels(g.as_raw(), palette)?;
                if p.dimensions() != g.dimensions() {
                    if !upsample {
                        return Err(size_mismatch(name, &p, &g));
                    }
                    let (w, h) = (p.width() as usize, p.height() as usize);
                    lp = resize_labels_nearest(&lp, h, w, g.height() as usize, g.width() as usize);
                }
                let mut c = Confusion::new(palette.len(), palette.ignore());
                c.add(&lp, &lg)?;
                pooled.merge(&c);
                images.push(ImageScore {
                    name: name.clone(),
                    parsing: Some(c.scores().into()),
                    map_accuracy: vec![],
                    rmse: None,
                });
            }
            let overall =
                ImageScore { name: "overall".into(), parsing: Some(pooled.scores().into()), map_accuracy: vec![], rmse: None };
            Ok(Report { mode: "parsing", images, overall })
        }
        Mode::Map { deltas } => {
            for name in &names {
                let (p, g) = (rgb(&pred.join(name))?, rgb(&gt.join(name))?);
                if p.dimensions() != g.dimensions() {
                    return Err(size_mismatch(name, &p, &g));
                }
                let acc = deltas
                    .iter()
                    .map(|&d| Ok((d, map_accuracy(p.as_raw(), g.as_raw(), d)?)))
                    .collect::<Result<Vec<_>>>()?;
                images.push(ImageScore {
                    name: name.clone(),
                    parsing: None,
                    map_accuracy: acc,
                    rmse: Some(rmse(p.as_raw(), g.as_raw())?),
                });
            }
            let n = images.len() as f64;
            let map_accuracy = deltas
                .iter()
                .enumerate()
                .map(|(k, &d)| (d, images.iter().map(|s| s.map_accuracy[k].1).sum::<f64>() / n))
                .collect();
            let rmse = images.iter().filter_map(|s| s.rmse).sum::<f64>() / n;
            let overall = ImageScore { name: "overall".into(), parsing: None, map_accuracy, rmse: Some(rmse) };
            Ok(Report { mode: "map", images, overall })
        }
    }
}

impl Report {
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let deltas: Vec<f64> = self.overall.map_accuracy.iter().map(|(d, _)| *d).collect();
        let mut header = vec!["name".to_string()];
        if self.mode == "parsing" {
            header.extend(["pixel_acc", "class_acc", "mean_iou", "score"].map(String::from));
        } else {
            header.extend(deltas.iter().map(|d| format!("acc_delta_{d}")));
            header.push("rmse".into());
        }
        let err = |e: csv::Error| Error::Invalid(e.to_string());
        w.write_record(&header).map_err(err)?;
        for s in self.images.iter().chain(std::iter::once(&self.overall)) {
            let mut row = vec![s.name.clone()];
            if let Some(p) = &s.parsing {
                row.extend([p.pixel_acc, p.class_acc, p.mean_iou, p.score].map(|v| v.to_string()));
            } else {
                row.extend(s.map_accuracy.iter().map(|(_, a)| a.to_string()));
                row.push(s.rmse.map(|r| r.to_string()).unwrap_or_default());
            }
            w.write_record(&row).map_err(err)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Invalid(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
    }

    /// Writes `<stem>.csv` and `<stem>.json`.
    pub fn save(&self, stem: &Path) -> Result<()> {
        let csv_path = stem.with_extension("csv");
        fs::write(&csv_path, self.to_csv()?).map_err(Error::io(&csv_path))?;
        let json_path = stem.with_extension("json");
        let json = serde_json::to_string_pretty(self).map_err(|e| Error::Invalid(e.to_string()))?;
        fs::write(&json_path, json).map_err(Error::io(&json_path))
    }
}
