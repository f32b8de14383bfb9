//! One-sided inference with `G_XY`.

use std::fs;
use std::path::Path;

use gcgan_core::models::{NetSpec, Network};
use gcgan_core::{GeoTransform, Tensor};
use serde::Serialize;

use crate::checkpoint;
use crate::error::{Error, Result};
use crate::images::{file_name, list_images, load_tensor, save_tensor};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TranslateSummary {
    pub written: usize,
    /// Mean over images of `mean|f(G(x)) - G(f(x))|` in `[-1, 1]` units,
    /// when a transform was given.
    pub residual: Option<f64>,
}

/// `mean|f(G(x)) - G(f(x))|` for one batch.
pub fn equivariance_residual(g: &Network<f32>, x: &Tensor<f32>, f: GeoTransform) -> Result<f64> {
    let moved = f.apply(&g.infer(x)?);
    let direct = g.infer(&f.apply(x))?;
    Ok(moved.mean_abs_diff(&direct) as f64)
}

/// Translates every image in `input` into `output` under the same file
/// name. Images are resized to `size` when given.
pub fn translate_dir(
    ckpt: &Path,
    input: &Path,
    output: &Path,
    size: Option<(usize, usize)>,
    residual_transform: Option<GeoTransform>,
) -> Result<TranslateSummary> {
    let (g, _) = checkpoint::load_translator(ckpt)?;
    translate_with(&g, input, output, size, residual_transform)
}

pub fn translate_with(
    g: &Network<f32>,
    input: &Path,
    output: &Path,
    size: Option<(usize, usize)>,
    residual_transform: Option<GeoTransform>,
) -> Result<TranslateSummary> {
    let NetSpec::Generator(spec) = *g.spec() else {
        return Err(Error::Invalid("checkpoint network is not a generator".into()));
    };
    let files = list_images(input)?;
    fs::create_dir_all(output).map_err(Error::io(output))?;
    let mut residuals = Vec::new();
    for path in &files {
        let x = load_tensor(path, spec.in_channels, size)?;
        let y = g.infer(&x).map_err(|e| Error::Decode { path: path.clone(), msg: e.to_string() })?;
        save_tensor(&output.join(file_name(path)), &y, 0)?;
        if let Some(f) = residual_transform {
            let [_, _, h, w] = x.shape();
            if !f.swaps_axes() || h == w {
                residuals.push(equivariance_residual(g, &x, f)?);
            }
        }
    }
    let residual = (!residuals.is_empty()).then(|| residuals.iter().sum::<f64>() / residuals.len() as f64);
    Ok(TranslateSummary { written: files.len(), residual })
}
