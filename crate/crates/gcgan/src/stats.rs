//! Distance statistics as a small `key = value` text file.

use std::path::Path;

use gcgan_core::losses::DistanceStats;

use crate::config::key_values;
use crate::error::{Error, Result};

pub fn render(s: &DistanceStats) -> String {
    let mut out = format!("mu_x = {}\nsigma_x = {}\nmu_y = {}\nsigma_y = {}\n", s.mu_x, s.sigma_x, s.mu_y, s.sigma_y);
    if let Some(f) = s.sigma_floor {
        out.push_str(&format!("sigma_floor = {f}\n"));
    }
    out
}

/// Reads the four moments; `sigma_floor` is optional and absent means a
/// zero sigma is an error at use.
pub fn parse(text: &str, origin: &str) -> Result<DistanceStats> {
    let mut vals: [Option<f64>; 5] = [None; 5];
    const KEYS: [&str; 5] = ["mu_x", "sigma_x", "mu_y", "sigma_y", "sigma_floor"];
    for (line, k, v) in key_values(text, origin)? {
        let err = |msg: String| Error::Config { origin: origin.into(), line, msg };
        let i = KEYS.iter().position(|&n| n == k).ok_or_else(|| err(format!("unknown key `{k}`")))?;
        vals[i] = Some(v.parse().map_err(|_| err(format!("`{k}` expects a number, got `{v}`")))?);
    }
    let get = |i: usize| {
        vals[i].ok_or_else(|| Error::Config { origin: origin.into(), line: 0, msg: format!("missing `{}`", KEYS[i]) })
    };
    Ok(DistanceStats { mu_x: get(0)?, sigma_x: get(1)?, mu_y: get(2)?, sigma_y: get(3)?, sigma_floor: vals[4] })
}

pub fn save(path: &Path, s: &DistanceStats) -> Result<()> {
    std::fs::write(path, render(s)).map_err(Error::io(path))
}

pub fn load(path: &Path) -> Result<DistanceStats> {
    let text = std::fs::read_to_string(path).map_err(Error::io(path))?;
    parse(&text, &path.display().to_string())
}
