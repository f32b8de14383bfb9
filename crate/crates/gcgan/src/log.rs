//! Per-step CSV training log.

use std::fs::{File, OpenOptions};
use std::path::Path;

use gcgan_core::training::StepRecord;

use crate::error::{Error, Result};

pub const COLUMNS: [&str; 10] =
    ["step", "epoch", "lr", "gan_g", "gan_d", "geo", "cycle", "distance", "identity", "total_g"];

pub struct StepLog {
    writer: csv::Writer<File>,
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |e| Error::Io { path: path.to_path_buf(), source: std::io::Error::other(e) }
}

impl StepLog {
    /// Creates `path`, or appends to it when `append` is set and it exists.
    pub fn open(path: &Path, append: bool) -> Result<Self> {
        let existing = append && path.exists();
        let file = OpenOptions::new()
            .create(true)
            .write(true)
            .append(existing)
            .truncate(!existing)
            .open(path)
            .map_err(Error::io(path))?;
        let mut writer = csv::WriterBuilder::new().has_headers(false).from_writer(file);
        if !existing {
            writer.write_record(COLUMNS).map_err(csv_err(path))?;
        }
        Ok(StepLog { writer })
    }

    pub fn write(&mut self, r: &StepRecord) -> Result<()> {
        let opt = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
        let rep = &r.report;
        let row = [
            r.step.to_string(),
            r.epoch.to_string(),
            r.lr.to_string(),
            rep.gan_g.to_string(),
            rep.gan_d.to_string(),
            rep.geo.to_string(),
            opt(rep.cycle),
            opt(rep.distance),
            opt(rep.identity),
            rep.total_g.to_string(),
        ];
        self.writer.write_record(&row).map_err(|e| Error::Invalid(e.to_string()))
    }

    pub fn flush(&mut self) -> Result<()> {
        self.writer.flush().map_err(|e| Error::Invalid(e.to_string()))
    }
}

/// One parsed log row.
#[derive(Clone, Debug, PartialEq)]
pub struct LogRow {
    pub step: usize,
    pub epoch: usize,
    pub lr: f64,
    pub gan_g: f64,
    pub gan_d: f64,
    pub geo: f64,
    pub cycle: Option<f64>,
    pub distance: Option<f64>,
    pub identity: Option<f64>,
    pub total_g: f64,
}

pub fn read(path: &Path) -> Result<Vec<LogRow>> {
    let mut reader = csv::Reader::from_path(path).map_err(csv_err(path))?;
    let bad = |msg: String| Error::Invalid(format!("{}: {msg}", path.display()));
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(csv_err(path))?;
        let f = |i: usize| -> Result<f64> { rec[i].parse().map_err(|_| bad(format!("bad number `{}`", &rec[i]))) };
        let o = |i: usize| -> Result<Option<f64>> { if rec[i].is_empty() { Ok(None) } else { f(i).map(Some) } };
        rows.push(LogRow {
            step: f(0)? as usize,
            epoch: f(1)? as usize,
            lr: f(2)?,
            gan_g: f(3)?,
            gan_d: f(4)?,
            geo: f(5)?,
            cycle: o(6)?,
            distance: o(7)?,
            identity: o(8)?,
            total_g: f(9)?,
        });
    }
    Ok(rows)
}
