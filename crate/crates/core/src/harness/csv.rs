//! CSV schemas.
//!
//! `metrics.csv`, one row per (scheme, seed, slot), sorted in that order:
//!
//! ```text
//! scheme,seed,slot,delay_ms,hit_rate,caching_fraction,local_caching_gain,n_cached,reward,loss
//! ```
//!
//! `sweep_<P>.csv`, one row per (value, scheme, seed), and
//! `sweep_<P>_summary.csv`, one row per (value, scheme):
//!
//! ```text
//! parameter,value,scheme,seed,mean_delay_ms,mean_local_caching_gain
//! parameter,value,scheme,seeds,mean_delay_ms,std_delay_ms,mean_local_caching_gain,std_local_caching_gain
//! ```
//!
//! Reals use Rust's shortest round-trip formatting with a `.` separator;
//! `NaN` marks an undefined loss.

use std::path::Path;

use super::experiment::MetricRecord;
use super::sweep::{SweepRow, SweepSummary};
use crate::{Error, Result};

pub const METRICS_HEADER: [&str; 10] = [
    "scheme",
    "seed",
    "slot",
    "delay_ms",
    "hit_rate",
    "caching_fraction",
    "local_caching_gain",
    "n_cached",
    "reward",
    "loss",
];

pub const SWEEP_HEADER: [&str; 6] = [
    "parameter",
    "value",
    "scheme",
    "seed",
    "mean_delay_ms",
    "mean_local_caching_gain",
];

pub const SUMMARY_HEADER: [&str; 8] = [
    "parameter",
    "value",
    "scheme",
    "seeds",
    "mean_delay_ms",
    "std_delay_ms",
    "mean_local_caching_gain",
    "std_local_caching_gain",
];

fn csv_err(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::io(path, source),
        other => Error::Schema(format!("{}: {other:?}", path.display())),
    }
}

fn write_rows<const W: usize>(path: &Path, header: [&str; W], rows: impl Iterator<Item = [String; W]>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(header).map_err(|e| csv_err(path, e))?;
    for row in rows {
        w.write_record(&row).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_metrics(path: &Path, records: &[MetricRecord]) -> Result<()> {
    write_rows(
        path,
        METRICS_HEADER,
        records.iter().map(|r| {
            [
                r.scheme.clone(),
                r.seed.to_string(),
                r.slot.to_string(),
                r.delay_ms.to_string(),
                r.hit_rate.to_string(),
                r.caching_fraction.to_string(),
                r.local_caching_gain.to_string(),
                r.n_cached.to_string(),
                r.reward.to_string(),
                r.loss.to_string(),
            ]
        }),
    )
}

pub fn write_sweep(path: &Path, rows: &[SweepRow]) -> Result<()> {
    write_rows(
        path,
        SWEEP_HEADER,
        rows.iter().map(|r| {
            [
                r.parameter.clone(),
                r.value.to_string(),
                r.scheme.clone(),
                r.seed.to_string(),
                r.mean_delay_ms.to_string(),
                r.mean_local_caching_gain.to_string(),
            ]
        }),
    )
}

pub fn write_summary(path: &Path, rows: &[SweepSummary]) -> Result<()> {
    write_rows(
        path,
        SUMMARY_HEADER,
        rows.iter().map(|r| {
            [
                r.parameter.clone(),
                r.value.to_string(),
                r.scheme.clone(),
                r.seeds.to_string(),
                r.mean_delay_ms.to_string(),
                r.std_delay_ms.to_string(),
                r.mean_local_caching_gain.to_string(),
                r.std_local_caching_gain.to_string(),
            ]
        }),
    )
}

/// A CSV file read as strings, with its header checked against one schema.
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<csv::StringRecord>,
}

pub fn read_table(path: &Path) -> Result<Table> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let header = r
        .headers()
        .map_err(|e| csv_err(path, e))?
        .iter()
        .map(str::to_string)
        .collect::<Vec<_>>();
    let rows = r
        .records()
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| csv_err(path, e))?;
    Ok(Table { header, rows })
}

fn field<T: std::str::FromStr>(path: &Path, rec: &csv::StringRecord, i: usize, name: &str, line: usize) -> Result<T> {
    rec.get(i)
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::Schema(format!("{} line {line}: bad {name} '{}'", path.display(), rec.get(i).unwrap_or(""))))
}

pub fn read_metrics(path: &Path) -> Result<Vec<MetricRecord>> {
    let table = read_table(path)?;
    if table.header != METRICS_HEADER {
        return Err(Error::Schema(format!(
            "{}: header {:?} does not match metrics schema {METRICS_HEADER:?}",
            path.display(),
            table.header
        )));
    }
    table
        .rows
        .iter()
        .enumerate()
        .map(|(i, rec)| {
            let line = i + 2;
            Ok(MetricRecord {
                scheme: rec.get(0).unwrap_or("").to_string(),
                seed: field(path, rec, 1, "seed", line)?,
                slot: field(path, rec, 2, "slot", line)?,
                delay_ms: field(path, rec, 3, "delay_ms", line)?,
                hit_rate: field(path, rec, 4, "hit_rate", line)?,
                caching_fraction: field(path, rec, 5, "caching_fraction", line)?,
                local_caching_gain: field(path, rec, 6, "local_caching_gain", line)?,
                n_cached: field(path, rec, 7, "n_cached", line)?,
                reward: field(path, rec, 8, "reward", line)?,
                loss: field(path, rec, 9, "loss", line)?,
            })
        })
        .collect()
}

pub fn read_summary(path: &Path) -> Result<Vec<SweepSummary>> {
    let table = read_table(path)?;
    if table.header != SUMMARY_HEADER {
        return Err(Error::Schema(format!(
            "{}: header {:?} does not match sweep summary schema {SUMMARY_HEADER:?}",
            path.display(),
            table.header
        )));
    }
    table
        .rows
        .iter()
        .enumerate()
        .map(|(i, rec)| {
            let line = i + 2;
            Ok(SweepSummary {
                parameter: rec.get(0).unwrap_or("").to_string(),
                value: field(path, rec, 1, "value", line)?,
                scheme: rec.get(2).unwrap_or("").to_string(),
                seeds: field(path, rec, 3, "seeds", line)?,
                mean_delay_ms: field(path, rec, 4, "mean_delay_ms", line)?,
                std_delay_ms: field(path, rec, 5, "std_delay_ms", line)?,
                mean_local_caching_gain: field(path, rec, 6, "mean_local_caching_gain", line)?,
                std_local_caching_gain: field(path, rec, 7, "std_local_caching_gain", line)?,
            })
        })
        .collect()
}
