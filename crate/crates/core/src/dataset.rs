//! Survival data ingestion, normalization and discretization.
//!
//! Raw records carry an observed time (any nonnegative unit), an event flag
//! (`true` = failure observed, `false` = right-censored) and a covariate
//! vector. [`normalize`] maps them to the model's conventions: times scaled
//! into `(0, 1]` and discretized into `q` intervals, covariates centered and
//! scaled into the unit ball.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One row of raw input data, before normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct RawRecord {
    /// Observed time in original units; finite and `>= 0`.
    pub time: f64,
    /// `true` when the failure was observed, `false` when censored.
    pub event: bool,
    /// Covariate vector of length `p`.
    pub covariates: Vec<f64>,
}

/// One normalized record: covariates `x` with `‖x‖ <= 1`, sign label
/// `y = 2δ - 1` and discrete interval index `t` in `1..=q`.
#[derive(Debug, Clone, PartialEq)]
pub struct SurvivalRecord {
    pub x: Vec<f64>,
    pub y: i8,
    pub t: usize,
}

impl SurvivalRecord {
    pub fn new(x: Vec<f64>, event: bool, t: usize) -> Self {
        SurvivalRecord {
            x,
            y: if event { 1 } else { -1 },
            t,
        }
    }

    /// Event indicator `δ`.
    pub fn event(&self) -> bool {
        self.y > 0
    }

    /// The label as a float, `+1` for failure and `-1` for censoring.
    pub fn y_f64(&self) -> f64 {
        f64::from(self.y)
    }
}

/// Transform applied by [`normalize`], kept so new data can be mapped with
/// the same scaling as a stored fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationReport {
    /// Times were divided by this (the max raw time).
    pub time_scale: f64,
    /// Per-column covariate means subtracted before scaling.
    pub covariate_means: Vec<f64>,
    /// Common divisor bringing all centered covariate vectors into the unit
    /// ball.
    pub covariate_scale: f64,
}

impl NormalizationReport {
    /// Identity transform for data that is already normalized.
    pub fn identity(p: usize) -> Self {
        NormalizationReport {
            time_scale: 1.0,
            covariate_means: vec![0.0; p],
            covariate_scale: 1.0,
        }
    }
}

/// A normalized dataset ready for model fitting. Immutable after
/// construction and safe to share across threads.
#[derive(Debug, Clone, PartialEq)]
pub struct SurvivalDataset {
    pub records: Vec<SurvivalRecord>,
    pub q: usize,
    pub p: usize,
    pub normalization: NormalizationReport,
}

impl SurvivalDataset {
    pub fn n(&self) -> usize {
        self.records.len()
    }
}

/// Column mapping for [`load_csv`]. With `covariates = None`, every header
/// column other than time and event is treated as a covariate, in file order.
#[derive(Debug, Clone)]
pub struct CsvSchema {
    pub time: String,
    pub event: String,
    pub covariates: Option<Vec<String>>,
}

impl Default for CsvSchema {
    fn default() -> Self {
        CsvSchema {
            time: "time".into(),
            event: "event".into(),
            covariates: None,
        }
    }
}

/// Reads raw records from a UTF-8, comma-separated file with a header row.
///
/// The `event` column must contain literal `0` or `1`. Data rows are
/// numbered from 1 in error messages.
pub fn load_csv(path: &Path, schema: &CsvSchema) -> Result<Vec<RawRecord>> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    let headers = reader.headers()?.clone();
    let find = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let time_idx = find(&schema.time)?;
    let event_idx = find(&schema.event)?;
    let cov_idx: Vec<usize> = match &schema.covariates {
        Some(names) => names
            .iter()
            .map(|n| find(n))
            .collect::<Result<Vec<usize>>>()?,
        None => (0..headers.len())
            .filter(|&i| i != time_idx && i != event_idx)
            .collect(),
    };

    let mut records = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row = row?;
        let number = i + 1;
        let parse_cell = |idx: usize| -> Result<f64> {
            let cell = row.get(idx).ok_or_else(|| Error::Parse {
                row: number,
                msg: format!("row has only {} fields", row.len()),
            })?;
            let v: f64 = cell.trim().parse().map_err(|_| Error::Parse {
                row: number,
                msg: format!("cannot parse `{cell}` as a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::Value {
                    row: number,
                    msg: format!("non-finite value `{cell}`"),
                });
            }
            Ok(v)
        };

        let time = parse_cell(time_idx)?;
        if time < 0.0 {
            return Err(Error::Value {
                row: number,
                msg: format!("negative time {time}"),
            });
        }
        let event_raw = row.get(event_idx).unwrap_or("").trim();
        let event = match event_raw {
            "0" => false,
            "1" => true,
            other => {
                return Err(Error::Value {
                    row: number,
                    msg: format!("event value `{other}` not in {{0, 1}}"),
                })
            }
        };
        let covariates = cov_idx
            .iter()
            .map(|&idx| parse_cell(idx))
            .collect::<Result<Vec<f64>>>()?;
        records.push(RawRecord {
            time,
            event,
            covariates,
        });
    }
    Ok(records)
}

/// Writes raw records as CSV, covariate columns named `x1..xp`. Floats are
/// printed in shortest round-trip form, so reading the file back with
/// [`load_csv`] reproduces the records exactly.
pub fn write_csv<W: Write>(out: &mut W, records: &[RawRecord]) -> Result<()> {
    let p = records.first().map_or(0, |r| r.covariates.len());
    let mut header = vec!["time".to_string(), "event".to_string()];
    header.extend((1..=p).map(|j| format!("x{j}")));
    writeln!(out, "{}", header.join(","))?;
    for r in records {
        let mut fields = vec![format!("{}", r.time), format!("{}", u8::from(r.event))];
        fields.extend(r.covariates.iter().map(|v| format!("{v}")));
        writeln!(out, "{}", fields.join(","))?;
    }
    Ok(())
}

fn euclidean_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Maps a normalized time `u` in `[0, 1]` to its interval index.
fn interval_index(u: f64, q: usize) -> usize {
    ((u * q as f64).ceil() as usize).clamp(1, q)
}

/// Normalizes raw records: times are divided by the maximum observed time
/// and discretized as `t = max(1, ceil(u * q))`; covariates are centered per
/// column and divided by the largest centered norm so every `‖x‖ <= 1`.
///
/// A covariate block that is identical across records centers to zero and
/// keeps scale 1.
pub fn normalize(raw: &[RawRecord], q: usize) -> Result<SurvivalDataset> {
    if raw.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if q < 1 {
        return Err(Error::Config("number of intervals q must be >= 1".into()));
    }
    let p = raw[0].covariates.len();
    for (i, r) in raw.iter().enumerate() {
        if r.covariates.len() != p {
            return Err(Error::Shape(format!(
                "record {} has {} covariates, expected {p}",
                i + 1,
                r.covariates.len()
            )));
        }
        if !r.time.is_finite() || r.time < 0.0 {
            return Err(Error::Value {
                row: i + 1,
                msg: format!("invalid time {}", r.time),
            });
        }
        if r.covariates.iter().any(|v| !v.is_finite()) {
            return Err(Error::Value {
                row: i + 1,
                msg: "non-finite covariate".into(),
            });
        }
    }

    let time_scale = raw.iter().map(|r| r.time).fold(f64::NEG_INFINITY, f64::max);
    if time_scale <= 0.0 {
        return Err(Error::Value {
            row: 0,
            msg: format!("maximum time must be positive, got {time_scale}"),
        });
    }

    let mut means = vec![0.0; p];
    for r in raw {
        for (m, v) in means.iter_mut().zip(&r.covariates) {
            *m += v;
        }
    }
    for m in &mut means {
        *m /= raw.len() as f64;
    }

    let max_norm = raw
        .iter()
        .map(|r| {
            let centered: Vec<f64> = r
                .covariates
                .iter()
                .zip(&means)
                .map(|(v, m)| v - m)
                .collect();
            euclidean_norm(&centered)
        })
        .fold(0.0, f64::max);
    let covariate_scale = if max_norm > 0.0 { max_norm } else { 1.0 };

    let records = raw
        .iter()
        .map(|r| {
            let x: Vec<f64> = r
                .covariates
                .iter()
                .zip(&means)
                .map(|(v, m)| (v - m) / covariate_scale)
                .collect();
            SurvivalRecord::new(x, r.event, interval_index(r.time / time_scale, q))
        })
        .collect();

    Ok(SurvivalDataset {
        records,
        q,
        p,
        normalization: NormalizationReport {
            time_scale,
            covariate_means: means,
            covariate_scale,
        },
    })
}

/// Returns a copy of `ds` with the record at `index` replaced, leaving the
/// original untouched. This is how neighboring datasets are built for
/// privacy audits.
pub fn swap_record(
    ds: &SurvivalDataset,
    index: usize,
    replacement: SurvivalRecord,
) -> Result<SurvivalDataset> {
    if index >= ds.records.len() {
        return Err(Error::IndexOutOfRange {
            index,
            len: ds.records.len(),
        });
    }
    if replacement.x.len() != ds.p {
        return Err(Error::Shape(format!(
            "replacement has {} covariates, dataset has {}",
            replacement.x.len(),
            ds.p
        )));
    }
    if replacement.t < 1 || replacement.t > ds.q {
        return Err(Error::Shape(format!(
            "replacement interval {} outside 1..={}",
            replacement.t, ds.q
        )));
    }
    let mut out = ds.clone();
    out.records[index] = replacement;
    Ok(out)
}
