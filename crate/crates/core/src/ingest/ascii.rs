use std::fs;
use std::path::{Path, PathBuf};

use chrono::{NaiveDate, TimeDelta};
use serde::Deserialize;

use super::IngestError;
use crate::time::{parse_timestamp, parse_time_units, TimeEncoding};

/// How a row's time is spelled in a granule.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TimeColumns {
    /// One ISO-8601 cell.
    Iso { column: usize },
    /// Year, 1-based day of year, and (possibly fractional) hour of day.
    YearDoyHour { year: usize, doy: usize, hour: usize },
    /// A number in its own `units since epoch` encoding.
    Offset { column: usize, units: String },
}

impl TimeColumns {
    fn columns(&self) -> Vec<usize> {
        match self {
            TimeColumns::Iso { column } | TimeColumns::Offset { column, .. } => vec![*column],
            TimeColumns::YearDoyHour { year, doy, hour } => vec![*year, *doy, *hour],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
pub struct ValueColumn {
    pub column: usize,
    /// Sentinel that marks a missing value in the source; stored as NaN.
    #[serde(default)]
    pub fill: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct AsciiTableSchema {
    /// Field separator; any whitespace character means "runs of whitespace".
    #[serde(default = "default_delimiter")]
    pub delimiter: char,
    #[serde(default)]
    pub header_lines: usize,
    /// Exact field count per row, when the format fixes it.
    #[serde(default)]
    pub field_count: Option<usize>,
    pub time: TimeColumns,
    #[serde(default)]
    pub values: Vec<ValueColumn>,
}

fn default_delimiter() -> char {
    ','
}

impl AsciiTableSchema {
    pub fn validate(&self) -> Result<(), IngestError> {
        let bad = |why: String| IngestError::Manifest(format!("schema: {why}"));
        if self.values.is_empty() {
            return Err(bad("at least one value column is required".into()));
        }
        let mut cols = self.time.columns();
        cols.extend(self.values.iter().map(|v| v.column));
        let mut sorted = cols.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != cols.len() {
            return Err(bad(format!("column indices must be distinct, got {cols:?}")));
        }
        if let TimeColumns::Offset { units, .. } = &self.time {
            parse_time_units(units).map_err(|e| bad(e.to_string()))?;
        }
        if let Some(n) = self.field_count {
            if sorted.last().is_some_and(|&max| max >= n) {
                return Err(bad(format!("field_count {n} is smaller than the columns used")));
            }
        }
        Ok(())
    }

    fn min_fields(&self) -> usize {
        let mut cols = self.time.columns();
        cols.extend(self.values.iter().map(|v| v.column));
        cols.into_iter().max().map_or(0, |m| m + 1)
    }

    fn split<'a>(&self, line: &'a str) -> Vec<&'a str> {
        if self.delimiter.is_whitespace() {
            line.split_whitespace().collect()
        } else {
            line.split(self.delimiter).map(str::trim).collect()
        }
    }
}

/// A row that was not ingested.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuarantinedRow {
    pub path: PathBuf,
    /// 1-based line number in the granule.
    pub line: usize,
    pub reason: String,
}

/// Rows parsed from one granule: times in the output encoding and one value
/// vector per schema value column, sentinels already replaced by NaN.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GranuleFragment {
    pub times: Vec<f64>,
    /// 1-based source line of each row.
    pub lines: Vec<usize>,
    pub values: Vec<Vec<f64>>,
    pub quarantined: Vec<QuarantinedRow>,
}

impl GranuleFragment {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

pub fn read_ascii_granule(
    path: &Path,
    schema: &AsciiTableSchema,
    enc: &TimeEncoding,
) -> Result<GranuleFragment, IngestError> {
    let text = fs::read_to_string(path).map_err(|e| IngestError::io(path, e))?;
    parse_ascii_granule(&text, path, schema, enc)
}

/// [`read_ascii_granule`] on text already in memory; `path` is only used in
/// quarantine records.
pub fn parse_ascii_granule(
    text: &str,
    path: &Path,
    schema: &AsciiTableSchema,
    enc: &TimeEncoding,
) -> Result<GranuleFragment, IngestError> {
    let source_enc = match &schema.time {
        TimeColumns::Offset { units, .. } => Some(parse_time_units(units)?),
        _ => None,
    };
    let min_fields = schema.min_fields();
    let mut frag = GranuleFragment {
        values: vec![Vec::new(); schema.values.len()],
        ..Default::default()
    };
    let mut data_lines = 0usize;
    let mut wrong_shape = 0usize;
    let mut last_time = f64::NEG_INFINITY;

    for (idx, line) in text.lines().enumerate().skip(schema.header_lines) {
        if line.trim().is_empty() {
            continue;
        }
        data_lines += 1;
        let mut quarantine = |reason: String| {
            frag.quarantined.push(QuarantinedRow {
                path: path.to_owned(),
                line: idx + 1,
                reason,
            })
        };
        let cells = schema.split(line);
        let shape_ok = match schema.field_count {
            Some(n) => cells.len() == n,
            None => cells.len() >= min_fields,
        };
        if !shape_ok {
            wrong_shape += 1;
            quarantine(format!("found {} fields", cells.len()));
            continue;
        }
        let Some(t) = row_time(&cells, &schema.time, source_enc.as_ref(), enc) else {
            quarantine("unparseable time".into());
            continue;
        };
        let mut row = Vec::with_capacity(schema.values.len());
        for vc in &schema.values {
            match cells[vc.column].parse::<f64>() {
                Ok(v) if vc.fill.is_some_and(|f| v == f) => row.push(f64::NAN),
                Ok(v) => row.push(v),
                Err(_) => break,
            }
        }
        if row.len() != schema.values.len() {
            quarantine(format!("unparseable value in column {}", schema.values[row.len()].column));
            continue;
        }
        if !(t > last_time) {
            quarantine("time does not increase".into());
            continue;
        }
        last_time = t;
        frag.times.push(t);
        frag.lines.push(idx + 1);
        for (col, v) in frag.values.iter_mut().zip(row) {
            col.push(v);
        }
    }

    if data_lines > 0 && wrong_shape * 2 > data_lines {
        return Err(IngestError::SchemaMismatch {
            path: path.to_owned(),
            bad: wrong_shape,
            total: data_lines,
        });
    }
    Ok(frag)
}

fn row_time(
    cells: &[&str],
    spec: &TimeColumns,
    source_enc: Option<&TimeEncoding>,
    enc: &TimeEncoding,
) -> Option<f64> {
    match spec {
        TimeColumns::Iso { column } => parse_timestamp(cells[*column]).ok().map(|t| enc.offset_of(t)),
        TimeColumns::YearDoyHour { year, doy, hour } => {
            let y: i32 = cells[*year].parse().ok()?;
            let d: u32 = cells[*doy].parse().ok()?;
            let h: f64 = cells[*hour].parse().ok()?;
            if !(0.0..24.0).contains(&h) {
                return None;
            }
            let date = NaiveDate::from_yo_opt(y, d)?;
            let ms = (h * 3_600_000.0).round() as i64;
            let t = date.and_hms_opt(0, 0, 0)? + TimeDelta::try_milliseconds(ms)?;
            Some(enc.offset_of(t))
        }
        TimeColumns::Offset { column, .. } => {
            let x: f64 = cells[*column].parse().ok().filter(|x: &f64| x.is_finite())?;
            let src = source_enc?;
            let shift = enc.offset_of(src.epoch);
            Some(shift + x * src.unit.seconds() / enc.unit.seconds())
        }
    }
}
