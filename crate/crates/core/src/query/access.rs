//! Accessors: turn a [`DataSource`] plus a sample range into values.

use std::ops::Range;

use super::QueryError;
use crate::metadata::{DataSource, TimeAxis};
use crate::store::{SeriesStore, StoreError};
use crate::time::{time_to_offset, TimeEncoding};

/// Reads samples `rows` of a source holding `components` values per sample.
/// Row-major output; samples past the end of a file come back as NaN.
///
/// ASCII cells that are not numbers but parse as ISO-8601 timestamps are
/// converted to offsets in `enc`, so a text time column works as a time axis.
pub fn read_source(
    source: &DataSource,
    components: usize,
    rows: Range<u64>,
    store: &dyn SeriesStore,
    enc: &TimeEncoding,
) -> Result<Vec<f64>, QueryError> {
    if rows.is_empty() {
        return Ok(Vec::new());
    }
    let k = components as u64;
    let elements = rows.start * k..rows.end * k;
    match source {
        DataSource::Inline { start, increment } => Ok(elements
            .map(|e| TimeAxis::uniform_time(*start, *increment, e))
            .collect()),
        DataSource::Binary { location, .. } => {
            let to_i64 = |x: u64| i64::try_from(x).map_err(|_| StoreError::RangeTooLarge(x));
            let block = store.read_elements(location, to_i64(elements.start)?, to_i64(elements.end - 1)?)?;
            Ok(block.values)
        }
        DataSource::Ascii {
            location,
            column,
            delimiter,
            header_lines,
            ..
        } => {
            let text = store.read_text(location)?;
            let mut out = Vec::with_capacity((elements.end - elements.start) as usize);
            let mut lines = text
                .lines()
                .skip(*header_lines)
                .filter(|l| !l.trim().is_empty())
                .skip(rows.start as usize);
            for _ in rows {
                let cells: Vec<&str> = match lines.next() {
                    None => Vec::new(),
                    Some(l) if delimiter.is_whitespace() => l.split_whitespace().collect(),
                    Some(l) => l.split(*delimiter).collect(),
                };
                for c in 0..components {
                    out.push(cells.get(column + c).map_or(f64::NAN, |cell| parse_cell(cell, enc)));
                }
            }
            Ok(out)
        }
    }
}

fn parse_cell(cell: &str, enc: &TimeEncoding) -> f64 {
    let cell = cell.trim();
    cell.parse()
        .ok()
        .or_else(|| time_to_offset(cell, enc).ok())
        .unwrap_or(f64::NAN)
}

/// Time offsets of samples `rows`.
pub fn read_times(
    axis: &TimeAxis,
    rows: Range<u64>,
    store: &dyn SeriesStore,
    enc: &TimeEncoding,
) -> Result<Vec<f64>, QueryError> {
    match axis {
        TimeAxis::Uniform {
            start, increment, ..
        } => Ok(rows
            .map(|i| TimeAxis::uniform_time(*start, *increment, i))
            .collect()),
        TimeAxis::Explicit { source, .. } => read_source(source, 1, rows, store, enc),
    }
}
