use std::collections::BTreeMap;

use super::constraint::{BlockKind, Filter};
use super::QueryError;
use crate::table::{Column, ResultTable, TableColumn};

pub fn apply_filter(table: ResultTable, filter: &Filter) -> Result<ResultTable, QueryError> {
    match *filter {
        Filter::Stride(n) => filter_stride(table, n),
        Filter::Thin(n) => filter_thin(table, n),
        Filter::ReplaceMissing(v) => Ok(filter_replace_missing(table, v)),
        Filter::ExcludeMissing => Ok(filter_exclude_missing(table)),
        Filter::Block { kind, width } => filter_block(table, width, kind),
    }
}

/// Rows 0, n, 2n, ...
pub fn filter_stride(table: ResultTable, n: u64) -> Result<ResultTable, QueryError> {
    if n == 0 {
        return Err(QueryError::BadArg("stride must be at least 1".into()));
    }
    if n == 1 {
        return Ok(table);
    }
    let rows: Vec<usize> = (0..table.len()).step_by(n as usize).collect();
    Ok(table.take_rows(&rows))
}

/// The stride `thin(n)` applies to a table of `len` rows: `max(1, ceil(len / n))`.
pub fn thin_stride(len: u64, n: u64) -> u64 {
    len.div_ceil(n).max(1)
}

pub fn filter_thin(table: ResultTable, n: u64) -> Result<ResultTable, QueryError> {
    if n == 0 {
        return Err(QueryError::BadArg("thin target must be at least 1".into()));
    }
    let stride = thin_stride(table.len() as u64, n);
    filter_stride(table, stride)
}

/// Every missing element (NaN, or equal to the column's fill) becomes `v`.
pub fn filter_replace_missing(mut table: ResultTable, v: f64) -> ResultTable {
    for col in &mut table.columns {
        let fill = col.fill_value;
        for x in &mut col.data.values {
            if crate::table::is_missing(*x, fill) {
                *x = v;
            }
        }
    }
    table
}

/// Drops every row in which any component of any column is missing.
pub fn filter_exclude_missing(table: ResultTable) -> ResultTable {
    let complete = |i: usize| {
        table
            .columns
            .iter()
            .all(|c| c.data.row(i).iter().all(|&v| !c.is_missing(v)))
    };
    let rows: Vec<usize> = (0..table.len()).filter(|&i| complete(i)).collect();
    if rows.len() == table.len() {
        return table;
    }
    table.take_rows(&rows)
}

/// Window index of `t` for windows `[t0 + i*width, t0 + (i+1)*width)`, with
/// the edges computed exactly as written so membership never depends on
/// rounding in the division.
fn window_index(t: f64, t0: f64, width: f64) -> Option<i64> {
    let guess = ((t - t0) / width).floor();
    if !guess.is_finite() || guess.abs() > 1e15 {
        return None;
    }
    let edge = |i: i64| t0 + i as f64 * width;
    let mut i = guess as i64;
    while t < edge(i) {
        i -= 1;
    }
    while t >= edge(i + 1) {
        i += 1;
    }
    Some(i)
}

#[derive(Clone, Copy)]
struct Acc {
    sum: f64,
    min: f64,
    max: f64,
    count: u64,
}

impl Acc {
    const EMPTY: Acc = Acc {
        sum: 0.0,
        min: f64::INFINITY,
        max: f64::NEG_INFINITY,
        count: 0,
    };

    fn add(&mut self, v: f64) {
        self.sum += v;
        self.min = self.min.min(v);
        self.max = self.max.max(v);
        self.count += 1;
    }

    fn value(&self, kind: BlockKind) -> f64 {
        if kind == BlockKind::Count {
            return self.count as f64;
        }
        if self.count == 0 {
            return f64::NAN;
        }
        match kind {
            // The rounded quotient can land a hair outside the window's range;
            // the true mean cannot, so clamp back into it.
            BlockKind::Avg => (self.sum / self.count as f64).clamp(self.min, self.max),
            BlockKind::Min => self.min,
            BlockKind::Max => self.max,
            BlockKind::Count => unreachable!(),
        }
    }
}

/// Tumbling-window aggregation anchored at the first row's time. Only windows
/// holding at least one row are emitted, stamped with the window center.
/// Every output column carries per-element counts of the non-missing inputs;
/// a window with none yields NaN (or 0 for `bincount`).
pub fn filter_block(table: ResultTable, width: f64, kind: BlockKind) -> Result<ResultTable, QueryError> {
    if !(width > 0.0) || !width.is_finite() {
        return Err(QueryError::BadArg(format!("bin width must be positive, got {width}")));
    }
    let Some(&t0) = table.times.first() else {
        let mut empty = table;
        for c in &mut empty.columns {
            c.counts = Some(Vec::new());
        }
        return Ok(empty);
    };

    let mut windows: BTreeMap<i64, Vec<usize>> = BTreeMap::new();
    for (row, &t) in table.times.iter().enumerate() {
        if let Some(i) = window_index(t, t0, width) {
            windows.entry(i).or_default().push(row);
        }
    }

    let times = windows
        .keys()
        .map(|&i| t0 + (i as f64 + 0.5) * width)
        .collect();
    let mut out = ResultTable::new(times);
    for col in &table.columns {
        let k = col.components();
        let mut values = Vec::with_capacity(windows.len() * k);
        let mut counts = Vec::with_capacity(windows.len() * k);
        for rows in windows.values() {
            let mut accs = vec![Acc::EMPTY; k];
            for &r in rows {
                for (acc, &v) in accs.iter_mut().zip(col.data.row(r)) {
                    if !col.is_missing(v) {
                        acc.add(v);
                    }
                }
            }
            values.extend(accs.iter().map(|a| a.value(kind)));
            counts.extend(accs.iter().map(|a| a.count));
        }
        out.push_column(TableColumn {
            name: col.name.clone(),
            fill_value: col.fill_value,
            data: Column::new(k, values),
            counts: Some(counts),
        });
    }
    Ok(out)
}
