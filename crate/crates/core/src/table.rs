//! Time-aligned columns flowing from the store through the filter pipeline.

/// Row-major values for one variable: `components` values per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub components: usize,
    pub values: Vec<f64>,
}

impl Column {
    pub fn new(components: usize, values: Vec<f64>) -> Self {
        assert!(components > 0, "column needs at least one component");
        debug_assert_eq!(values.len() % components, 0);
        Column { components, values }
    }

    pub fn scalar(values: Vec<f64>) -> Self {
        Column::new(1, values)
    }

    /// Number of samples (rows).
    pub fn len(&self) -> usize {
        self.values.len() / self.components
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.components..(i + 1) * self.components]
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, f64> {
        self.values.chunks_exact(self.components)
    }

    pub fn take_rows(&self, rows: &[usize]) -> Column {
        let mut values = Vec::with_capacity(rows.len() * self.components);
        for &r in rows {
            values.extend_from_slice(self.row(r));
        }
        Column::new(self.components, values)
    }

    /// Bitwise comparison that treats NaN payloads as plain bits.
    pub fn bits_eq(&self, other: &Column) -> bool {
        self.components == other.components
            && self.values.len() == other.values.len()
            && self
                .values
                .iter()
                .zip(&other.values)
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

/// True when `value` is NaN or equal to a non-NaN fill sentinel.
pub fn is_missing(value: f64, fill: f64) -> bool {
    value.is_nan() || (!fill.is_nan() && value == fill)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TableColumn {
    pub name: String,
    pub fill_value: f64,
    pub data: Column,
    /// Per-element count of contributing inputs, set by the block filters.
    pub counts: Option<Vec<u64>>,
}

impl TableColumn {
    pub fn new(name: impl Into<String>, fill_value: f64, data: Column) -> Self {
        TableColumn {
            name: name.into(),
            fill_value,
            data,
            counts: None,
        }
    }

    pub fn components(&self) -> usize {
        self.data.components
    }

    pub fn is_missing(&self, value: f64) -> bool {
        is_missing(value, self.fill_value)
    }

    pub fn count_row(&self, i: usize) -> Option<&[u64]> {
        let k = self.data.components;
        self.counts.as_ref().map(|c| &c[i * k..(i + 1) * k])
    }

    fn take_rows(&self, rows: &[usize]) -> TableColumn {
        let counts = self.counts.as_ref().map(|c| {
            let k = self.data.components;
            rows.iter()
                .flat_map(|&r| c[r * k..(r + 1) * k].iter().copied())
                .collect()
        });
        TableColumn {
            name: self.name.clone(),
            fill_value: self.fill_value,
            data: self.data.take_rows(rows),
            counts,
        }
    }
}

/// Result of a query: a shared time axis (offsets in the dataset's time
/// encoding) and one column per variable.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ResultTable {
    pub times: Vec<f64>,
    pub columns: Vec<TableColumn>,
}

impl ResultTable {
    pub fn new(times: Vec<f64>) -> Self {
        ResultTable {
            times,
            columns: Vec::new(),
        }
    }

    pub fn with_column(mut self, column: TableColumn) -> Self {
        self.push_column(column);
        self
    }

    pub fn push_column(&mut self, column: TableColumn) {
        assert_eq!(
            column.data.len(),
            self.times.len(),
            "column {} does not share the time axis length",
            column.name
        );
        self.columns.push(column);
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn column(&self, name: &str) -> Option<&TableColumn> {
        self.columns.iter().find(|c| c.name == name)
    }

    pub fn column_names(&self) -> impl Iterator<Item = &str> {
        self.columns.iter().map(|c| c.name.as_str())
    }

    /// New table holding only the given rows, in the given order.
    pub fn take_rows(&self, rows: &[usize]) -> ResultTable {
        ResultTable {
            times: rows.iter().map(|&r| self.times[r]).collect(),
            columns: self.columns.iter().map(|c| c.take_rows(rows)).collect(),
        }
    }

    pub fn retain_rows(&self, keep: impl Fn(usize) -> bool) -> ResultTable {
        let rows: Vec<usize> = (0..self.len()).filter(|&i| keep(i)).collect();
        self.take_rows(&rows)
    }

    /// Keeps only the named columns, in the given order. Unknown names are ignored.
    pub fn project(mut self, names: &[&str]) -> ResultTable {
        let mut kept = Vec::with_capacity(names.len());
        for name in names {
            if let Some(pos) = self.columns.iter().position(|c| c.name == *name) {
                kept.push(self.columns.swap_remove(pos));
            }
        }
        self.columns = kept;
        self
    }

    /// Equality that treats NaN as equal to NaN (bitwise on values).
    pub fn bits_eq(&self, other: &ResultTable) -> bool {
        self.times.len() == other.times.len()
            && self
                .times
                .iter()
                .zip(&other.times)
                .all(|(a, b)| a.to_bits() == b.to_bits())
            && self.columns.len() == other.columns.len()
            && self.columns.iter().zip(&other.columns).all(|(a, b)| {
                a.name == b.name
                    && a.fill_value.to_bits() == b.fill_value.to_bits()
                    && a.counts == b.counts
                    && a.data.bits_eq(&b.data)
            })
    }
}
