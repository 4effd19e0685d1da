//! Output encoders for dataset requests.
//!
//! Every tabular encoder sees the same column list: `time`, then one column
//! per value component (`B_0`, `B_1`, ... or `B_<label>` for labelled
//! vectors), each followed by `<column>_count` when a block filter produced
//! counts. `bin` writes those columns row by row as little-endian doubles,
//! time first, so it carries the same numbers as `json`.

use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use tsds_core::metadata::{DataSource, TimeAxis};
use tsds_core::query::FILTER_NAMES;
use tsds_core::store::encode_values;
use tsds_core::time::format_timestamp;
use tsds_core::{DatasetDescriptor, ResultTable, TimeEncoding};

use crate::cformat::{render_shortest, BadFormatFragment, CFormat};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suffix {
    Info,
    Html,
    Dds,
    Das,
    Asc,
    Csv,
    Dat,
    Bin,
    Json,
    Ncml,
}

pub const SUFFIXES: [&str; 10] = ["info", "html", "dds", "das", "asc", "csv", "dat", "bin", "json", "ncml"];

impl FromStr for Suffix {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        Ok(match s {
            "info" => Suffix::Info,
            "html" => Suffix::Html,
            "dds" => Suffix::Dds,
            "das" => Suffix::Das,
            "asc" => Suffix::Asc,
            "csv" => Suffix::Csv,
            "dat" => Suffix::Dat,
            "bin" => Suffix::Bin,
            "json" => Suffix::Json,
            "ncml" => Suffix::Ncml,
            _ => return Err(()),
        })
    }
}

impl Suffix {
    pub fn content_type(self) -> &'static str {
        match self {
            Suffix::Bin => "application/octet-stream",
            Suffix::Csv => "text/csv; charset=utf-8",
            Suffix::Json => "application/json",
            Suffix::Ncml => "text/xml; charset=utf-8",
            Suffix::Html => "text/html; charset=utf-8",
            Suffix::Info | Suffix::Dds | Suffix::Das | Suffix::Asc | Suffix::Dat => {
                "text/plain; charset=utf-8"
            }
        }
    }

    /// Whether the suffix needs the query to run.
    pub fn needs_data(self) -> bool {
        matches!(self, Suffix::Asc | Suffix::Csv | Suffix::Dat | Suffix::Bin | Suffix::Json)
    }
}

/// Where an output column's numbers come from.
#[derive(Debug, Clone)]
struct OutColumn {
    name: String,
    units: String,
    column: usize,
    component: usize,
    count: bool,
    format: Option<CFormat>,
}

impl OutColumn {
    fn value(&self, table: &ResultTable, row: usize) -> f64 {
        let col = &table.columns[self.column];
        if self.count {
            col.count_row(row).map_or(f64::NAN, |c| c[self.component] as f64)
        } else {
            col.data.row(row)[self.component]
        }
    }

    fn render(&self, table: &ResultTable, row: usize) -> String {
        let col = &table.columns[self.column];
        if self.count {
            return col.count_row(row).map_or_else(|| "NaN".into(), |c| c[self.component].to_string());
        }
        let v = col.data.row(row)[self.component];
        match &self.format {
            Some(f) => f.format(v),
            None => render_shortest(v),
        }
    }
}

fn out_columns(table: &ResultTable, d: &DatasetDescriptor) -> Result<Vec<OutColumn>, BadFormatFragment> {
    let mut out = Vec::new();
    for (ci, col) in table.columns.iter().enumerate() {
        let spec = d.variable(&col.name);
        let k = col.components();
        let labels = spec.and_then(|s| s.layout.labels.as_ref()).filter(|l| l.len() == k);
        for comp in 0..k {
            let name = match (k, labels) {
                (1, _) => col.name.clone(),
                (_, Some(l)) => format!("{}_{}", col.name, l[comp]),
                _ => format!("{}_{comp}", col.name),
            };
            let format = spec
                .and_then(|s| s.cformat_for(comp))
                .map(str::parse)
                .transpose()?;
            let units = spec.map(|s| s.units.clone()).unwrap_or_default();
            if col.counts.is_some() {
                out.push(OutColumn { name: name.clone(), units, column: ci, component: comp, count: false, format });
                out.push(OutColumn {
                    name: format!("{name}_count"),
                    units: "count".into(),
                    column: ci,
                    component: comp,
                    count: true,
                    format: None,
                });
            } else {
                out.push(OutColumn { name, units, column: ci, component: comp, count: false, format });
            }
        }
    }
    Ok(out)
}

/// ISO-8601 rendering of a time offset; offsets outside the calendar fall
/// back to the number itself.
pub fn render_time(t: f64, enc: &TimeEncoding) -> String {
    match enc.time_of(t) {
        Ok(dt) => format_timestamp(dt),
        Err(_) => render_shortest(t),
    }
}

pub fn encode_csv(table: &ResultTable, d: &DatasetDescriptor) -> Result<String, BadFormatFragment> {
    let cols = out_columns(table, d)?;
    let mut out = String::from("time");
    for c in &cols {
        out.push(',');
        out.push_str(&c.name);
    }
    out.push('\n');
    for (row, &t) in table.times.iter().enumerate() {
        out.push_str(&render_time(t, &d.time_encoding));
        for c in &cols {
            out.push(',');
            out.push_str(&c.render(table, row));
        }
        out.push('\n');
    }
    Ok(out)
}

/// Whitespace-aligned table: every column right-aligned to its widest cell.
pub fn encode_dat(table: &ResultTable, d: &DatasetDescriptor) -> Result<String, BadFormatFragment> {
    let cols = out_columns(table, d)?;
    let mut cells: Vec<Vec<String>> = Vec::with_capacity(table.len() + 1);
    cells.push(std::iter::once("time".to_owned()).chain(cols.iter().map(|c| c.name.clone())).collect());
    for (row, &t) in table.times.iter().enumerate() {
        let mut line = vec![render_time(t, &d.time_encoding)];
        line.extend(cols.iter().map(|c| c.render(table, row)));
        cells.push(line);
    }
    let widths: Vec<usize> = (0..=cols.len())
        .map(|i| cells.iter().map(|l| l[i].len()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for line in &cells {
        for (i, cell) in line.iter().enumerate() {
            if i > 0 {
                out.push_str("  ");
            }
            let _ = write!(out, "{cell:>w$}", w = widths[i]);
        }
        out.push('\n');
    }
    Ok(out)
}

/// Structure listing followed by one block per column: `name[n]` and then its
/// values on one line. Times are raw offsets, as declared in the structure.
pub fn encode_asc(name: &str, table: &ResultTable, d: &DatasetDescriptor) -> Result<String, BadFormatFragment> {
    let cols = out_columns(table, d)?;
    let mut out = String::from("Dataset {\n");
    let _ = writeln!(out, "    Float64 time[time = {}];", table.len());
    for c in &cols {
        let ty = if c.count { "UInt64" } else { "Float64" };
        let _ = writeln!(out, "    {ty} {}[time = {}];", c.name, table.len());
    }
    let _ = writeln!(out, "}} {name};");
    out.push_str("---------------------------------------------\n");
    let _ = writeln!(out, "time[{}]", table.len());
    let times: Vec<String> = table.times.iter().map(|&t| render_shortest(t)).collect();
    out.push_str(&times.join(", "));
    out.push('\n');
    for c in &cols {
        let _ = writeln!(out, "\n{}[{}]", c.name, table.len());
        let values: Vec<String> = (0..table.len()).map(|r| c.render(table, r)).collect();
        out.push_str(&values.join(", "));
        out.push('\n');
    }
    Ok(out)
}

/// Row-major doubles: time, then every output column.
pub fn encode_bin(table: &ResultTable, d: &DatasetDescriptor) -> Result<Vec<u8>, BadFormatFragment> {
    let cols = out_columns(table, d)?;
    let mut values = Vec::with_capacity(table.len() * (cols.len() + 1));
    for (row, &t) in table.times.iter().enumerate() {
        values.push(t);
        values.extend(cols.iter().map(|c| c.value(table, row)));
    }
    Ok(encode_values(&values))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JsonMetadata {
    pub title: String,
    #[serde(rename = "tsdsId")]
    pub tsds_id: Option<String>,
    pub columns: Vec<String>,
    pub units: Vec<String>,
}

/// A decoded `json` response. Values are `None` where the response had `null`.
#[derive(Debug, Clone, PartialEq)]
pub struct JsonTable {
    pub metadata: JsonMetadata,
    pub times: Vec<String>,
    pub rows: Vec<Vec<Option<f64>>>,
}

pub fn encode_json(table: &ResultTable, d: &DatasetDescriptor) -> Result<String, BadFormatFragment> {
    let cols = out_columns(table, d)?;
    let metadata = JsonMetadata {
        title: d.title.clone(),
        tsds_id: d.tsds_id.as_ref().map(|id| id.to_string()),
        columns: std::iter::once("time".to_owned()).chain(cols.iter().map(|c| c.name.clone())).collect(),
        units: std::iter::once(d.time_encoding.units().to_owned())
            .chain(cols.iter().map(|c| c.units.clone()))
            .collect(),
    };
    let mut out = String::from("{\"metadata\":");
    out.push_str(&serde_json::to_string(&metadata).expect("metadata serializes"));
    out.push_str(",\"data\":[");
    for (row, &t) in table.times.iter().enumerate() {
        if row > 0 {
            out.push(',');
        }
        out.push('[');
        out.push_str(&serde_json::Value::from(render_time(t, &d.time_encoding)).to_string());
        for c in &cols {
            out.push(',');
            let v = c.value(table, row);
            if c.count && v.is_finite() {
                let _ = write!(out, "{}", v as u64);
            } else {
                // NaN and infinities have no JSON spelling and become null.
                out.push_str(&serde_json::Value::from(v).to_string());
            }
        }
        out.push(']');
    }
    out.push_str("]}");
    Ok(out)
}

pub fn decode_json(text: &str) -> Result<JsonTable, serde_json::Error> {
    // Rows mix a time string with numbers and nulls, so read them loosely.
    #[derive(Deserialize)]
    struct Raw {
        metadata: JsonMetadata,
        data: Vec<Vec<serde_json::Value>>,
    }
    let raw: Raw = serde_json::from_str(text)?;
    let mut times = Vec::with_capacity(raw.data.len());
    let mut rows = Vec::with_capacity(raw.data.len());
    for row in raw.data {
        let mut cells = row.into_iter();
        times.push(serde_json::from_value(cells.next().unwrap_or_default())?);
        rows.push(cells.map(serde_json::from_value).collect::<Result<_, _>>()?);
    }
    Ok(JsonTable { metadata: raw.metadata, times, rows })
}

fn filter_list() -> String {
    FILTER_NAMES
        .iter()
        .map(|f| match *f {
            "exclude_missing" => "exclude_missing()".to_owned(),
            "replace_missing" => "replace_missing(value)".to_owned(),
            "stride" | "thin" => format!("{f}(n)"),
            _ => format!("{f}(width)"),
        })
        .collect::<Vec<_>>()
        .join(" ")
}

fn time_length(d: &DatasetDescriptor) -> u64 {
    d.time_axis.len()
}

pub fn encode_info(name: &str, d: &DatasetDescriptor) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "dataset: {name}");
    let _ = writeln!(out, "title: {}", d.title);
    if let Some(id) = &d.tsds_id {
        let _ = writeln!(out, "TSDSID: {id}");
    }
    let _ = writeln!(out, "DataType: {}", d.data_type.as_str());
    let _ = writeln!(out, "coverage: {} to {}", d.start_date, d.stop_date);
    let _ = writeln!(out, "time units: {}", d.time_encoding.units());
    let _ = writeln!(out, "samples: {}", time_length(d));
    if let TimeAxis::Uniform { start, increment, .. } = d.time_axis {
        let _ = writeln!(out, "time grid: start {} increment {}", render_shortest(start), render_shortest(increment));
    }
    if let Some(ppd) = d.points_per_day {
        let _ = writeln!(out, "PointsPerDay: {}", render_shortest(ppd));
    }
    if let Some(md5) = &d.md5 {
        let _ = writeln!(out, "MD5: {md5}");
    }
    if let Some(sci) = &d.science_metadata {
        let _ = writeln!(out, "ScienceMetaData: {sci}");
    }
    out.push_str("variables:\n");
    for v in &d.variables {
        let _ = write!(out, "  {} ({})", v.name, v.units);
        if v.long_name != v.name {
            let _ = write!(out, " {}", v.long_name);
        }
        if v.layout.components > 1 {
            let _ = write!(out, " [{} components]", v.layout.components);
        }
        out.push('\n');
    }
    let _ = writeln!(out, "filters: {}", filter_list());
    out.push_str("request: /tsds/{dataset}.{suffix}?var1,var2&time>=t1&time<t2&filter()\n");
    let _ = writeln!(out, "suffixes: {}", SUFFIXES.join(" "));
    out
}

fn dds_decl(out: &mut String, name: &str, components: usize) {
    if components > 1 {
        let _ = writeln!(out, "        Float64 {name}[{components}];");
    } else {
        let _ = writeln!(out, "        Float64 {name};");
    }
}

/// Structure of the sequence a request returns; `variables` limits it to a
/// projection.
pub fn encode_dds(name: &str, d: &DatasetDescriptor, variables: &[String]) -> String {
    let mut out = String::from("Dataset {\n    Sequence {\n        Float64 time;\n");
    for v in &d.variables {
        if variables.is_empty() || variables.contains(&v.name) {
            dds_decl(&mut out, &v.name, v.layout.components);
        }
    }
    let _ = writeln!(out, "    }} {name};\n}} {name};");
    out
}

fn quote(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

pub fn encode_das(d: &DatasetDescriptor) -> String {
    let mut out = String::from("Attributes {\n    NC_GLOBAL {\n");
    let attr = |out: &mut String, ty: &str, k: &str, v: String| {
        let _ = writeln!(out, "        {ty} {k} {v};");
    };
    attr(&mut out, "String", "title", quote(&d.title));
    attr(&mut out, "String", "Conventions", quote(&d.conventions));
    if let Some(id) = &d.tsds_id {
        attr(&mut out, "String", "TSDSID", quote(&id.to_string()));
    }
    if let Some(sci) = &d.science_metadata {
        attr(&mut out, "String", "ScienceMetaData", quote(sci));
    }
    attr(&mut out, "String", "DataType", quote(d.data_type.as_str()));
    attr(&mut out, "String", "StartDate", quote(&d.start_date.to_string()));
    attr(&mut out, "String", "StopDate", quote(&d.stop_date.to_string()));
    if let Some(md5) = &d.md5 {
        attr(&mut out, "String", "MD5", quote(&md5.to_string()));
    }
    if let Some(ppd) = d.points_per_day {
        attr(&mut out, "Float64", "PointsPerDay", render_shortest(ppd));
    }
    for (k, v) in &d.extra {
        attr(&mut out, "String", k, quote(v));
    }
    out.push_str("    }\n    time {\n");
    attr(&mut out, "String", "units", quote(d.time_encoding.units()));
    out.push_str("    }\n");
    for v in &d.variables {
        let _ = writeln!(out, "    {} {{", v.name);
        attr(&mut out, "String", "long_name", quote(&v.long_name));
        attr(&mut out, "String", "units", quote(&v.units));
        attr(&mut out, "Float64", "_FillValue", render_shortest(v.fill_value));
        if let Some(fmts) = &v.cformat {
            attr(&mut out, "String", "cformatstring", quote(&fmts.join(",")));
        }
        if let DataSource::Binary { location, .. } | DataSource::Ascii { location, .. } = &v.source {
            attr(&mut out, "String", "location", quote(location));
        }
        for (k, val) in &v.extra {
            attr(&mut out, "String", k, quote(val));
        }
        out.push_str("    }\n");
    }
    out.push_str("}\n");
    out
}

fn escape_html(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

pub fn encode_html(name: &str, d: &DatasetDescriptor) -> String {
    let n = escape_html(name);
    let mut out = String::from("<!DOCTYPE html>\n<html><head><meta charset=\"utf-8\">");
    let _ = write!(out, "<title>{}</title></head><body>\n", escape_html(&d.title));
    let _ = writeln!(out, "<h1>{}</h1>", escape_html(&d.title));
    let _ = writeln!(out, "<p>{} to {}</p>", d.start_date, d.stop_date);
    out.push_str("<ul>\n");
    for v in &d.variables {
        let _ = writeln!(out, "<li>{} ({})</li>", escape_html(&v.name), escape_html(&v.units));
    }
    out.push_str("</ul>\n<p>");
    for s in SUFFIXES.iter().filter(|s| **s != "html") {
        let _ = write!(out, "<a href=\"{n}.{s}\">{s}</a> ");
    }
    out.push_str("</p>\n</body></html>\n");
    out
}
