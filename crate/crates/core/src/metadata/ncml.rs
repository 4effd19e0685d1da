use std::collections::HashMap;
use std::fmt::Write as _;

use roxmltree::{Document, Node};

use super::{
    DataSource, DataType, DatasetDescriptor, MetadataError, TimeAxis, VariableSpec, ASCII_IOSP,
    BIN_IOSP,
};
use crate::store::{LayoutKind, Md5Digest, SeriesLayout};
use crate::time::{parse_date, parse_time_units};

const NCML_NS: &str = "http://www.unidata.ucar.edu/namespaces/netcdf/ncml-2.2";
const TIME_VAR: &str = "time";

const ROOT_KNOWN: &[&str] = &[
    "title",
    "Conventions",
    "TSDSID",
    "ScienceMetaData",
    "DataType",
    "StartDate",
    "StopDate",
    "MD5",
    "PointsPerDay",
];
const VAR_KNOWN: &[&str] = &[
    "long_name",
    "units",
    "_FillValue",
    "cformatstring",
    "componentLabels",
    "column",
];

fn missing(what: impl Into<String>) -> MetadataError {
    MetadataError::MissingRequired(what.into())
}

fn invalid(name: &str, value: &str, reason: impl Into<String>) -> MetadataError {
    MetadataError::InvalidAttribute {
        name: name.to_owned(),
        value: value.to_owned(),
        reason: reason.into(),
    }
}

fn is(node: &Node, tag: &str) -> bool {
    node.is_element() && node.tag_name().name() == tag
}

/// `<attribute name=.. value=..>` children of `node`, in order.
fn attributes<'a>(node: Node<'a, 'a>) -> Vec<(&'a str, &'a str)> {
    node.children()
        .filter(|c| is(c, "attribute"))
        .filter_map(|c| Some((c.attribute("name")?, c.attribute("value").unwrap_or(""))))
        .collect()
}

fn parse_f64(name: &str, value: &str) -> Result<f64, MetadataError> {
    value
        .trim()
        .parse()
        .map_err(|_| invalid(name, value, "not a number"))
}

fn parse_u64(name: &str, value: &str) -> Result<u64, MetadataError> {
    value
        .trim()
        .parse()
        .map_err(|_| invalid(name, value, "not a non-negative integer"))
}

struct Dimension {
    length: u64,
}

struct Block<'a> {
    node: Node<'a, 'a>,
    location: Option<&'a str>,
    iosp: Option<&'a str>,
    attrs: Vec<(&'a str, &'a str)>,
    dims: Vec<(&'a str, Dimension)>,
}

impl<'a> Block<'a> {
    fn read(node: Node<'a, 'a>) -> Result<Self, MetadataError> {
        let mut dims = Vec::new();
        for d in node.children().filter(|c| is(c, "dimension")) {
            let name = d.attribute("name").ok_or_else(|| missing("dimension name"))?;
            let length = parse_u64("length", d.attribute("length").unwrap_or(""))?;
            dims.push((name, Dimension { length }));
        }
        Ok(Block {
            node,
            location: node.attribute("location"),
            iosp: node.attribute("iosp"),
            attrs: attributes(node),
            dims,
        })
    }

    fn attr(&self, name: &str) -> Option<&'a str> {
        self.attrs.iter().find(|(n, _)| *n == name).map(|(_, v)| *v)
    }

    fn variables(&self) -> impl Iterator<Item = Node<'a, 'a>> {
        self.node.children().filter(|c| is(c, "variable"))
    }
}

/// Parses an NcML document following the TSDS conventions.
pub fn parse_ncml(text: &str) -> Result<DatasetDescriptor, MetadataError> {
    let doc = Document::parse(text).map_err(|e| MetadataError::XmlMalformed(e.to_string()))?;
    let root = doc.root_element();
    if root.tag_name().name() != "netcdf" {
        return Err(MetadataError::XmlMalformed(format!(
            "root element is <{}>, expected <netcdf>",
            root.tag_name().name()
        )));
    }

    let mut title = String::new();
    let mut conventions = String::new();
    let mut tsds_id = None;
    let mut science_metadata = None;
    let mut data_type = None;
    let mut start_date = None;
    let mut stop_date = None;
    let mut md5 = None;
    let mut points_per_day = None;
    let mut extra = Vec::new();
    for (name, value) in attributes(root) {
        match name {
            "title" => title = value.to_owned(),
            "Conventions" => conventions = value.to_owned(),
            "TSDSID" => tsds_id = Some(value.parse()?),
            "ScienceMetaData" => science_metadata = Some(value.to_owned()),
            "DataType" => {
                data_type = Some(DataType::parse(value).ok_or_else(|| {
                    missing(format!(
                        "DataType {value:?} is not one of time_series, vector, spectrogram"
                    ))
                })?)
            }
            "StartDate" => {
                start_date = Some(parse_date(value).ok_or_else(|| invalid(name, value, "expected YYYY-MM-DD"))?)
            }
            "StopDate" => {
                stop_date = Some(parse_date(value).ok_or_else(|| invalid(name, value, "expected YYYY-MM-DD"))?)
            }
            "MD5" => {
                md5 = Some(
                    value
                        .parse::<Md5Digest>()
                        .map_err(|e| invalid(name, value, e.to_string()))?,
                )
            }
            "PointsPerDay" => points_per_day = Some(parse_f64(name, value)?),
            _ => extra.push((name.to_owned(), value.to_owned())),
        }
    }
    let data_type = data_type.ok_or_else(|| missing("DataType attribute"))?;
    let start_date = start_date.ok_or_else(|| missing("StartDate attribute"))?;
    let stop_date = stop_date.ok_or_else(|| missing("StopDate attribute"))?;

    let block_nodes: Vec<Node> = match root.children().find(|c| is(c, "aggregation")) {
        Some(agg) => {
            if let Some(kind) = agg.attribute("type") {
                if kind != "union" {
                    return Err(invalid("aggregation type", kind, "only union is supported"));
                }
            }
            agg.children().filter(|c| is(c, "netcdf")).collect()
        }
        None => vec![root],
    };
    let blocks = block_nodes
        .into_iter()
        .map(Block::read)
        .collect::<Result<Vec<_>, _>>()?;
    let all_dims: HashMap<&str, u64> = blocks
        .iter()
        .flat_map(|b| b.dims.iter().map(|(n, d)| (*n, d.length)))
        .collect();

    // Time variable first: it fixes the length every data variable must match.
    let (time_block, time_node) = blocks
        .iter()
        .find_map(|b| {
            b.variables()
                .find(|v| v.attribute("name") == Some(TIME_VAR))
                .map(|v| (b, v))
        })
        .ok_or_else(|| missing("time variable"))?;
    let time_attrs = attributes(time_node);
    let time_units = time_attrs
        .iter()
        .find(|(n, _)| *n == "units")
        .map(|(_, v)| *v)
        .ok_or_else(|| missing("units attribute on time variable"))?;
    let time_encoding = parse_time_units(time_units)?;
    let time_length = record_length(time_block, time_node, &all_dims)?
        .ok_or_else(|| missing("time dimension length"))?;
    let time_axis = match uniform_values(time_node)? {
        Some((start, increment)) => TimeAxis::Uniform {
            start,
            increment,
            length: time_length,
        },
        None => TimeAxis::Explicit {
            source: file_source(time_block, &time_attrs, TIME_VAR)?
                .ok_or_else(|| missing("time variable has neither values nor location"))?,
            length: time_length,
        },
    };

    let mut variables = Vec::new();
    for block in &blocks {
        for node in block.variables() {
            let name = node.attribute("name").ok_or_else(|| missing("variable name"))?;
            if name == TIME_VAR {
                continue;
            }
            let var = parse_variable(block, node, name, data_type, &all_dims)?;
            let length = record_length(block, node, &all_dims)?.unwrap_or(time_length);
            if length != time_length {
                return Err(MetadataError::LengthMismatch {
                    time: time_length,
                    variable: name.to_owned(),
                    length,
                });
            }
            variables.push(var);
        }
    }
    if variables.is_empty() {
        return Err(missing("data variable"));
    }

    let descriptor = DatasetDescriptor {
        title,
        conventions,
        tsds_id,
        science_metadata,
        data_type,
        start_date,
        stop_date,
        md5,
        points_per_day,
        time_encoding,
        time_axis,
        variables,
        extra,
    };
    descriptor.validate()?;
    Ok(descriptor)
}

/// Length of a variable's first (record) dimension: the block's own first
/// dimension if it declares one, otherwise the named dimension anywhere.
fn record_length(
    block: &Block,
    var: Node,
    all_dims: &HashMap<&str, u64>,
) -> Result<Option<u64>, MetadataError> {
    if let Some((_, d)) = block.dims.first() {
        return Ok(Some(d.length));
    }
    let shape = var.attribute("shape").unwrap_or(TIME_VAR);
    let first = shape.split_whitespace().next().unwrap_or(TIME_VAR);
    Ok(all_dims.get(first).copied())
}

fn uniform_values(var: Node) -> Result<Option<(f64, f64)>, MetadataError> {
    let Some(values) = var.children().find(|c| is(c, "values")) else {
        return Ok(None);
    };
    let start = parse_f64("start", values.attribute("start").unwrap_or("0"))?;
    let increment = parse_f64(
        "increment",
        values
            .attribute("increment")
            .ok_or_else(|| missing("values increment"))?,
    )?;
    Ok(Some((start, increment)))
}

fn file_source(
    block: &Block,
    var_attrs: &[(&str, &str)],
    var_name: &str,
) -> Result<Option<DataSource>, MetadataError> {
    let Some(location) = block.location else {
        return Ok(None);
    };
    let iosp = match block.iosp {
        Some(tag) => tag,
        None if location.ends_with(".bin") => BIN_IOSP,
        None => ASCII_IOSP,
    };
    match iosp {
        BIN_IOSP => Ok(Some(DataSource::Binary {
            location: location.to_owned(),
            iosp: iosp.to_owned(),
        })),
        ASCII_IOSP => {
            let column = var_attrs
                .iter()
                .find(|(n, _)| *n == "column")
                .map(|(_, v)| *v)
                .ok_or_else(|| missing(format!("column attribute on ASCII variable {var_name}")))?;
            let column = parse_u64("column", column)? as usize;
            let delimiter = match block.attr("delimiter") {
                None => ',',
                Some(d) => {
                    let mut chars = d.chars();
                    match (chars.next(), chars.next()) {
                        (Some(c), None) => c,
                        _ => return Err(invalid("delimiter", d, "expected a single character")),
                    }
                }
            };
            let header_lines = match block.attr("headerLines") {
                None => 0,
                Some(h) => parse_u64("headerLines", h)? as usize,
            };
            Ok(Some(DataSource::Ascii {
                location: location.to_owned(),
                iosp: iosp.to_owned(),
                column,
                delimiter,
                header_lines,
            }))
        }
        other => Err(invalid("iosp", other, "unsupported IOSP")),
    }
}

fn parse_variable(
    block: &Block,
    node: Node,
    name: &str,
    data_type: DataType,
    all_dims: &HashMap<&str, u64>,
) -> Result<VariableSpec, MetadataError> {
    let attrs = attributes(node);
    let mut long_name = String::new();
    let mut units = String::new();
    let mut fill_value = f64::NAN;
    let mut cformat = None;
    let mut labels = None;
    let mut extra = Vec::new();
    for (n, v) in &attrs {
        match *n {
            "long_name" => long_name = (*v).to_owned(),
            "units" => units = (*v).to_owned(),
            "_FillValue" => fill_value = parse_f64(n, v)?,
            "cformatstring" => {
                cformat = Some(v.split(',').map(|s| s.trim().to_owned()).collect::<Vec<_>>())
            }
            "componentLabels" => {
                labels = Some(v.split(',').map(|s| s.trim().to_owned()).collect::<Vec<_>>())
            }
            "column" => {}
            _ => extra.push(((*n).to_owned(), (*v).to_owned())),
        }
    }

    let shape: Vec<&str> = node
        .attribute("shape")
        .unwrap_or(TIME_VAR)
        .split_whitespace()
        .collect();
    let layout = match shape.len() {
        0 | 1 => SeriesLayout::scalar(),
        2 => {
            let k = block
                .dims
                .iter()
                .find(|(n, _)| *n == shape[1])
                .map(|(_, d)| d.length)
                .or_else(|| all_dims.get(shape[1]).copied())
                .ok_or_else(|| missing(format!("dimension {} for {name}", shape[1])))?;
            let kind = match data_type {
                DataType::Spectrogram => LayoutKind::Spectrogram,
                _ => LayoutKind::Vector,
            };
            SeriesLayout {
                kind,
                components: k as usize,
                labels: None,
            }
        }
        _ => return Err(invalid("shape", &shape.join(" "), "at most two dimensions are supported")),
    };
    let layout = match labels {
        Some(l) => layout.with_labels(l),
        None => layout,
    };

    let source = match uniform_values(node)? {
        Some((start, increment)) => DataSource::Inline { start, increment },
        None => file_source(block, &attrs, name)?
            .ok_or_else(|| missing(format!("variable {name} has neither values nor location")))?,
    };

    Ok(VariableSpec {
        name: name.to_owned(),
        long_name,
        units,
        fill_value,
        cformat,
        layout,
        source,
        extra,
    })
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\n' => out.push_str("&#10;"),
            '\r' => out.push_str("&#13;"),
            '\t' => out.push_str("&#9;"),
            c => out.push(c),
        }
    }
    out
}

fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "NaN".to_owned()
    } else {
        v.to_string()
    }
}

struct Writer {
    out: String,
}

impl Writer {
    fn line(&mut self, depth: usize, text: &str) {
        for _ in 0..depth {
            self.out.push_str("  ");
        }
        self.out.push_str(text);
        self.out.push('\n');
    }

    fn attr(&mut self, depth: usize, name: &str, value: &str) {
        self.line(
            depth,
            &format!("<attribute name=\"{}\" value=\"{}\"/>", escape(name), escape(value)),
        );
    }

    fn typed_attr(&mut self, depth: usize, name: &str, ty: &str, value: &str) {
        self.line(
            depth,
            &format!(
                "<attribute name=\"{}\" type=\"{ty}\" value=\"{}\"/>",
                escape(name),
                escape(value)
            ),
        );
    }

    fn open_block(&mut self, source: &DataSource) {
        let mut open = String::from("<netcdf");
        if let Some(location) = source.location() {
            let iosp = match source {
                DataSource::Binary { iosp, .. } | DataSource::Ascii { iosp, .. } => iosp,
                DataSource::Inline { .. } => unreachable!(),
            };
            let _ = write!(open, " location=\"{}\" iosp=\"{}\"", escape(location), escape(iosp));
        }
        open.push('>');
        self.line(2, &open);
        if let DataSource::Ascii {
            delimiter,
            header_lines,
            ..
        } = source
        {
            self.typed_attr(3, "delimiter", "String", &delimiter.to_string());
            self.typed_attr(3, "headerLines", "int", &header_lines.to_string());
        }
    }

    fn source_tail(&mut self, source: &DataSource) {
        match source {
            DataSource::Inline { start, increment } => self.line(
                4,
                &format!(
                    "<values increment=\"{}\" start=\"{}\"/>",
                    fmt_f64(*increment),
                    fmt_f64(*start)
                ),
            ),
            DataSource::Ascii { column, .. } => {
                self.typed_attr(4, "column", "int", &column.to_string())
            }
            DataSource::Binary { .. } => {}
        }
    }
}

/// Renders a descriptor as NcML. Output is deterministic; every data variable
/// gets its own `<netcdf>` block inside a union aggregation.
pub fn emit_ncml(d: &DatasetDescriptor) -> String {
    let mut w = Writer { out: String::new() };
    w.line(0, "<?xml version=\"1.0\" encoding=\"UTF-8\"?>");
    w.line(0, &format!("<netcdf xmlns=\"{NCML_NS}\">"));
    w.attr(1, "title", &d.title);
    w.attr(1, "Conventions", &d.conventions);
    if let Some(id) = &d.tsds_id {
        w.attr(1, "TSDSID", &id.to_string());
    }
    if let Some(url) = &d.science_metadata {
        w.attr(1, "ScienceMetaData", url);
    }
    w.attr(1, "DataType", d.data_type.as_str());
    w.attr(1, "StartDate", &d.start_date.format("%Y-%m-%d").to_string());
    w.attr(1, "StopDate", &d.stop_date.format("%Y-%m-%d").to_string());
    if let Some(md5) = &d.md5 {
        w.attr(1, "MD5", &md5.to_hex());
    }
    if let Some(ppd) = d.points_per_day {
        w.attr(1, "PointsPerDay", &fmt_f64(ppd));
    }
    for (name, value) in &d.extra {
        if !ROOT_KNOWN.contains(&name.as_str()) {
            w.attr(1, name, value);
        }
    }
    w.line(0, "");
    w.line(1, "<aggregation type=\"union\">");

    let length = d.time_axis.len();
    let time_dim = format!("<dimension name=\"time\" isUnlimited=\"true\" length=\"{length}\"/>");
    let time_source = match &d.time_axis {
        TimeAxis::Uniform {
            start, increment, ..
        } => DataSource::Inline {
            start: *start,
            increment: *increment,
        },
        TimeAxis::Explicit { source, .. } => source.clone(),
    };
    w.open_block(&time_source);
    w.line(3, &time_dim);
    w.line(3, "<variable name=\"time\" shape=\"time\" type=\"double\">");
    w.typed_attr(4, "long_name", "String", "time");
    w.typed_attr(4, "units", "String", d.time_encoding.units());
    w.source_tail(&time_source);
    w.line(3, "</variable>");
    w.line(2, "</netcdf>");

    for v in &d.variables {
        w.line(0, "");
        w.open_block(&v.source);
        w.line(3, &time_dim);
        let shape = if v.layout.components > 1 || v.layout.kind != LayoutKind::Scalar {
            let dim = match v.layout.kind {
                LayoutKind::Spectrogram => "bin",
                _ => "component",
            };
            w.line(
                3,
                &format!(
                    "<dimension name=\"{dim}\" isUnlimited=\"false\" length=\"{}\"/>",
                    v.layout.components
                ),
            );
            format!("time {dim}")
        } else {
            "time".to_owned()
        };
        w.line(
            3,
            &format!(
                "<variable name=\"{}\" shape=\"{shape}\" type=\"double\">",
                escape(&v.name)
            ),
        );
        w.typed_attr(4, "long_name", "String", &v.long_name);
        if let Some(list) = &v.cformat {
            w.typed_attr(4, "cformatstring", "String", &list.join(","));
        }
        w.typed_attr(4, "units", "String", &v.units);
        w.typed_attr(4, "_FillValue", "double", &fmt_f64(v.fill_value));
        if let Some(labels) = &v.layout.labels {
            w.typed_attr(4, "componentLabels", "String", &labels.join(","));
        }
        for (name, value) in &v.extra {
            if !VAR_KNOWN.contains(&name.as_str()) {
                w.typed_attr(4, name, "String", value);
            }
        }
        w.source_tail(&v.source);
        w.line(3, "</variable>");
        w.line(2, "</netcdf>");
    }
    w.line(0, "");
    w.line(1, "</aggregation>");
    w.line(0, "</netcdf>");
    w.out
}
