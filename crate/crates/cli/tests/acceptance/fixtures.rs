//! Dataset builders and a bare HTTP client shared by the criteria.

use std::io::{Read, Write};
use std::net::TcpStream;
use std::path::Path;

use tsds_core::metadata::{emit_ncml, parse_ncml, DataSource, TimeAxis, TsdsId};
use tsds_core::store::write_series;
use tsds_core::{DatasetDescriptor, NaiveDate, SeriesKey, SeriesLayout, TimeEncoding};

pub const EXAMPLE_NCML: &str = include_str!("../../../core/tests/fixtures/example.ncml");

/// One stored variable of a generated dataset.
pub struct Var<'a> {
    pub name: &'a str,
    pub components: usize,
    pub fill: f64,
    pub values: &'a [f64],
}

/// Writes one series file per variable plus a dataset document named after
/// `key`, on a uniform axis `start + i*increment` in `units`. Returns the
/// descriptor as written.
pub fn write_dataset(
    dir: &Path,
    key: &SeriesKey,
    units: &str,
    start: f64,
    increment: f64,
    len: u64,
    vars: &[Var],
) -> DatasetDescriptor {
    let mut d = parse_ncml(EXAMPLE_NCML).expect("example parses");
    let template = d.variables[0].clone();
    d.title = format!("{} fixture", key.stem());
    d.tsds_id = Some(TsdsId::new(key.clone(), NaiveDate::from_ymd_opt(2000, 1, 1).unwrap()));
    d.start_date = NaiveDate::from_ymd_opt(2000, 1, 1).unwrap();
    d.stop_date = d.start_date;
    d.md5 = None;
    d.points_per_day = None;
    d.time_encoding = units.parse::<TimeEncoding>().expect("units parse");
    d.time_axis = TimeAxis::Uniform { start, increment, length: len };
    d.variables.clear();
    for (i, v) in vars.iter().enumerate() {
        assert_eq!(v.values.len() as u64, len * v.components as u64, "{} length", v.name);
        let location = if i == 0 {
            key.bin_filename()
        } else {
            format!("{}_{}.bin", key.stem(), v.name)
        };
        let md5 = write_series(&dir.join(&location), v.values).expect("write series");
        if i == 0 {
            d.md5 = Some(md5);
        }
        let mut spec = template.clone();
        spec.name = v.name.to_owned();
        spec.long_name = v.name.to_owned();
        spec.units = "1".into();
        spec.cformat = None;
        spec.fill_value = v.fill;
        spec.layout = if v.components == 1 {
            SeriesLayout::scalar()
        } else {
            SeriesLayout::vector(v.components)
        };
        spec.source = DataSource::binary(location);
        d.variables.push(spec);
    }
    let text = emit_ncml(&d);
    std::fs::write(dir.join(key.ncml_filename()), &text).unwrap();
    parse_ncml(&text).expect("emitted document parses")
}

pub struct HttpResponse {
    pub status: u16,
    pub body: Vec<u8>,
}

/// A single HTTP/1.1 GET on a fresh connection. `base` is `http://host:port`.
pub fn http_get(base: &str, path: &str) -> HttpResponse {
    let authority = base.strip_prefix("http://").expect("http base url");
    let mut stream = TcpStream::connect(authority).expect("connect");
    write!(stream, "GET {path} HTTP/1.1\r\nHost: {authority}\r\nConnection: close\r\n\r\n").unwrap();
    let mut raw = Vec::new();
    stream.read_to_end(&mut raw).unwrap();
    let split = raw.windows(4).position(|w| w == b"\r\n\r\n").expect("header terminator");
    let head = String::from_utf8_lossy(&raw[..split]).into_owned();
    let status: u16 = head
        .split_whitespace()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .expect("status code");
    let mut body = raw[split + 4..].to_vec();
    if head.to_ascii_lowercase().contains("transfer-encoding: chunked") {
        body = dechunk(&body);
    }
    HttpResponse { status, body }
}

fn dechunk(mut data: &[u8]) -> Vec<u8> {
    let mut out = Vec::new();
    loop {
        let eol = data.windows(2).position(|w| w == b"\r\n").expect("chunk size line");
        let size_text = std::str::from_utf8(&data[..eol]).unwrap();
        let size = usize::from_str_radix(size_text.split(';').next().unwrap().trim(), 16).expect("chunk size");
        data = &data[eol + 2..];
        if size == 0 {
            return out;
        }
        out.extend_from_slice(&data[..size]);
        data = &data[size + 2..];
    }
}
