//! NcML metadata with the TSDS conventions, and the catalog of served datasets.
//!
//! Only the element/attribute subset used by TSDS documents is understood:
//! a root `<netcdf>` with the dataset attributes, an optional
//! `<aggregation type="union">` of `<netcdf>` blocks, and within each block
//! `<dimension>`, `<variable>`, `<attribute>` and uniform `<values>` elements.

mod catalog;
mod ncml;
mod tsds_id;

use std::io;
use std::path::PathBuf;

use chrono::NaiveDate;

pub use catalog::{scan_catalog, Catalog, CatalogEntry, QuarantinedEntry};
pub use ncml::{emit_ncml, parse_ncml};
pub use tsds_id::{format_tsds_id, parse_tsds_id, TsdsId};

use crate::store::{Md5Digest, SeriesLayout};
use crate::time::{TimeEncoding, TimeError};

/// IOSP tag for TSDB flat binary files.
pub const BIN_IOSP: &str = "tsdb.iosp.BinIOSP";
/// IOSP tag for delimited ASCII tables.
pub const ASCII_IOSP: &str = "tsds.iosp.AsciiIOSP";

#[derive(Debug, thiserror::Error)]
pub enum MetadataError {
    #[error("XmlMalformed: {0}")]
    XmlMalformed(String),
    #[error("MissingRequired: {0}")]
    MissingRequired(String),
    #[error("LengthMismatch: time axis has {time} samples but {variable} has {length}")]
    LengthMismatch {
        time: u64,
        variable: String,
        length: u64,
    },
    #[error("InvalidAttribute: {name}={value:?}: {reason}")]
    InvalidAttribute {
        name: String,
        value: String,
        reason: String,
    },
    #[error("MalformedId: {id:?}: {reason}")]
    MalformedId { id: String, reason: String },
    #[error(transparent)]
    Time(#[from] TimeError),
    #[error("NotFound: no dataset named {0:?}")]
    NotFound(String),
    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

impl MetadataError {
    pub fn name(&self) -> &'static str {
        match self {
            MetadataError::XmlMalformed(_) => "XmlMalformed",
            MetadataError::MissingRequired(_) => "MissingRequired",
            MetadataError::LengthMismatch { .. } => "LengthMismatch",
            MetadataError::InvalidAttribute { .. } => "InvalidAttribute",
            MetadataError::MalformedId { .. } => "MalformedId",
            MetadataError::Time(TimeError::UnknownUnit(_)) => "UnknownUnit",
            MetadataError::Time(TimeError::BadEpoch(_)) => "BadEpoch",
            MetadataError::Time(_) => "BadTimestamp",
            MetadataError::NotFound(_) => "NotFound",
            MetadataError::Io { .. } => "IoError",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DataType {
    TimeSeries,
    Vector,
    Spectrogram,
}

impl DataType {
    pub fn as_str(self) -> &'static str {
        match self {
            DataType::TimeSeries => "time_series",
            DataType::Vector => "vector",
            DataType::Spectrogram => "spectrogram",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "time_series" => Some(DataType::TimeSeries),
            "vector" => Some(DataType::Vector),
            "spectrogram" => Some(DataType::Spectrogram),
            _ => None,
        }
    }
}

/// Where a variable's (or an explicit time axis's) values come from.
#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    /// `<values start=.. increment=..>`: value i is `start + i * increment`.
    Inline { start: f64, increment: f64 },
    /// A TSDB `.bin` file.
    Binary { location: String, iosp: String },
    /// One column of a delimited text table.
    Ascii {
        location: String,
        iosp: String,
        column: usize,
        delimiter: char,
        header_lines: usize,
    },
}

impl DataSource {
    pub fn binary(location: impl Into<String>) -> Self {
        DataSource::Binary {
            location: location.into(),
            iosp: BIN_IOSP.to_owned(),
        }
    }

    pub fn location(&self) -> Option<&str> {
        match self {
            DataSource::Inline { .. } => None,
            DataSource::Binary { location, .. } | DataSource::Ascii { location, .. } => {
                Some(location)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TimeAxis {
    Uniform {
        start: f64,
        increment: f64,
        length: u64,
    },
    /// Time stamps stored in a file (binary or ASCII column).
    Explicit { source: DataSource, length: u64 },
}

impl TimeAxis {
    pub fn len(&self) -> u64 {
        match self {
            TimeAxis::Uniform { length, .. } | TimeAxis::Explicit { length, .. } => *length,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Time of sample `i` on a uniform axis.
    pub fn uniform_time(start: f64, increment: f64, i: u64) -> f64 {
        start + i as f64 * increment
    }
}

#[derive(Debug, Clone)]
pub struct VariableSpec {
    pub name: String,
    pub long_name: String,
    pub units: String,
    pub fill_value: f64,
    /// C-style format bodies, either one for all components or one per component.
    pub cformat: Option<Vec<String>>,
    pub layout: SeriesLayout,
    pub source: DataSource,
    /// Attributes not interpreted by TSDS, kept in document order.
    pub extra: Vec<(String, String)>,
}

impl VariableSpec {
    pub fn scalar(name: impl Into<String>, units: impl Into<String>, source: DataSource) -> Self {
        let name = name.into();
        VariableSpec {
            long_name: name.clone(),
            name,
            units: units.into(),
            fill_value: f64::NAN,
            cformat: None,
            layout: SeriesLayout::scalar(),
            source,
            extra: Vec::new(),
        }
    }

    /// Format fragment for component `i`, if any.
    pub fn cformat_for(&self, i: usize) -> Option<&str> {
        let list = self.cformat.as_ref()?;
        match list.len() {
            1 => Some(&list[0]),
            _ => list.get(i).map(String::as_str),
        }
    }
}

impl PartialEq for VariableSpec {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name
            && self.long_name == other.long_name
            && self.units == other.units
            && (self.fill_value == other.fill_value
                || (self.fill_value.is_nan() && other.fill_value.is_nan()))
            && self.cformat == other.cformat
            && self.layout == other.layout
            && self.source == other.source
            && self.extra == other.extra
    }
}

/// Everything TSDS needs to serve one dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetDescriptor {
    pub title: String,
    pub conventions: String,
    pub tsds_id: Option<TsdsId>,
    pub science_metadata: Option<String>,
    pub data_type: DataType,
    pub start_date: NaiveDate,
    pub stop_date: NaiveDate,
    pub md5: Option<Md5Digest>,
    pub points_per_day: Option<f64>,
    pub time_encoding: TimeEncoding,
    pub time_axis: TimeAxis,
    pub variables: Vec<VariableSpec>,
    pub extra: Vec<(String, String)>,
}

impl DatasetDescriptor {
    pub fn variable(&self, name: &str) -> Option<&VariableSpec> {
        self.variables.iter().find(|v| v.name == name)
    }

    pub fn validate(&self) -> Result<(), MetadataError> {
        if self.start_date > self.stop_date {
            return Err(MetadataError::InvalidAttribute {
                name: "StartDate".into(),
                value: self.start_date.to_string(),
                reason: format!("after StopDate {}", self.stop_date),
            });
        }
        if self.variables.is_empty() {
            return Err(MetadataError::MissingRequired("no data variable".into()));
        }
        if let TimeAxis::Uniform { increment, .. } = self.time_axis {
            if !(increment > 0.0) {
                return Err(MetadataError::InvalidAttribute {
                    name: "increment".into(),
                    value: increment.to_string(),
                    reason: "time increment must be positive".into(),
                });
            }
        }
        if let Some(ppd) = self.points_per_day {
            if !(ppd > 0.0) {
                return Err(MetadataError::InvalidAttribute {
                    name: "PointsPerDay".into(),
                    value: ppd.to_string(),
                    reason: "must be positive".into(),
                });
            }
        }
        for v in &self.variables {
            v.layout.validate().map_err(|e| MetadataError::InvalidAttribute {
                name: v.name.clone(),
                value: String::new(),
                reason: e.to_string(),
            })?;
            if let Some(list) = &v.cformat {
                if list.len() != 1 && list.len() != v.layout.components {
                    return Err(MetadataError::InvalidAttribute {
                        name: "cformatstring".into(),
                        value: list.join(","),
                        reason: format!(
                            "expected 1 or {} fragments for {}",
                            v.layout.components, v.name
                        ),
                    });
                }
            }
        }
        Ok(())
    }
}
