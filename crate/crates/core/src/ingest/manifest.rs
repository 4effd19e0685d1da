//! The per-dataset build manifest (TOML).
//!
//! ```toml
//! title = "Hourly station observations"     # optional, used in every NcML title
//! science_metadata = "https://example.org/"  # optional
//!
//! [key]
//! provider = "Demo"
//! dataset = "Station"
//!
//! [granules]
//! directory = "granules"        # relative to the manifest file
//! pattern = "%Y%m%d.csv"        # strftime fields; must vary at least per period
//! period = "day"                # or "month"
//! start = "2001-01-01"
//! stop = "2001-12-31"
//!
//! [schema]
//! delimiter = ","               # a space means runs of whitespace
//! header_lines = 1
//! field_count = 3               # optional; exact fields per row
//! time = { kind = "iso", column = 0 }
//! # time = { kind = "year_doy_hour", year = 0, doy = 1, hour = 2 }
//! # time = { kind = "offset", column = 0, units = "seconds since 2001-01-01" }
//!
//! [time]
//! units = "hours since 2001-01-01"
//! cadence = 1.0                 # optional; omit for a non-uniform time axis
//!
//! [[parameter]]
//! series = "T"                  # third field of the series key
//! name = "temperature"
//! column = 1                    # or columns = [1, 2, 3] for a vector
//! units = "K"
//! fill = -999.0                 # optional source sentinel
//! cformatstring = ".2f"         # optional
//! data_type = "vector"          # optional: time_series (default), vector, spectrogram
//! ```

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::Deserialize;

use super::ascii::{AsciiTableSchema, ValueColumn};
use super::template::{GranulePeriod, GranuleTemplate};
use super::IngestError;
use crate::metadata::DataType;
use crate::store::{check_field, SeriesLayout};
use crate::time::{parse_date, parse_time_units, TimeEncoding};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BuildManifest {
    #[serde(default)]
    pub title: Option<String>,
    #[serde(default)]
    pub science_metadata: Option<String>,
    pub key: KeySection,
    pub granules: GranuleSection,
    pub schema: AsciiTableSchema,
    pub time: TimeSection,
    #[serde(rename = "parameter")]
    pub parameters: Vec<ParameterSpec>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KeySection {
    pub provider: String,
    pub dataset: String,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GranuleSection {
    pub directory: PathBuf,
    pub pattern: String,
    pub period: GranulePeriod,
    pub start: String,
    pub stop: String,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSection {
    pub units: String,
    #[serde(default)]
    pub cadence: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParameterSpec {
    pub series: String,
    pub name: String,
    #[serde(default)]
    pub column: Option<usize>,
    #[serde(default)]
    pub columns: Option<Vec<usize>>,
    #[serde(default)]
    pub units: String,
    #[serde(default)]
    pub long_name: Option<String>,
    #[serde(default)]
    pub title: Option<String>,
    #[serde(default)]
    pub fill: Option<f64>,
    #[serde(default)]
    pub cformatstring: Option<String>,
    #[serde(default)]
    pub data_type: Option<String>,
    #[serde(default)]
    pub labels: Option<Vec<String>>,
}

impl ParameterSpec {
    pub fn source_columns(&self) -> Vec<usize> {
        match (&self.column, &self.columns) {
            (Some(c), _) => vec![*c],
            (None, Some(cs)) => cs.clone(),
            (None, None) => Vec::new(),
        }
    }

    pub fn data_type(&self) -> DataType {
        self.data_type
            .as_deref()
            .and_then(DataType::parse)
            .unwrap_or(if self.source_columns().len() > 1 {
                DataType::Vector
            } else {
                DataType::TimeSeries
            })
    }

    pub fn layout(&self) -> SeriesLayout {
        let k = self.source_columns().len();
        let layout = match self.data_type() {
            DataType::TimeSeries => SeriesLayout::scalar(),
            DataType::Vector => SeriesLayout::vector(k),
            DataType::Spectrogram => SeriesLayout::spectrogram(k),
        };
        match &self.labels {
            Some(labels) => layout.with_labels(labels.clone()),
            None => layout,
        }
    }
}

impl BuildManifest {
    /// Reads and validates a manifest; the granule directory is resolved
    /// against the manifest's own directory.
    pub fn load(path: &Path) -> Result<Self, IngestError> {
        let text = fs::read_to_string(path).map_err(|e| IngestError::io(path, e))?;
        let mut manifest = Self::parse(&text)?;
        if manifest.granules.directory.is_relative() {
            let base = path.parent().unwrap_or(Path::new("."));
            manifest.granules.directory = base.join(&manifest.granules.directory);
        }
        Ok(manifest)
    }

    pub fn parse(text: &str) -> Result<Self, IngestError> {
        let mut manifest: BuildManifest =
            toml::from_str(text).map_err(|e| IngestError::Manifest(e.to_string()))?;
        manifest.schema.values = manifest
            .parameters
            .iter()
            .flat_map(|p| {
                p.source_columns()
                    .into_iter()
                    .map(|column| ValueColumn { column, fill: p.fill })
            })
            .collect();
        manifest.validate()?;
        Ok(manifest)
    }

    fn validate(&self) -> Result<(), IngestError> {
        let bad = |why: String| Err(IngestError::Manifest(why));
        let field = |name: &str, value: &str| {
            check_field(name, value).map_err(|e| IngestError::Manifest(e.to_string()))
        };
        field("provider", &self.key.provider)?;
        field("dataset", &self.key.dataset)?;
        if self.parameters.is_empty() {
            return bad("at least one [[parameter]] is required".into());
        }
        let mut series = HashSet::new();
        for p in &self.parameters {
            field("series", &p.series)?;
            if p.series.ends_with(".time") {
                return bad(format!("series {:?} may not end in .time", p.series));
            }
            if !series.insert(&p.series) {
                return bad(format!("series {:?} appears twice", p.series));
            }
            if p.column.is_some() == p.columns.is_some() {
                return bad(format!("parameter {:?} needs exactly one of column or columns", p.name));
            }
            if p.source_columns().is_empty() {
                return bad(format!("parameter {:?} has no columns", p.name));
            }
            if let Some(dt) = &p.data_type {
                if DataType::parse(dt).is_none() {
                    return bad(format!("unknown data_type {dt:?}"));
                }
            }
            if p.data_type() == DataType::TimeSeries && p.source_columns().len() != 1 {
                return bad(format!("time_series parameter {:?} must have one column", p.name));
            }
            p.layout()
                .validate()
                .map_err(|e| IngestError::Manifest(format!("parameter {:?}: {e}", p.name)))?;
        }
        self.encoding()?;
        if let Some(c) = self.time.cadence {
            if !(c > 0.0 && c.is_finite()) {
                return bad(format!("cadence must be positive, got {c}"));
            }
        }
        let (start, stop) = self.date_range()?;
        if start > stop {
            return bad(format!("granule start {start} is after stop {stop}"));
        }
        self.template()?;
        self.schema.validate()
    }

    pub fn encoding(&self) -> Result<TimeEncoding, IngestError> {
        parse_time_units(&self.time.units).map_err(|e| IngestError::Manifest(e.to_string()))
    }

    pub fn date_range(&self) -> Result<(NaiveDate, NaiveDate), IngestError> {
        let date = |s: &str| {
            parse_date(s).ok_or_else(|| IngestError::Manifest(format!("{s:?} is not YYYY-MM-DD")))
        };
        Ok((date(&self.granules.start)?, date(&self.granules.stop)?))
    }

    pub fn template(&self) -> Result<GranuleTemplate, IngestError> {
        GranuleTemplate::new(
            &self.granules.directory,
            &self.granules.pattern,
            self.granules.period,
        )
    }
}
