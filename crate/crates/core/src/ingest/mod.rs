//! Building the TSDB cache from granule collections.
//!
//! A build reads every granule a [`GranuleTemplate`] expects over a date
//! range, parses them with an [`AsciiTableSchema`], concatenates the rows in
//! time order, and publishes one `.bin` + `.ncml` + provenance log per
//! parameter. A rebuild whose output is identical to the latest published
//! version writes nothing; any difference publishes the next version and
//! leaves earlier versions untouched.

mod ascii;
mod build;
mod manifest;
mod template;

use std::io;
use std::path::{Path, PathBuf};

use crate::metadata::MetadataError;
use crate::store::StoreError;
use crate::time::TimeError;

pub use ascii::{
    parse_ascii_granule, read_ascii_granule, AsciiTableSchema, GranuleFragment, QuarantinedRow,
    TimeColumns, ValueColumn,
};
pub use build::{build_cache, BuildOptions, BuildReport, SeriesOutcome, SeriesStatus};
pub use manifest::{BuildManifest, ParameterSpec};
pub use template::{list_granules, Granule, GranuleListing, GranulePeriod, GranuleTemplate};

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("NoGranules: {0}")]
    NoGranules(String),
    #[error("SchemaMismatch: {} has the wrong field count on {bad} of {total} lines", path.display())]
    SchemaMismatch {
        path: PathBuf,
        bad: usize,
        total: usize,
    },
    #[error("BadTemplate: {0}")]
    BadTemplate(String),
    #[error("BadManifest: {0}")]
    Manifest(String),
    #[error("Locked: another build holds {}", .0.display())]
    Locked(PathBuf),
    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Metadata(#[from] MetadataError),
    #[error(transparent)]
    Time(#[from] TimeError),
}

impl IngestError {
    pub fn name(&self) -> &'static str {
        match self {
            IngestError::NoGranules(_) => "NoGranules",
            IngestError::SchemaMismatch { .. } => "SchemaMismatch",
            IngestError::BadTemplate(_) => "BadTemplate",
            IngestError::Manifest(_) => "BadManifest",
            IngestError::Locked(_) => "Locked",
            IngestError::Io { .. } => "IoError",
            IngestError::Store(e) => e.name(),
            IngestError::Metadata(e) => e.name(),
            IngestError::Time(_) => "BadTime",
        }
    }

    /// True when the inputs (manifest, granules) are at fault rather than the
    /// machine.
    pub fn is_user_error(&self) -> bool {
        !matches!(self, IngestError::Io { .. } | IngestError::Store(StoreError::Io { .. }))
    }

    pub(crate) fn io(path: &Path, source: io::Error) -> Self {
        IngestError::Io {
            path: path.to_owned(),
            source,
        }
    }
}
