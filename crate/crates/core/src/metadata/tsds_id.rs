use std::fmt;
use std::str::FromStr;

use chrono::NaiveDate;

use super::MetadataError;
use crate::store::{parse_version, SeriesKey};
use crate::time::parse_date;

/// `tsds://{provider}/{dataset}/{series}/{version}/{stopDate}`
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TsdsId {
    pub key: SeriesKey,
    pub stop_date: NaiveDate,
}

pub const SCHEME: &str = "tsds://";

impl TsdsId {
    pub fn new(key: SeriesKey, stop_date: NaiveDate) -> Self {
        TsdsId { key, stop_date }
    }
}

impl fmt::Display for TsdsId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{SCHEME}{}/{}/{}/{}/{}",
            self.key.provider,
            self.key.dataset,
            self.key.series,
            self.key.version,
            self.stop_date.format("%Y-%m-%d")
        )
    }
}

impl FromStr for TsdsId {
    type Err = MetadataError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_tsds_id(s)
    }
}

pub fn parse_tsds_id(s: &str) -> Result<TsdsId, MetadataError> {
    let malformed = |why: &str| MetadataError::MalformedId {
        id: s.to_owned(),
        reason: why.to_owned(),
    };
    let rest = s
        .strip_prefix(SCHEME)
        .ok_or_else(|| malformed("scheme must be tsds://"))?;
    let segments: Vec<&str> = rest.split('/').collect();
    let [provider, dataset, series, version, stop] = segments[..] else {
        return Err(malformed(&format!("expected 5 path segments, found {}", segments.len())));
    };
    let version = parse_version(version).ok_or_else(|| malformed("version is not a non-negative integer"))?;
    let stop_date = parse_date(stop).ok_or_else(|| malformed("stop date is not YYYY-MM-DD"))?;
    let key = SeriesKey::new(provider, dataset, series, version)
        .map_err(|e| malformed(&e.to_string()))?;
    Ok(TsdsId { key, stop_date })
}

pub fn format_tsds_id(id: &TsdsId) -> String {
    id.to_string()
}
