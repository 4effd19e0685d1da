use std::fmt;
use std::str::FromStr;

use super::StoreError;

/// Versioned identity of one cached parameter.
///
/// The on-disk name is `{provider}_{dataset}_{series}-v{version}.bin`, with the
/// NcML sibling using the same stem and a `.ncml` extension. `_` separates the
/// three name fields, so it (along with `/` and whitespace) may not appear in
/// any of them.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SeriesKey {
    pub provider: String,
    pub dataset: String,
    pub series: String,
    pub version: u32,
}

impl SeriesKey {
    pub fn new(
        provider: impl Into<String>,
        dataset: impl Into<String>,
        series: impl Into<String>,
        version: u32,
    ) -> Result<Self, StoreError> {
        let key = SeriesKey {
            provider: provider.into(),
            dataset: dataset.into(),
            series: series.into(),
            version,
        };
        key.validate()?;
        Ok(key)
    }

    pub fn validate(&self) -> Result<(), StoreError> {
        for (field, value) in [
            ("provider", &self.provider),
            ("dataset", &self.dataset),
            ("series", &self.series),
        ] {
            check_field(field, value)?;
        }
        Ok(())
    }

    /// `{provider}_{dataset}_{series}-v{version}`
    pub fn stem(&self) -> String {
        format!("{}-v{}", self.unversioned_stem(), self.version)
    }

    /// `{provider}_{dataset}_{series}`, shared by every version of the series.
    pub fn unversioned_stem(&self) -> String {
        format!("{}_{}_{}", self.provider, self.dataset, self.series)
    }

    pub fn bin_filename(&self) -> String {
        format!("{}.bin", self.stem())
    }

    pub fn ncml_filename(&self) -> String {
        format!("{}.ncml", self.stem())
    }

    pub fn with_version(&self, version: u32) -> SeriesKey {
        SeriesKey {
            version,
            ..self.clone()
        }
    }

    /// Parses a `.bin` filename.
    pub fn parse_filename(name: &str) -> Result<Self, StoreError> {
        let stem = name
            .strip_suffix(".bin")
            .ok_or_else(|| invalid(name, "expected a .bin extension"))?;
        Self::parse_stem(stem)
    }

    /// Parses `{provider}_{dataset}_{series}-v{version}` (no extension).
    pub fn parse_stem(stem: &str) -> Result<Self, StoreError> {
        let (name, version) = stem
            .rsplit_once("-v")
            .ok_or_else(|| invalid(stem, "missing -v<version> suffix"))?;
        let version = parse_version(version).ok_or_else(|| {
            invalid(stem, "version must be a non-negative integer without leading zeros")
        })?;
        let mut parts = name.split('_');
        let (Some(provider), Some(dataset), Some(series), None) =
            (parts.next(), parts.next(), parts.next(), parts.next())
        else {
            return Err(invalid(stem, "expected exactly three `_`-separated fields"));
        };
        SeriesKey::new(provider, dataset, series, version)
    }
}

impl fmt::Display for SeriesKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.stem())
    }
}

impl FromStr for SeriesKey {
    type Err = StoreError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.strip_suffix(".bin") {
            Some(_) => Self::parse_filename(s),
            None => Self::parse_stem(s),
        }
    }
}

pub(crate) fn parse_version(s: &str) -> Option<u32> {
    let canonical = s == "0" || (!s.is_empty() && !s.starts_with('0'));
    if !canonical || !s.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    s.parse().ok()
}

/// Characters allowed in a key field: anything except `_`, `/` and whitespace.
pub fn check_field(field: &str, value: &str) -> Result<(), StoreError> {
    if value.is_empty() {
        return Err(invalid(value, &format!("{field} is empty")));
    }
    if let Some(c) = value
        .chars()
        .find(|c| *c == '_' || *c == '/' || c.is_whitespace())
    {
        return Err(invalid(value, &format!("{field} contains reserved character {c:?}")));
    }
    Ok(())
}

fn invalid(value: &str, reason: &str) -> StoreError {
    StoreError::InvalidKey {
        value: value.to_owned(),
        reason: reason.to_owned(),
    }
}
