use std::path::{Path, PathBuf};

use chrono::format::{Item, StrftimeItems};
use chrono::{Datelike, Months, NaiveDate};
use serde::Deserialize;

use super::IngestError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GranulePeriod {
    Day,
    Month,
}

/// Granule files named after the period they cover, e.g. `%Y%m%d.csv`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GranuleTemplate {
    pub directory: PathBuf,
    pattern: String,
    pub period: GranulePeriod,
}

/// One expected granule: the first day of its period and its path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Granule {
    pub date: NaiveDate,
    pub path: PathBuf,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GranuleListing {
    /// Granules found on disk, in time order.
    pub present: Vec<Granule>,
    /// Expected granules that do not exist.
    pub gaps: Vec<Granule>,
}

impl GranuleTemplate {
    /// Checks that `pattern` is a valid strftime pattern that varies at
    /// least as fast as `period`, so every period maps to its own file.
    pub fn new(
        directory: impl Into<PathBuf>,
        pattern: impl Into<String>,
        period: GranulePeriod,
    ) -> Result<Self, IngestError> {
        let pattern = pattern.into();
        let bad = |why: &str| IngestError::BadTemplate(format!("{pattern:?}: {why}"));
        if StrftimeItems::new(&pattern).any(|item| matches!(item, Item::Error)) {
            return Err(bad("not a valid strftime pattern"));
        }
        if pattern.contains('/') || pattern.contains('\\') {
            return Err(bad("granule names may not contain a path separator"));
        }
        let needs: &[&str] = match period {
            GranulePeriod::Day => &["%Y", "%m", "%d"],
            GranulePeriod::Month => &["%Y", "%m"],
        };
        let has_doy = pattern.contains("%j");
        for field in needs {
            let covered = pattern.contains(field) || (has_doy && matches!(*field, "%m" | "%d"));
            if !covered {
                return Err(bad(&format!("missing {field}")));
            }
        }
        Ok(GranuleTemplate {
            directory: directory.into(),
            pattern,
            period,
        })
    }

    pub fn pattern(&self) -> &str {
        &self.pattern
    }

    pub fn filename(&self, date: NaiveDate) -> String {
        date.format(&self.pattern).to_string()
    }

    pub fn path_for(&self, date: NaiveDate) -> PathBuf {
        self.directory.join(self.filename(date))
    }

    /// First day of every period overlapping `[start, stop]`.
    pub fn periods(&self, start: NaiveDate, stop: NaiveDate) -> Vec<NaiveDate> {
        let mut out = Vec::new();
        let mut d = match self.period {
            GranulePeriod::Day => start,
            GranulePeriod::Month => start.with_day(1).expect("day 1 exists"),
        };
        while d <= stop {
            out.push(d);
            d = match self.period {
                GranulePeriod::Day => d.succ_opt(),
                GranulePeriod::Month => d.checked_add_months(Months::new(1)),
            }
            .expect("date in range");
        }
        out
    }
}

/// Expected granule paths for each period in `[start, stop]`. Missing files
/// are reported as gaps; only an unreadable directory is an error.
pub fn list_granules(
    tmpl: &GranuleTemplate,
    start: NaiveDate,
    stop: NaiveDate,
) -> Result<GranuleListing, IngestError> {
    check_dir(&tmpl.directory)?;
    let mut listing = GranuleListing::default();
    for date in tmpl.periods(start, stop) {
        let granule = Granule {
            date,
            path: tmpl.path_for(date),
        };
        if granule.path.is_file() {
            listing.present.push(granule);
        } else {
            listing.gaps.push(granule);
        }
    }
    Ok(listing)
}

fn check_dir(dir: &Path) -> Result<(), IngestError> {
    std::fs::read_dir(dir)
        .map(drop)
        .map_err(|e| IngestError::io(dir, e))
}
