//! "units since epoch" time encoding.
//!
//! Times are carried as `f64` offsets from an epoch in one of four units. The
//! calendar is UTC, proleptic Gregorian, with no leap seconds.

use std::fmt;
use std::str::FromStr;

use chrono::{NaiveDate, NaiveDateTime, NaiveTime, TimeDelta};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TimeError {
    #[error("UnknownUnit: {0:?} is not one of seconds, minutes, hours, days")]
    UnknownUnit(String),
    #[error("BadEpoch: {0:?}")]
    BadEpoch(String),
    #[error("BadTimestamp: {0:?} is not YYYY-MM-DD[Thh:mm:ss[.fff]]")]
    BadTimestamp(String),
    #[error("offset {0} cannot be represented as a calendar time")]
    OffsetOutOfRange(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TimeUnit {
    Seconds,
    Minutes,
    Hours,
    Days,
}

impl TimeUnit {
    pub fn seconds(self) -> f64 {
        match self {
            TimeUnit::Seconds => 1.0,
            TimeUnit::Minutes => 60.0,
            TimeUnit::Hours => 3600.0,
            TimeUnit::Days => 86400.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            TimeUnit::Seconds => "seconds",
            TimeUnit::Minutes => "minutes",
            TimeUnit::Hours => "hours",
            TimeUnit::Days => "days",
        }
    }
}

impl FromStr for TimeUnit {
    type Err = TimeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "seconds" => Ok(TimeUnit::Seconds),
            "minutes" => Ok(TimeUnit::Minutes),
            "hours" => Ok(TimeUnit::Hours),
            "days" => Ok(TimeUnit::Days),
            _ => Err(TimeError::UnknownUnit(s.to_owned())),
        }
    }
}

/// A parsed `units` attribute such as `minutes since 1989-01-01 00:00:0.0`.
///
/// The original text is kept so metadata round-trips verbatim.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TimeEncoding {
    pub unit: TimeUnit,
    pub epoch: NaiveDateTime,
    units: String,
}

impl TimeEncoding {
    pub fn new(unit: TimeUnit, epoch: NaiveDateTime) -> Self {
        let units = format!("{} since {}", unit.as_str(), epoch.format("%Y-%m-%d %H:%M:%S"));
        TimeEncoding { unit, epoch, units }
    }

    /// The units string as written.
    pub fn units(&self) -> &str {
        &self.units
    }

    /// Offset of `t` from the epoch, in this encoding's unit.
    pub fn offset_of(&self, t: NaiveDateTime) -> f64 {
        let delta = t - self.epoch;
        let secs = delta.num_seconds() as f64 + f64::from(delta.subsec_nanos()) * 1e-9;
        secs / self.unit.seconds()
    }

    /// Calendar time of an offset, rounded to the millisecond.
    pub fn time_of(&self, offset: f64) -> Result<NaiveDateTime, TimeError> {
        let ms = offset * self.unit.seconds() * 1000.0;
        if !ms.is_finite() || ms.abs() > 8.0e18 {
            return Err(TimeError::OffsetOutOfRange(offset));
        }
        let delta = TimeDelta::try_milliseconds(ms.round() as i64)
            .ok_or(TimeError::OffsetOutOfRange(offset))?;
        self.epoch
            .checked_add_signed(delta)
            .ok_or(TimeError::OffsetOutOfRange(offset))
    }
}

impl fmt::Display for TimeEncoding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.units)
    }
}

impl FromStr for TimeEncoding {
    type Err = TimeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_time_units(s)
    }
}

/// Parses `"<unit> since <epoch>"`. The unit is case-insensitive; the epoch may
/// be a bare date, `date hh:mm[:ss[.f]]`, or the same with a `T` separator.
pub fn parse_time_units(s: &str) -> Result<TimeEncoding, TimeError> {
    let trimmed = s.trim();
    let lower = trimmed.to_ascii_lowercase();
    let at = lower
        .find(" since ")
        .ok_or_else(|| TimeError::BadEpoch(s.to_owned()))?;
    let unit: TimeUnit = trimmed[..at].trim().parse()?;
    let epoch = parse_epoch(trimmed[at + " since ".len()..].trim())
        .ok_or_else(|| TimeError::BadEpoch(s.to_owned()))?;
    Ok(TimeEncoding {
        unit,
        epoch,
        units: s.to_owned(),
    })
}

fn parse_epoch(s: &str) -> Option<NaiveDateTime> {
    let s = s
        .strip_suffix(" UTC")
        .or_else(|| s.strip_suffix('Z'))
        .unwrap_or(s)
        .trim();
    let (date, time) = match s.find([' ', 'T']) {
        Some(i) => (&s[..i], Some(s[i + 1..].trim())),
        None => (s, None),
    };
    let date = parse_date(date)?;
    let time = match time {
        None | Some("") => NaiveTime::MIN,
        Some(t) => {
            let mut parts = t.split(':');
            let h: u32 = parts.next()?.parse().ok()?;
            let m: u32 = parts.next()?.parse().ok()?;
            let sec: f64 = match parts.next() {
                Some(p) => p.parse().ok()?,
                None => 0.0,
            };
            if parts.next().is_some() || !(0.0..60.0).contains(&sec) {
                return None;
            }
            let whole = sec.trunc() as u32;
            let nanos = ((sec - sec.trunc()) * 1e9).round() as u32;
            NaiveTime::from_hms_nano_opt(h, m, whole, nanos)?
        }
    };
    Some(date.and_time(time))
}

/// Strict `YYYY-MM-DD`.
pub fn parse_date(s: &str) -> Option<NaiveDate> {
    let b = s.as_bytes();
    let shape_ok = b.len() == 10
        && b[4] == b'-'
        && b[7] == b'-'
        && b.iter()
            .enumerate()
            .all(|(i, c)| i == 4 || i == 7 || c.is_ascii_digit());
    if !shape_ok {
        return None;
    }
    NaiveDate::from_ymd_opt(s[..4].parse().ok()?, s[5..7].parse().ok()?, s[8..].parse().ok()?)
}

/// Parses the ISO-8601 subset `YYYY-MM-DD[Thh:mm:ss[.fff]][Z]`. A bare date is midnight UTC.
pub fn parse_timestamp(s: &str) -> Result<NaiveDateTime, TimeError> {
    let bad = || TimeError::BadTimestamp(s.to_owned());
    let body = s.strip_suffix('Z').unwrap_or(s);
    let (date, time) = match body.split_once('T') {
        Some((d, t)) => (d, Some(t)),
        None => (body, None),
    };
    let date = parse_date(date).ok_or_else(bad)?;
    let Some(time) = time else {
        return Ok(date.and_time(NaiveTime::MIN));
    };
    let (hms, frac) = match time.split_once('.') {
        Some((hms, frac)) => (hms, Some(frac)),
        None => (time, None),
    };
    let b = hms.as_bytes();
    if b.len() != 8
        || b[2] != b':'
        || b[5] != b':'
        || !b.iter().enumerate().all(|(i, c)| i == 2 || i == 5 || c.is_ascii_digit())
    {
        return Err(bad());
    }
    let nanos = match frac {
        None => 0,
        Some(f) if !f.is_empty() && f.len() <= 9 && f.bytes().all(|c| c.is_ascii_digit()) => {
            f.parse::<u32>().map_err(|_| bad())? * 10u32.pow(9 - f.len() as u32)
        }
        Some(_) => return Err(bad()),
    };
    let t = NaiveTime::from_hms_nano_opt(
        hms[..2].parse().map_err(|_| bad())?,
        hms[3..5].parse().map_err(|_| bad())?,
        hms[6..].parse().map_err(|_| bad())?,
        nanos,
    )
    .ok_or_else(bad)?;
    Ok(date.and_time(t))
}

/// ISO-8601 literal → offset in `enc` units.
pub fn time_to_offset(t: &str, enc: &TimeEncoding) -> Result<f64, TimeError> {
    Ok(enc.offset_of(parse_timestamp(t)?))
}

/// Offset → `YYYY-MM-DDThh:mm:ss`, with `.fff` appended when the millisecond
/// part is non-zero.
pub fn offset_to_time(x: f64, enc: &TimeEncoding) -> Result<String, TimeError> {
    Ok(format_timestamp(enc.time_of(x)?))
}

pub fn format_timestamp(t: NaiveDateTime) -> String {
    if t.and_utc().timestamp_subsec_millis() == 0 {
        t.format("%Y-%m-%dT%H:%M:%S").to_string()
    } else {
        t.format("%Y-%m-%dT%H:%M:%S%.3f").to_string()
    }
}
