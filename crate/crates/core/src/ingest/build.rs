use std::fs::{self, OpenOptions};
use std::io::ErrorKind;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use rayon::prelude::*;
use serde_json::json;

use super::ascii::{parse_ascii_granule, GranuleFragment, QuarantinedRow};
use super::manifest::{BuildManifest, ParameterSpec};
use super::template::list_granules;
use super::IngestError;
use crate::metadata::{emit_ncml, DataSource, DatasetDescriptor, TimeAxis, TsdsId, VariableSpec};
use crate::store::{encode_values, write_file_atomic, Md5Digest, SeriesKey};
use crate::time::TimeEncoding;

#[derive(Debug, Clone, Default)]
pub struct BuildOptions {
    /// Granule parsing threads; 0 lets the thread pool decide.
    pub jobs: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeriesStatus {
    /// First version of the series.
    New,
    /// Output identical to the latest version; nothing written.
    Unchanged,
    /// Content differed from `previous`; a new version was published.
    Updated { previous: u32 },
}

impl SeriesStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            SeriesStatus::New => "new",
            SeriesStatus::Unchanged => "unchanged",
            SeriesStatus::Updated { .. } => "updated",
        }
    }
}

#[derive(Debug, Clone)]
pub struct SeriesOutcome {
    /// Key of the version that now holds this content.
    pub key: SeriesKey,
    pub status: SeriesStatus,
    pub bin: PathBuf,
    pub ncml: PathBuf,
    pub provenance: PathBuf,
    pub samples: u64,
    pub md5: Md5Digest,
}

#[derive(Debug, Clone, Default)]
pub struct BuildReport {
    pub series: Vec<SeriesOutcome>,
    pub granules_read: usize,
    /// Expected granules that were missing.
    pub gaps: Vec<PathBuf>,
    pub quarantined: Vec<QuarantinedRow>,
    /// Samples added as NaN to keep a uniform cadence.
    pub filled_samples: u64,
}

struct InputRecord {
    path: PathBuf,
    bytes: u64,
    md5: Md5Digest,
}

/// Rows from all granules, concatenated and in strictly increasing time.
struct Rows {
    times: Vec<f64>,
    /// Granule index and 1-based line of each row.
    origin: Vec<(usize, usize)>,
    values: Vec<Vec<f64>>,
}

/// Builds (or refreshes) every parameter of `manifest` into `out_dir`.
pub fn build_cache(
    manifest: &BuildManifest,
    out_dir: &Path,
    opts: &BuildOptions,
) -> Result<BuildReport, IngestError> {
    let enc = manifest.encoding()?;
    let (start, stop) = manifest.date_range()?;
    let tmpl = manifest.template()?;
    let listing = list_granules(&tmpl, start, stop)?;
    if listing.present.is_empty() {
        return Err(IngestError::NoGranules(format!(
            "no granule matching {:?} in {} between {start} and {stop}",
            tmpl.pattern(),
            tmpl.directory.display()
        )));
    }
    fs::create_dir_all(out_dir).map_err(|e| IngestError::io(out_dir, e))?;

    let keys: Vec<SeriesKey> = manifest
        .parameters
        .iter()
        .map(|p| SeriesKey::new(&manifest.key.provider, &manifest.key.dataset, &p.series, 0))
        .collect::<Result<_, _>>()?;
    let _locks = keys
        .iter()
        .map(|k| BuildLock::acquire(&out_dir.join(format!("{}.lock", k.unversioned_stem()))))
        .collect::<Result<Vec<_>, _>>()?;

    let parsed = parse_all(manifest, &listing.present.iter().map(|g| g.path.clone()).collect::<Vec<_>>(), &enc, opts)?;
    let mut report = BuildReport {
        granules_read: parsed.len(),
        gaps: listing.gaps.iter().map(|g| g.path.clone()).collect(),
        ..Default::default()
    };
    let (inputs, fragments): (Vec<InputRecord>, Vec<GranuleFragment>) = parsed.into_iter().unzip();
    let paths: Vec<&Path> = inputs.iter().map(|i| i.path.as_path()).collect();
    let rows = concatenate(fragments, &paths, manifest.schema.values.len(), &mut report.quarantined);
    if rows.times.is_empty() {
        return Err(IngestError::NoGranules(format!(
            "{} granule(s) found but none held a usable row",
            report.granules_read
        )));
    }

    let (axis, rows, time_values) = match manifest.time.cadence {
        Some(cadence) => {
            let (rows, filled) = regrid(rows, cadence, &paths, &mut report.quarantined);
            report.filled_samples = filled;
            let axis = TimeAxis::Uniform {
                start: rows.times[0],
                increment: cadence,
                length: rows.times.len() as u64,
            };
            (axis, rows, None)
        }
        None => {
            let length = rows.times.len() as u64;
            let times = rows.times.clone();
            // Location is filled in per series once the version is known.
            let axis = TimeAxis::Explicit {
                source: DataSource::binary(String::new()),
                length,
            };
            (axis, rows, Some(times))
        }
    };

    let mut offset = 0;
    for (param, key) in manifest.parameters.iter().zip(&keys) {
        let k = param.source_columns().len();
        let columns = &rows.values[offset..offset + k];
        offset += k;
        let n = rows.times.len();
        let mut values = Vec::with_capacity(n * k);
        for i in 0..n {
            values.extend(columns.iter().map(|c| c[i]));
        }
        let series = SeriesBuild {
            manifest,
            param,
            key,
            enc: &enc,
            axis: &axis,
            times: &rows.times,
            time_values: time_values.as_deref(),
            values: &values,
        };
        let outcome = series.publish(out_dir, &inputs, &report)?;
        tracing::info!(series = %outcome.key, status = outcome.status.as_str(), "built");
        report.series.push(outcome);
    }
    Ok(report)
}

fn parse_all(
    manifest: &BuildManifest,
    paths: &[PathBuf],
    enc: &TimeEncoding,
    opts: &BuildOptions,
) -> Result<Vec<(InputRecord, GranuleFragment)>, IngestError> {
    let parse_one = |path: &PathBuf| -> Result<(InputRecord, GranuleFragment), IngestError> {
        let bytes = fs::read(path).map_err(|e| IngestError::io(path, e))?;
        let record = InputRecord {
            path: path.clone(),
            bytes: bytes.len() as u64,
            md5: Md5Digest::of(&bytes),
        };
        let text = String::from_utf8(bytes).map_err(|e| {
            IngestError::io(path, std::io::Error::new(ErrorKind::InvalidData, e))
        })?;
        let frag = parse_ascii_granule(&text, path, &manifest.schema, enc)?;
        Ok((record, frag))
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.jobs)
        .build()
        .map_err(|e| IngestError::Manifest(format!("cannot start {} build threads: {e}", opts.jobs)))?;
    // `collect` keeps input order, so concatenation below stays in time order.
    pool.install(|| paths.par_iter().map(parse_one).collect())
}

fn concatenate(
    fragments: Vec<GranuleFragment>,
    paths: &[&Path],
    width: usize,
    quarantined: &mut Vec<QuarantinedRow>,
) -> Rows {
    let mut rows = Rows {
        times: Vec::new(),
        origin: Vec::new(),
        values: vec![Vec::new(); width],
    };
    for (g, frag) in fragments.into_iter().enumerate() {
        quarantined.extend(frag.quarantined);
        for (i, &t) in frag.times.iter().enumerate() {
            if rows.times.last().is_some_and(|&last| t <= last) {
                quarantined.push(QuarantinedRow {
                    path: paths[g].to_owned(),
                    line: frag.lines[i],
                    reason: "time does not increase across granules".into(),
                });
                continue;
            }
            rows.times.push(t);
            rows.origin.push((g, frag.lines[i]));
            for (dst, src) in rows.values.iter_mut().zip(&frag.values) {
                dst.push(src[i]);
            }
        }
    }
    rows
}

/// Places rows on the grid `t0 + i * cadence` (t0 = first row), filling empty
/// slots with NaN. Rows more than a millionth of a step off the grid, or that
/// land in an occupied slot, are quarantined.
fn regrid(
    rows: Rows,
    cadence: f64,
    paths: &[&Path],
    quarantined: &mut Vec<QuarantinedRow>,
) -> (Rows, u64) {
    let t0 = rows.times[0];
    let mut slots: Vec<u64> = Vec::with_capacity(rows.times.len());
    let mut kept: Vec<usize> = Vec::with_capacity(rows.times.len());
    for (i, &t) in rows.times.iter().enumerate() {
        let slot = ((t - t0) / cadence).round() as u64;
        let on_grid = (TimeAxis::uniform_time(t0, cadence, slot) - t).abs() <= cadence * 1e-6;
        let fresh = slots.last().map_or(true, |&last| slot > last);
        if on_grid && fresh {
            slots.push(slot);
            kept.push(i);
        } else {
            let (g, line) = rows.origin[i];
            quarantined.push(QuarantinedRow {
                path: paths[g].to_owned(),
                line,
                reason: if on_grid {
                    "shares a cadence slot with the previous row".into()
                } else {
                    format!("time offset {t} is off the {cadence} cadence grid")
                },
            });
        }
    }
    let length = slots.last().map_or(0, |&s| s + 1);
    let times = (0..length).map(|i| TimeAxis::uniform_time(t0, cadence, i)).collect();
    let values = rows
        .values
        .iter()
        .map(|src| {
            let mut dst = vec![f64::NAN; length as usize];
            for (&slot, &i) in slots.iter().zip(&kept) {
                dst[slot as usize] = src[i];
            }
            dst
        })
        .collect();
    let filled = length - kept.len() as u64;
    (Rows { times, origin: Vec::new(), values }, filled)
}

struct SeriesBuild<'a> {
    manifest: &'a BuildManifest,
    param: &'a ParameterSpec,
    key: &'a SeriesKey,
    enc: &'a TimeEncoding,
    axis: &'a TimeAxis,
    times: &'a [f64],
    time_values: Option<&'a [f64]>,
    values: &'a [f64],
}

fn time_key(key: &SeriesKey) -> SeriesKey {
    SeriesKey {
        series: format!("{}.time", key.series),
        ..key.clone()
    }
}

impl SeriesBuild<'_> {
    fn date_of(&self, offset: f64) -> Result<NaiveDate, IngestError> {
        Ok(self.enc.time_of(offset)?.date())
    }

    fn descriptor(&self, version: u32, md5: Md5Digest) -> Result<DatasetDescriptor, IngestError> {
        let key = self.key.with_version(version);
        let first = self.times[0];
        let last = *self.times.last().expect("non-empty");
        let start_date = self.date_of(first)?;
        let stop_date = self.date_of(last)?;
        let day = 86_400.0 / self.enc.unit.seconds();
        let (time_axis, points_per_day) = match self.axis {
            TimeAxis::Uniform { increment, .. } => (self.axis.clone(), Some(day / increment)),
            TimeAxis::Explicit { length, .. } => {
                let span = (last - first) / day;
                let ppd = (span > 0.0).then(|| (*length as f64 - 1.0) / span);
                let axis = TimeAxis::Explicit {
                    source: DataSource::binary(time_key(&key).bin_filename()),
                    length: *length,
                };
                (axis, ppd)
            }
        };
        let p = self.param;
        let title = p.title.clone().unwrap_or_else(|| match &self.manifest.title {
            Some(t) => format!("{} ({t})", p.name),
            None => format!("{} ({} {})", p.name, key.provider, key.dataset),
        });
        let d = DatasetDescriptor {
            title,
            conventions: "COARDS, TSDS".into(),
            tsds_id: Some(TsdsId::new(key.clone(), stop_date)),
            science_metadata: self.manifest.science_metadata.clone(),
            data_type: p.data_type(),
            start_date,
            stop_date,
            md5: Some(md5),
            points_per_day,
            time_encoding: self.enc.clone(),
            time_axis,
            variables: vec![VariableSpec {
                name: p.name.clone(),
                long_name: p.long_name.clone().unwrap_or_else(|| p.name.clone()),
                units: p.units.clone(),
                fill_value: f64::NAN,
                cformat: p
                    .cformatstring
                    .as_ref()
                    .map(|s| s.split(',').map(|f| f.trim().to_owned()).collect()),
                layout: p.layout(),
                source: DataSource::binary(key.bin_filename()),
                extra: Vec::new(),
            }],
            extra: Vec::new(),
        };
        d.validate()?;
        Ok(d)
    }

    fn publish(
        &self,
        out_dir: &Path,
        inputs: &[InputRecord],
        report: &BuildReport,
    ) -> Result<SeriesOutcome, IngestError> {
        let data = encode_values(self.values);
        let md5 = Md5Digest::of(&data);
        let time_bytes = self.time_values.map(encode_values);
        let samples = self.times.len() as u64;
        let outcome = |key: SeriesKey, status| SeriesOutcome {
            bin: out_dir.join(key.bin_filename()),
            ncml: out_dir.join(key.ncml_filename()),
            provenance: out_dir.join(format!("{}.provenance.jsonl", key.stem())),
            key,
            status,
            samples,
            md5,
        };

        let latest = latest_version(out_dir, self.key)?;
        if let Some(prev) = latest {
            let key = self.key.with_version(prev);
            let candidate = emit_ncml(&self.descriptor(prev, md5)?);
            let same_ncml = fs::read_to_string(out_dir.join(key.ncml_filename()))
                .is_ok_and(|existing| existing == candidate);
            let same_time = match &time_bytes {
                None => true,
                Some(bytes) => fs::read(out_dir.join(time_key(&key).bin_filename()))
                    .is_ok_and(|existing| existing == *bytes),
            };
            if same_ncml && same_time {
                return Ok(outcome(key, SeriesStatus::Unchanged));
            }
        }

        let mut version = latest.map_or(0, |v| v + 1);
        while out_dir.join(self.key.with_version(version).bin_filename()).exists()
            || out_dir.join(self.key.with_version(version).ncml_filename()).exists()
        {
            version += 1;
        }
        let key = self.key.with_version(version);
        let status = match latest {
            None => SeriesStatus::New,
            Some(previous) => SeriesStatus::Updated { previous },
        };
        let result = outcome(key.clone(), status);
        let descriptor = self.descriptor(version, md5)?;

        if let Some(bytes) = &time_bytes {
            write_file_atomic(&out_dir.join(time_key(&key).bin_filename()), bytes)?;
        }
        write_file_atomic(&result.bin, &data)?;
        write_file_atomic(&result.provenance, self.provenance(&key, md5, inputs, report).as_bytes())?;
        // The NcML goes last: a catalog scan never sees a version whose data is missing.
        write_file_atomic(&result.ncml, emit_ncml(&descriptor).as_bytes())?;
        Ok(result)
    }

    fn provenance(&self, key: &SeriesKey, md5: Md5Digest, inputs: &[InputRecord], report: &BuildReport) -> String {
        let mut lines = vec![json!({
            "record": "header",
            "series": key.stem(),
            "version": key.version,
            "built": chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            "tool": concat!("tsds ", env!("CARGO_PKG_VERSION")),
            "samples": self.times.len(),
            "md5": md5.to_hex(),
            "pattern": self.manifest.granules.pattern,
            "start": self.manifest.granules.start,
            "stop": self.manifest.granules.stop,
        })];
        lines.extend(inputs.iter().map(|i| {
            json!({
                "record": "input",
                "path": i.path.display().to_string(),
                "bytes": i.bytes,
                "md5": i.md5.to_hex(),
            })
        }));
        lines.extend(report.gaps.iter().map(|p| {
            json!({"record": "gap", "path": p.display().to_string()})
        }));
        lines.extend(report.quarantined.iter().map(|q| {
            json!({
                "record": "quarantine",
                "path": q.path.display().to_string(),
                "line": q.line,
                "reason": q.reason,
            })
        }));
        let mut out = String::new();
        for line in lines {
            out.push_str(&line.to_string());
            out.push('\n');
        }
        out
    }
}

/// Highest published version of `key`'s series in `dir`, judged by `.ncml` files.
fn latest_version(dir: &Path, key: &SeriesKey) -> Result<Option<u32>, IngestError> {
    let entries = fs::read_dir(dir).map_err(|e| IngestError::io(dir, e))?;
    let mut latest = None;
    for entry in entries {
        let entry = entry.map_err(|e| IngestError::io(dir, e))?;
        let name = entry.file_name();
        let Some(stem) = name.to_str().and_then(|n| n.strip_suffix(".ncml")) else {
            continue;
        };
        if let Ok(found) = SeriesKey::parse_stem(stem) {
            if found.with_version(0) == key.with_version(0) {
                latest = latest.max(Some(found.version));
            }
        }
    }
    Ok(latest)
}

/// Advisory lock: a file created exclusively and removed on drop.
struct BuildLock(PathBuf);

impl BuildLock {
    fn acquire(path: &Path) -> Result<Self, IngestError> {
        match OpenOptions::new().write(true).create_new(true).open(path) {
            Ok(_) => Ok(BuildLock(path.to_owned())),
            Err(e) if e.kind() == ErrorKind::AlreadyExists => Err(IngestError::Locked(path.to_owned())),
            Err(e) => Err(IngestError::io(path, e)),
        }
    }
}

impl Drop for BuildLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.0);
    }
}
