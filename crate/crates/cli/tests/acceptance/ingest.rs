use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tsds_core::metadata::scan_catalog;
use tsds_core::query::{execute, parse_constraint};
use tsds_core::{FlatFileStore, NaiveDateTime};

use crate::common::{cal, stdout, tsds, write_station, SENTINEL};
use crate::Outcome;

const DAYS: u32 = 365;
const HOURS: u32 = DAYS * 24;

/// Every regular file in `dir` with its bytes.
fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect()
}

/// Reads the granules directly: hour offset to (temperature, pressure), with
/// sentinels as NaN. Hours absent from every file are absent from the map.
fn scan_granules(granules: &Path) -> BTreeMap<u32, (f64, f64)> {
    let epoch = NaiveDateTime::parse_from_str("2001-01-01T00:00:00", "%Y-%m-%dT%H:%M:%S").unwrap();
    let mut rows = BTreeMap::new();
    for entry in std::fs::read_dir(granules).unwrap() {
        let text = std::fs::read_to_string(entry.unwrap().path()).unwrap();
        for line in text.lines().skip(1) {
            let f: Vec<&str> = line.split(',').collect();
            let t = NaiveDateTime::parse_from_str(f[0], "%Y-%m-%dT%H:%M:%S").unwrap();
            let hour = u32::try_from((t - epoch).num_hours()).unwrap();
            let value = |s: &str| {
                let v: f64 = s.parse().unwrap();
                if v == SENTINEL {
                    f64::NAN
                } else {
                    v
                }
            };
            rows.insert(hour, (value(f[1]), value(f[2])));
        }
    }
    rows
}

fn build(manifest: &Path, out: &Path) -> Result<serde_json::Value, String> {
    let result = tsds(&["build", manifest.to_str().unwrap(), "--out", out.to_str().unwrap(), "--json"]);
    if !result.status.success() {
        return Err(format!("build failed: {}", String::from_utf8_lossy(&result.stderr)));
    }
    serde_json::from_str(&stdout(&result)).map_err(|e| e.to_string())
}

fn statuses(summary: &serde_json::Value) -> Vec<String> {
    summary["series"]
        .as_array()
        .unwrap()
        .iter()
        .map(|s| format!("{} {}", s["series"].as_str().unwrap(), s["status"].as_str().unwrap()))
        .collect()
}

/// Compares cache queries over random hour ranges with the granule scan.
fn check_queries(
    out: &Path,
    truth: &BTreeMap<u32, (f64, f64)>,
    rng: &mut ChaCha8Rng,
    count: usize,
) -> Result<(), String> {
    let catalog = scan_catalog(out).map_err(|e| e.to_string())?;
    let (first, last) = (*truth.keys().next().unwrap(), *truth.keys().last().unwrap());
    for n in 0..count {
        let (a, b) = (rng.gen_range(0..HOURS + 48), rng.gen_range(0..HOURS + 48));
        let (lo, hi) = (a.min(b), a.max(b));
        let (lo_op, hi_op) = (["time>", "time>="][rng.gen_range(0..2)], ["time<", "time<="][rng.gen_range(0..2)]);
        let lo_text = if rng.gen_bool(0.5) {
            format!("{lo}")
        } else {
            let (d, h) = (lo / 24, lo % 24);
            if d < DAYS {
                cal::iso(d, h)
            } else {
                format!("{lo}")
            }
        };
        let exclude = rng.gen_bool(0.3);
        for (series, pick) in [("T", 0usize), ("P", 1)] {
            // The newest version of the series.
            let entry = catalog
                .entries()
                .filter(|e| e.name.starts_with(&format!("Demo_Station_{series}-v")))
                .max_by_key(|e| e.name[format!("Demo_Station_{series}-v").len()..].parse::<u32>().unwrap_or(0))
                .ok_or("series missing from catalog")?;
            let d = &entry.descriptor;
            let var = &d.variables[0].name;
            let mut ce = format!("{var}&{lo_op}{lo_text}&{hi_op}{hi}");
            if exclude {
                ce.push_str("&exclude_missing()");
            }
            let table = execute(d, &parse_constraint(&ce).unwrap(), &FlatFileStore::new(entry.base_dir()))
                .map_err(|e| format!("{ce}: {e}"))?;

            let in_range = |h: u32| {
                (if lo_op == "time>" { h > lo } else { h >= lo }) && (if hi_op == "time<" { h < hi } else { h <= hi })
            };
            let mut want_t = Vec::new();
            let mut want_v = Vec::new();
            for h in (first..=last).filter(|&h| in_range(h)) {
                let v = truth.get(&h).map_or(f64::NAN, |r| if pick == 0 { r.0 } else { r.1 });
                if exclude && v.is_nan() {
                    continue;
                }
                want_t.push(f64::from(h));
                want_v.push(v);
            }
            let got = &table.columns.first().ok_or("no column")?.data.values;
            ensure!(table.times == want_t, "query {n} {series} {ce}: {} times, scan has {}", table.times.len(), want_t.len());
            ensure!(
                got.iter().zip(&want_v).all(|(a, b)| a.to_bits() == b.to_bits() || (a.is_nan() && b.is_nan())),
                "query {n} {series} {ce}: values differ from the granule scan"
            );
        }
    }
    Ok(())
}

pub fn end_to_end() -> Outcome {
    let root = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(365);
    let missing_days = [40, 41, 200];
    let missing_hours: Vec<u32> = (0..60).map(|_| rng.gen_range(1..HOURS - 1)).collect();
    let sentinel_hours: Vec<u32> = (0..120).map(|_| rng.gen_range(0..HOURS)).collect();
    let manifest = write_station(root.path(), DAYS, &missing_days, &missing_hours, &sentinel_hours);
    let granules = root.path().join("granules");
    let out = root.path().join("cache");

    let summary = build(&manifest, &out)?;
    ensure!(
        statuses(&summary) == ["Demo_Station_T-v0 new", "Demo_Station_P-v0 new"],
        "first build: {:?}",
        statuses(&summary)
    );
    let files: BTreeSet<String> = snapshot(&out).into_keys().collect();
    let expected: BTreeSet<String> = ["T", "P"]
        .iter()
        .flat_map(|s| ["bin", "ncml", "provenance.jsonl"].map(|ext| format!("Demo_Station_{s}-v0.{ext}")))
        .collect();
    ensure!(files == expected, "cache holds {files:?}");

    let truth = scan_granules(&granules);
    check_queries(&out, &truth, &mut rng, 60)?;

    let before = snapshot(&out);
    let summary = build(&manifest, &out)?;
    ensure!(
        statuses(&summary) == ["Demo_Station_T-v0 unchanged", "Demo_Station_P-v0 unchanged"],
        "rebuild: {:?}",
        statuses(&summary)
    );
    ensure!(snapshot(&out) == before, "rebuild touched the cache");

    // Change one temperature in one granule.
    let day = 100;
    let path = granules.join(format!("{}.csv", cal::day_name(day)));
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines: Vec<String> = text.lines().map(str::to_owned).collect();
    let row = 5;
    let mut fields: Vec<String> = lines[row].split(',').map(str::to_owned).collect();
    let hour_of_day: u32 = fields[0][11..13].parse().unwrap();
    let changed_hour = day * 24 + hour_of_day;
    fields[1] = "300.125".into();
    lines[row] = fields.join(",");
    std::fs::write(&path, lines.join("\n") + "\n").unwrap();

    let summary = build(&manifest, &out)?;
    ensure!(
        statuses(&summary) == ["Demo_Station_T-v1 updated", "Demo_Station_P-v0 unchanged"],
        "build after edit: {:?}",
        statuses(&summary)
    );
    let after = snapshot(&out);
    for (name, bytes) in &before {
        ensure!(after.get(name) == Some(bytes), "{name} changed after the edit");
    }
    let truth = scan_granules(&granules);
    ensure!(truth[&changed_hour].0 == 300.125, "edit did not land on hour {changed_hour}");
    check_queries(&out, &truth, &mut rng, 20)?;

    Ok(format!(
        "{} granules ({} missing), {} hours: queries match the granule scan, rebuild unchanged, edit published v1 with v0 intact",
        DAYS - missing_days.len() as u32,
        missing_days.len(),
        truth.len()
    ))
}
