use std::fmt::Write;
use std::time::{Duration, Instant};

use chrono::{NaiveDate, NaiveDateTime, TimeDelta};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tsds_core::store::{read_all, read_elements, write_series};

use crate::Outcome;

/// A million doubles drawn from raw bit patterns, with the special classes
/// planted at fixed density so every run covers them.
fn awkward_doubles(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..n)
        .map(|i| match i % 16 {
            0 => f64::NAN,
            1 => f64::from_bits(0x7ff0_0000_0000_0001 | rng.gen::<u64>() & 0x000f_ffff_ffff_ffff),
            2 => f64::INFINITY,
            3 => f64::NEG_INFINITY,
            4 => f64::from_bits(rng.gen::<u64>() & 0x000f_ffff_ffff_ffff),
            5 => -f64::from_bits(rng.gen::<u64>() & 0x000f_ffff_ffff_ffff),
            6 => -0.0,
            _ => f64::from_bits(rng.gen()),
        })
        .collect()
}

pub fn round_trip() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("Acc_Round_Trip-v0.bin");
    let values = awkward_doubles(1_000_000, &mut ChaCha8Rng::seed_from_u64(1));

    let started = Instant::now();
    write_series(&path, &values).map_err(|e| e.to_string())?;
    let block = read_elements(&path, 0, values.len() as i64 - 1).map_err(|e| e.to_string())?;
    let elapsed = started.elapsed();

    // The file itself must be the plain little-endian image.
    let bytes = std::fs::read(&path).unwrap();
    let expected: Vec<u8> = values.iter().flat_map(|v| v.to_le_bytes()).collect();
    ensure!(bytes == expected, "file bytes differ from the little-endian image");
    ensure!(block.values.len() == values.len(), "read {} values", block.values.len());
    let mismatches = values
        .iter()
        .zip(&block.values)
        .filter(|(a, b)| a.to_bits() != b.to_bits())
        .count();
    ensure!(mismatches == 0, "{mismatches} values changed bits");
    let subnormals = values.iter().filter(|v| v.is_subnormal()).count();
    let nans = values.iter().filter(|v| v.is_nan()).count();
    ensure!(elapsed < Duration::from_secs(5), "took {elapsed:?}, limit 5s");
    Ok(format!(
        "1e6 values bit-exact ({nans} NaN, {subnormals} subnormal) in {:.0} ms",
        elapsed.as_secs_f64() * 1e3
    ))
}

fn median(mut xs: Vec<Duration>) -> Duration {
    xs.sort();
    xs[xs.len() / 2]
}

/// Parses `ISO time,value` lines into (minutes since `epoch`, value) columns.
fn parse_csv(text: &str, epoch: NaiveDateTime) -> Result<(Vec<f64>, Vec<f64>), String> {
    let mut times = Vec::with_capacity(text.len() / 32);
    let mut values = Vec::with_capacity(text.len() / 32);
    for (n, line) in text.lines().enumerate() {
        let (t, value) = line.split_once(',').ok_or_else(|| format!("line {n}: no comma"))?;
        let t = NaiveDateTime::parse_from_str(t, "%Y-%m-%dT%H:%M:%S").map_err(|e| format!("line {n}: {e}"))?;
        times.push((t - epoch).num_seconds() as f64 / 60.0);
        values.push(value.parse::<f64>().map_err(|e| format!("line {n}: {e}"))?);
    }
    Ok((times, values))
}

pub fn read_performance() -> Outcome {
    // Ten years at one-minute cadence.
    const N: usize = 5_260_000;
    let dir = tempfile::tempdir().unwrap();
    let bin = dir.path().join("Acc_Perf_V-v0.bin");
    let csv = dir.path().join("perf.csv");
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let values: Vec<f64> = (0..N).map(|_| rng.gen_range(-5e4..5e4)).collect();
    write_series(&bin, &values).map_err(|e| e.to_string())?;
    // The same rows as the csv encoder would render them: ISO time, value.
    let epoch = NaiveDate::from_ymd_opt(2000, 1, 1).unwrap().and_hms_opt(0, 0, 0).unwrap();
    let mut text = String::with_capacity(N * 40);
    for (i, v) in values.iter().enumerate() {
        let t = epoch + TimeDelta::minutes(i as i64);
        writeln!(text, "{},{v:?}", t.format("%Y-%m-%dT%H:%M:%S")).unwrap();
    }
    std::fs::write(&csv, text).unwrap();

    let mut bin_runs = Vec::new();
    let mut csv_runs = Vec::new();
    for _ in 0..5 {
        let started = Instant::now();
        let read = read_all(&bin).map_err(|e| e.to_string())?;
        bin_runs.push(started.elapsed());
        ensure!(read.len() == N && read == values, "binary read returned different values");

        let started = Instant::now();
        let (times, parsed) = parse_csv(&std::fs::read_to_string(&csv).unwrap(), epoch)?;
        csv_runs.push(started.elapsed());
        ensure!(parsed == values, "csv parse returned different values");
        ensure!(times.last() == Some(&(N as f64 - 1.0)), "csv times end at {:?}", times.last());
    }
    let (bin_t, csv_t) = (median(bin_runs), median(csv_runs));
    let speedup = csv_t.as_secs_f64() / bin_t.as_secs_f64();
    let detail = format!(
        "binary {:.1} ms, csv {:.1} ms, {speedup:.1}x (median of 5)",
        bin_t.as_secs_f64() * 1e3,
        csv_t.as_secs_f64() * 1e3
    );
    ensure!(bin_t < Duration::from_millis(500), "binary read too slow: {detail}");
    ensure!(speedup >= 20.0, "speedup below 20x: {detail}");
    Ok(detail)
}
