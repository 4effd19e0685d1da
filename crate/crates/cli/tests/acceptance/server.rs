use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tsds_core::store::write_series;
use tsds_core::SeriesKey;

use crate::common::Server;
use crate::fixtures::{http_get, write_dataset, Var};
use crate::Outcome;

const MAX_FILE_LEN: usize = 40;

/// What a Mode 1 request must produce, derived from the file bytes alone.
enum Expected {
    Bytes(Vec<u8>),
    Error(&'static str),
}

fn mode1_expected(file: &[u8], start: i64, stop: i64) -> Expected {
    if start < 0 {
        return Expected::Error("IndexNegative");
    }
    if stop < start {
        return Expected::Error("IndexInverted");
    }
    let mut out = Vec::new();
    for j in start as usize..=stop as usize {
        match file.get(8 * j..8 * j + 8) {
            Some(word) => out.extend_from_slice(word),
            None => out.extend_from_slice(&f64::NAN.to_le_bytes()),
        }
    }
    Expected::Bytes(out)
}

pub fn mode1_oracle() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut files = Vec::new();
    for len in 0..=MAX_FILE_LEN {
        let key = SeriesKey::new("Acc", "Mode1", format!("L{len}"), 0).unwrap();
        let values: Vec<f64> = (0..len).map(|_| f64::from_bits(rng.gen())).collect();
        write_series(&dir.path().join(key.bin_filename()), &values).map_err(|e| e.to_string())?;
        files.push((key.bin_filename(), std::fs::read(dir.path().join(key.bin_filename())).unwrap()));
    }
    let server = Server::start(dir.path());

    let (mut padded, mut errors) = (0, 0);
    for n in 0..200 {
        let len = rng.gen_range(0..=MAX_FILE_LEN);
        let start = rng.gen_range(-3..45i64);
        let stop = start + rng.gen_range(-3..=45i64);
        let (name, bytes) = &files[len];
        let resp = http_get(&server.base, &format!("/tsdb/{name}?[{start}:{stop}]"));
        match mode1_expected(bytes, start, stop) {
            Expected::Bytes(want) => {
                ensure!(resp.status == 200, "case {n} ({len}, {start}, {stop}): status {}", resp.status);
                ensure!(resp.body == want, "case {n} ({len}, {start}, {stop}): bytes differ");
                padded += usize::from(stop as usize >= len);
            }
            Expected::Error(name) => {
                ensure!(resp.status == 400, "case {n} ({len}, {start}, {stop}): status {}", resp.status);
                let body: serde_json::Value = serde_json::from_slice(&resp.body).map_err(|e| e.to_string())?;
                ensure!(body["error"] == name, "case {n} ({len}, {start}, {stop}): {body}, expected {name}");
                errors += 1;
            }
        }
    }
    Ok(format!("200 cases byte-identical to the oracle ({padded} NaN-padded, {errors} index errors)"))
}

pub fn latency() -> Outcome {
    const LEN: usize = 200_000;
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let values: Vec<f64> = (0..LEN)
        .map(|_| if rng.gen_bool(0.05) { f64::NAN } else { rng.gen_range(-1e3..1e3) })
        .collect();
    let key = SeriesKey::new("Acc", "Latency", "V", 0).unwrap();
    write_dataset(
        dir.path(),
        &key,
        "minutes since 2000-01-01",
        0.0,
        1.0,
        LEN as u64,
        &[Var { name: "v", components: 1, fill: f64::NAN, values: &values }],
    );
    // Samples 50000 through 149999, percent-encoded as a client sends it.
    let path = format!("/tsds/{}.csv?time%3E=50000&time%3C150000&thin(2000)", key.stem());

    let mut runs = Vec::new();
    let mut bodies: Vec<Vec<u8>> = Vec::new();
    for _ in 0..5 {
        // A fresh process each time, so nothing is warm but the page cache.
        let server = Server::start(dir.path());
        let started = Instant::now();
        let resp = http_get(&server.base, &path);
        runs.push(started.elapsed());
        ensure!(resp.status == 200, "status {}: {}", resp.status, String::from_utf8_lossy(&resp.body));
        bodies.push(resp.body);
    }
    ensure!(bodies.windows(2).all(|w| w[0] == w[1]), "responses differ between runs");
    let rows = bodies[0].split(|&b| b == b'\n').filter(|l| !l.is_empty()).count() - 1;
    ensure!(rows == 2000, "{rows} data rows, expected 2000");
    runs.sort();
    let median = runs[2];
    ensure!(median < Duration::from_millis(500), "median {median:?}, limit 500 ms");
    Ok(format!(
        "median {:.1} ms over 5 cold servers, {rows} rows, byte-identical",
        median.as_secs_f64() * 1e3
    ))
}
