//! Fixtures shared by the CLI tests and the acceptance suite.
#![allow(dead_code)]

use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Output, Stdio};

use cal::day_name;

pub const BIN: &str = env!("CARGO_BIN_EXE_tsds");

pub fn tsds(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("run tsds")
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Day arithmetic within 2001.
pub mod cal {
    const DAYS: [u32; 12] = [31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31];

    /// (month, day) of 0-based day-of-year `doy` in 2001.
    pub fn month_day(mut doy: u32) -> (u32, u32) {
        for (m, &n) in DAYS.iter().enumerate() {
            if doy < n {
                return (m as u32 + 1, doy + 1);
            }
            doy -= n;
        }
        panic!("day of year out of range");
    }

    pub fn day_name(doy: u32) -> String {
        let (m, d) = month_day(doy);
        format!("2001{m:02}{d:02}")
    }

    pub fn iso(doy: u32, hour: u32) -> String {
        let (m, d) = month_day(doy);
        format!("2001-{m:02}-{d:02}T{hour:02}:00:00")
    }
}

pub const SENTINEL: f64 = -999.0;

pub const MANIFEST: &str = r#"
title = "Synthetic station"
[key]
provider = "Demo"
dataset = "Station"
[granules]
directory = "granules"
pattern = "%Y%m%d.csv"
period = "day"
start = "2001-01-01"
stop = "STOP"
[schema]
header_lines = 1
field_count = 3
time = { kind = "iso", column = 0 }
[time]
units = "hours since 2001-01-01"
cadence = 1.0
[[parameter]]
series = "T"
name = "temperature"
column = 1
units = "K"
fill = -999.0
cformatstring = ".2f"
[[parameter]]
series = "P"
name = "pressure"
column = 2
units = "hPa"
fill = -999.0
"#;

/// Hourly temperature and pressure for `hour` hours since 2001-01-01.
pub fn truth(hour: u32) -> (f64, f64) {
    let h = f64::from(hour);
    (273.0 + 10.0 * (h / 24.0).sin() + h * 1e-3, 1000.0 + (h * 0.37).cos())
}

/// Writes `days` daily granules. Days in `missing` are not written, rows in
/// `missing_hours` are dropped, and rows in `sentinel_hours` carry the fill
/// value in both columns. Returns the manifest path.
pub fn write_station(
    root: &Path,
    days: u32,
    missing: &[u32],
    missing_hours: &[u32],
    sentinel_hours: &[u32],
) -> PathBuf {
    let granules = root.join("granules");
    std::fs::create_dir_all(&granules).unwrap();
    for doy in 0..days {
        if missing.contains(&doy) {
            continue;
        }
        let mut text = String::from("time,temperature,pressure\n");
        for h in 0..24 {
            let hour = doy * 24 + h;
            if missing_hours.contains(&hour) {
                continue;
            }
            let (t, p) = if sentinel_hours.contains(&hour) { (SENTINEL, SENTINEL) } else { truth(hour) };
            text.push_str(&format!("{},{t:?},{p:?}\n", cal::iso(doy, h)));
        }
        std::fs::write(granules.join(format!("{}.csv", day_name(doy))), text).unwrap();
    }
    let (m, d) = cal::month_day(days - 1);
    let manifest = root.join("station.toml");
    std::fs::write(&manifest, MANIFEST.replace("STOP", &format!("2001-{m:02}-{d:02}"))).unwrap();
    manifest
}

/// A running `tsds serve`; killed on drop.
pub struct Server {
    pub child: Child,
    pub base: String,
}

impl Server {
    pub fn start(catalog: &Path) -> Server {
        let mut child = Command::new(BIN)
            .args(["serve", "--port", "0", "--catalog"])
            .arg(catalog)
            .env("RUST_LOG", "warn")
            .stderr(Stdio::piped())
            .stdout(Stdio::null())
            .spawn()
            .expect("spawn tsds serve");
        let stderr = child.stderr.take().unwrap();
        let mut lines = BufReader::new(stderr).lines();
        let base = loop {
            let line = lines.next().expect("server exited before listening").unwrap();
            if let Some(url) = line.strip_prefix("listening on ") {
                break url.to_owned();
            }
        };
        // Keep draining so the server never blocks on a full pipe.
        std::thread::spawn(move || for _ in lines {});
        Server { child, base }
    }

    pub fn url(&self, path: &str) -> String {
        format!("{}{path}", self.base)
    }
}

impl Drop for Server {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}
