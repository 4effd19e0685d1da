//! Fixtures shared by the benchmarks.

use std::fmt::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tsds_core::metadata::{DataSource, TimeAxis, VariableSpec};
use tsds_core::store::write_series;
use tsds_core::{DataType, DatasetDescriptor, NaiveDate, SeriesKey};

/// `n` reproducible values with roughly 5% NaN.
pub fn values(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| if rng.gen_bool(0.05) { f64::NAN } else { rng.gen_range(-1e3..1e3) })
        .collect()
}

/// `index,value` lines, the simplest ASCII rendering of a series.
pub fn csv_text(values: &[f64]) -> String {
    let mut text = String::with_capacity(values.len() * 24);
    for (i, v) in values.iter().enumerate() {
        writeln!(text, "{i},{v:?}").unwrap();
    }
    text
}

/// Parses what [`csv_text`] writes, keeping the value column.
pub fn parse_csv(text: &str) -> Vec<f64> {
    text.lines()
        .map(|line| line.split_once(',').expect("comma").1.parse().expect("number"))
        .collect()
}

/// Writes a one-variable series on a uniform one-minute axis into `dir` and
/// returns its descriptor.
pub fn minute_series(dir: &Path, values: &[f64]) -> DatasetDescriptor {
    let key = SeriesKey::new("Bench", "Minute", "V", 0).expect("valid key");
    let md5 = write_series(&dir.join(key.bin_filename()), values).expect("write series");
    let day = NaiveDate::from_ymd_opt(2000, 1, 1).unwrap();
    DatasetDescriptor {
        title: "benchmark series".into(),
        conventions: "COARDS, TSDS".into(),
        tsds_id: None,
        science_metadata: None,
        data_type: DataType::TimeSeries,
        start_date: day,
        stop_date: day,
        md5: Some(md5),
        points_per_day: Some(1440.0),
        time_encoding: "minutes since 2000-01-01".parse().expect("units"),
        time_axis: TimeAxis::Uniform {
            start: 0.0,
            increment: 1.0,
            length: values.len() as u64,
        },
        variables: vec![VariableSpec::scalar("v", "1", DataSource::binary(key.bin_filename()))],
        extra: Vec::new(),
    }
}
