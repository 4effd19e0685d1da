use std::time::{Duration, Instant};

use chrono::TimeDelta;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tsds_core::metadata::{parse_ncml, TimeAxis};
use tsds_core::query::{execute, filter_block, parse_constraint, BlockKind};
use tsds_core::{Column, FlatFileStore, NaiveDate, ResultTable, SeriesKey, TableColumn};

use crate::fixtures::{write_dataset, Var, EXAMPLE_NCML};
use crate::Outcome;

pub fn metadata_example() -> Outcome {
    let d = parse_ncml(EXAMPLE_NCML).map_err(|e| e.to_string())?;
    let TimeAxis::Uniform { start, increment, length } = d.time_axis else {
        return Err(format!("expected a uniform axis, got {:?}", d.time_axis));
    };
    ensure!(length == 149_016, "length {length}");
    ensure!(start == 0.5 && increment == 1.0, "start {start}, increment {increment}");
    let units = d.time_encoding.units();
    ensure!(units == "minutes since 1989-01-01 00:00:0.0", "units {units:?}");
    let first = d.time_encoding.time_of(0.5).map_err(|e| e.to_string())?;
    let expected = NaiveDate::from_ymd_opt(1989, 1, 1).unwrap().and_hms_opt(0, 0, 30).unwrap();
    ensure!(first == expected, "first sample at {first}");

    let store = FlatFileStore::new(std::env::temp_dir());
    let table = execute(&d, &parse_constraint("").unwrap(), &store).map_err(|e| e.to_string())?;
    ensure!(table.len() == 149_016, "{} rows", table.len());
    let values = &table.column("Variable1").ok_or("no Variable1 column")?.data.values;
    for i in 0..table.len() {
        ensure!(
            table.times[i] == 0.5 + i as f64 && values[i] == i as f64,
            "row {i}: time {} value {}",
            table.times[i],
            values[i]
        );
    }
    Ok("149016 samples; values 0,1,2,... at 0.5,1.5,...; first at 1989-01-01T00:00:30".into())
}

// ---------------------------------------------------------------------------
// Brute-force reference for execute().

const N: usize = 100_000;
const NAMES: [&str; 3] = ["a", "b", "c"];
const COMPONENTS: [usize; 3] = [1, 1, 3];
const FILLS: [f64; 3] = [f64::NAN, -999.0, f64::NAN];

#[derive(Debug, Clone, Copy)]
enum Op {
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
}

const OPS: [(Op, &str); 6] = [
    (Op::Lt, "<"),
    (Op::Le, "<="),
    (Op::Gt, ">"),
    (Op::Ge, ">="),
    (Op::Eq, "=="),
    (Op::Ne, "!="),
];

fn holds(op: Op, x: f64, y: f64) -> bool {
    match op {
        Op::Lt => x < y,
        Op::Le => x <= y,
        Op::Gt => x > y,
        Op::Ge => x >= y,
        Op::Eq => x == y,
        Op::Ne => x != y,
    }
}

#[derive(Debug, Clone, Copy)]
enum RefFilter {
    Stride(usize),
    Thin(usize),
    Replace(f64),
    Exclude,
    Bin(BlockKind, f64),
}

/// A generated query: its text and the meaning the reference gives it.
#[derive(Debug)]
struct Case {
    text: String,
    projection: Vec<&'static str>,
    /// (variable index or None for time, op, literal as a number)
    clauses: Vec<(Option<usize>, Op, f64)>,
    filter: Option<RefFilter>,
}

fn missing(v: f64, fill: f64) -> bool {
    v.is_nan() || v == fill
}

fn generate(rng: &mut ChaCha8Rng, data: &[Vec<f64>]) -> Case {
    let epoch = NaiveDate::from_ymd_opt(2000, 1, 1).unwrap().and_hms_opt(0, 0, 0).unwrap();
    let mut projection: Vec<&'static str> = Vec::new();
    if rng.gen_bool(0.7) {
        let mut pool = vec!["time", "a", "b", "c"];
        pool.shuffle(rng);
        projection = pool[..rng.gen_range(1..=4)].to_vec();
    }
    let mut clauses = Vec::new();
    let mut parts: Vec<String> = Vec::new();
    for _ in 0..rng.gen_range(0..=2) {
        let (op, sym) = OPS[rng.gen_range(0..6)];
        let minutes = rng.gen_range(-100..N as i64 + 100);
        let (text, value) = match rng.gen_range(0..4) {
            0 => {
                let t = epoch + TimeDelta::minutes(minutes);
                (t.format("%Y-%m-%dT%H:%M:%S").to_string(), minutes as f64)
            }
            1 => {
                let day = minutes.div_euclid(1440);
                let t = epoch + TimeDelta::minutes(day * 1440);
                (t.format("%Y-%m-%d").to_string(), (day * 1440) as f64)
            }
            2 => {
                let x = minutes as f64 + 0.5;
                (format!("{x:?}"), x)
            }
            _ => (format!("{:?}", minutes as f64), minutes as f64),
        };
        parts.push(format!("time{sym}{text}"));
        clauses.push((None, op, value));
    }
    for _ in 0..rng.gen_range(0..=2) {
        let var = rng.gen_range(0..3);
        let (op, sym) = OPS[rng.gen_range(0..6)];
        // Equality needs literals that occur in the data.
        let value = if matches!(op, Op::Eq | Op::Ne) || rng.gen_bool(0.3) {
            let pick = data[var][rng.gen_range(0..data[var].len())];
            if pick.is_nan() {
                0.0
            } else {
                pick
            }
        } else {
            rng.gen_range(-120.0..120.0f64).round()
        };
        parts.push(format!("{}{sym}{value:?}", NAMES[var]));
        clauses.push((Some(var), op, value));
    }
    let filter = if rng.gen_bool(0.85) {
        let widths = [0.5, 1.0, 7.5, 60.0, 333.25, 1440.0, 1e6];
        let (f, text) = match rng.gen_range(0..8) {
            0 => {
                let n = rng.gen_range(1..60);
                (RefFilter::Stride(n), format!("stride({n})"))
            }
            1 => {
                let n = rng.gen_range(1..5000);
                (RefFilter::Thin(n), format!("thin({n})"))
            }
            2 => match rng.gen_range(0..3) {
                0 => (RefFilter::Replace(f64::NAN), "replace_missing(NaN)".to_owned()),
                1 => (RefFilter::Replace(-1.5), "replace_missing(-1.5)".to_owned()),
                _ => (RefFilter::Replace(0.0), "replace_missing(0)".to_owned()),
            },
            3 => (RefFilter::Exclude, "exclude_missing()".to_owned()),
            k => {
                let kind = [BlockKind::Avg, BlockKind::Min, BlockKind::Max, BlockKind::Count][k - 4];
                let w = *widths.choose(rng).unwrap();
                (RefFilter::Bin(kind, w), format!("{}({w:?})", kind.filter_name()))
            }
        };
        parts.push(text);
        Some(f)
    } else {
        None
    };
    parts.shuffle(rng);
    let mut text = projection.join(",");
    if projection.is_empty() && !parts.is_empty() && rng.gen_bool(0.5) {
        // A leading clause may stand where the projection would be.
        text = parts.remove(0);
    }
    for p in parts {
        text.push('&');
        text.push_str(&p);
    }
    Case {
        text,
        projection,
        clauses,
        filter,
    }
}

/// Reads everything, keeps the rows every clause accepts, projects, and runs
/// the filter, all with plain loops over the in-memory data.
fn reference(case: &Case, data: &[Vec<f64>]) -> ResultTable {
    let rows: Vec<usize> = (0..N)
        .filter(|&i| {
            let t = i as f64;
            case.clauses.iter().all(|&(var, op, lit)| match var {
                None => holds(op, t, lit),
                Some(v) => {
                    let k = COMPONENTS[v];
                    data[v][i * k..(i + 1) * k]
                        .iter()
                        .any(|&x| !missing(x, FILLS[v]) && holds(op, x, lit))
                }
            })
        })
        .collect();

    let mut vars: Vec<usize> = Vec::new();
    if case.projection.is_empty() {
        vars = vec![0, 1, 2];
    }
    for name in &case.projection {
        if let Some(v) = NAMES.iter().position(|n| n == name) {
            vars.push(v);
        }
    }
    let mut times: Vec<f64> = rows.iter().map(|&i| i as f64).collect();
    let mut cols: Vec<Vec<f64>> = vars
        .iter()
        .map(|&v| {
            let k = COMPONENTS[v];
            rows.iter().flat_map(|&i| data[v][i * k..(i + 1) * k].iter().copied()).collect()
        })
        .collect();
    let mut counts: Option<Vec<Vec<u64>>> = None;

    let keep = |times: &mut Vec<f64>, cols: &mut Vec<Vec<f64>>, picked: &[usize]| {
        *times = picked.iter().map(|&r| times[r]).collect();
        for (c, &v) in cols.iter_mut().zip(&vars) {
            let k = COMPONENTS[v];
            *c = picked.iter().flat_map(|&r| c[r * k..(r + 1) * k].to_vec()).collect();
        }
    };
    match case.filter {
        None => {}
        Some(RefFilter::Stride(n)) => {
            let picked: Vec<usize> = (0..times.len()).step_by(n).collect();
            keep(&mut times, &mut cols, &picked);
        }
        Some(RefFilter::Thin(n)) => {
            let stride = times.len().div_ceil(n).max(1);
            let picked: Vec<usize> = (0..times.len()).step_by(stride).collect();
            keep(&mut times, &mut cols, &picked);
        }
        Some(RefFilter::Replace(r)) => {
            for (c, &v) in cols.iter_mut().zip(&vars) {
                for x in c.iter_mut().filter(|x| missing(**x, FILLS[v])) {
                    *x = r;
                }
            }
        }
        Some(RefFilter::Exclude) => {
            let picked: Vec<usize> = (0..times.len())
                .filter(|&r| {
                    cols.iter().zip(&vars).all(|(c, &v)| {
                        let k = COMPONENTS[v];
                        c[r * k..(r + 1) * k].iter().all(|&x| !missing(x, FILLS[v]))
                    })
                })
                .collect();
            keep(&mut times, &mut cols, &picked);
        }
        Some(RefFilter::Bin(kind, width)) => {
            // Walk the rows in order, advancing the window edge by exact steps.
            let mut windows: Vec<(i64, Vec<usize>)> = Vec::new();
            if let Some(&t0) = times.first() {
                let mut w = 0i64;
                for (r, &t) in times.iter().enumerate() {
                    while t >= t0 + (w + 1) as f64 * width {
                        w += 1;
                    }
                    match windows.last_mut() {
                        Some((last, members)) if *last == w => members.push(r),
                        _ => windows.push((w, vec![r])),
                    }
                }
            }
            let t0 = times.first().copied().unwrap_or(0.0);
            let mut all_counts = Vec::new();
            let mut new_cols = Vec::new();
            for (c, &v) in cols.iter().zip(&vars) {
                let k = COMPONENTS[v];
                let mut out = Vec::new();
                let mut n_out = Vec::new();
                for (_, members) in &windows {
                    for j in 0..k {
                        let xs: Vec<f64> = members
                            .iter()
                            .map(|&r| c[r * k + j])
                            .filter(|&x| !missing(x, FILLS[v]))
                            .collect();
                        let n = xs.len();
                        let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
                        let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                        let mean = xs.iter().sum::<f64>() / n as f64;
                        out.push(match (kind, n) {
                            (BlockKind::Count, _) => n as f64,
                            (_, 0) => f64::NAN,
                            (BlockKind::Avg, _) => mean.clamp(lo, hi),
                            (BlockKind::Min, _) => lo,
                            (BlockKind::Max, _) => hi,
                        });
                        n_out.push(n as u64);
                    }
                }
                new_cols.push(out);
                all_counts.push(n_out);
            }
            times = windows.iter().map(|(w, _)| t0 + (*w as f64 + 0.5) * width).collect();
            cols = new_cols;
            counts = Some(all_counts);
        }
    }

    let mut table = ResultTable::new(times);
    for (i, (c, &v)) in cols.into_iter().zip(&vars).enumerate() {
        let mut col = TableColumn::new(NAMES[v], FILLS[v], Column::new(COMPONENTS[v], c));
        col.counts = counts.as_ref().map(|all| all[i].clone());
        table.push_column(col);
    }
    table
}

fn describe(t: &ResultTable) -> String {
    let cols: Vec<String> = t
        .columns
        .iter()
        .map(|c| format!("{}[{}]", c.name, c.data.values.len()))
        .collect();
    format!("{} rows, columns {}", t.len(), cols.join(" "))
}

pub fn oracle_equivalence() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let data: Vec<Vec<f64>> = (0..3)
        .map(|v| {
            (0..N * COMPONENTS[v])
                .map(|_| {
                    if rng.gen_bool(0.05) {
                        f64::NAN
                    } else if v == 1 && rng.gen_bool(0.02) {
                        FILLS[1]
                    } else {
                        rng.gen_range(-100.0..100.0)
                    }
                })
                .collect()
        })
        .collect();
    let key = SeriesKey::new("Acc", "Query", "A", 0).unwrap();
    let vars: Vec<Var> = (0..3)
        .map(|v| Var {
            name: NAMES[v],
            components: COMPONENTS[v],
            fill: FILLS[v],
            values: &data[v],
        })
        .collect();
    let d = write_dataset(dir.path(), &key, "minutes since 2000-01-01", 0.0, 1.0, N as u64, &vars);
    let store = FlatFileStore::new(dir.path());

    let started = Instant::now();
    let mut nonempty = 0;
    for n in 0..500 {
        let case = generate(&mut rng, &data);
        let ce = parse_constraint(&case.text).map_err(|e| format!("case {n} {:?}: {e}", case.text))?;
        let got = execute(&d, &ce, &store).map_err(|e| format!("case {n} {:?}: {e}", case.text))?;
        let want = reference(&case, &data);
        ensure!(
            got.bits_eq(&want),
            "case {n} {:?}: got {}, reference {}",
            case.text,
            describe(&got),
            describe(&want)
        );
        nonempty += usize::from(!got.is_empty());
    }
    let elapsed = started.elapsed();
    ensure!(elapsed < Duration::from_secs(60), "took {elapsed:?}, limit 60s");
    Ok(format!(
        "500 expressions identical to the reference ({nonempty} non-empty) in {:.1}s",
        elapsed.as_secs_f64()
    ))
}

pub fn block_conservation() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut windows = 0usize;
    for n in 0..100 {
        let len = rng.gen_range(0..3000);
        let mut t = rng.gen_range(-1e4..1e4f64);
        let times: Vec<f64> = (0..len)
            .map(|_| {
                if rng.gen_bool(0.9) {
                    t += rng.gen_range(0.0..10.0f64).floor() * 0.25;
                }
                t
            })
            .collect();
        let missing_rate = rng.gen_range(0.0..0.6);
        let mut table = ResultTable::new(times);
        for c in 0..rng.gen_range(1..4) {
            let k = rng.gen_range(1..4);
            let fill = if rng.gen_bool(0.5) { f64::NAN } else { -1e31 };
            let values = (0..len * k)
                .map(|_| {
                    if rng.gen_bool(missing_rate) {
                        if rng.gen_bool(0.5) {
                            f64::NAN
                        } else {
                            fill
                        }
                    } else {
                        rng.gen_range(-1e3..1e3)
                    }
                })
                .collect();
            table.push_column(TableColumn::new(format!("v{c}"), fill, Column::new(k, values)));
        }
        let width = [0.25, 1.0, 3.7, 50.0, 1e5][rng.gen_range(0..5)];
        let run = |kind| filter_block(table.clone(), width, kind).map_err(|e| format!("table {n}: {e}"));
        let (avg, lo, hi, count) = (
            run(BlockKind::Avg)?,
            run(BlockKind::Min)?,
            run(BlockKind::Max)?,
            run(BlockKind::Count)?,
        );
        windows += avg.len();
        for (ci, col) in table.columns.iter().enumerate() {
            let present = col.data.values.iter().filter(|&&x| !missing(x, col.fill_value)).count() as u64;
            let counts = avg.columns[ci].counts.as_ref().ok_or("no counts")?;
            let total: u64 = counts.iter().sum();
            ensure!(total == present, "table {n} column {ci}: counts sum {total}, non-missing {present}");
            ensure!(
                count.columns[ci].counts.as_ref() == Some(counts),
                "table {n} column {ci}: bincount counts differ from binavg counts"
            );
            for (e, &c) in counts.iter().enumerate() {
                let (m, a, b) = (avg.columns[ci].data.values[e], lo.columns[ci].data.values[e], hi.columns[ci].data.values[e]);
                ensure!(count.columns[ci].data.values[e] == c as f64, "table {n}: bincount value differs from count");
                if c == 0 {
                    ensure!(m.is_nan() && a.is_nan() && b.is_nan(), "table {n}: empty window not NaN");
                } else {
                    ensure!(a <= m && m <= b, "table {n} element {e}: mean {m} outside [{a}, {b}]");
                }
            }
        }
    }
    Ok(format!("100 tables, {windows} windows: counts conserved, means within [min, max]"))
}
