use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tsds_core::query::{parse_constraint, render_constraint};
use tsds_core::Filter;

use crate::Outcome;

/// Request URLs in the shape existing clients send.
const PUBLISHED: [&str; 6] = [
    "http://host/tsds/TSI.csv?time>2003-02-25&time<2009-03-27",
    "http://host/tsds/sunspot_number.csv?&replace_missing(NaN)&time>2003-02-25&time<2009-06-01",
    "http://host/tsds/TSIdb.csv?time,correctedIrradiance&replace_missing(NaN)&time>2007-07-11&time<2008-07-11",
    "http://host/tsds/f107.csv?&replace_missing(NaN)&time>2005-08-16&time<2005-10-05",
    "http://host/tsds/sorce_ssi.csv?time,irradiance&time>=2009-01-01&time<2009-01-02",
    "http://host/tsds/sorce_ssi.csv?wavelength,irradiance&time>=2009-01-01&time<2009-01-02",
];

/// (input, error name, character position), positions counted by hand.
const MALFORMED: [(&str, &str, usize); 20] = [
    ("time>", "SyntaxError", 5),
    ("value>10.0&stride(2)&stride(3)", "MultipleFilters", 21),
    ("time<3&stride(0)", "ArityError", 14),
    ("badfilter()", "UnknownFilter", 0),
    ("a,b&&time>1", "SyntaxError", 4),
    ("time>2000-01-02T23:59.59.999", "SyntaxError", 5),
    ("a,1b&time>0", "SyntaxError", 2),
    ("value>>3", "SyntaxError", 6),
    ("stride(2", "SyntaxError", 8),
    ("thin(5)x", "SyntaxError", 7),
    ("value>1.5abc", "SyntaxError", 9),
    ("exclude_missing(1)", "ArityError", 0),
    ("binavg(-5)", "ArityError", 7),
    ("&replace_missing(foo)", "ArityError", 17),
    ("value>2000-01-01", "SyntaxError", 6),
    ("time>1e999", "SyntaxError", 5),
    ("temp\u{e9}>3", "SyntaxError", 4),
    ("x=", "SyntaxError", 2),
    ("(3)", "SyntaxError", 0),
    ("a&time~3", "SyntaxError", 6),
];

/// A canonical expression text: projection, selections, then at most one filter.
fn generated(rng: &mut ChaCha8Rng) -> String {
    const IDENTS: [&str; 6] = ["time", "a", "flux_2", "B.x", "_v", "correctedIrradiance"];
    const OPS: [&str; 6] = ["<", "<=", ">", ">=", "==", "!="];
    let number = |rng: &mut ChaCha8Rng| -> f64 {
        match rng.gen_range(0..4) {
            0 => f64::from(rng.gen_range(-1000..1000)),
            1 => rng.gen_range(-1e3..1e3),
            2 => rng.gen_range(-1.0..1.0) * 10f64.powi(rng.gen_range(-30..30)),
            _ => 0.5,
        }
    };
    let mut text = String::new();
    if rng.gen_bool(0.6) {
        let n = rng.gen_range(1..4);
        let names: Vec<&str> = (0..n).map(|_| *IDENTS.choose(rng).unwrap()).collect();
        text = names.join(",");
    }
    for _ in 0..rng.gen_range(0..4) {
        let op = OPS.choose(rng).unwrap();
        if rng.gen_bool(0.5) {
            let (y, m, d) = (rng.gen_range(1950..2030), rng.gen_range(1..=12), rng.gen_range(1..=28));
            let stamp = match rng.gen_range(0..3) {
                0 => format!("{y:04}-{m:02}-{d:02}"),
                1 => format!("{y:04}-{m:02}-{d:02}T{:02}:{:02}:{:02}", rng.gen_range(0..24), rng.gen_range(0..60), rng.gen_range(0..60)),
                _ => format!("{y:04}-{m:02}-{d:02}T12:00:00.{:03}", rng.gen_range(0..1000)),
            };
            text.push_str(&format!("&time{op}{stamp}"));
        } else {
            let name = IDENTS.choose(rng).unwrap();
            text.push_str(&format!("&{name}{op}{:?}", number(rng)));
        }
    }
    if rng.gen_bool(0.7) {
        let filter = match rng.gen_range(0..8) {
            0 => format!("stride({})", rng.gen_range(1..100_000)),
            1 => format!("thin({})", rng.gen_range(1..100_000)),
            2 => "replace_missing(NaN)".to_owned(),
            3 => format!("replace_missing({:?})", number(rng)),
            4 => "exclude_missing()".to_owned(),
            _ => {
                let name = ["binavg", "binmin", "binmax", "bincount"][rng.gen_range(0..4)];
                format!("{name}({:?})", number(rng).abs().max(1e-3))
            }
        };
        text.push_str(&format!("&{filter}"));
    }
    text
}

pub fn corpus() -> Outcome {
    for url in PUBLISHED {
        let (_, query) = url.split_once('?').unwrap();
        let ce = parse_constraint(query).map_err(|e| format!("{url}: {e}"))?;
        let again = parse_constraint(&render_constraint(&ce)).map_err(|e| format!("{url} rendered: {e}"))?;
        ensure!(again == ce, "{url}: render then parse changed the expression");
    }
    let query = |i: usize| parse_constraint(PUBLISHED[i].split_once('?').unwrap().1).unwrap();
    let sunspot = query(1);
    ensure!(
        sunspot.projection.is_empty()
            && sunspot.selections.len() == 2
            && sunspot.filter.is_some_and(|f| matches!(f, Filter::ReplaceMissing(v) if v.is_nan())),
        "sunspot URL parsed as {sunspot:?}"
    );
    let ssi = query(4);
    ensure!(
        ssi.projection == ["time", "irradiance"] && ssi.selections.len() == 2 && ssi.filter.is_none(),
        "sorce_ssi URL parsed as {ssi:?}"
    );

    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for n in 0..1000 {
        let text = generated(&mut rng);
        let ce = parse_constraint(&text).map_err(|e| format!("generated {n} {text:?}: {e}"))?;
        let rendered = render_constraint(&ce);
        ensure!(rendered == text, "generated {n}: {text:?} rendered as {rendered:?}");
        let again = parse_constraint(&rendered).map_err(|e| format!("generated {n} rendered: {e}"))?;
        ensure!(again == ce, "generated {n}: parse of the rendering differs");
    }

    for (input, name, position) in MALFORMED {
        match parse_constraint(input) {
            Ok(ce) => return Err(format!("{input:?} parsed as {ce:?}")),
            Err(e) => ensure!(
                e.name() == name && e.position() == Some(position),
                "{input:?}: got {} at {:?}, expected {name} at {position}",
                e.name(),
                e.position()
            ),
        }
    }
    Ok(format!(
        "{} published URLs parse, 1000 generated round trips, {} malformed inputs located",
        PUBLISHED.len(),
        MALFORMED.len()
    ))
}
