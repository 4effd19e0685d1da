use std::fs;
use std::path::Path;

use serde_json::json;
use tsds_core::metadata::{parse_ncml, DataSource};
use tsds_core::store::{file_md5, ELEMENT_BYTES};
use tsds_core::DatasetDescriptor;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Verdict {
    Ok,
    Skipped,
    Failed,
}

struct Finding {
    dataset: String,
    verdict: Verdict,
    detail: String,
}

/// The series file the MD5 attribute describes: the only binary variable, or
/// the one named after the document.
fn data_file<'a>(stem: &str, d: &'a DatasetDescriptor) -> Option<(&'a str, usize)> {
    let binaries: Vec<(&str, usize)> = d
        .variables
        .iter()
        .filter_map(|v| match &v.source {
            DataSource::Binary { location, .. } => Some((location.as_str(), v.layout.components)),
            _ => None,
        })
        .collect();
    match binaries.as_slice() {
        [one] => Some(*one),
        many => many.iter().copied().find(|(loc, _)| loc.strip_suffix(".bin") == Some(stem)),
    }
}

fn check(dir: &Path, stem: &str, text: &str) -> Finding {
    let finding = |verdict, detail: String| Finding {
        dataset: stem.to_owned(),
        verdict,
        detail,
    };
    let d = match parse_ncml(text) {
        Ok(d) => d,
        Err(e) => return finding(Verdict::Failed, format!("unparseable metadata: {e}")),
    };
    let Some((location, components)) = data_file(stem, &d) else {
        return finding(Verdict::Skipped, "no binary series".into());
    };
    let path = dir.join(location);
    let len = match fs::metadata(&path) {
        Ok(m) => m.len(),
        Err(e) => return finding(Verdict::Failed, format!("{location}: {e}")),
    };
    let expected_len = d.time_axis.len() * components as u64 * ELEMENT_BYTES;
    if len != expected_len {
        return finding(
            Verdict::Failed,
            format!("{location}: length {len} bytes, metadata implies {expected_len}"),
        );
    }
    let Some(expected) = d.md5 else {
        return finding(Verdict::Skipped, format!("{location}: no MD5 attribute (length ok)"));
    };
    match file_md5(&path) {
        Ok(actual) if actual == expected => finding(Verdict::Ok, format!("{location}: md5 {actual}")),
        Ok(actual) => finding(
            Verdict::Failed,
            format!("{location}: md5 mismatch, expected {expected}, got {actual}"),
        ),
        Err(e) => finding(Verdict::Failed, format!("{location}: {e}")),
    }
}

pub fn run(dir: &Path, as_json: bool) -> Result<(), CliError> {
    let entries = fs::read_dir(dir)
        .map_err(|e| CliError::User(format!("cannot read {}: {e}", dir.display())))?;
    let mut docs: Vec<_> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "ncml"))
        .collect();
    docs.sort();

    let mut findings = Vec::with_capacity(docs.len());
    for path in &docs {
        let stem = path.file_stem().unwrap_or_default().to_string_lossy().into_owned();
        let finding = match fs::read_to_string(path) {
            Ok(text) => check(dir, &stem, &text),
            Err(e) => Finding {
                dataset: stem,
                verdict: Verdict::Failed,
                detail: e.to_string(),
            },
        };
        findings.push(finding);
    }

    let failures = findings.iter().filter(|f| f.verdict == Verdict::Failed).count();
    if as_json {
        let results: Vec<_> = findings
            .iter()
            .map(|f| {
                let status = match f.verdict {
                    Verdict::Ok => "ok",
                    Verdict::Skipped => "skipped",
                    Verdict::Failed => "failed",
                };
                json!({"dataset": f.dataset, "status": status, "detail": f.detail})
            })
            .collect();
        println!("{}", json!({"results": results, "failures": failures}));
    } else {
        for f in &findings {
            let word = match f.verdict {
                Verdict::Ok => "ok",
                Verdict::Skipped => "skipped",
                Verdict::Failed => "FAILED",
            };
            println!("{word} {}: {}", f.dataset, f.detail);
        }
    }
    if failures > 0 {
        return Err(CliError::User(format!("{failures} of {} series failed validation", findings.len())));
    }
    Ok(())
}
