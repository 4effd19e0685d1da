use std::path::Path;

use serde_json::json;
use tsds_core::ingest::{build_cache, BuildManifest, BuildOptions, BuildReport, SeriesStatus};

use crate::CliError;

pub fn run(manifest: &Path, out: &Path, jobs: usize, as_json: bool) -> Result<(), CliError> {
    crate::init_logging("warn");
    let classify = |e: tsds_core::ingest::IngestError| {
        if e.is_user_error() {
            CliError::User(e.to_string())
        } else {
            CliError::Internal(e.to_string())
        }
    };
    let manifest = BuildManifest::load(manifest).map_err(classify)?;
    let report = build_cache(&manifest, out, &BuildOptions { jobs }).map_err(classify)?;
    if as_json {
        println!("{}", summary_json(&report));
    } else {
        print!("{}", summary_text(&report));
    }
    Ok(())
}

fn status_text(status: SeriesStatus) -> String {
    match status {
        SeriesStatus::New => "new".into(),
        SeriesStatus::Unchanged => "unchanged".into(),
        SeriesStatus::Updated { previous } => format!("updated (was v{previous})"),
    }
}

fn summary_text(r: &BuildReport) -> String {
    let mut out = String::new();
    for s in &r.series {
        out.push_str(&format!(
            "{} {} {} samples md5 {}\n",
            s.key.stem(),
            status_text(s.status),
            s.samples,
            s.md5
        ));
    }
    out.push_str(&format!(
        "granules: {} read, {} missing; rows quarantined: {}; samples filled: {}\n",
        r.granules_read,
        r.gaps.len(),
        r.quarantined.len(),
        r.filled_samples
    ));
    for q in &r.quarantined {
        out.push_str(&format!("quarantined {}:{}: {}\n", q.path.display(), q.line, q.reason));
    }
    out
}

fn summary_json(r: &BuildReport) -> serde_json::Value {
    json!({
        "series": r.series.iter().map(|s| json!({
            "series": s.key.stem(),
            "version": s.key.version,
            "status": s.status.as_str(),
            "samples": s.samples,
            "md5": s.md5.to_hex(),
            "bin": s.bin.display().to_string(),
            "ncml": s.ncml.display().to_string(),
            "provenance": s.provenance.display().to_string(),
        })).collect::<Vec<_>>(),
        "granulesRead": r.granules_read,
        "gaps": r.gaps.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
        "quarantined": r.quarantined.iter().map(|q| json!({
            "path": q.path.display().to_string(),
            "line": q.line,
            "reason": q.reason,
        })).collect::<Vec<_>>(),
        "filledSamples": r.filled_samples,
    })
}
