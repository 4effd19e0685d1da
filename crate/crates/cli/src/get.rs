use std::path::Path;

use tsds_core::metadata::parse_ncml;
use tsds_core::Md5Digest;

use crate::CliError;

/// If `url` asks for a whole series file (`.../{stem}.bin` with no range),
/// returns the URL of its metadata.
fn metadata_url(url: &str) -> Option<String> {
    if url.contains('?') {
        return None;
    }
    let stem = url.strip_suffix(".bin")?;
    let file = stem.rsplit('/').next()?;
    tsds_core::SeriesKey::parse_stem(file).ok()?;
    Some(format!("{stem}.ncml"))
}

pub fn run(url: &str, out: &Path) -> Result<(), CliError> {
    let runtime = tokio::runtime::Builder::new_current_thread()
        .enable_all()
        .build()
        .map_err(|e| CliError::Internal(e.to_string()))?;
    runtime.block_on(fetch_and_check(url, out))
}

async fn fetch(client: &reqwest::Client, url: &str) -> Result<Vec<u8>, CliError> {
    let resp = client
        .get(url)
        .send()
        .await
        .map_err(|e| CliError::User(format!("GET {url}: {e}")))?;
    let status = resp.status();
    let body = resp
        .bytes()
        .await
        .map_err(|e| CliError::User(format!("GET {url}: {e}")))?;
    if !status.is_success() {
        let text = String::from_utf8_lossy(&body);
        return Err(CliError::User(format!("GET {url}: HTTP {status}: {}", text.trim())));
    }
    Ok(body.to_vec())
}

async fn fetch_and_check(url: &str, out: &Path) -> Result<(), CliError> {
    let client = reqwest::Client::new();
    let body = fetch(&client, url).await?;
    std::fs::write(out, &body)
        .map_err(|e| CliError::Internal(format!("cannot write {}: {e}", out.display())))?;
    println!("wrote {} bytes to {}", body.len(), out.display());

    let Some(meta_url) = metadata_url(url) else {
        return Ok(());
    };
    let ncml = fetch(&client, &meta_url).await?;
    let text = String::from_utf8(ncml).map_err(|_| CliError::User(format!("{meta_url}: not UTF-8")))?;
    let descriptor = parse_ncml(&text).map_err(|e| CliError::User(format!("{meta_url}: {e}")))?;
    match descriptor.md5 {
        None => println!("md5 not advertised"),
        Some(expected) => {
            let actual = Md5Digest::of(&body);
            if actual == expected {
                println!("md5 ok {actual}");
            } else {
                println!("md5 mismatch: expected {expected}, got {actual}");
                return Err(CliError::User(format!("md5 mismatch for {url}")));
            }
        }
    }
    Ok(())
}
