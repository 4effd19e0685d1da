use std::io::SeekFrom;
use std::sync::Arc;

use axum::body::Body;
use axum::extract::{Path, RawQuery, State};
use axum::http::{header, HeaderMap, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use bytes::Bytes;
use tokio::io::{AsyncReadExt, AsyncSeekExt};
use tsds_core::store::{check_range, whole_elements, ELEMENT_BYTES};
use tsds_core::SeriesKey;

use crate::error::ApiError;
use crate::AppState;

const CHUNK_BYTES: usize = 64 * 1024;

/// The query part of a Mode 1 request.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IndexRange {
    /// No range: the whole physical file.
    Whole,
    /// `[start:]`, through the last stored element.
    From(i64),
    /// `[start:stop]`, both inclusive.
    Span(i64, i64),
}

/// Parses an already percent-decoded `[start:stop]` or `[start:]`; the empty
/// string means the whole file. Index validity is checked later, against the file.
pub fn parse_index_range(q: &str) -> Result<IndexRange, ApiError> {
    if q.is_empty() {
        return Ok(IndexRange::Whole);
    }
    let bad = || ApiError::bad_request("BadRange", format!("expected [start:stop] or [start:], got {q:?}"));
    let inner = q.strip_prefix('[').and_then(|s| s.strip_suffix(']')).ok_or_else(bad)?;
    let (a, b) = inner.split_once(':').ok_or_else(bad)?;
    let index = |s: &str| -> Result<i64, ApiError> {
        let digits = s.strip_prefix('-').unwrap_or(s);
        if digits.is_empty() || !digits.bytes().all(|c| c.is_ascii_digit()) {
            return Err(bad());
        }
        s.parse().map_err(|_| ApiError::bad_request("BadRange", format!("index {s} out of range")))
    };
    let start = index(a)?;
    if b.is_empty() {
        Ok(IndexRange::From(start))
    } else {
        Ok(IndexRange::Span(start, index(b)?))
    }
}

pub(crate) async fn handle(
    State(state): State<Arc<AppState>>,
    Path(file): Path<String>,
    RawQuery(query): RawQuery,
    headers: HeaderMap,
) -> Result<Response, ApiError> {
    serve_file(&state, &file, query.as_deref().unwrap_or(""), &headers).await
}

/// Mode 1 over `file` in the TSDB directory; `raw_query` is still percent-encoded.
pub(crate) async fn serve_file(
    state: &AppState,
    file: &str,
    raw_query: &str,
    headers: &HeaderMap,
) -> Result<Response, ApiError> {
    let stem = file.strip_suffix(".bin").or_else(|| file.strip_suffix(".ncml"));
    let key = stem.and_then(|s| SeriesKey::parse_stem(s).ok()).ok_or_else(|| ApiError::not_found(file))?;
    let path = state.config.tsdb_dir.join(file);
    let etag = format!("\"{}\"", key.stem());
    if not_modified(headers, &etag) {
        return Ok(with_immutable(StatusCode::NOT_MODIFIED.into_response(), &etag));
    }

    if file.ends_with(".ncml") {
        let text = tokio::fs::read(&path).await.map_err(|e| io_error(file, e))?;
        let resp = ([(header::CONTENT_TYPE, "text/xml; charset=utf-8")], text).into_response();
        return Ok(with_immutable(resp, &etag));
    }

    let query = crate::mode2::decode_query(raw_query)?;
    let range = parse_index_range(&query)?;
    let mut handle = tokio::fs::File::open(&path).await.map_err(|e| io_error(file, e))?;
    let byte_len = handle.metadata().await.map_err(|e| io_error(file, e))?.len();
    let stored = whole_elements(byte_len);

    let (skip, real, nan) = match range {
        IndexRange::Whole => (0, byte_len, 0),
        IndexRange::From(start) | IndexRange::Span(start, _) => {
            let stop = match range {
                IndexRange::Span(_, stop) => stop,
                _ => stored as i64 - 1,
            };
            check_range(start, stop)?;
            let (start, stop) = (start as u64, stop as u64);
            let count = stop - start + 1;
            if count > state.config.max_range_elements {
                return Err(ApiError::bad_request(
                    "RangeTooLarge",
                    format!("{count} elements requested; the limit is {}", state.config.max_range_elements),
                ));
            }
            let real = stored.saturating_sub(start).min(count);
            (start * ELEMENT_BYTES, real * ELEMENT_BYTES, count - real)
        }
    };
    if real > 0 {
        handle.seek(SeekFrom::Start(skip)).await.map_err(|e| io_error(file, e))?;
    }
    let length = real + nan * ELEMENT_BYTES;
    let body = Body::from_stream(stream_range(handle, real, nan));
    let resp = (
        [
            (header::CONTENT_TYPE, HeaderValue::from_static("application/octet-stream")),
            (header::CONTENT_LENGTH, HeaderValue::from(length)),
        ],
        body,
    )
        .into_response();
    Ok(with_immutable(resp, &etag))
}

/// `real` bytes from the file's current position, then `nan` NaN words,
/// in bounded chunks.
fn stream_range(
    file: tokio::fs::File,
    real: u64,
    nan: u64,
) -> impl futures::Stream<Item = std::io::Result<Bytes>> {
    let nan_chunk = Bytes::from(f64::NAN.to_le_bytes().repeat(CHUNK_BYTES / ELEMENT_BYTES as usize));
    futures::stream::try_unfold((file, real, nan), move |(mut file, real, nan)| {
        let nan_chunk = nan_chunk.clone();
        async move {
            if real > 0 {
                let n = real.min(CHUNK_BYTES as u64) as usize;
                let mut buf = vec![0u8; n];
                file.read_exact(&mut buf).await?;
                return Ok(Some((Bytes::from(buf), (file, real - n as u64, nan))));
            }
            if nan > 0 {
                let words = nan.min((CHUNK_BYTES as u64) / ELEMENT_BYTES);
                let chunk = nan_chunk.slice(..(words * ELEMENT_BYTES) as usize);
                return Ok(Some((chunk, (file, 0, nan - words))));
            }
            Ok(None)
        }
    })
}

fn io_error(file: &str, e: std::io::Error) -> ApiError {
    if e.kind() == std::io::ErrorKind::NotFound {
        ApiError::not_found(file)
    } else {
        tracing::error!(file, error = %e, "read failed");
        ApiError::internal("IoError", format!("cannot read {file}: {e}"))
    }
}

pub(crate) fn not_modified(headers: &HeaderMap, etag: &str) -> bool {
    headers
        .get(header::IF_NONE_MATCH)
        .and_then(|v| v.to_str().ok())
        .is_some_and(|v| v.split(',').any(|t| t.trim() == etag || t.trim() == "*"))
}

/// Versioned series never change, so caches may keep them forever.
pub(crate) fn with_immutable(mut resp: Response, etag: &str) -> Response {
    let h = resp.headers_mut();
    h.insert(header::CACHE_CONTROL, HeaderValue::from_static("public, max-age=31536000, immutable"));
    if let Ok(v) = HeaderValue::from_str(etag) {
        h.insert(header::ETAG, v);
    }
    resp
}
