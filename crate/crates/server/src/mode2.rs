use std::sync::Arc;

use axum::extract::{Path, RawQuery, State};
use axum::http::{header, HeaderMap, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::Json;
use percent_encoding::percent_decode_str;
use serde::Serialize;
use tsds_core::query::{execute, parse_constraint, TIME};
use tsds_core::{Catalog, CatalogEntry, FlatFileStore, SeriesKey};

use crate::encode::{self, Suffix, SUFFIXES};
use crate::error::ApiError;
use crate::mode1::{not_modified, serve_file, with_immutable};
use crate::AppState;

pub(crate) fn decode_query(raw: &str) -> Result<String, ApiError> {
    percent_decode_str(raw)
        .decode_utf8()
        .map(|s| s.into_owned())
        .map_err(|_| ApiError::bad_request("SyntaxError", "query is not valid UTF-8 after percent-decoding"))
}

pub(crate) async fn handle(
    State(state): State<Arc<AppState>>,
    Path(name): Path<String>,
    RawQuery(query): RawQuery,
    headers: HeaderMap,
) -> Result<Response, ApiError> {
    let raw_query = query.unwrap_or_default();
    if name == "catalog.json" {
        return Ok(catalog_listing(&state.catalog()));
    }
    let (dataset, suffix) = name
        .rsplit_once('.')
        .ok_or_else(|| unknown_suffix(&name, ""))?;
    // `/tsds/{file}-v{n}.bin?[a:b]` is the range form of Mode 1.
    if suffix == "bin" && (raw_query.starts_with('[') || raw_query.starts_with("%5B")) {
        return serve_file(&state, &name, &raw_query, &headers).await;
    }
    let suffix: Suffix = suffix.parse().map_err(|()| unknown_suffix(&name, suffix))?;
    let catalog = state.catalog();
    let entry = catalog.resolve(dataset).map_err(|_| ApiError::not_found(dataset))?;

    let immutable = entry.descriptor.tsds_id.is_some() && SeriesKey::parse_stem(dataset).is_ok();
    let etag = format!("\"{dataset}\"");
    if immutable && not_modified(&headers, &etag) {
        return Ok(with_immutable(StatusCode::NOT_MODIFIED.into_response(), &etag));
    }

    let text = decode_query(&raw_query)?;
    let ce = parse_constraint(&text)?;
    let d = &entry.descriptor;
    let body: Vec<u8> = match suffix {
        Suffix::Info => encode::encode_info(dataset, d).into_bytes(),
        Suffix::Html => encode::encode_html(dataset, d).into_bytes(),
        Suffix::Das => encode::encode_das(d).into_bytes(),
        Suffix::Dds => {
            let names: Vec<String> = ce.projection.iter().filter(|n| *n != TIME).cloned().collect();
            if let Some(missing) = names.iter().find(|n| d.variable(n).is_none()) {
                let e = tsds_core::QueryError::UnknownVariable { name: missing.clone(), position: None };
                return Err(e.locate_in(&text).into());
            }
            encode::encode_dds(dataset, d, &names).into_bytes()
        }
        Suffix::Ncml => tokio::fs::read(&entry.path).await.map_err(|e| {
            tracing::error!(path = %entry.path.display(), error = %e, "cannot read NcML");
            ApiError::internal("IoError", format!("cannot read metadata for {dataset}"))
        })?,
        Suffix::Asc | Suffix::Csv | Suffix::Dat | Suffix::Bin | Suffix::Json => {
            let entry: CatalogEntry = entry.clone();
            let name = dataset.to_owned();
            tokio::task::spawn_blocking(move || run_query(&name, &entry, suffix, &text, ce))
                .await
                .map_err(|e| ApiError::internal("Internal", e.to_string()))??
        }
    };
    let resp = ([(header::CONTENT_TYPE, suffix.content_type())], body).into_response();
    Ok(if immutable {
        with_immutable(resp, &etag)
    } else {
        no_cache(resp)
    })
}

fn run_query(
    name: &str,
    entry: &CatalogEntry,
    suffix: Suffix,
    text: &str,
    ce: tsds_core::ConstraintExpression,
) -> Result<Vec<u8>, ApiError> {
    let store = FlatFileStore::new(entry.base_dir());
    let d = &entry.descriptor;
    let table = execute(d, &ce, &store).map_err(|e| e.locate_in(text))?;
    Ok(match suffix {
        Suffix::Csv => encode::encode_csv(&table, d)?.into_bytes(),
        Suffix::Dat => encode::encode_dat(&table, d)?.into_bytes(),
        Suffix::Asc => encode::encode_asc(name, &table, d)?.into_bytes(),
        Suffix::Json => encode::encode_json(&table, d)?.into_bytes(),
        Suffix::Bin => encode::encode_bin(&table, d)?,
        _ => unreachable!("metadata suffixes are answered without a query"),
    })
}

fn unknown_suffix(name: &str, suffix: &str) -> ApiError {
    ApiError::bad_request(
        "UnknownSuffix",
        format!("{name}: unknown suffix {suffix:?}; expected one of {}", SUFFIXES.join(", ")),
    )
}

fn no_cache(mut resp: Response) -> Response {
    resp.headers_mut().insert(header::CACHE_CONTROL, HeaderValue::from_static("no-cache"));
    resp
}

#[derive(Serialize)]
struct CatalogJson<'a> {
    datasets: Vec<DatasetJson<'a>>,
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct DatasetJson<'a> {
    name: &'a str,
    title: &'a str,
    tsds_id: Option<String>,
    data_type: &'a str,
    start_date: String,
    stop_date: String,
    points_per_day: Option<f64>,
    time_units: &'a str,
    samples: u64,
    variables: Vec<VariableJson<'a>>,
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct VariableJson<'a> {
    name: &'a str,
    long_name: &'a str,
    units: &'a str,
    components: usize,
}

fn catalog_listing(catalog: &Catalog) -> Response {
    let datasets = catalog
        .entries()
        .map(|e| {
            let d = &e.descriptor;
            DatasetJson {
                name: &e.name,
                title: &d.title,
                tsds_id: d.tsds_id.as_ref().map(|id| id.to_string()),
                data_type: d.data_type.as_str(),
                start_date: d.start_date.to_string(),
                stop_date: d.stop_date.to_string(),
                points_per_day: d.points_per_day,
                time_units: d.time_encoding.units(),
                samples: d.time_axis.len(),
                variables: d
                    .variables
                    .iter()
                    .map(|v| VariableJson {
                        name: &v.name,
                        long_name: &v.long_name,
                        units: &v.units,
                        components: v.layout.components,
                    })
                    .collect(),
            }
        })
        .collect();
    no_cache(Json(CatalogJson { datasets }).into_response())
}
