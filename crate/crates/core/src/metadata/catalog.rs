use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use super::{parse_ncml, DatasetDescriptor, MetadataError};

#[derive(Debug, Clone)]
pub struct CatalogEntry {
    /// Filename stem of the `.ncml` document; the name the dataset is served under.
    pub name: String,
    pub path: PathBuf,
    pub descriptor: DatasetDescriptor,
}

impl CatalogEntry {
    /// Directory that relative data locations resolve against.
    pub fn base_dir(&self) -> &Path {
        self.path.parent().unwrap_or_else(|| Path::new("."))
    }
}

/// An `.ncml` file that failed to parse and is not being served.
#[derive(Debug, Clone)]
pub struct QuarantinedEntry {
    pub path: PathBuf,
    pub reason: String,
}

/// Datasets a server instance can serve. Built once and then shared read-only.
#[derive(Debug, Clone, Default)]
pub struct Catalog {
    entries: BTreeMap<String, CatalogEntry>,
    quarantined: Vec<QuarantinedEntry>,
}

impl Catalog {
    pub fn resolve(&self, name: &str) -> Result<&CatalogEntry, MetadataError> {
        self.entries
            .get(name)
            .ok_or_else(|| MetadataError::NotFound(name.to_owned()))
    }

    pub fn resolve_dataset(&self, name: &str) -> Result<&DatasetDescriptor, MetadataError> {
        self.resolve(name).map(|e| &e.descriptor)
    }

    /// Entries in name order.
    pub fn entries(&self) -> impl Iterator<Item = &CatalogEntry> {
        self.entries.values()
    }

    pub fn quarantined(&self) -> &[QuarantinedEntry] {
        &self.quarantined
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn insert(&mut self, entry: CatalogEntry) {
        self.entries.insert(entry.name.clone(), entry);
    }
}

/// Parses every `*.ncml` directly inside `directory`. Documents that fail to
/// parse are quarantined with their reason; they never abort the scan.
pub fn scan_catalog(directory: &Path) -> Result<Catalog, MetadataError> {
    let io = |e| MetadataError::Io {
        path: directory.to_owned(),
        source: e,
    };
    let mut paths: Vec<PathBuf> = fs::read_dir(directory)
        .map_err(io)?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|ext| ext == "ncml") && p.is_file())
        .collect();
    paths.sort();

    let mut catalog = Catalog::default();
    for path in paths {
        let Some(name) = path.file_stem().and_then(|s| s.to_str()).map(str::to_owned) else {
            continue;
        };
        let parsed = fs::read_to_string(&path)
            .map_err(|e| MetadataError::Io {
                path: path.clone(),
                source: e,
            })
            .and_then(|text| parse_ncml(&text));
        match parsed {
            Ok(descriptor) => catalog.insert(CatalogEntry {
                name,
                path,
                descriptor,
            }),
            Err(e) => {
                tracing::warn!(path = %path.display(), error = %e, "quarantining unparseable NcML");
                catalog.quarantined.push(QuarantinedEntry {
                    path,
                    reason: e.to_string(),
                });
            }
        }
    }
    Ok(catalog)
}
