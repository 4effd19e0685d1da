//! TSDB flat binary parameter files.
//!
//! A series file is a headerless run of 64-bit IEEE-754 little-endian doubles.
//! Scalars store one value per sample; vectors and spectrograms interleave their
//! components per sample (`x0 y0 z0 x1 y1 z1 ...`). Time stamps for non-uniform
//! series live in a separate file with the same encoding.
//!
//! Index arguments here are *element* indices into the flat array unless a
//! function says otherwise; [`read_samples`] provides the per-sample view.

mod digest;
mod key;

use std::fs::{self, File};
use std::io::{self, Read, Seek, SeekFrom, Write};
use std::path::{Component, Path, PathBuf};

pub use digest::Md5Digest;
pub use key::{check_field, SeriesKey};
pub(crate) use key::parse_version;

use crate::table::Column;

/// Size of one stored element in bytes.
pub const ELEMENT_BYTES: u64 = 8;

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("invalid series key {value:?}: {reason}")]
    InvalidKey { value: String, reason: String },
    #[error("IndexNegative: start index {start} is less than zero")]
    IndexNegative { start: i64 },
    #[error("IndexInverted: end index {stop} is less than start index {start}")]
    IndexInverted { start: i64, stop: i64 },
    #[error("requested range of {0} elements is too large to materialize")]
    RangeTooLarge(u64),
    #[error("malformed MD5 digest {0:?}: expected 32 lowercase hex characters")]
    MalformedDigest(String),
    #[error("invalid layout: {0}")]
    InvalidLayout(String),
    #[error("no such series file: {}", .0.display())]
    NotFound(PathBuf),
    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

impl StoreError {
    /// Short machine-readable name used in HTTP error bodies.
    pub fn name(&self) -> &'static str {
        match self {
            StoreError::InvalidKey { .. } => "InvalidKey",
            StoreError::IndexNegative { .. } => "IndexNegative",
            StoreError::IndexInverted { .. } => "IndexInverted",
            StoreError::RangeTooLarge(_) => "RangeTooLarge",
            StoreError::MalformedDigest(_) => "MalformedDigest",
            StoreError::InvalidLayout(_) => "InvalidLayout",
            StoreError::NotFound(_) => "NotFound",
            StoreError::Io { .. } => "IoError",
        }
    }

    pub(crate) fn io(path: &Path, source: io::Error) -> Self {
        if source.kind() == io::ErrorKind::NotFound {
            StoreError::NotFound(path.to_owned())
        } else {
            StoreError::Io {
                path: path.to_owned(),
                source,
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LayoutKind {
    Scalar,
    Vector,
    Spectrogram,
}

/// How one sample's components are interleaved in a series file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeriesLayout {
    pub kind: LayoutKind,
    pub components: usize,
    pub labels: Option<Vec<String>>,
}

impl SeriesLayout {
    pub fn scalar() -> Self {
        SeriesLayout {
            kind: LayoutKind::Scalar,
            components: 1,
            labels: None,
        }
    }

    pub fn vector(components: usize) -> Self {
        SeriesLayout {
            kind: LayoutKind::Vector,
            components,
            labels: None,
        }
    }

    pub fn spectrogram(bins: usize) -> Self {
        SeriesLayout {
            kind: LayoutKind::Spectrogram,
            components: bins,
            labels: None,
        }
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Self {
        self.labels = Some(labels);
        self
    }

    pub fn validate(&self) -> Result<(), StoreError> {
        if self.components == 0 {
            return Err(StoreError::InvalidLayout("componentsPerSample must be positive".into()));
        }
        if self.kind == LayoutKind::Scalar && self.components != 1 {
            return Err(StoreError::InvalidLayout(format!(
                "scalar layout with {} components",
                self.components
            )));
        }
        if let Some(labels) = &self.labels {
            if labels.len() != self.components {
                return Err(StoreError::InvalidLayout(format!(
                    "{} labels for {} components",
                    labels.len(),
                    self.components
                )));
            }
        }
        Ok(())
    }

    /// Byte length of a file holding `samples` samples in this layout.
    pub fn file_len(&self, samples: u64) -> u64 {
        ELEMENT_BYTES * self.components as u64 * samples
    }
}

/// A run of stored values beginning at element `start_element`.
#[derive(Debug, Clone)]
pub struct Float64Block {
    pub start_element: u64,
    pub values: Vec<f64>,
}

impl Float64Block {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Bitwise equality, so NaN payloads compare as written.
    pub fn bits_eq(&self, other: &Float64Block) -> bool {
        self.start_element == other.start_element
            && self.values.len() == other.values.len()
            && self
                .values
                .iter()
                .zip(&other.values)
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

/// Little-endian byte image of `values`.
pub fn encode_values(values: &[f64]) -> Vec<u8> {
    if cfg!(target_endian = "little") {
        bytemuck::cast_slice(values).to_vec()
    } else {
        values.iter().flat_map(|v| v.to_le_bytes()).collect()
    }
}

/// Decodes whole 8-byte words; a trailing partial word is ignored.
pub fn decode_values(bytes: &[u8]) -> Vec<f64> {
    bytes
        .chunks_exact(8)
        .map(|w| f64::from_le_bytes(w.try_into().expect("8-byte chunk")))
        .collect()
}

/// Writes `values` to `path` and returns the MD5 of the bytes written.
///
/// Data goes to a temporary sibling first and is renamed into place, so readers
/// never observe a partially written file.
pub fn write_series(path: &Path, values: &[f64]) -> Result<Md5Digest, StoreError> {
    let tmp = temp_sibling(path);
    let result = (|| {
        let mut file = File::create(&tmp).map_err(|e| StoreError::io(&tmp, e))?;
        let mut md5 = digest::Md5Writer::default();
        for chunk in values.chunks(64 * 1024) {
            let bytes = encode_values(chunk);
            md5.update(&bytes);
            file.write_all(&bytes).map_err(|e| StoreError::io(&tmp, e))?;
        }
        file.sync_all().map_err(|e| StoreError::io(&tmp, e))?;
        fs::rename(&tmp, path).map_err(|e| StoreError::io(path, e))?;
        Ok(md5.finish())
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result
}

/// Writes arbitrary bytes with the same temp-and-rename publication as [`write_series`].
pub fn write_file_atomic(path: &Path, bytes: &[u8]) -> Result<(), StoreError> {
    let tmp = temp_sibling(path);
    let result = fs::write(&tmp, bytes)
        .and_then(|_| fs::rename(&tmp, path))
        .map_err(|e| StoreError::io(path, e));
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result
}

fn temp_sibling(path: &Path) -> PathBuf {
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    path.with_file_name(format!(".{name}.tmp-{}", std::process::id()))
}

/// Validates a Mode-1 style index pair.
pub fn check_range(start: i64, stop: i64) -> Result<(), StoreError> {
    if start < 0 {
        return Err(StoreError::IndexNegative { start });
    }
    if stop < start {
        return Err(StoreError::IndexInverted { start, stop });
    }
    Ok(())
}

/// Number of whole elements in a file of `byte_len` bytes.
pub fn whole_elements(byte_len: u64) -> u64 {
    byte_len / ELEMENT_BYTES
}

/// Reads elements `start..=stop`; positions past end-of-file come back as NaN.
pub fn read_elements(path: &Path, start: i64, stop: i64) -> Result<Float64Block, StoreError> {
    check_range(start, stop)?;
    let mut file = File::open(path).map_err(|e| StoreError::io(path, e))?;
    let byte_len = file.metadata().map_err(|e| StoreError::io(path, e))?.len();
    warn_partial_word(path, byte_len);
    read_range(&mut file, byte_len, start as u64, stop as u64).map_err(|e| match e {
        RangeError::TooLarge(n) => StoreError::RangeTooLarge(n),
        RangeError::Io(e) => StoreError::io(path, e),
    })
}

pub(crate) fn warn_partial_word(path: &Path, byte_len: u64) {
    if byte_len % ELEMENT_BYTES != 0 {
        tracing::warn!(
            path = %path.display(),
            trailing = byte_len % ELEMENT_BYTES,
            "series file length is not a multiple of 8; ignoring partial trailing word"
        );
    }
}

enum RangeError {
    TooLarge(u64),
    Io(io::Error),
}

/// Single-seek read of `start..=stop` from a reader holding `byte_len` bytes.
fn read_range<R: Read + Seek>(
    reader: &mut R,
    byte_len: u64,
    start: u64,
    stop: u64,
) -> Result<Float64Block, RangeError> {
    let count = stop - start + 1;
    let n = usize::try_from(count).map_err(|_| RangeError::TooLarge(count))?;
    let mut values: Vec<f64> = Vec::new();
    values.try_reserve_exact(n).map_err(|_| RangeError::TooLarge(count))?;
    values.resize(n, f64::NAN);

    let stored = whole_elements(byte_len);
    if start < stored {
        let available = (stored - start).min(count) as usize;
        reader
            .seek(SeekFrom::Start(start * ELEMENT_BYTES))
            .map_err(RangeError::Io)?;
        let head = &mut values[..available];
        reader
            .read_exact(bytemuck::cast_slice_mut::<f64, u8>(head))
            .map_err(RangeError::Io)?;
        if cfg!(target_endian = "big") {
            for v in head.iter_mut() {
                *v = f64::from_bits(u64::from_le(v.to_bits()));
            }
        }
    }
    Ok(Float64Block {
        start_element: start,
        values,
    })
}

/// Reads every whole element of a file.
pub fn read_all(path: &Path) -> Result<Vec<f64>, StoreError> {
    let byte_len = fs::metadata(path).map_err(|e| StoreError::io(path, e))?.len();
    let stored = whole_elements(byte_len);
    if stored == 0 {
        return Ok(Vec::new());
    }
    Ok(read_elements(path, 0, stored as i64 - 1)?.values)
}

/// Sample-indexed read for multi-component layouts. Returns rows of
/// `layout.components` values each.
pub fn read_samples(
    path: &Path,
    layout: &SeriesLayout,
    start_sample: i64,
    stop_sample: i64,
) -> Result<Column, StoreError> {
    check_range(start_sample, stop_sample)?;
    let (first, last) = sample_elements(layout.components, start_sample, stop_sample)?;
    let block = read_elements(path, first, last)?;
    Ok(Column::new(layout.components, block.values))
}

/// Element range `[start*k, (stop+1)*k - 1]` covering samples `start..=stop`.
pub fn sample_elements(components: usize, start: i64, stop: i64) -> Result<(i64, i64), StoreError> {
    let k = components as i64;
    let overflow = || StoreError::RangeTooLarge(u64::MAX);
    let first = start.checked_mul(k).ok_or_else(overflow)?;
    let last = stop
        .checked_add(1)
        .and_then(|s| s.checked_mul(k))
        .ok_or_else(overflow)?
        - 1;
    Ok((first, last))
}

/// True iff the MD5 of the file equals `expected` (32 lowercase hex chars).
pub fn verify_md5(path: &Path, expected: &str) -> Result<bool, StoreError> {
    let expected: Md5Digest = expected.parse()?;
    Ok(file_md5(path)? == expected)
}

pub fn file_md5(path: &Path) -> Result<Md5Digest, StoreError> {
    let mut file = File::open(path).map_err(|e| StoreError::io(path, e))?;
    let mut md5 = digest::Md5Writer::default();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = file.read(&mut buf).map_err(|e| StoreError::io(path, e))?;
        if n == 0 {
            break;
        }
        md5.update(&buf[..n]);
    }
    Ok(md5.finish())
}

/// Backing storage for series data referenced from NcML `location` attributes.
///
/// The flat-file implementation is the only one today; a compressed backing
/// would implement the same element-addressed reads.
pub trait SeriesStore: Send + Sync {
    fn element_count(&self, location: &str) -> Result<u64, StoreError>;

    fn read_elements(&self, location: &str, start: i64, stop: i64)
        -> Result<Float64Block, StoreError>;

    /// Raw contents of a text source, for the ASCII table accessor.
    fn read_text(&self, location: &str) -> Result<String, StoreError>;
}

/// Series files in a directory; relative locations resolve against `root`.
#[derive(Debug, Clone)]
pub struct FlatFileStore {
    root: PathBuf,
}

impl FlatFileStore {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        FlatFileStore { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn resolve(&self, location: &str) -> Result<PathBuf, StoreError> {
        let path = Path::new(location);
        if path.components().any(|c| matches!(c, Component::ParentDir)) {
            return Err(StoreError::InvalidKey {
                value: location.to_owned(),
                reason: "location may not contain `..`".into(),
            });
        }
        Ok(if path.is_absolute() {
            path.to_owned()
        } else {
            self.root.join(path)
        })
    }
}

impl SeriesStore for FlatFileStore {
    fn element_count(&self, location: &str) -> Result<u64, StoreError> {
        let path = self.resolve(location)?;
        let len = fs::metadata(&path).map_err(|e| StoreError::io(&path, e))?.len();
        Ok(whole_elements(len))
    }

    fn read_elements(
        &self,
        location: &str,
        start: i64,
        stop: i64,
    ) -> Result<Float64Block, StoreError> {
        read_elements(&self.resolve(location)?, start, stop)
    }

    fn read_text(&self, location: &str) -> Result<String, StoreError> {
        let path = self.resolve(location)?;
        fs::read_to_string(&path).map_err(|e| StoreError::io(&path, e))
    }
}
