//! Time-series data server core: the TSDB flat-file cache, NcML metadata,
//! the constraint-expression query engine, and the ingest pipeline that
//! builds the cache from granules.

pub mod ingest;
pub mod metadata;
pub mod query;
pub mod store;
pub mod table;
pub mod time;

pub use chrono::{NaiveDate, NaiveDateTime};

pub use metadata::{
    Catalog, CatalogEntry, DataSource, DataType, DatasetDescriptor, MetadataError, TimeAxis,
    TsdsId, VariableSpec,
};
pub use query::{ConstraintExpression, Filter, QueryError};
pub use store::{FlatFileStore, Md5Digest, SeriesKey, SeriesLayout, SeriesStore, StoreError};
pub use table::{Column, ResultTable, TableColumn};
pub use time::{TimeEncoding, TimeUnit};
