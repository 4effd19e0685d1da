//! Constraint expressions and the selection/filter pipeline.
//!
//! A request flows through [`execute`] in a fixed order: the time clauses are
//! turned into a sample index range, the needed variables are read for that
//! range only, row selections are applied, the table is projected, and the
//! single optional filter runs last.

mod access;
mod constraint;
mod execute;
mod filters;
mod plan;
mod select;

use crate::metadata::MetadataError;
use crate::store::StoreError;
use crate::time::TimeError;

pub use access::{read_source, read_times};
pub use constraint::{
    parse_constraint, render_constraint, BlockKind, CompareOp, ConstraintExpression, Filter,
    Literal, Selection, FILTER_NAMES, TIME,
};
pub use execute::execute;
pub use filters::{
    apply_filter, filter_block, filter_exclude_missing, filter_replace_missing, filter_stride,
    filter_thin, thin_stride,
};
pub use plan::{plan_time_range, TimeInterval};
pub use select::apply_selections;

#[derive(Debug, thiserror::Error)]
pub enum QueryError {
    #[error("SyntaxError at {position}: {message}")]
    SyntaxError { position: usize, message: String },
    #[error("UnknownFilter at {position}: {name}()")]
    UnknownFilter { name: String, position: usize },
    #[error("ArityError at {position}: {filter}() {message}")]
    ArityError {
        filter: String,
        position: usize,
        message: String,
    },
    #[error("MultipleFilters at {position}: only one filter may be applied")]
    MultipleFilters { position: usize },
    #[error("UnknownVariable: {name}")]
    UnknownVariable {
        name: String,
        position: Option<usize>,
    },
    #[error("BadArg: {0}")]
    BadArg(String),
    #[error(transparent)]
    Time(#[from] TimeError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Metadata(#[from] MetadataError),
}

impl QueryError {
    pub fn name(&self) -> &'static str {
        match self {
            QueryError::SyntaxError { .. } => "SyntaxError",
            QueryError::UnknownFilter { .. } => "UnknownFilter",
            QueryError::ArityError { .. } => "ArityError",
            QueryError::MultipleFilters { .. } => "MultipleFilters",
            QueryError::UnknownVariable { .. } => "UnknownVariable",
            QueryError::BadArg(_) => "BadArg",
            QueryError::Time(TimeError::BadTimestamp(_)) => "BadTimestamp",
            QueryError::Time(_) => "BadTime",
            QueryError::Store(e) => e.name(),
            QueryError::Metadata(e) => e.name(),
        }
    }

    /// Character offset into the constraint text, when the error has one.
    pub fn position(&self) -> Option<usize> {
        match self {
            QueryError::SyntaxError { position, .. }
            | QueryError::UnknownFilter { position, .. }
            | QueryError::ArityError { position, .. }
            | QueryError::MultipleFilters { position } => Some(*position),
            QueryError::UnknownVariable { position, .. } => *position,
            _ => None,
        }
    }

    /// True for errors caused by the request rather than the server.
    pub fn is_client_error(&self) -> bool {
        match self {
            QueryError::Store(e) => matches!(
                e,
                StoreError::IndexNegative { .. }
                    | StoreError::IndexInverted { .. }
                    | StoreError::RangeTooLarge(_)
            ),
            QueryError::Metadata(MetadataError::NotFound(_)) => true,
            QueryError::Metadata(_) => false,
            _ => true,
        }
    }

    /// Fills in the position of an unknown variable from the request text:
    /// the first place the name occurs as a whole identifier.
    pub fn locate_in(self, constraint: &str) -> Self {
        match self {
            QueryError::UnknownVariable {
                name,
                position: None,
            } => {
                let position = find_identifier(constraint, &name);
                QueryError::UnknownVariable { name, position }
            }
            other => other,
        }
    }
}

fn find_identifier(text: &str, name: &str) -> Option<usize> {
    let is_ident = |c: u8| c.is_ascii_alphanumeric() || c == b'_' || c == b'.';
    let bytes = text.as_bytes();
    text.match_indices(name).map(|(i, _)| i).find(|&i| {
        let before = i.checked_sub(1).map(|j| bytes[j]);
        let after = bytes.get(i + name.len()).copied();
        !before.is_some_and(is_ident) && !after.is_some_and(is_ident)
    })
}
