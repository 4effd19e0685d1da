use super::access::{read_source, read_times};
use super::constraint::{ConstraintExpression, TIME};
use super::filters::apply_filter;
use super::plan::{plan_time_range, TimeInterval};
use super::select::apply_selections;
use super::QueryError;
use crate::metadata::{DatasetDescriptor, VariableSpec};
use crate::store::SeriesStore;
use crate::table::{Column, ResultTable, TableColumn};

/// Runs a constraint against a dataset. Relative data locations in the
/// descriptor are resolved by `store`.
///
/// Order: time clauses become a sample range, only that range of the needed
/// variables is read, all clauses are applied per row, the table is cut down
/// to the projection, and the filter (if any) runs on what is left. The
/// filter therefore only ever sees projected columns.
pub fn execute(
    descriptor: &DatasetDescriptor,
    ce: &ConstraintExpression,
    store: &dyn SeriesStore,
) -> Result<ResultTable, QueryError> {
    let lookup = |name: &str| {
        descriptor
            .variable(name)
            .ok_or_else(|| QueryError::UnknownVariable {
                name: name.to_owned(),
                position: None,
            })
    };

    let mut projected: Vec<&VariableSpec> = Vec::new();
    if ce.projection.is_empty() {
        projected.extend(&descriptor.variables);
    }
    for name in ce.projection.iter().filter(|n| *n != TIME) {
        let var = lookup(name)?;
        if !projected.iter().any(|v| v.name == var.name) {
            projected.push(var);
        }
    }
    let mut needed = projected.clone();
    for sel in ce.variable_selections() {
        let var = lookup(&sel.operand)?;
        if !needed.iter().any(|v| v.name == var.name) {
            needed.push(var);
        }
    }

    let enc = &descriptor.time_encoding;
    let interval = TimeInterval::from_selections(ce.time_selections(), enc)?;
    let rows = plan_time_range(&descriptor.time_axis, &interval, store, enc)?;
    tracing::debug!(start = rows.start, end = rows.end, "planned sample range");

    let mut table = ResultTable::new(read_times(&descriptor.time_axis, rows.clone(), store, enc)?);
    for var in needed {
        let k = var.layout.components;
        let values = read_source(&var.source, k, rows.clone(), store, enc)?;
        table.push_column(TableColumn::new(var.name.clone(), var.fill_value, Column::new(k, values)));
    }

    let table = apply_selections(table, &ce.selections, enc)?;
    let names: Vec<&str> = projected.iter().map(|v| v.name.as_str()).collect();
    let table = table.project(&names);
    match &ce.filter {
        Some(filter) => apply_filter(table, filter),
        None => Ok(table),
    }
}
