use super::constraint::Selection;
use super::plan::literal_offset;
use super::QueryError;
use crate::table::ResultTable;
use crate::time::TimeEncoding;

/// Keeps the rows where every clause holds. A clause on a multi-component
/// variable holds when any component satisfies it; missing values (NaN or the
/// column's fill) satisfy nothing.
pub fn apply_selections(
    table: ResultTable,
    selections: &[Selection],
    enc: &TimeEncoding,
) -> Result<ResultTable, QueryError> {
    if selections.is_empty() {
        return Ok(table);
    }
    let mut keep = vec![true; table.len()];
    for sel in selections {
        let rhs = literal_offset(&sel.literal, enc)?;
        if sel.is_time() {
            for (k, &t) in keep.iter_mut().zip(&table.times) {
                *k = *k && sel.op.eval(t, rhs);
            }
            continue;
        }
        let column = table
            .column(&sel.operand)
            .ok_or_else(|| QueryError::UnknownVariable {
                name: sel.operand.clone(),
                position: None,
            })?;
        for (k, row) in keep.iter_mut().zip(column.data.rows()) {
            *k = *k
                && row
                    .iter()
                    .any(|&v| !column.is_missing(v) && sel.op.eval(v, rhs));
        }
    }
    let rows: Vec<usize> = (0..keep.len()).filter(|&i| keep[i]).collect();
    if rows.len() == table.len() {
        return Ok(table);
    }
    Ok(table.take_rows(&rows))
}
