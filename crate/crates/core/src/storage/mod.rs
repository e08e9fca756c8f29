//! In-memory columnar tables, the CSV loader and the FBC file format.

mod column;
pub mod csv;
pub mod fbc;

use std::fmt;
use std::sync::Arc;

pub use column::{Bitmap, ColumnBuilder, ColumnData, ColumnVector, TextData};

use crate::catalog::Schema;
use crate::error::{Error, Result};
use crate::value::Value;

/// Immutable columnar table. Columns are reference counted so projections
/// are cheap.
#[derive(Clone, Debug, PartialEq)]
pub struct ColumnTable {
    schema: Schema,
    row_count: usize,
    columns: Vec<Arc<ColumnVector>>,
}

impl ColumnTable {
    pub fn new(schema: Schema, row_count: usize, columns: Vec<Arc<ColumnVector>>) -> Result<Self> {
        if schema.len() != columns.len() {
            return Err(Error::Schema(format!("{} columns for a schema of {}", columns.len(), schema.len())));
        }
        for (def, col) in schema.columns().iter().zip(&columns) {
            if col.len() != row_count {
                return Err(Error::Schema(format!(
                    "column {} has {} rows, table has {row_count}",
                    def.name,
                    col.len()
                )));
            }
            if col.dtype() != def.dtype {
                return Err(Error::Schema(format!(
                    "column {} is {}, schema says {}",
                    def.name,
                    col.dtype(),
                    def.dtype
                )));
            }
        }
        Ok(ColumnTable { schema, row_count, columns })
    }

    pub fn empty(schema: Schema) -> Self {
        let columns = schema.columns().iter().map(|c| Arc::new(ColumnBuilder::new(c.dtype).finish())).collect();
        ColumnTable { schema, row_count: 0, columns }
    }

    pub fn from_rows(schema: Schema, rows: &[Vec<Value>]) -> Result<Self> {
        let mut builders: Vec<ColumnBuilder> = schema.columns().iter().map(|c| ColumnBuilder::new(c.dtype)).collect();
        for row in rows {
            if row.len() != builders.len() {
                return Err(Error::Schema(format!("row of width {} for {} columns", row.len(), builders.len())));
            }
            for (b, v) in builders.iter_mut().zip(row) {
                b.push_value(v)?;
            }
        }
        let columns = builders.into_iter().map(|b| Arc::new(b.finish())).collect();
        ColumnTable::new(schema, rows.len(), columns)
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn row_count(&self) -> usize {
        self.row_count
    }

    pub fn columns(&self) -> &[Arc<ColumnVector>] {
        &self.columns
    }

    pub fn column(&self, i: usize) -> &ColumnVector {
        &self.columns[i]
    }

    pub fn column_by_name(&self, name: &str) -> Result<&ColumnVector> {
        let (i, _) = self.schema.resolve(name)?;
        Ok(&self.columns[i])
    }

    /// Table with the named columns, in the given order.
    pub fn project(&self, names: &[impl AsRef<str>]) -> Result<ColumnTable> {
        let schema = self.schema.project(names)?;
        let columns = names
            .iter()
            .map(|n| self.schema.resolve(n.as_ref()).map(|(i, _)| self.columns[i].clone()))
            .collect::<Result<Vec<_>>>()?;
        Ok(ColumnTable { schema, row_count: self.row_count, columns })
    }

    /// Same data under a different (column-compatible) schema.
    pub fn with_schema(self, schema: Schema) -> Result<ColumnTable> {
        ColumnTable::new(schema, self.row_count, self.columns)
    }

    pub fn row(&self, i: usize) -> Vec<Value> {
        self.columns.iter().map(|c| c.value(i)).collect()
    }

    pub fn rows(&self) -> Vec<Vec<Value>> {
        (0..self.row_count).map(|i| self.row(i)).collect()
    }

    /// Pipe-delimited rendering with a header line.
    pub fn to_csv(&self) -> String {
        let mut out = self.schema.names().collect::<Vec<_>>().join("|");
        out.push('\n');
        for row in self.rows() {
            let line: Vec<String> =
                row.iter().map(|v| if v.is_null() { String::new() } else { v.to_string() }).collect();
            out.push_str(&line.join("|"));
            out.push('\n');
        }
        out
    }
}

impl fmt::Display for ColumnTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let header: Vec<String> = self.schema.names().map(str::to_string).collect();
        let body: Vec<Vec<String>> = self.rows().iter().map(|r| r.iter().map(Value::to_string).collect()).collect();
        let mut widths: Vec<usize> = header.iter().map(String::len).collect();
        for row in &body {
            for (w, cell) in widths.iter_mut().zip(row) {
                *w = (*w).max(cell.len());
            }
        }
        let line = |f: &mut fmt::Formatter<'_>, cells: &[String]| -> fmt::Result {
            let parts: Vec<String> = cells.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
            writeln!(f, "{}", parts.join(" | ").trim_end())
        };
        line(f, &header)?;
        let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
        writeln!(f, "{}", rule.join("-+-"))?;
        for row in &body {
            line(f, row)?;
        }
        write!(f, "({} rows)", self.row_count)
    }
}
