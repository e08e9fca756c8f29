//! Data types, schemas and the table registry.

pub mod date;

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::storage::fbc::{self, IoStats};
use crate::storage::ColumnTable;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DataType {
    Int64,
    Float64,
    /// Calendar day stored as an `i64` in `yyyymmdd` form.
    Date,
    /// Immutable byte string, compared bytewise.
    Text,
}

impl DataType {
    pub fn is_numeric(self) -> bool {
        matches!(self, DataType::Int64 | DataType::Float64)
    }

    /// Type code used by the FBC directory.
    pub fn code(self) -> u8 {
        match self {
            DataType::Int64 => 0,
            DataType::Float64 => 1,
            DataType::Date => 2,
            DataType::Text => 3,
        }
    }

    pub fn from_code(code: u8) -> Option<DataType> {
        Some(match code {
            0 => DataType::Int64,
            1 => DataType::Float64,
            2 => DataType::Date,
            3 => DataType::Text,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            DataType::Int64 => "int64",
            DataType::Float64 => "float64",
            DataType::Date => "date",
            DataType::Text => "text",
        }
    }
}

impl fmt::Display for DataType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ColumnDef {
    pub name: String,
    pub dtype: DataType,
    pub nullable: bool,
}

impl ColumnDef {
    pub fn new(name: impl Into<String>, dtype: DataType) -> Self {
        ColumnDef { name: name.into(), dtype, nullable: false }
    }

    pub fn nullable(name: impl Into<String>, dtype: DataType) -> Self {
        ColumnDef { name: name.into(), dtype, nullable: true }
    }
}

/// Ordered list of uniquely named columns.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct Schema {
    columns: Vec<ColumnDef>,
}

impl Schema {
    pub fn new(columns: Vec<ColumnDef>) -> Result<Self> {
        let mut seen = HashSet::new();
        for c in &columns {
            if c.name.is_empty() {
                return Err(Error::Schema("empty column name".into()));
            }
            if !seen.insert(c.name.as_str()) {
                return Err(Error::Schema(format!("duplicate column {}", c.name)));
            }
        }
        Ok(Schema { columns })
    }

    pub fn empty() -> Self {
        Schema::default()
    }

    pub fn columns(&self) -> &[ColumnDef] {
        &self.columns
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn column(&self, i: usize) -> &ColumnDef {
        &self.columns[i]
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.columns.iter().map(|c| c.name.as_str())
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn get(&self, name: &str) -> Option<&ColumnDef> {
        self.columns.iter().find(|c| c.name == name)
    }

    /// Position and type of a named column.
    pub fn resolve(&self, name: &str) -> Result<(usize, DataType)> {
        match self.index_of(name) {
            Some(i) => Ok((i, self.columns[i].dtype)),
            None => Err(Error::UnknownColumn {
                name: name.to_string(),
                candidates: self.names().map(str::to_string).collect(),
            }),
        }
    }

    /// Sub-schema with the named columns, in the order given.
    pub fn project(&self, names: &[impl AsRef<str>]) -> Result<Schema> {
        let cols = names
            .iter()
            .map(|n| self.resolve(n.as_ref()).map(|(i, _)| self.columns[i].clone()))
            .collect::<Result<Vec<_>>>()?;
        Schema::new(cols)
    }
}

/// Resolves a column of a schema; see [`Schema::resolve`].
pub fn resolve_column(schema: &Schema, name: &str) -> Result<(usize, DataType)> {
    schema.resolve(name)
}

#[derive(Clone, Debug)]
pub enum TableSource {
    /// Preloaded columnar table.
    Memory(Arc<ColumnTable>),
    /// FBC file read on demand with column projection.
    Fbc(PathBuf),
}

#[derive(Clone, Debug)]
pub struct CatalogEntry {
    pub schema: Schema,
    pub source: TableSource,
}

/// Counters for data access through the catalog.
#[derive(Debug, Default)]
pub struct AccessStats {
    binds: AtomicU64,
    rows: AtomicU64,
    header_bytes: AtomicU64,
    payload_bytes: AtomicU64,
    columns_read: AtomicU64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct AccessSnapshot {
    /// Number of table bindings (every execution binds each scanned table).
    pub binds: u64,
    pub rows: u64,
    pub header_bytes: u64,
    pub payload_bytes: u64,
    pub columns_read: u64,
}

impl AccessStats {
    pub fn snapshot(&self) -> AccessSnapshot {
        AccessSnapshot {
            binds: self.binds.load(Ordering::Relaxed),
            rows: self.rows.load(Ordering::Relaxed),
            header_bytes: self.header_bytes.load(Ordering::Relaxed),
            payload_bytes: self.payload_bytes.load(Ordering::Relaxed),
            columns_read: self.columns_read.load(Ordering::Relaxed),
        }
    }

    fn record_io(&self, io: &IoStats) {
        self.header_bytes.fetch_add(io.header_bytes, Ordering::Relaxed);
        self.payload_bytes.fetch_add(io.payload_bytes, Ordering::Relaxed);
        self.columns_read.fetch_add(io.columns_read, Ordering::Relaxed);
    }
}

impl AccessSnapshot {
    pub fn since(&self, earlier: &AccessSnapshot) -> AccessSnapshot {
        AccessSnapshot {
            binds: self.binds - earlier.binds,
            rows: self.rows - earlier.rows,
            header_bytes: self.header_bytes - earlier.header_bytes,
            payload_bytes: self.payload_bytes - earlier.payload_bytes,
            columns_read: self.columns_read - earlier.columns_read,
        }
    }
}

/// Registry of named tables.
///
/// Reads take `&self` and may run concurrently; registration takes
/// `&mut self`, so writers are serialized by the borrow checker.
#[derive(Debug, Default)]
pub struct Catalog {
    tables: BTreeMap<String, CatalogEntry>,
    stats: AccessStats,
}

impl Catalog {
    pub fn new() -> Self {
        Catalog::default()
    }

    /// Registers (or replaces) an in-memory table under `name`.
    pub fn register_table(&mut self, name: &str, schema: Schema, table: ColumnTable) -> Result<()> {
        if schema.len() != table.schema().len() {
            let column = schema
                .columns()
                .get(table.schema().len())
                .or_else(|| table.schema().columns().get(schema.len()))
                .map(|c| c.name.clone())
                .unwrap_or_default();
            return Err(Error::SchemaMismatch {
                table: name.to_string(),
                column,
                reason: format!("schema has {} columns, table has {}", schema.len(), table.schema().len()),
            });
        }
        for (i, def) in schema.columns().iter().enumerate() {
            let col = table.column(i);
            if col.dtype() != def.dtype {
                return Err(Error::SchemaMismatch {
                    table: name.to_string(),
                    column: def.name.clone(),
                    reason: format!("expected {}, table has {}", def.dtype, col.dtype()),
                });
            }
            if !def.nullable && col.null_count() > 0 {
                return Err(Error::SchemaMismatch {
                    table: name.to_string(),
                    column: def.name.clone(),
                    reason: "column is not nullable but contains nulls".into(),
                });
            }
        }
        let table = table.with_schema(schema.clone())?;
        self.tables.insert(name.to_string(), CatalogEntry { schema, source: TableSource::Memory(Arc::new(table)) });
        Ok(())
    }

    /// Registers an FBC file; only its directory is read now.
    pub fn register_fbc(&mut self, name: &str, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref().to_path_buf();
        let (schema, io) = fbc::read_schema(&path)?;
        self.stats.record_io(&io);
        self.tables.insert(name.to_string(), CatalogEntry { schema, source: TableSource::Fbc(path) });
        Ok(())
    }

    pub fn entry(&self, name: &str) -> Result<&CatalogEntry> {
        self.tables.get(name).ok_or_else(|| Error::UnknownTable(name.to_string()))
    }

    pub fn schema(&self, name: &str) -> Result<&Schema> {
        Ok(&self.entry(name)?.schema)
    }

    pub fn table_names(&self) -> impl Iterator<Item = &str> {
        self.tables.keys().map(String::as_str)
    }

    /// Fetches the named columns of a table for execution.
    pub fn bind(&self, name: &str, columns: &[String]) -> Result<ColumnTable> {
        let entry = self.entry(name)?;
        let table = match &entry.source {
            TableSource::Memory(t) => t.project(columns)?,
            TableSource::Fbc(path) => {
                let (t, io) = fbc::read_fbc_with_stats(path, Some(columns))?;
                self.stats.record_io(&io);
                t
            }
        };
        self.stats.binds.fetch_add(1, Ordering::Relaxed);
        self.stats.rows.fetch_add(table.row_count() as u64, Ordering::Relaxed);
        Ok(table)
    }

    /// Fetches every column of a table.
    pub fn bind_all(&self, name: &str) -> Result<ColumnTable> {
        let cols: Vec<String> = self.schema(name)?.names().map(str::to_string).collect();
        self.bind(name, &cols)
    }

    pub fn stats(&self) -> AccessSnapshot {
        self.stats.snapshot()
    }
}
