//! FBC: a plain-encoded binary columnar file format.
//!
//! All integers are little-endian.
//!
//! ```text
//! "FBC1" | u32 version (=1) | u32 column_count
//! directory, per column:
//!     u16 name_len | name | u8 dtype | u8 nullable
//!     | u64 row_count | u64 payload_offset | u64 payload_len
//! payloads
//! ```
//!
//! Numeric payloads (int64, float64, date) are `row_count` 8-byte values.
//! Text payloads are `u64 arena_len | arena | (row_count + 1) x u64 offsets`.
//! Nullable columns append a `ceil(row_count / 8)` byte validity bitmap.
//!
//! Readers seek straight to the payloads they need, so a projected read
//! never touches the bytes of other columns.

use std::fs::File;
use std::io::{BufWriter, Read, Seek, SeekFrom, Write};
use std::path::Path;
use std::sync::Arc;

use crate::catalog::{ColumnDef, DataType, Schema};
use crate::error::{Error, Result};
use crate::storage::{Bitmap, ColumnData, ColumnTable, ColumnVector, TextData};

pub const MAGIC: &[u8; 4] = b"FBC1";
pub const VERSION: u32 = 1;

/// Bytes read from FBC files.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct IoStats {
    /// Header plus directory.
    pub header_bytes: u64,
    /// Column payloads.
    pub payload_bytes: u64,
    pub columns_read: u64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DirectoryEntry {
    pub column: ColumnDef,
    pub row_count: u64,
    pub payload_offset: u64,
    pub payload_len: u64,
}

fn payload_len(col: &ColumnVector, nullable: bool) -> u64 {
    let rows = col.len() as u64;
    let body = match col.data() {
        ColumnData::Text(t) => 8 + t.arena().len() as u64 + (rows + 1) * 8,
        _ => rows * 8,
    };
    body + if nullable { rows.div_ceil(8) } else { 0 }
}

fn entry_len(name: &str) -> u64 {
    2 + name.len() as u64 + 1 + 1 + 8 + 8 + 8
}

pub fn write_fbc(table: &ColumnTable, path: impl AsRef<Path>) -> Result<()> {
    let schema = table.schema();
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(schema.len() as u32).to_le_bytes())?;

    let dir_len: u64 = schema.names().map(entry_len).sum();
    let mut offset = 12 + dir_len;
    for (def, col) in schema.columns().iter().zip(table.columns()) {
        let name = def.name.as_bytes();
        let name_len =
            u16::try_from(name.len()).map_err(|_| Error::Schema(format!("column name too long: {}", def.name)))?;
        let len = payload_len(col, def.nullable);
        w.write_all(&name_len.to_le_bytes())?;
        w.write_all(name)?;
        w.write_all(&[def.dtype.code(), u8::from(def.nullable)])?;
        w.write_all(&(table.row_count() as u64).to_le_bytes())?;
        w.write_all(&offset.to_le_bytes())?;
        w.write_all(&len.to_le_bytes())?;
        offset += len;
    }

    for (def, col) in schema.columns().iter().zip(table.columns()) {
        match col.data() {
            ColumnData::Int64(v) | ColumnData::Date(v) => {
                for x in v {
                    w.write_all(&x.to_le_bytes())?;
                }
            }
            ColumnData::Float64(v) => {
                for x in v {
                    w.write_all(&x.to_le_bytes())?;
                }
            }
            ColumnData::Text(t) => {
                w.write_all(&(t.arena().len() as u64).to_le_bytes())?;
                w.write_all(t.arena())?;
                for o in t.offsets() {
                    w.write_all(&o.to_le_bytes())?;
                }
            }
        }
        if def.nullable {
            match col.validity() {
                Some(bits) => w.write_all(bits.bytes())?,
                None => w.write_all(Bitmap::new_valid(col.len()).bytes())?,
            }
        }
    }
    w.flush()?;
    Ok(())
}

struct Counting<R> {
    inner: R,
    read: u64,
}

impl<R: Read> Read for Counting<R> {
    fn read(&mut self, buf: &mut [u8]) -> std::io::Result<usize> {
        let n = self.inner.read(buf)?;
        self.read += n as u64;
        Ok(n)
    }
}

impl<R: Seek> Seek for Counting<R> {
    fn seek(&mut self, pos: SeekFrom) -> std::io::Result<u64> {
        self.inner.seek(pos)
    }
}

fn read_u16(r: &mut impl Read) -> std::io::Result<u16> {
    let mut b = [0; 2];
    r.read_exact(&mut b)?;
    Ok(u16::from_le_bytes(b))
}

fn read_u32(r: &mut impl Read) -> std::io::Result<u32> {
    let mut b = [0; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64(r: &mut impl Read) -> std::io::Result<u64> {
    let mut b = [0; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_directory_from(r: &mut Counting<File>, path: &Path) -> Result<Vec<DirectoryEntry>> {
    let not_fbc = |why: &str| Error::NotFbc(format!("{}: {why}", path.display()));
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(|_| not_fbc("file too short"))?;
    if &magic != MAGIC {
        return Err(not_fbc("bad magic"));
    }
    let version = read_u32(r).map_err(|_| not_fbc("file too short"))?;
    if version != VERSION {
        return Err(not_fbc(&format!("unsupported version {version}")));
    }
    let count = read_u32(r).map_err(|_| not_fbc("file too short"))?;
    let mut entries = Vec::with_capacity(count as usize);
    for _ in 0..count {
        let truncated = |_| not_fbc("truncated directory");
        let name_len = read_u16(r).map_err(truncated)?;
        let mut name = vec![0; name_len as usize];
        r.read_exact(&mut name).map_err(truncated)?;
        let name = String::from_utf8(name).map_err(|_| not_fbc("column name is not utf-8"))?;
        let mut tags = [0u8; 2];
        r.read_exact(&mut tags).map_err(truncated)?;
        let dtype = DataType::from_code(tags[0]).ok_or_else(|| not_fbc(&format!("unknown type code {}", tags[0])))?;
        let row_count = read_u64(r).map_err(truncated)?;
        let payload_offset = read_u64(r).map_err(truncated)?;
        let payload_len = read_u64(r).map_err(truncated)?;
        entries.push(DirectoryEntry {
            column: ColumnDef { name, dtype, nullable: tags[1] != 0 },
            row_count,
            payload_offset,
            payload_len,
        });
    }
    Ok(entries)
}

/// Reads just the header and directory.
pub fn read_directory(path: impl AsRef<Path>) -> Result<Vec<DirectoryEntry>> {
    let path = path.as_ref();
    let mut r = Counting { inner: File::open(path)?, read: 0 };
    read_directory_from(&mut r, path)
}

pub fn read_schema(path: impl AsRef<Path>) -> Result<(Schema, IoStats)> {
    let path = path.as_ref();
    let mut r = Counting { inner: File::open(path)?, read: 0 };
    let dir = read_directory_from(&mut r, path)?;
    let schema = Schema::new(dir.into_iter().map(|e| e.column).collect())?;
    Ok((schema, IoStats { header_bytes: r.read, ..IoStats::default() }))
}

fn decode_payload(entry: &DirectoryEntry, bytes: &[u8]) -> Option<ColumnVector> {
    let rows = usize::try_from(entry.row_count).ok()?;
    let bitmap_len = if entry.column.nullable { rows.div_ceil(8) } else { 0 };
    let body_len = bytes.len().checked_sub(bitmap_len)?;
    let (body, bitmap) = bytes.split_at(body_len);
    let words = |b: &[u8]| -> Vec<[u8; 8]> { b.chunks_exact(8).map(|c| c.try_into().unwrap()).collect() };
    let data = match entry.column.dtype {
        DataType::Int64 | DataType::Date => {
            if body.len() != rows * 8 {
                return None;
            }
            let v = words(body).into_iter().map(i64::from_le_bytes).collect();
            if entry.column.dtype == DataType::Int64 {
                ColumnData::Int64(v)
            } else {
                ColumnData::Date(v)
            }
        }
        DataType::Float64 => {
            if body.len() != rows * 8 {
                return None;
            }
            ColumnData::Float64(words(body).into_iter().map(f64::from_le_bytes).collect())
        }
        DataType::Text => {
            let arena_len = usize::try_from(u64::from_le_bytes(body.get(..8)?.try_into().ok()?)).ok()?;
            let arena = body.get(8..8 + arena_len)?.to_vec();
            let offsets_bytes = body.get(8 + arena_len..)?;
            if offsets_bytes.len() != (rows + 1) * 8 {
                return None;
            }
            let offsets = words(offsets_bytes).into_iter().map(u64::from_le_bytes).collect();
            ColumnData::Text(TextData::from_parts(offsets, arena).ok()?)
        }
    };
    let validity = if entry.column.nullable { Some(Bitmap::from_bytes(bitmap.to_vec(), rows).ok()?) } else { None };
    ColumnVector::new(data, validity).ok()
}

/// Reads an FBC file, optionally only the named columns (returned in the
/// order requested).
pub fn read_fbc(path: impl AsRef<Path>, projection: Option<&[String]>) -> Result<ColumnTable> {
    read_fbc_with_stats(path, projection).map(|(t, _)| t)
}

pub fn read_fbc_with_stats(path: impl AsRef<Path>, projection: Option<&[String]>) -> Result<(ColumnTable, IoStats)> {
    let path = path.as_ref();
    let file = File::open(path)?;
    let file_len = file.metadata()?.len();
    let mut r = Counting { inner: file, read: 0 };
    let dir = read_directory_from(&mut r, path)?;
    let header_bytes = r.read;

    let selected: Vec<&DirectoryEntry> = match projection {
        None => dir.iter().collect(),
        Some(names) => names
            .iter()
            .map(|n| {
                dir.iter().find(|e| &e.column.name == n).ok_or_else(|| Error::UnknownColumn {
                    name: n.clone(),
                    candidates: dir.iter().map(|e| e.column.name.clone()).collect(),
                })
            })
            .collect::<Result<_>>()?,
    };

    let row_count = dir.first().map_or(0, |e| e.row_count);
    let mut columns = Vec::with_capacity(selected.len());
    for entry in &selected {
        let corrupt = || Error::CorruptColumn(entry.column.name.clone());
        if entry.row_count != row_count
            || entry.payload_offset.checked_add(entry.payload_len).is_none_or(|end| end > file_len)
        {
            return Err(corrupt());
        }
        let len = usize::try_from(entry.payload_len).map_err(|_| corrupt())?;
        let mut buf = vec![0u8; len];
        r.seek(SeekFrom::Start(entry.payload_offset))?;
        r.read_exact(&mut buf).map_err(|_| corrupt())?;
        columns.push(Arc::new(decode_payload(entry, &buf).ok_or_else(corrupt)?));
    }
    let payload_bytes = r.read - header_bytes;
    let schema = Schema::new(selected.iter().map(|e| e.column.clone()).collect())?;
    let table = ColumnTable::new(schema, row_count as usize, columns)?;
    Ok((table, IoStats { header_bytes, payload_bytes, columns_read: selected.len() as u64 }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::value::Value;

    fn sample() -> ColumnTable {
        let schema = Schema::new(vec![
            ColumnDef::new("i", DataType::Int64),
            ColumnDef::nullable("f", DataType::Float64),
            ColumnDef::new("d", DataType::Date),
            ColumnDef::nullable("t", DataType::Text),
        ])
        .unwrap();
        let rows = vec![
            vec![Value::Int64(1), Value::Float64(0.5), Value::Date(19_940_101), Value::text("x")],
            vec![Value::Int64(-2), Value::Null, Value::Date(19_951_231), Value::Null],
            vec![Value::Int64(3), Value::Float64(-0.0), Value::Date(19_920_229), Value::text("")],
        ];
        ColumnTable::from_rows(schema, &rows).unwrap()
    }

    #[test]
    fn round_trip_and_projection() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.fbc");
        let t = sample();
        write_fbc(&t, &p).unwrap();
        assert_eq!(read_fbc(&p, None).unwrap().rows(), t.rows());

        let proj = vec!["t".to_string(), "i".to_string()];
        let (pt, io) = read_fbc_with_stats(&p, Some(&proj)).unwrap();
        assert_eq!(pt.schema().names().collect::<Vec<_>>(), ["t", "i"]);
        assert_eq!(pt.rows()[1], vec![Value::Null, Value::Int64(-2)]);
        // i: 3 x 8; t: 8 + 1 arena byte + 4 x 8 offsets + 1 bitmap byte
        assert_eq!(io.payload_bytes, 24 + 8 + 1 + 32 + 1);
        assert_eq!(io.columns_read, 2);
    }

    #[test]
    fn rejects_non_fbc_and_truncation() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.fbc");
        std::fs::write(&p, b"PAR1xxxxxxxx").unwrap();
        assert!(read_fbc(&p, None).unwrap_err().to_string().contains("not an FBC file"));

        let p = dir.path().join("t.fbc");
        write_fbc(&sample(), &p).unwrap();
        let bytes = std::fs::read(&p).unwrap();
        std::fs::write(&p, &bytes[..bytes.len() - 3]).unwrap();
        let err = read_fbc(&p, None).unwrap_err().to_string();
        assert_eq!(err, "corrupt column t");
        // untouched columns still read fine
        read_fbc(&p, Some(&["i".to_string()])).unwrap();
    }

    #[test]
    fn unknown_projection_column() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.fbc");
        write_fbc(&sample(), &p).unwrap();
        let err = read_fbc(&p, Some(&["y".to_string()])).unwrap_err().to_string();
        assert!(err.contains("unknown column y"), "{err}");
    }
}
