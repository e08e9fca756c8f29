//! Schema-specialized CSV loading.
//!
//! Before the first byte is parsed, the schema is turned into one typed
//! field parser per column. The row loop then feeds each field to the
//! parser at its ordinal; no type is inspected per field.

use std::path::Path;
use std::sync::Arc;

use crate::catalog::{date, DataType, Schema};
use crate::error::{Error, Result};
use crate::storage::{ColumnBuilder, ColumnTable, ColumnVector};

/// Dates are always `YYYY-MM-DD`.
pub const DATE_FORMAT: &str = "YYYY-MM-DD";

#[derive(Clone, Debug)]
pub struct CsvOptions {
    pub delimiter: u8,
    pub has_header: bool,
    /// Field content that denotes null in nullable columns.
    pub null_token: Vec<u8>,
}

impl Default for CsvOptions {
    fn default() -> Self {
        CsvOptions { delimiter: b'|', has_header: false, null_token: Vec::new() }
    }
}

impl CsvOptions {
    fn validate(&self) -> Result<()> {
        if self.delimiter == b'\n' || self.delimiter == b'\r' {
            return Err(Error::Config("csv delimiter cannot be a newline".into()));
        }
        Ok(())
    }
}

trait FieldParser {
    fn parse(&mut self, field: &[u8]) -> Result<(), String>;
    fn finish(self: Box<Self>) -> ColumnVector;
}

trait Scalar {
    type V;
    const NAME: &'static str;
    fn parse(field: &[u8]) -> Option<Self::V>;
    fn push(v: Self::V, b: &mut ColumnBuilder);
}

struct Int;
struct Float;
struct DateYmd;

impl Scalar for Int {
    type V = i64;
    const NAME: &'static str = "int64";
    fn parse(field: &[u8]) -> Option<i64> {
        parse_i64(field)
    }
    fn push(v: i64, b: &mut ColumnBuilder) {
        b.push_i64(v)
    }
}

impl Scalar for Float {
    type V = f64;
    const NAME: &'static str = "float64";
    fn parse(field: &[u8]) -> Option<f64> {
        std::str::from_utf8(field).ok()?.parse().ok()
    }
    fn push(v: f64, b: &mut ColumnBuilder) {
        b.push_f64(v)
    }
}

impl Scalar for DateYmd {
    type V = i64;
    const NAME: &'static str = "date";
    fn parse(field: &[u8]) -> Option<i64> {
        date::parse(field)
    }
    fn push(v: i64, b: &mut ColumnBuilder) {
        b.push_i64(v)
    }
}

/// Parses an optionally signed decimal integer, rejecting overflow.
pub(crate) fn parse_i64(s: &[u8]) -> Option<i64> {
    let (neg, digits) = match s.first()? {
        b'-' => (true, &s[1..]),
        b'+' => (false, &s[1..]),
        _ => (false, s),
    };
    if digits.is_empty() {
        return None;
    }
    let mut acc: i64 = 0;
    for &b in digits {
        if !b.is_ascii_digit() {
            return None;
        }
        let d = i64::from(b - b'0');
        acc = acc.checked_mul(10)?;
        acc = if neg { acc.checked_sub(d)? } else { acc.checked_add(d)? };
    }
    Some(acc)
}

struct Typed<S> {
    builder: ColumnBuilder,
    nullable: bool,
    null_token: Vec<u8>,
    _s: std::marker::PhantomData<S>,
}

impl<S: Scalar> FieldParser for Typed<S> {
    #[inline]
    fn parse(&mut self, field: &[u8]) -> Result<(), String> {
        if field == self.null_token.as_slice() {
            if self.nullable {
                self.builder.push_null();
                return Ok(());
            }
            if field.is_empty() {
                return Err("empty field in a non-nullable column".into());
            }
        }
        match S::parse(field) {
            Some(v) => {
                S::push(v, &mut self.builder);
                Ok(())
            }
            None => Err(format!("invalid {} '{}'", S::NAME, String::from_utf8_lossy(field))),
        }
    }

    fn finish(self: Box<Self>) -> ColumnVector {
        self.builder.finish()
    }
}

struct TextField {
    builder: ColumnBuilder,
    nullable: bool,
    null_token: Vec<u8>,
}

impl FieldParser for TextField {
    #[inline]
    fn parse(&mut self, field: &[u8]) -> Result<(), String> {
        if field == self.null_token.as_slice() {
            if self.nullable {
                self.builder.push_null();
                return Ok(());
            }
            if field.is_empty() {
                return Err("empty field in a non-nullable column".into());
            }
        }
        self.builder.push_text(field);
        Ok(())
    }

    fn finish(self: Box<Self>) -> ColumnVector {
        self.builder.finish()
    }
}

fn field_parser(dtype: DataType, nullable: bool, null_token: &[u8]) -> Box<dyn FieldParser> {
    fn typed<S: Scalar + 'static>(dtype: DataType, nullable: bool, null_token: &[u8]) -> Box<dyn FieldParser> {
        Box::new(Typed::<S> {
            builder: ColumnBuilder::new(dtype),
            nullable,
            null_token: null_token.to_vec(),
            _s: std::marker::PhantomData,
        })
    }
    match dtype {
        DataType::Int64 => typed::<Int>(dtype, nullable, null_token),
        DataType::Float64 => typed::<Float>(dtype, nullable, null_token),
        DataType::Date => typed::<DateYmd>(dtype, nullable, null_token),
        DataType::Text => {
            Box::new(TextField { builder: ColumnBuilder::new(dtype), nullable, null_token: null_token.to_vec() })
        }
    }
}

/// A loader specialized to one schema.
pub struct CsvLoader {
    schema: Schema,
    opts: CsvOptions,
}

impl CsvLoader {
    pub fn new(schema: Schema, opts: CsvOptions) -> Result<Self> {
        opts.validate()?;
        Ok(CsvLoader { schema, opts })
    }

    pub fn load_bytes(&self, input: &[u8]) -> Result<ColumnTable> {
        let arity = self.schema.len();
        let delim = self.opts.delimiter;
        let mut parsers: Vec<Box<dyn FieldParser>> =
            self.schema.columns().iter().map(|c| field_parser(c.dtype, c.nullable, &self.opts.null_token)).collect();

        let mut rows = 0usize;
        let mut skip_header = self.opts.has_header;
        for (idx, line) in input.split(|&b| b == b'\n').enumerate() {
            let line_no = idx + 1;
            if skip_header {
                skip_header = false;
                continue;
            }
            if line.is_empty() {
                continue;
            }
            let mut fields = line.split(|&b| b == delim);
            for (ordinal, parser) in parsers.iter_mut().enumerate() {
                let Some(field) = fields.next() else {
                    return Err(Error::Csv {
                        line: line_no,
                        message: format!("expected {arity} fields, found {ordinal}"),
                    });
                };
                parser.parse(field).map_err(|m| Error::Csv {
                    line: line_no,
                    message: format!("column {ordinal} ({}): {m}", self.schema.column(ordinal).name),
                })?;
            }
            // A single trailing delimiter (dbgen style) is accepted.
            match (fields.next(), fields.next()) {
                (None, _) | (Some(b""), None) => {}
                _ => {
                    let found = line.split(|&b| b == delim).count();
                    return Err(Error::Csv {
                        line: line_no,
                        message: format!("expected {arity} fields, found {found}"),
                    });
                }
            }
            rows += 1;
        }
        let columns = parsers.into_iter().map(|p| Arc::new(p.finish())).collect();
        ColumnTable::new(self.schema.clone(), rows, columns)
    }

    pub fn load_path(&self, path: &Path) -> Result<ColumnTable> {
        let bytes = std::fs::read(path)?;
        self.load_bytes(&bytes)
    }
}

pub fn load_csv(path: impl AsRef<Path>, schema: &Schema, opts: &CsvOptions) -> Result<ColumnTable> {
    CsvLoader::new(schema.clone(), opts.clone())?.load_path(path.as_ref())
}

pub fn load_csv_bytes(input: &[u8], schema: &Schema, opts: &CsvOptions) -> Result<ColumnTable> {
    CsvLoader::new(schema.clone(), opts.clone())?.load_bytes(input)
}

/// Writes a table as delimiter-separated text (no header, nulls as empty
/// fields).
pub fn write_csv(table: &ColumnTable, path: impl AsRef<Path>, delimiter: u8) -> Result<()> {
    use std::io::Write;
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    let delim = [delimiter];
    for i in 0..table.row_count() {
        for (j, col) in table.columns().iter().enumerate() {
            if j > 0 {
                w.write_all(&delim)?;
            }
            match col.value(i) {
                crate::value::Value::Null => {}
                crate::value::Value::Text(t) => w.write_all(&t)?,
                v => write!(w, "{v}")?,
            }
        }
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::ColumnDef;
    use crate::value::Value;

    fn schema(cols: &[(&str, DataType, bool)]) -> Schema {
        Schema::new(cols.iter().map(|(n, t, nl)| ColumnDef { name: n.to_string(), dtype: *t, nullable: *nl }).collect())
            .unwrap()
    }

    #[test]
    fn date_field_encodes_as_yyyymmdd() {
        let s = schema(&[("d", DataType::Date, false)]);
        let t = load_csv_bytes(b"1994-01-01\n", &s, &CsvOptions::default()).unwrap();
        assert_eq!(t.column(0).as_i64().unwrap(), &[19_940_101]);
    }

    #[test]
    fn empty_input_gives_empty_table() {
        let s = schema(&[("a", DataType::Int64, false)]);
        let t = load_csv_bytes(b"", &s, &CsvOptions::default()).unwrap();
        assert_eq!(t.row_count(), 0);
    }

    #[test]
    fn three_line_transcription() {
        let s = schema(&[("a", DataType::Text, false), ("b", DataType::Int64, false)]);
        let t = load_csv_bytes(b"a|1\nb|2\nc|3", &s, &CsvOptions::default()).unwrap();
        assert_eq!(t.row_count(), 3);
        assert_eq!(t.column(1).as_i64().unwrap(), &[1, 2, 3]);
        assert_eq!(t.column(0).value(2), Value::text("c"));
    }

    #[test]
    fn header_trailing_delimiter_and_nulls() {
        let s = schema(&[("a", DataType::Int64, true), ("b", DataType::Float64, false)]);
        let opts = CsvOptions { has_header: true, ..CsvOptions::default() };
        let t = load_csv_bytes(b"a|b\n|1.5|\n7|2\n", &s, &opts).unwrap();
        assert_eq!(t.rows(), vec![vec![Value::Null, Value::Float64(1.5)], vec![Value::Int64(7), Value::Float64(2.0)]]);
    }

    #[test]
    fn errors_carry_line_and_ordinal() {
        let s = schema(&[("a", DataType::Int64, false), ("d", DataType::Date, false)]);
        let err = load_csv_bytes(b"1|1994-01-01\nx|1994-01-01\n", &s, &CsvOptions::default()).unwrap_err().to_string();
        assert!(err.contains("line 2") && err.contains("column 0"), "{err}");
        let err = load_csv_bytes(b"1|1994-02-30\n", &s, &CsvOptions::default()).unwrap_err().to_string();
        assert!(err.contains("line 1") && err.contains("column 1"), "{err}");
        let err = load_csv_bytes(b"1\n", &s, &CsvOptions::default()).unwrap_err().to_string();
        assert!(err.contains("line 1") && err.contains("expected 2 fields"), "{err}");
        let err = load_csv_bytes(b"1|1994-01-01|x|y\n", &s, &CsvOptions::default()).unwrap_err().to_string();
        assert!(err.contains("found 4"), "{err}");
        let err = load_csv_bytes(b"|1994-01-01\n", &s, &CsvOptions::default()).unwrap_err().to_string();
        assert!(err.contains("non-nullable"), "{err}");
    }

    #[test]
    fn integer_parse_rejects_overflow() {
        assert_eq!(parse_i64(b"-9223372036854775808"), Some(i64::MIN));
        assert_eq!(parse_i64(b"9223372036854775808"), None);
        assert_eq!(parse_i64(b"-"), None);
        assert_eq!(parse_i64(b"12a"), None);
    }

    #[test]
    fn newline_delimiter_rejected() {
        let s = schema(&[("a", DataType::Int64, false)]);
        let opts = CsvOptions { delimiter: b'\n', ..CsvOptions::default() };
        assert!(CsvLoader::new(s, opts).is_err());
    }
}
