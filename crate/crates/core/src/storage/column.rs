use crate::catalog::DataType;
use crate::error::{Error, Result};
use crate::value::Value;

/// Validity bitmap, LSB-first; a set bit marks a non-null entry.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Bitmap {
    bits: Vec<u8>,
    len: usize,
}

impl Bitmap {
    pub fn new_valid(len: usize) -> Self {
        let mut bits = vec![0xff; len.div_ceil(8)];
        if !len.is_multiple_of(8) {
            if let Some(last) = bits.last_mut() {
                *last = (1u8 << (len % 8)) - 1;
            }
        }
        Bitmap { bits, len }
    }

    pub fn from_bytes(bits: Vec<u8>, len: usize) -> Result<Self> {
        if bits.len() != len.div_ceil(8) {
            return Err(Error::Schema(format!("bitmap of {} bytes cannot cover {len} rows", bits.len())));
        }
        Ok(Bitmap { bits, len })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn bytes(&self) -> &[u8] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        self.bits[i >> 3] & (1 << (i & 7)) != 0
    }

    pub fn push(&mut self, valid: bool) {
        if self.len.is_multiple_of(8) {
            self.bits.push(0);
        }
        if valid {
            self.bits[self.len >> 3] |= 1 << (self.len & 7);
        }
        self.len += 1;
    }

    pub fn count_invalid(&self) -> usize {
        (0..self.len).filter(|&i| !self.get(i)).count()
    }
}

/// Variable-length byte strings: `offsets[i]..offsets[i + 1]` indexes the
/// arena. The first offset is 0 and the last equals the arena length.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TextData {
    offsets: Vec<u64>,
    arena: Vec<u8>,
}

impl Default for TextData {
    fn default() -> Self {
        TextData { offsets: vec![0], arena: Vec::new() }
    }
}

impl TextData {
    pub fn from_parts(offsets: Vec<u64>, arena: Vec<u8>) -> Result<Self> {
        let ok = offsets.first() == Some(&0)
            && offsets.last() == Some(&(arena.len() as u64))
            && offsets.windows(2).all(|w| w[0] <= w[1]);
        if !ok {
            return Err(Error::Schema("malformed text offsets".into()));
        }
        Ok(TextData { offsets, arena })
    }

    pub fn len(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn get(&self, i: usize) -> &[u8] {
        &self.arena[self.offsets[i] as usize..self.offsets[i + 1] as usize]
    }

    pub fn push(&mut self, v: &[u8]) {
        self.arena.extend_from_slice(v);
        self.offsets.push(self.arena.len() as u64);
    }

    pub fn offsets(&self) -> &[u64] {
        &self.offsets
    }

    pub fn arena(&self) -> &[u8] {
        &self.arena
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ColumnData {
    Int64(Vec<i64>),
    Float64(Vec<f64>),
    Date(Vec<i64>),
    Text(TextData),
}

impl ColumnData {
    pub fn empty(dtype: DataType) -> Self {
        match dtype {
            DataType::Int64 => ColumnData::Int64(Vec::new()),
            DataType::Float64 => ColumnData::Float64(Vec::new()),
            DataType::Date => ColumnData::Date(Vec::new()),
            DataType::Text => ColumnData::Text(TextData::default()),
        }
    }

    pub fn dtype(&self) -> DataType {
        match self {
            ColumnData::Int64(_) => DataType::Int64,
            ColumnData::Float64(_) => DataType::Float64,
            ColumnData::Date(_) => DataType::Date,
            ColumnData::Text(_) => DataType::Text,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            ColumnData::Int64(v) | ColumnData::Date(v) => v.len(),
            ColumnData::Float64(v) => v.len(),
            ColumnData::Text(t) => t.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// One column: a contiguous value buffer plus an optional validity bitmap.
#[derive(Clone, Debug, PartialEq)]
pub struct ColumnVector {
    data: ColumnData,
    validity: Option<Bitmap>,
}

impl ColumnVector {
    pub fn new(data: ColumnData, validity: Option<Bitmap>) -> Result<Self> {
        if let Some(v) = &validity {
            if v.len() != data.len() {
                return Err(Error::Schema(format!("validity covers {} rows, column has {}", v.len(), data.len())));
            }
        }
        Ok(ColumnVector { data, validity })
    }

    pub fn dtype(&self) -> DataType {
        self.data.dtype()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn data(&self) -> &ColumnData {
        &self.data
    }

    pub fn validity(&self) -> Option<&Bitmap> {
        self.validity.as_ref()
    }

    #[inline]
    pub fn is_valid(&self, i: usize) -> bool {
        self.validity.as_ref().is_none_or(|v| v.get(i))
    }

    pub fn null_count(&self) -> usize {
        self.validity.as_ref().map_or(0, Bitmap::count_invalid)
    }

    pub fn value(&self, i: usize) -> Value {
        if !self.is_valid(i) {
            return Value::Null;
        }
        match &self.data {
            ColumnData::Int64(v) => Value::Int64(v[i]),
            ColumnData::Float64(v) => Value::Float64(v[i]),
            ColumnData::Date(v) => Value::Date(v[i]),
            ColumnData::Text(t) => Value::Text(t.get(i).to_vec()),
        }
    }

    /// Int64 and Date payloads.
    pub fn as_i64(&self) -> Option<&[i64]> {
        match &self.data {
            ColumnData::Int64(v) | ColumnData::Date(v) => Some(v),
            _ => None,
        }
    }

    pub fn as_f64(&self) -> Option<&[f64]> {
        match &self.data {
            ColumnData::Float64(v) => Some(v),
            _ => None,
        }
    }

    pub fn as_text(&self) -> Option<&TextData> {
        match &self.data {
            ColumnData::Text(t) => Some(t),
            _ => None,
        }
    }
}

/// Appends values of one type; nulls allocate a validity bitmap lazily.
#[derive(Debug)]
pub struct ColumnBuilder {
    data: ColumnData,
    validity: Option<Bitmap>,
}

impl ColumnBuilder {
    pub fn new(dtype: DataType) -> Self {
        ColumnBuilder { data: ColumnData::empty(dtype), validity: None }
    }

    pub fn dtype(&self) -> DataType {
        self.data.dtype()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    // called after the value slot has been pushed
    fn mark(&mut self, valid: bool) {
        if let Some(v) = &mut self.validity {
            v.push(valid);
        } else if !valid {
            let mut v = Bitmap::new_valid(self.data.len() - 1);
            v.push(false);
            self.validity = Some(v);
        }
    }

    #[inline]
    pub fn push_i64(&mut self, x: i64) {
        match &mut self.data {
            ColumnData::Int64(v) | ColumnData::Date(v) => v.push(x),
            other => panic!("push_i64 on {} column", other.dtype()),
        }
        self.mark(true);
    }

    #[inline]
    pub fn push_f64(&mut self, x: f64) {
        match &mut self.data {
            ColumnData::Float64(v) => v.push(x),
            other => panic!("push_f64 on {} column", other.dtype()),
        }
        self.mark(true);
    }

    #[inline]
    pub fn push_text(&mut self, x: &[u8]) {
        match &mut self.data {
            ColumnData::Text(t) => t.push(x),
            other => panic!("push_text on {} column", other.dtype()),
        }
        self.mark(true);
    }

    pub fn push_null(&mut self) {
        match &mut self.data {
            ColumnData::Int64(v) | ColumnData::Date(v) => v.push(0),
            ColumnData::Float64(v) => v.push(0.0),
            ColumnData::Text(t) => t.push(b""),
        }
        self.mark(false);
    }

    pub fn push_value(&mut self, v: &Value) -> Result<()> {
        match (v, self.dtype()) {
            (Value::Null, _) => self.push_null(),
            (Value::Int64(x), DataType::Int64) | (Value::Date(x), DataType::Date) => self.push_i64(*x),
            (Value::Float64(x), DataType::Float64) => self.push_f64(*x),
            (Value::Text(x), DataType::Text) => self.push_text(x),
            (v, dt) => {
                return Err(Error::ty(format!("cannot store {v:?} in a {dt} column")));
            }
        }
        Ok(())
    }

    pub fn finish(self) -> ColumnVector {
        ColumnVector { data: self.data, validity: self.validity }
    }
}
