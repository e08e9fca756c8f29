//! Owned scalar values, used at API boundaries and by the tuple-at-a-time
//! interpreter.

use std::cmp::Ordering;
use std::fmt;

use crate::catalog::{date, DataType};

#[derive(Clone, Debug, PartialEq)]
pub enum Value {
    Null,
    Int64(i64),
    Float64(f64),
    Date(i64),
    Text(Vec<u8>),
}

impl Value {
    pub fn is_null(&self) -> bool {
        matches!(self, Value::Null)
    }

    pub fn dtype(&self) -> Option<DataType> {
        Some(match self {
            Value::Null => return None,
            Value::Int64(_) => DataType::Int64,
            Value::Float64(_) => DataType::Float64,
            Value::Date(_) => DataType::Date,
            Value::Text(_) => DataType::Text,
        })
    }

    pub fn text(s: &str) -> Value {
        Value::Text(s.as_bytes().to_vec())
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Int64(v) => Some(*v as f64),
            Value::Float64(v) => Some(*v),
            _ => None,
        }
    }

    fn rank(&self) -> u8 {
        match self {
            Value::Null => 0,
            Value::Int64(_) => 1,
            Value::Float64(_) => 2,
            Value::Date(_) => 3,
            Value::Text(_) => 4,
        }
    }

    /// Total order used for sorting: nulls first, floats by `total_cmp`,
    /// text bytewise.
    pub fn total_cmp(&self, other: &Value) -> Ordering {
        match (self, other) {
            (Value::Int64(a), Value::Int64(b)) | (Value::Date(a), Value::Date(b)) => a.cmp(b),
            (Value::Float64(a), Value::Float64(b)) => a.total_cmp(b),
            (Value::Text(a), Value::Text(b)) => a.cmp(b),
            _ => self.rank().cmp(&other.rank()),
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Null => f.write_str("NULL"),
            Value::Int64(v) => write!(f, "{v}"),
            Value::Float64(v) => write!(f, "{v}"),
            Value::Date(v) => f.write_str(&date::format(*v)),
            Value::Text(v) => f.write_str(&String::from_utf8_lossy(v)),
        }
    }
}

/// Compares two row sets as multisets, allowing a relative tolerance on
/// floating point values. Rows are matched after sorting with
/// [`Value::total_cmp`].
pub fn rows_match(expected: &[Vec<Value>], actual: &[Vec<Value>], rel_tol: f64) -> Result<(), String> {
    if expected.len() != actual.len() {
        return Err(format!("row count differs: expected {}, got {}", expected.len(), actual.len()));
    }
    let sort = |rows: &[Vec<Value>]| {
        let mut rows = rows.to_vec();
        rows.sort_by(|a, b| cmp_rows(a, b));
        rows
    };
    let (e, a) = (sort(expected), sort(actual));
    for (i, (re, ra)) in e.iter().zip(&a).enumerate() {
        if re.len() != ra.len() {
            return Err(format!("row {i}: width differs"));
        }
        for (ve, va) in re.iter().zip(ra) {
            if !values_close(ve, va, rel_tol) {
                return Err(format!("row {i}: expected {re:?}, got {ra:?}"));
            }
        }
    }
    Ok(())
}

/// Compares rows in order (used when a sort order is part of the result).
pub fn rows_match_ordered(expected: &[Vec<Value>], actual: &[Vec<Value>], rel_tol: f64) -> Result<(), String> {
    if expected.len() != actual.len() {
        return Err(format!("row count differs: expected {}, got {}", expected.len(), actual.len()));
    }
    for (i, (re, ra)) in expected.iter().zip(actual).enumerate() {
        if re.len() != ra.len() || !re.iter().zip(ra).all(|(a, b)| values_close(a, b, rel_tol)) {
            return Err(format!("row {i}: expected {re:?}, got {ra:?}"));
        }
    }
    Ok(())
}

pub fn cmp_rows(a: &[Value], b: &[Value]) -> Ordering {
    a.iter().zip(b).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or_else(|| a.len().cmp(&b.len()))
}

pub fn values_close(a: &Value, b: &Value, rel_tol: f64) -> bool {
    match (a, b) {
        (Value::Float64(x), Value::Float64(y)) => {
            if x == y || (x.is_nan() && y.is_nan()) {
                return true;
            }
            (x - y).abs() <= rel_tol * x.abs().max(y.abs())
        }
        _ => a == b,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn multiset_comparison_ignores_order_and_tolerates_rounding() {
        let e = vec![vec![Value::Int64(1), Value::Float64(1.0)], vec![Value::Null, Value::Float64(3.0)]];
        let a = vec![vec![Value::Null, Value::Float64(3.0 + 1e-13)], vec![Value::Int64(1), Value::Float64(1.0)]];
        rows_match(&e, &a, 1e-9).unwrap();
        let bad = vec![vec![Value::Null, Value::Float64(3.1)], vec![Value::Int64(1), Value::Float64(1.0)]];
        assert!(rows_match(&e, &bad, 1e-9).is_err());
    }

    #[test]
    fn nulls_sort_first() {
        assert_eq!(Value::Null.total_cmp(&Value::Int64(i64::MIN)), Ordering::Less);
        assert_eq!(Value::text("b").total_cmp(&Value::text("ab")), Ordering::Greater);
    }
}
