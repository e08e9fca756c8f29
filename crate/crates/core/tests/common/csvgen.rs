//! Random well-formed delimited files and a naive reference parser.

use proptest::prelude::*;

use flarelite::catalog::{ColumnDef, DataType, Schema};
use flarelite::storage::csv::{load_csv_bytes, CsvOptions};
use flarelite::value::Value;

pub fn month_len(y: i64, m: i64) -> i64 {
    match m {
        4 | 6 | 9 | 11 => 30,
        2 if (y % 4 == 0 && y % 100 != 0) || y % 400 == 0 => 29,
        2 => 28,
        _ => 31,
    }
}

/// One field, the way a person would read it.
pub fn reference_field(text: &str, c: &ColumnDef) -> Value {
    if text.is_empty() && c.nullable {
        return Value::Null;
    }
    match c.dtype {
        DataType::Int64 => Value::Int64(text.parse().unwrap()),
        DataType::Float64 => Value::Float64(text.parse().unwrap()),
        DataType::Date => {
            let p: Vec<i64> = text.split('-').map(|x| x.parse().unwrap()).collect();
            Value::Date(p[0] * 10000 + p[1] * 100 + p[2])
        }
        DataType::Text => Value::Text(text.as_bytes().to_vec()),
    }
}

pub fn reference_parse(text: &str, schema: &Schema, header: bool) -> Vec<Vec<Value>> {
    text.lines()
        .skip(usize::from(header))
        .filter(|l| !l.is_empty())
        .map(|l| l.split('|').zip(schema.columns()).map(|(f, c)| reference_field(f, c)).collect())
        .collect()
}

pub fn dtype() -> impl Strategy<Value = DataType> {
    prop_oneof![Just(DataType::Int64), Just(DataType::Float64), Just(DataType::Date), Just(DataType::Text)]
}

pub fn field(dt: DataType) -> BoxedStrategy<String> {
    match dt {
        DataType::Int64 => prop_oneof![
            any::<i64>().prop_map(|v| v.to_string()),
            (-1000i64..1000).prop_map(|v| v.to_string()),
            (0i64..1000).prop_map(|v| format!("+{v}")),
        ]
        .boxed(),
        DataType::Float64 => prop_oneof![
            any::<f64>().prop_filter("finite", |v| v.is_finite()).prop_map(|v| v.to_string()),
            (-1e6f64..1e6).prop_map(|v| format!("{v:.2}")),
            (-1e6f64..1e6).prop_map(|v| format!("{v:e}")),
            (-1000i64..1000).prop_map(|v| v.to_string()),
        ]
        .boxed(),
        DataType::Date => (1900i64..2100, 1i64..=12, 0.0f64..1.0)
            .prop_map(|(y, m, f)| {
                let d = 1 + (f * month_len(y, m) as f64) as i64;
                format!("{y:04}-{m:02}-{d:02}")
            })
            .boxed(),
        DataType::Text => "[a-zA-Z0-9 ,.#'\"-]{1,12}".boxed(),
    }
}

#[derive(Debug, Clone)]
pub struct CsvCase {
    pub schema: Schema,
    pub text: String,
    pub header: bool,
}

pub fn csv_case() -> impl Strategy<Value = CsvCase> {
    (prop::collection::vec((dtype(), any::<bool>()), 1..7), 0usize..40, any::<bool>(), any::<bool>()).prop_flat_map(
        |(cols, nrows, header, trailing_newline)| {
            let cells: Vec<BoxedStrategy<String>> =
                cols.iter()
                    .map(|&(dt, nullable)| {
                        if nullable {
                            prop_oneof![1 => Just(String::new()), 6 => field(dt)].boxed()
                        } else {
                            field(dt)
                        }
                    })
                    .collect();
            let defs: Vec<ColumnDef> = cols
                .iter()
                .enumerate()
                .map(
                    |(i, &(dt, n))| {
                        if n {
                            ColumnDef::nullable(format!("c{i}"), dt)
                        } else {
                            ColumnDef::new(format!("c{i}"), dt)
                        }
                    },
                )
                .collect();
            let schema = Schema::new(defs).unwrap();
            prop::collection::vec(cells, nrows).prop_map(move |rows| {
                let mut text = String::new();
                if header {
                    text.push_str(&schema.names().collect::<Vec<_>>().join("|"));
                    text.push('\n');
                }
                let lines: Vec<String> = rows.iter().map(|r| r.join("|")).collect();
                text.push_str(&lines.join("\n"));
                if trailing_newline && !lines.is_empty() {
                    text.push('\n');
                }
                CsvCase { schema: schema.clone(), text, header }
            })
        },
    )
}

pub fn same_value(a: &Value, b: &Value) -> bool {
    match (a, b) {
        (Value::Float64(x), Value::Float64(y)) => x.to_bits() == y.to_bits(),
        _ => a == b,
    }
}

/// Loader output against the reference parser for one case.
pub fn check_case(case: &CsvCase) -> Result<(), String> {
    let opts = CsvOptions { has_header: case.header, ..CsvOptions::default() };
    let got = load_csv_bytes(case.text.as_bytes(), &case.schema, &opts).map_err(|e| e.to_string())?.rows();
    let want = reference_parse(&case.text, &case.schema, case.header);
    if got.len() != want.len() {
        return Err(format!("{} rows, reference has {}", got.len(), want.len()));
    }
    match got.iter().zip(&want).find(|(g, w)| !g.iter().zip(*w).all(|(a, b)| same_value(a, b))) {
        Some((g, w)) => Err(format!("{g:?} vs {w:?}")),
        None => Ok(()),
    }
}
