//! CSV and FBC loaders against a naive reference parser and against the
//! file layout.

mod common;

use common::csvgen::{check_case, csv_case, same_value};

use proptest::prelude::*;

use flarelite::catalog::{Catalog, ColumnDef, DataType, Schema};
use flarelite::storage::csv::{load_csv_bytes, CsvOptions};
use flarelite::storage::fbc::{read_fbc, read_fbc_with_stats, write_fbc};
use flarelite::storage::ColumnTable;
use flarelite::tpch::gen::{write_tables, Format, GenConfig};
use flarelite::tpch::queries;
use flarelite::value::Value;
use flarelite::{Backend, Error, RunConfig};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn csv_loader_matches_reference_parser(case in csv_case()) {
        let r = check_case(&case);
        prop_assert!(r.is_ok(), "{}", r.unwrap_err());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn fbc_round_trip(case in csv_case(), pick in any::<prop::sample::Index>()) {
        let opts = CsvOptions { has_header: case.header, ..CsvOptions::default() };
        let table = load_csv_bytes(case.text.as_bytes(), &case.schema, &opts).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.fbc");
        write_fbc(&table, &path).unwrap();
        let back = read_fbc(&path, None).unwrap();
        prop_assert_eq!(back.schema(), table.schema());
        prop_assert_eq!(back.row_count(), table.row_count());
        let (a, b) = (back.rows(), table.rows());
        prop_assert!(a.iter().zip(&b).all(|(x, y)| x.iter().zip(y).all(|(p, q)| same_value(p, q))));

        let name = case.schema.column(pick.index(case.schema.len())).name.clone();
        let one = read_fbc(&path, Some(std::slice::from_ref(&name))).unwrap();
        prop_assert_eq!(one.rows(), table.project(&[name]).unwrap().rows());
    }
}

#[test]
fn date_text_becomes_yyyymmdd() {
    let schema = Schema::new(vec![ColumnDef::new("d", DataType::Date)]).unwrap();
    let t = load_csv_bytes(b"1994-01-01\n2000-02-29\n", &schema, &CsvOptions::default()).unwrap();
    assert_eq!(t.rows(), vec![vec![Value::Date(19940101)], vec![Value::Date(20000229)]]);
    assert!(load_csv_bytes(b"1999-02-29\n", &schema, &CsvOptions::default()).is_err());
}

#[test]
fn malformed_rows_name_their_line() {
    let schema =
        Schema::new(vec![ColumnDef::new("a", DataType::Int64), ColumnDef::new("b", DataType::Float64)]).unwrap();
    for (text, line) in [("1|2.0\n3\n", 2), ("1|2.0\n2|x\n", 2), ("1|2|3|4\n", 1), ("|1.0\n", 1)] {
        match load_csv_bytes(text.as_bytes(), &schema, &CsvOptions::default()) {
            Err(Error::Csv { line: l, .. }) => assert_eq!(l, line, "{text:?}"),
            other => panic!("{text:?}: {other:?}"),
        }
    }
}

fn lineitem_fbc() -> (tempfile::TempDir, std::path::PathBuf, usize) {
    let dir = tempfile::tempdir().unwrap();
    write_tables(&GenConfig::new(0.01, 3).unwrap(), dir.path(), Format::Fbc).unwrap();
    let path = dir.path().join("lineitem.fbc");
    let rows = read_fbc(&path, Some(&["l_orderkey".to_string()])).unwrap().row_count();
    (dir, path, rows)
}

#[test]
fn q6_reads_exactly_four_fixed_width_columns() {
    let (_dir, path, rows) = lineitem_fbc();
    let mut s = flarelite::Session::new();
    s.catalog_mut().register_fbc("lineitem", &path).unwrap();
    let df = queries::build(&mut s, "q6").unwrap();
    let before = s.catalog().stats();
    let t = s.execute(&df, &RunConfig::new(Backend::Native, 2)).unwrap();
    let io = s.catalog().stats().since(&before);
    assert_eq!(t.row_count(), 1);
    assert_eq!(io.columns_read, 4);
    // quantity, price, discount, shipdate: 8 bytes each, no validity bitmaps
    assert_eq!(io.payload_bytes, 4 * rows as u64 * 8);
}

#[test]
fn two_column_projection_reads_under_forty_percent() {
    let (_dir, path, _) = lineitem_fbc();
    let file = std::fs::metadata(&path).unwrap().len();
    let cols = ["l_quantity".to_string(), "l_discount".to_string()];
    let (t, io) = read_fbc_with_stats(&path, Some(&cols)).unwrap();
    assert_eq!(t.schema().len(), 2);
    let read = io.header_bytes + io.payload_bytes;
    assert!((read as f64) < 0.4 * file as f64, "{read} of {file}");
}

#[test]
fn registered_fbc_binds_lazily() {
    let (_dir, path, rows) = lineitem_fbc();
    let mut c = Catalog::new();
    c.register_fbc("lineitem", &path).unwrap();
    assert_eq!(c.stats().payload_bytes, 0);
    let t: ColumnTable = c.bind("lineitem", &["l_tax".to_string()]).unwrap();
    assert_eq!(t.row_count(), rows);
    assert_eq!(c.stats().payload_bytes, rows as u64 * 8);
}
