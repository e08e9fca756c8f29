//! Building, explaining and compiling a query touches no table data.

use flarelite::tpch::gen::{register_dir, write_tables, Format, GenConfig};
use flarelite::tpch::queries::{self, SUITE};
use flarelite::tpch::schema::TABLES;
use flarelite::{Backend, RunConfig, Session};

#[test]
fn building_and_preparing_reads_nothing() {
    let dir = tempfile::tempdir().unwrap();
    write_tables(&GenConfig::new(0.002, 9).unwrap(), dir.path(), Format::Fbc).unwrap();
    let mut s = Session::new();
    for t in TABLES {
        s.catalog_mut().register_fbc(t, dir.path().join(format!("{t}.fbc"))).unwrap();
    }
    let before = s.catalog().stats();
    for q in SUITE {
        let df = queries::build(&mut s, q).unwrap();
        let _ = df.explain();
        let _ = df.explain_logical();
        s.prepare(&df).unwrap();
    }
    assert_eq!(s.catalog().stats(), before);

    let df = queries::build(&mut s, "q6").unwrap();
    s.execute(&df, &RunConfig::new(Backend::Interpreter, 1)).unwrap();
    let after = s.catalog().stats().since(&before);
    assert_eq!((after.binds, after.columns_read), (1, 4));
}

#[test]
fn clobbered_files_only_fail_at_execution() {
    let dir = tempfile::tempdir().unwrap();
    write_tables(&GenConfig::new(0.002, 9).unwrap(), dir.path(), Format::Fbc).unwrap();
    let mut s = Session::new();
    register_dir(s.catalog_mut(), dir.path()).unwrap();
    // schemas are known now; wipe the data underneath
    for t in TABLES {
        std::fs::write(dir.path().join(format!("{t}.fbc")), b"garbage").unwrap();
    }
    let df = queries::build(&mut s, "q3").unwrap();
    s.prepare(&df).unwrap();
    assert!(s.execute(&df, &RunConfig::new(Backend::Native, 1)).is_err());
}
