//! Engine results against oracles that share no code with the engine.

mod common;

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::plans::{random_rows, table_schema};
use common::{ir, run_native, tpch_session, volcano, Rows, Triple, TOL};
use flarelite::catalog::Catalog;
use flarelite::frontend::{col, JoinKind, LogicalPlan, NoUdfs};
use flarelite::storage::ColumnTable;
use flarelite::tpch::gen::{write_tables, Format, GenConfig};
use flarelite::tpch::queries::{self, SUITE};
use flarelite::value::{rows_match, Value};
use flarelite::{Backend, RunConfig};

#[test]
fn suite_triple_agreement_at_sf_001() {
    let mut s = tpch_session(0.01, 42);
    for q in SUITE {
        let plan = queries::build(&mut s, q).unwrap().inlined().unwrap();
        let t = Triple::run(&plan, s.catalog(), 1);
        t.check(&plan).unwrap_or_else(|e| panic!("{q}: {e}"));
        assert!(!t.volcano.unwrap().is_empty(), "{q}");
    }
}

#[test]
fn suite_is_thread_count_invariant() {
    let mut s = tpch_session(0.01, 5);
    for q in SUITE {
        let df = queries::build(&mut s, q).unwrap();
        let plan = df.inlined().unwrap();
        let one = s.execute(&df, &RunConfig::new(Backend::Native, 1)).unwrap().rows();
        for threads in [2, 3, 4, 7, 8] {
            for backend in [Backend::Native, Backend::Interpreter] {
                let got = s.execute(&df, &RunConfig::new(backend, threads)).unwrap().rows();
                common::compare(&plan, &one, &got).unwrap_or_else(|e| panic!("{q} {backend:?} x{threads}: {e}"));
            }
        }
    }
}

/// Parses generated lineitem text with nothing but `str::split`.
fn lineitem_fields(dir: &std::path::Path) -> Vec<Vec<String>> {
    let text = std::fs::read_to_string(dir.join("lineitem.tbl")).unwrap();
    text.lines().filter(|l| !l.is_empty()).map(|l| l.split('|').map(str::to_string).collect()).collect()
}

fn idx(name: &str) -> usize {
    flarelite::tpch::schema::lineitem().index_of(name).unwrap()
}

#[test]
fn q6_matches_brute_force_scan_of_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = GenConfig::new(0.01, 42).unwrap();
    write_tables(&cfg, dir.path(), Format::Csv).unwrap();
    let (ship, disc, qty, price) = (idx("l_shipdate"), idx("l_discount"), idx("l_quantity"), idx("l_extendedprice"));
    let mut revenue = 0.0;
    for f in lineitem_fields(dir.path()) {
        let d: f64 = f[disc].parse().unwrap();
        let q: f64 = f[qty].parse().unwrap();
        if f[ship].as_str() >= "1994-01-01" && f[ship].as_str() < "1995-01-01" && (0.05..=0.07).contains(&d) && q < 24.0
        {
            revenue += f[price].parse::<f64>().unwrap() * d;
        }
    }
    let mut s = flarelite::Session::new();
    flarelite::tpch::gen::register_dir(s.catalog_mut(), dir.path()).unwrap();
    let df = queries::build(&mut s, "q6").unwrap();
    for (backend, threads) in [
        (Backend::Interpreter, 1),
        (Backend::Native, 1),
        (Backend::Native, 2),
        (Backend::Native, 4),
        (Backend::Native, 8),
    ] {
        let got = s.execute(&df, &RunConfig::new(backend, threads)).unwrap().rows();
        let Value::Float64(r) = got[0][0] else { panic!("{got:?}") };
        assert!((r - revenue).abs() <= TOL * revenue.abs(), "{backend:?} x{threads}: {r} vs {revenue}");
    }
}

#[test]
fn q1_group_counts_match_brute_force() {
    let dir = tempfile::tempdir().unwrap();
    write_tables(&GenConfig::new(0.01, 8).unwrap(), dir.path(), Format::Csv).unwrap();
    let (flag, status, ship) = (idx("l_returnflag"), idx("l_linestatus"), idx("l_shipdate"));
    let mut want: BTreeMap<(String, String), i64> = BTreeMap::new();
    for f in lineitem_fields(dir.path()) {
        if f[ship].as_str() <= "1998-09-02" {
            *want.entry((f[flag].clone(), f[status].clone())).or_default() += 1;
        }
    }
    let mut s = flarelite::Session::new();
    flarelite::tpch::gen::register_dir(s.catalog_mut(), dir.path()).unwrap();
    let df = queries::build(&mut s, "q1").unwrap();
    for threads in [1, 2, 3, 8] {
        let t = s.execute(&df, &RunConfig::new(Backend::Native, threads)).unwrap();
        let n = t.schema().index_of("count_order").unwrap();
        let got: BTreeMap<(String, String), i64> = t
            .rows()
            .into_iter()
            .map(|r| {
                let Value::Int64(c) = r[n] else { panic!() };
                ((r[0].to_string(), r[1].to_string()), c)
            })
            .collect();
        assert_eq!(got, want, "threads {threads}");
    }
}

fn key_of(row: &[Value], i: usize) -> Option<i64> {
    match row[i] {
        Value::Int64(k) => Some(k),
        _ => None,
    }
}

/// Nested-loop join with the engine's null rules: a null key never matches.
fn nested_loop(kind: JoinKind, left: &Rows, right: &Rows, lk: usize, rk: usize, right_width: usize) -> Rows {
    let mut out = Vec::new();
    for l in left {
        let matches: Vec<&Vec<Value>> =
            right.iter().filter(|r| matches!((key_of(l, lk), key_of(r, rk)), (Some(a), Some(b)) if a == b)).collect();
        match kind {
            JoinKind::Inner => out.extend(matches.iter().map(|r| [l.clone(), (*r).clone()].concat())),
            JoinKind::LeftOuter if matches.is_empty() => out.push([l.clone(), vec![Value::Null; right_width]].concat()),
            JoinKind::LeftOuter => out.extend(matches.iter().map(|r| [l.clone(), (*r).clone()].concat())),
            JoinKind::LeftSemi if !matches.is_empty() => out.push(l.clone()),
            JoinKind::LeftAnti if matches.is_empty() => out.push(l.clone()),
            _ => {}
        }
    }
    out
}

#[test]
fn hash_join_equals_nested_loop_join() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for round in 0..8 {
        let (nl, nr) = if round == 0 { (1000, 1000) } else { (rng.gen_range(0..1000), rng.gen_range(0..1000)) };
        let (ls, rs) = (table_schema("a"), table_schema("b"));
        let (lrows, rrows) = (random_rows(&mut rng, nl), random_rows(&mut rng, nr));
        let mut c = Catalog::new();
        c.register_table("t0", ls.clone(), ColumnTable::from_rows(ls.clone(), &lrows).unwrap()).unwrap();
        c.register_table("t1", rs.clone(), ColumnTable::from_rows(rs.clone(), &rrows).unwrap()).unwrap();
        for kind in [JoinKind::Inner, JoinKind::LeftOuter, JoinKind::LeftSemi, JoinKind::LeftAnti] {
            let plan = LogicalPlan::Join {
                kind,
                on: vec![(col("a_k"), col("b_k"))],
                left: Box::new(LogicalPlan::Scan { table: "t0".into(), schema: ls.clone() }),
                right: Box::new(LogicalPlan::Scan { table: "t1".into(), schema: rs.clone() }),
            };
            plan.schema(&NoUdfs).unwrap();
            let want = nested_loop(kind, &lrows, &rrows, 0, 0, rs.len());
            for (name, got) in
                [("volcano", volcano(&plan, &c)), ("ir", ir(&plan, &c)), ("native", run_native(&plan, &c, 3))]
            {
                rows_match(&want, &got.unwrap(), 0.0).unwrap_or_else(|e| panic!("{kind:?} {nl}x{nr} {name}: {e}"));
            }
        }
    }
}

#[test]
fn every_row_is_processed_exactly_once() {
    let mut s = tpch_session(0.002, 1);
    let rows = s.catalog().bind_all("lineitem").unwrap().row_count();
    let df = queries::build(&mut s, "q1").unwrap();
    for threads in [1, 3, 7] {
        for backend in [Backend::Native, Backend::Interpreter] {
            let (_, stats) = s.execute_with_stats(&df, &RunConfig::new(backend, threads)).unwrap();
            let scan = &stats.run.loops[0];
            assert_eq!(scan.source_len, rows);
            assert_eq!(scan.rows_per_thread.len(), threads);
            assert_eq!(scan.rows_per_thread.iter().sum::<usize>(), rows, "{backend:?} x{threads}");
        }
    }
}

#[test]
fn empty_inputs_follow_sql_rules() {
    let mut s = flarelite::Session::new();
    s.register_table("t0", ColumnTable::empty(table_schema("a"))).unwrap();
    let rows = random_rows(&mut ChaCha8Rng::seed_from_u64(1), 50);
    s.register_table("t1", ColumnTable::from_rows(table_schema("b"), &rows).unwrap()).unwrap();
    for backend in [Backend::Interpreter, Backend::Native] {
        let cfg = RunConfig::new(backend, 2);
        let run = |q: &str| s.execute(&s.sql(q).unwrap(), &cfg).unwrap().rows();
        assert_eq!(
            run("select sum(a_i) as s, count(*) as n, avg(a_f) as m from t0"),
            vec![vec![Value::Null, Value::Int64(0), Value::Null]]
        );
        assert!(run("select a_s, count(*) as n from t0 group by a_s").is_empty());
        assert!(run("select a_k, b_i from t0 join t1 on a_k = b_k").is_empty());
        assert!(run("select a_k from t0 order by a_k").is_empty());
        assert_eq!(run("select b_k from t1 left anti join t0 on b_k = a_k").len(), 50);
    }
}
