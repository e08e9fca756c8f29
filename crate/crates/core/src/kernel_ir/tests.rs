use super::*;
use crate::catalog::{Catalog, ColumnDef, DataType, Schema};
use crate::frontend::{parse_sql, NoUdfs};
use crate::optimizer::optimize;
use crate::storage::ColumnTable;
use crate::value::Value;

fn catalog() -> Catalog {
    let mut c = Catalog::new();
    let a = Schema::new(vec![
        ColumnDef::new("a_id", DataType::Int64),
        ColumnDef::new("a_x", DataType::Float64),
        ColumnDef::new("a_s", DataType::Text),
    ])
    .unwrap();
    let rows: Vec<Vec<Value>> = vec![
        vec![Value::Int64(1), Value::Float64(1.5), Value::text("x")],
        vec![Value::Int64(2), Value::Float64(2.5), Value::text("y")],
        vec![Value::Int64(2), Value::Float64(-1.0), Value::text("x")],
        vec![Value::Int64(3), Value::Float64(4.0), Value::text("z")],
    ];
    c.register_table("a", a.clone(), ColumnTable::from_rows(a, &rows).unwrap()).unwrap();
    let b = Schema::new(vec![ColumnDef::new("b_id", DataType::Int64), ColumnDef::new("b_v", DataType::Int64)]).unwrap();
    let rows: Vec<Vec<Value>> =
        [(1, 10), (2, 20), (2, 21), (5, 50)].iter().map(|&(k, v)| vec![Value::Int64(k), Value::Int64(v)]).collect();
    c.register_table("b", b.clone(), ColumnTable::from_rows(b, &rows).unwrap()).unwrap();
    for t in ["lineitem", "orders"] {
        let s = crate::tpch::schema::by_name(t).unwrap();
        c.register_table(t, s.clone(), ColumnTable::empty(s)).unwrap();
    }
    c
}

fn program(c: &Catalog, sql: &str) -> KernelProgram {
    compile_plan(&optimize(&parse_sql(sql, c, &NoUdfs).unwrap()).unwrap()).unwrap()
}

fn run(sql: &str) -> Vec<Vec<Value>> {
    let c = catalog();
    let p = program(&c, sql);
    ir_interpret(&p, &bind_inputs(&p, &c).unwrap()).unwrap().rows()
}

const Q6: &str = "select sum(l_extendedprice * l_discount) as revenue from lineitem \
    where l_shipdate >= date '1994-01-01' and l_shipdate < date '1995-01-01' \
    and l_discount between 0.05 and 0.07 and l_quantity < 24";

#[test]
fn q6_is_one_guarded_accumulation() {
    let p = program(&catalog(), Q6);
    assert_eq!(p.loops.len(), 1);
    assert!(p.buffers.is_empty());
    let l = &p.loops[0];
    assert_eq!(l.defs.len(), 4);
    let [Stmt::Let { op: Op::And(parts), .. }, Stmt::If { body, .. }] = &l.body[l.body.len() - 2..] else {
        panic!("{}", print_program(&p));
    };
    assert_eq!(parts.len(), 5);
    assert!(matches!(
        &body[..],
        [Stmt::Let { op: Op::Arith(crate::frontend::ArithOp::Mul, ..), .. }, Stmt::AggUpdate { .. }]
    ));
}

#[test]
fn join_is_build_then_probe() {
    let p = program(&catalog(), "select l_orderkey, o_orderdate from lineitem join orders on l_orderkey = o_orderkey");
    assert_eq!(p.loops.len(), 2);
    assert_eq!(p.buffers.len(), 1);
    assert!(!p.loops[0].is_parallel());
    assert!(p.loops[1].is_parallel());
    assert_eq!(p.loops[0].targets().hash_tables, vec![0]);
}

#[test]
fn interprets_join_kinds() {
    assert_eq!(run("select a_id, b_v from a join b on a_id = b_id order by a_id, b_v").len(), 5);
    let outer = run("select a_id, b_v from a left join b on a_id = b_id order by a_id, b_v");
    assert_eq!(outer.len(), 6);
    assert_eq!(outer[5], vec![Value::Int64(3), Value::Null]);
    let semi = run("select a_id from a left semi join b on a_id = b_id");
    assert_eq!(semi.len(), 3);
    let anti = run("select a_id from a left anti join b on a_id = b_id");
    assert_eq!(anti, vec![vec![Value::Int64(3)]]);
}

#[test]
fn grouped_and_empty_aggregates() {
    let g = run("select a_s, count(*) as n, sum(a_x) as s from a group by a_s");
    assert_eq!(
        g,
        vec![
            vec![Value::text("x"), Value::Int64(2), Value::Float64(0.5)],
            vec![Value::text("y"), Value::Int64(1), Value::Float64(2.5)],
            vec![Value::text("z"), Value::Int64(1), Value::Float64(4.0)],
        ]
    );
    assert_eq!(
        run("select sum(a_x) as s, count(*) as n from a where a_id > 9"),
        vec![vec![Value::Null, Value::Int64(0)]]
    );
    assert!(run("select a_s, count(*) as n from a where a_id > 9 group by a_s").is_empty());
}

#[test]
fn limit_zero_is_empty_with_schema() {
    let c = catalog();
    let p = program(&c, "select a_id, a_s from a limit 0");
    let t = ir_interpret(&p, &bind_inputs(&p, &c).unwrap()).unwrap();
    assert_eq!(t.row_count(), 0);
    assert_eq!(t.schema().len(), 2);
}

#[test]
fn integer_division_by_zero_is_null_and_overflow_errors() {
    assert_eq!(run("select a_id / (a_id - 1) as q from a where a_id < 3 order by q").len(), 3);
    let c = catalog();
    let p = program(&c, "select a_id * 9223372036854775807 as q from a");
    assert!(matches!(ir_interpret(&p, &bind_inputs(&p, &c).unwrap()), Err(crate::Error::Overflow)));
}

#[test]
fn cse_merges_repeated_subexpressions() {
    let c = catalog();
    let plan = optimize(&parse_sql("select a_x * 2 + a_x * 2 as y from a", &c, &NoUdfs).unwrap()).unwrap();
    let raw = compile_unoptimized(&plan).unwrap();
    let opt = compile_plan(&plan).unwrap();
    assert_eq!(raw.statements().len(), 4);
    assert_eq!(opt.statements().len(), 3);
}

#[test]
fn printing_is_stable() {
    let c = catalog();
    let a = print_program(&program(&c, Q6));
    assert_eq!(a, print_program(&program(&c, Q6)));
    assert!(a.contains("update acc 0: sum[0] <- v"), "{a}");
}
