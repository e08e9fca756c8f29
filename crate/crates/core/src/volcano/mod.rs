//! Tuple-at-a-time pull interpreter over logical plans.
//!
//! Shares the catalog and type checker with the compiled path and nothing
//! else: expressions are evaluated by walking the tree for every row, joins
//! and aggregates use the standard library hash map.

use std::collections::HashMap;

use crate::catalog::{Catalog, DataType, Schema};
use crate::error::{Error, Result};
use crate::frontend::{AggExpr, AggFunc, ArithOp, BoolOp, CmpOp, Expr, JoinKind, Literal, LogicalPlan, NoUdfs};
use crate::storage::ColumnTable;
use crate::value::{cmp_rows, Value};

type Row = Vec<Value>;

/// Result of evaluating an expression: a value or a boolean.
#[derive(Clone, Debug, PartialEq)]
enum Datum {
    V(Value),
    B(bool),
}

/// Expression with columns resolved to row positions.
#[derive(Clone, Debug)]
enum Bound {
    Col(usize),
    Lit(Datum),
    Arith(ArithOp, Box<Bound>, Box<Bound>),
    Cmp(CmpOp, Box<Bound>, Box<Bound>),
    And(Vec<Bound>),
    Or(Vec<Bound>),
    Not(Box<Bound>),
    Between(Box<Bound>, Box<Bound>, Box<Bound>),
    StartsWith(Box<Bound>, Vec<u8>),
    /// The flag widens an integer branch to float.
    If(Box<Bound>, Box<Bound>, Box<Bound>, bool),
}

fn bind(e: &Expr, schema: &Schema) -> Result<Bound> {
    let b = |x: &Expr| bind(x, schema).map(Box::new);
    Ok(match e {
        Expr::Column(name) => Bound::Col(schema.resolve(name)?.0),
        Expr::Literal(l) => Bound::Lit(match l {
            Literal::Int64(x) => Datum::V(Value::Int64(*x)),
            Literal::Float64(x) => Datum::V(Value::Float64(*x)),
            Literal::Date(x) => Datum::V(Value::Date(*x)),
            Literal::Text(x) => Datum::V(Value::Text(x.clone())),
            Literal::Bool(x) => Datum::B(*x),
        }),
        Expr::Arith(op, l, r) => Bound::Arith(*op, b(l)?, b(r)?),
        Expr::Cmp(op, l, r) => Bound::Cmp(*op, b(l)?, b(r)?),
        Expr::Bool(BoolOp::And, args) => Bound::And(args.iter().map(|a| bind(a, schema)).collect::<Result<_>>()?),
        Expr::Bool(BoolOp::Or, args) => Bound::Or(args.iter().map(|a| bind(a, schema)).collect::<Result<_>>()?),
        Expr::Bool(BoolOp::Not, args) => Bound::Not(b(&args[0])?),
        Expr::Between(x, lo, hi) => Bound::Between(b(x)?, b(lo)?, b(hi)?),
        Expr::StartsWith(x, p) => Bound::StartsWith(b(x)?, p.clone()),
        Expr::If(c, x, y) => {
            let float = e.infer(schema, &NoUdfs)?.value() == Some(DataType::Float64);
            Bound::If(b(c)?, b(x)?, b(y)?, float)
        }
        Expr::Udf(name, _) => {
            return Err(Error::Unsupported(format!("UDF {name} must be inlined before interpretation")))
        }
    })
}

fn num(v: &Value) -> Option<f64> {
    match v {
        Value::Int64(x) => Some(*x as f64),
        Value::Float64(x) => Some(*x),
        _ => None,
    }
}

fn eval(e: &Bound, row: &Row) -> Result<Datum> {
    Ok(match e {
        Bound::Col(i) => Datum::V(row[*i].clone()),
        Bound::Lit(d) => d.clone(),
        Bound::Arith(op, l, r) => {
            let (a, b) = (value(eval(l, row)?), value(eval(r, row)?));
            Datum::V(match (&a, &b) {
                (Value::Null, _) | (_, Value::Null) => Value::Null,
                (Value::Int64(x), Value::Int64(y)) => {
                    let (x, y) = (*x, *y);
                    match op {
                        ArithOp::Add => Value::Int64(x.checked_add(y).ok_or(Error::Overflow)?),
                        ArithOp::Sub => Value::Int64(x.checked_sub(y).ok_or(Error::Overflow)?),
                        ArithOp::Mul => Value::Int64(x.checked_mul(y).ok_or(Error::Overflow)?),
                        ArithOp::Div => {
                            if y == 0 {
                                Value::Null
                            } else {
                                Value::Int64(x.checked_div(y).ok_or(Error::Overflow)?)
                            }
                        }
                    }
                }
                _ => {
                    let (x, y) = (num(&a).expect("numeric"), num(&b).expect("numeric"));
                    Value::Float64(match op {
                        ArithOp::Add => x + y,
                        ArithOp::Sub => x - y,
                        ArithOp::Mul => x * y,
                        ArithOp::Div => x / y,
                    })
                }
            })
        }
        Bound::Cmp(op, l, r) => Datum::B(compare(*op, &eval(l, row)?, &eval(r, row)?)),
        Bound::And(args) => {
            let mut all = true;
            for a in args {
                all &= truth(&eval(a, row)?);
            }
            Datum::B(all)
        }
        Bound::Or(args) => {
            let mut any = false;
            for a in args {
                any |= truth(&eval(a, row)?);
            }
            Datum::B(any)
        }
        Bound::Not(a) => Datum::B(!truth(&eval(a, row)?)),
        Bound::Between(x, lo, hi) => {
            let (x, lo, hi) = (eval(x, row)?, eval(lo, row)?, eval(hi, row)?);
            Datum::B(compare(CmpOp::GtEq, &x, &lo) & compare(CmpOp::LtEq, &x, &hi))
        }
        Bound::StartsWith(x, p) => Datum::B(matches!(eval(x, row)?, Datum::V(Value::Text(s)) if s.starts_with(p))),
        Bound::If(c, x, y, float) => {
            let (c, x, y) = (eval(c, row)?, eval(x, row)?, eval(y, row)?);
            let pick = if truth(&c) { x } else { y };
            match pick {
                Datum::V(Value::Int64(i)) if *float => Datum::V(Value::Float64(i as f64)),
                other => other,
            }
        }
    })
}

fn value(d: Datum) -> Value {
    match d {
        Datum::V(v) => v,
        Datum::B(_) => unreachable!("boolean where a value was expected"),
    }
}

fn truth(d: &Datum) -> bool {
    matches!(d, Datum::B(true))
}

fn compare(op: CmpOp, a: &Datum, b: &Datum) -> bool {
    let ord = match (a, b) {
        (Datum::B(x), Datum::B(y)) => x.cmp(y),
        (Datum::V(Value::Null), _) | (_, Datum::V(Value::Null)) => return false,
        (Datum::V(Value::Text(x)), Datum::V(Value::Text(y))) => x.cmp(y),
        (Datum::V(Value::Date(x)), Datum::V(Value::Date(y)))
        | (Datum::V(Value::Int64(x)), Datum::V(Value::Int64(y))) => x.cmp(y),
        (Datum::V(x), Datum::V(y)) => {
            let (x, y) = (num(x).expect("numeric"), num(y).expect("numeric"));
            return match op {
                CmpOp::Eq => x == y,
                CmpOp::NotEq => x != y,
                CmpOp::Lt => x < y,
                CmpOp::LtEq => x <= y,
                CmpOp::Gt => x > y,
                CmpOp::GtEq => x >= y,
            };
        }
        _ => unreachable!("comparison of {a:?} and {b:?}"),
    };
    op.holds(ord)
}

/// Hashable form of a value; floats compare by canonical bits.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
enum Key {
    Null,
    I(i64),
    F(u64),
    D(i64),
    T(Vec<u8>),
}

fn key(v: &Value) -> Key {
    match v {
        Value::Null => Key::Null,
        Value::Int64(x) => Key::I(*x),
        Value::Float64(x) if x.is_nan() => Key::F(u64::MAX),
        Value::Float64(x) if *x == 0.0 => Key::F(0),
        Value::Float64(x) => Key::F(x.to_bits()),
        Value::Date(x) => Key::D(*x),
        Value::Text(x) => Key::T(x.clone()),
    }
}

/// A pull-based operator.
pub trait Operator {
    fn next(&mut self) -> Result<Option<Row>>;
}

struct ScanOp {
    table: ColumnTable,
    pos: usize,
}

impl Operator for ScanOp {
    fn next(&mut self) -> Result<Option<Row>> {
        if self.pos >= self.table.row_count() {
            return Ok(None);
        }
        self.pos += 1;
        Ok(Some(self.table.row(self.pos - 1)))
    }
}

struct FilterOp {
    input: Box<dyn Operator>,
    pred: Bound,
}

impl Operator for FilterOp {
    fn next(&mut self) -> Result<Option<Row>> {
        while let Some(row) = self.input.next()? {
            if truth(&eval(&self.pred, &row)?) {
                return Ok(Some(row));
            }
        }
        Ok(None)
    }
}

struct ProjectOp {
    input: Box<dyn Operator>,
    exprs: Vec<Bound>,
}

impl Operator for ProjectOp {
    fn next(&mut self) -> Result<Option<Row>> {
        let Some(row) = self.input.next()? else {
            return Ok(None);
        };
        self.exprs.iter().map(|e| eval(e, &row).map(value)).collect::<Result<_>>().map(Some)
    }
}

struct JoinOp {
    kind: JoinKind,
    left: Box<dyn Operator>,
    right: Option<Box<dyn Operator>>,
    left_keys: Vec<Bound>,
    right_keys: Vec<Bound>,
    right_width: usize,
    table: HashMap<Vec<Key>, Vec<Row>>,
    pending: std::collections::VecDeque<Row>,
}

impl JoinOp {
    fn keys(exprs: &[Bound], row: &Row) -> Result<Option<Vec<Key>>> {
        let mut out = Vec::with_capacity(exprs.len());
        for e in exprs {
            let v = value(eval(e, row)?);
            if v.is_null() {
                return Ok(None);
            }
            out.push(key(&v));
        }
        Ok(Some(out))
    }
}

impl Operator for JoinOp {
    fn next(&mut self) -> Result<Option<Row>> {
        if let Some(mut right) = self.right.take() {
            while let Some(row) = right.next()? {
                if let Some(k) = Self::keys(&self.right_keys, &row)? {
                    self.table.entry(k).or_default().push(row);
                }
            }
        }
        loop {
            if let Some(r) = self.pending.pop_front() {
                return Ok(Some(r));
            }
            let Some(row) = self.left.next()? else {
                return Ok(None);
            };
            let matches = Self::keys(&self.left_keys, &row)?.and_then(|k| self.table.get(&k));
            match (self.kind, matches) {
                (JoinKind::Inner | JoinKind::LeftOuter, Some(ms)) => {
                    for m in ms {
                        let mut out = row.clone();
                        out.extend(m.iter().cloned());
                        self.pending.push_back(out);
                    }
                }
                (JoinKind::LeftOuter, None) => {
                    let mut out = row;
                    out.extend(std::iter::repeat_n(Value::Null, self.right_width));
                    return Ok(Some(out));
                }
                (JoinKind::LeftSemi, Some(_)) | (JoinKind::LeftAnti, None) => return Ok(Some(row)),
                _ => {}
            }
        }
    }
}

#[derive(Clone, Debug)]
struct Acc {
    func: AggFunc,
    sum: Value,
    count: i64,
}

impl Acc {
    fn new(func: AggFunc) -> Self {
        Acc { func, sum: Value::Null, count: 0 }
    }

    fn add(&mut self, v: Option<Value>) -> Result<()> {
        let Some(v) = v else {
            self.count += 1;
            return Ok(());
        };
        if v.is_null() {
            return Ok(());
        }
        self.count += 1;
        self.sum = match (self.func, &self.sum, v) {
            (_, Value::Null, v) => v,
            (AggFunc::Count, s, _) => s.clone(),
            (AggFunc::Sum | AggFunc::Avg, Value::Int64(a), Value::Int64(b)) => {
                Value::Int64(a.checked_add(b).ok_or(Error::Overflow)?)
            }
            (AggFunc::Sum | AggFunc::Avg, Value::Float64(a), Value::Float64(b)) => Value::Float64(a + b),
            (AggFunc::Min, a, b) => {
                if b.total_cmp(a).is_lt() {
                    b
                } else {
                    a.clone()
                }
            }
            (AggFunc::Max, a, b) => {
                if b.total_cmp(a).is_gt() {
                    b
                } else {
                    a.clone()
                }
            }
            (f, a, b) => unreachable!("{f:?} over {a:?} and {b:?}"),
        };
        Ok(())
    }

    fn result(&self) -> Value {
        match self.func {
            AggFunc::Count => Value::Int64(self.count),
            _ if self.count == 0 => Value::Null,
            AggFunc::Avg => Value::Float64(num(&self.sum).expect("numeric") / self.count as f64),
            _ => self.sum.clone(),
        }
    }
}

struct AggregateOp {
    input: Option<Box<dyn Operator>>,
    group_by: Vec<Bound>,
    aggs: Vec<(AggFunc, Option<Bound>)>,
    out: std::vec::IntoIter<Row>,
}

impl AggregateOp {
    fn consume(&mut self, mut input: Box<dyn Operator>) -> Result<Vec<Row>> {
        let mut index: HashMap<Vec<Key>, usize> = HashMap::new();
        let mut groups: Vec<(Row, Vec<Acc>)> = Vec::new();
        let fresh = || self.aggs.iter().map(|(f, _)| Acc::new(*f)).collect::<Vec<_>>();
        if self.group_by.is_empty() {
            groups.push((Vec::new(), fresh()));
        }
        while let Some(row) = input.next()? {
            let gv: Row = self.group_by.iter().map(|g| eval(g, &row).map(value)).collect::<Result<_>>()?;
            let slot = if self.group_by.is_empty() {
                0
            } else {
                let k: Vec<Key> = gv.iter().map(key).collect();
                *index.entry(k).or_insert_with(|| {
                    groups.push((gv.clone(), fresh()));
                    groups.len() - 1
                })
            };
            for ((_, arg), acc) in self.aggs.iter().zip(groups[slot].1.iter_mut()) {
                let v = match arg {
                    Some(a) => Some(value(eval(a, &row)?)),
                    None => None,
                };
                acc.add(v)?;
            }
        }
        Ok(groups
            .into_iter()
            .map(|(mut k, accs)| {
                k.extend(accs.iter().map(Acc::result));
                k
            })
            .collect())
    }
}

impl Operator for AggregateOp {
    fn next(&mut self) -> Result<Option<Row>> {
        if let Some(input) = self.input.take() {
            self.out = self.consume(input)?.into_iter();
        }
        Ok(self.out.next())
    }
}

struct SortOp {
    input: Option<Box<dyn Operator>>,
    keys: Vec<(usize, bool)>,
    out: std::vec::IntoIter<Row>,
}

impl Operator for SortOp {
    fn next(&mut self) -> Result<Option<Row>> {
        if let Some(mut input) = self.input.take() {
            let mut rows = Vec::new();
            while let Some(r) = input.next()? {
                rows.push(r);
            }
            let keys = &self.keys;
            rows.sort_by(|a, b| {
                for &(i, desc) in keys {
                    let o = a[i].total_cmp(&b[i]);
                    if o.is_ne() {
                        return if desc { o.reverse() } else { o };
                    }
                }
                cmp_rows(a, b)
            });
            self.out = rows.into_iter();
        }
        Ok(self.out.next())
    }
}

struct LimitOp {
    input: Box<dyn Operator>,
    left: u64,
}

impl Operator for LimitOp {
    fn next(&mut self) -> Result<Option<Row>> {
        if self.left == 0 {
            return Ok(None);
        }
        self.left -= 1;
        self.input.next()
    }
}

fn agg_parts(aggs: &[AggExpr], schema: &Schema) -> Result<Vec<(AggFunc, Option<Bound>)>> {
    aggs.iter().map(|a| Ok((a.func, a.arg.as_ref().map(|e| bind(e, schema)).transpose()?))).collect()
}

/// Builds the operator tree for a plan.
pub fn build(plan: &LogicalPlan, catalog: &Catalog) -> Result<Box<dyn Operator>> {
    Ok(match plan {
        LogicalPlan::Scan { table, schema } => {
            // a pruned scan names a subset of the table's columns
            let names: Vec<String> = schema.names().map(str::to_string).collect();
            Box::new(ScanOp { table: catalog.bind(table, &names)?, pos: 0 })
        }
        LogicalPlan::Filter { predicate, input } => {
            let schema = input.schema(&NoUdfs)?;
            Box::new(FilterOp { input: build(input, catalog)?, pred: bind(predicate, &schema)? })
        }
        LogicalPlan::Project { exprs, input } => {
            let schema = input.schema(&NoUdfs)?;
            let exprs = exprs.iter().map(|(e, _)| bind(e, &schema)).collect::<Result<_>>()?;
            Box::new(ProjectOp { input: build(input, catalog)?, exprs })
        }
        LogicalPlan::Join { kind, on, left, right } => {
            let (ls, rs) = (left.schema(&NoUdfs)?, right.schema(&NoUdfs)?);
            Box::new(JoinOp {
                kind: *kind,
                left_keys: on.iter().map(|(l, _)| bind(l, &ls)).collect::<Result<_>>()?,
                right_keys: on.iter().map(|(_, r)| bind(r, &rs)).collect::<Result<_>>()?,
                right_width: rs.len(),
                left: build(left, catalog)?,
                right: Some(build(right, catalog)?),
                table: HashMap::new(),
                pending: Default::default(),
            })
        }
        LogicalPlan::Aggregate { group_by, aggs, input } => {
            let schema = input.schema(&NoUdfs)?;
            Box::new(AggregateOp {
                group_by: group_by.iter().map(|(e, _)| bind(e, &schema)).collect::<Result<_>>()?,
                aggs: agg_parts(aggs, &schema)?,
                input: Some(build(input, catalog)?),
                out: Vec::new().into_iter(),
            })
        }
        LogicalPlan::Sort { keys, input } => {
            let schema = input.schema(&NoUdfs)?;
            let keys = keys.iter().map(|k| Ok((schema.resolve(&k.column)?.0, k.desc))).collect::<Result<_>>()?;
            Box::new(SortOp { input: Some(build(input, catalog)?), keys, out: Vec::new().into_iter() })
        }
        LogicalPlan::Limit { n, input } => Box::new(LimitOp { input: build(input, catalog)?, left: *n }),
    })
}

/// Evaluates a plan one tuple at a time.
pub fn volcano_interpret(plan: &LogicalPlan, catalog: &Catalog) -> Result<ColumnTable> {
    let schema = plan.schema(&NoUdfs)?;
    let mut root = build(plan, catalog)?;
    let mut rows = Vec::new();
    while let Some(r) = root.next()? {
        rows.push(r);
    }
    ColumnTable::from_rows(schema, &rows)
}
