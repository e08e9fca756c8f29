//! Random tables and random well-typed plans for differential tests.
//!
//! Values are kept small and floats are quarter multiples so sums are exact
//! in any order and no integer arithmetic can overflow. Sort and Limit only
//! appear at the root.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use flarelite::catalog::{Catalog, ColumnDef, DataType, Schema};
use flarelite::frontend::{
    col, lit_date, lit_f64, lit_i64, lit_text, AggExpr, AggFunc, Expr, JoinKind, LogicalPlan, NoUdfs, SortKey,
};
use flarelite::storage::ColumnTable;
use flarelite::value::Value;

pub const TABLES: [(&str, &str); 3] = [("t0", "a"), ("t1", "b"), ("t2", "c")];
const WORDS: [&str; 6] = ["", "ab", "abc", "b", "ba", "zz"];

pub fn table_schema(p: &str) -> Schema {
    Schema::new(vec![
        ColumnDef::nullable(format!("{p}_k"), DataType::Int64),
        ColumnDef::nullable(format!("{p}_i"), DataType::Int64),
        ColumnDef::nullable(format!("{p}_f"), DataType::Float64),
        ColumnDef::new(format!("{p}_d"), DataType::Date),
        ColumnDef::nullable(format!("{p}_s"), DataType::Text),
    ])
    .unwrap()
}

pub fn random_rows(rng: &mut ChaCha8Rng, n: usize) -> Vec<Vec<Value>> {
    let keys = rng.gen_range(5..200);
    (0..n)
        .map(|_| {
            let null = |rng: &mut ChaCha8Rng| rng.gen_bool(0.08);
            vec![
                if null(rng) { Value::Null } else { Value::Int64(rng.gen_range(0..keys)) },
                if null(rng) { Value::Null } else { Value::Int64(rng.gen_range(-50..=50)) },
                if null(rng) { Value::Null } else { Value::Float64(rng.gen_range(-80..=80) as f64 * 0.25) },
                Value::Date(flarelite::catalog::date::add_days(19930101, rng.gen_range(0..1200))),
                if null(rng) { Value::Null } else { Value::text(WORDS.choose(rng).unwrap()) },
            ]
        })
        .collect()
}

pub fn random_catalog(rng: &mut ChaCha8Rng, max_rows: usize) -> Catalog {
    let mut c = Catalog::new();
    for (name, p) in TABLES {
        let n = if rng.gen_bool(0.08) { 0 } else { (rng.gen::<f64>().powi(2) * max_rows as f64) as usize };
        let s = table_schema(p);
        let t = ColumnTable::from_rows(s.clone(), &random_rows(rng, n)).unwrap();
        c.register_table(name, s, t).unwrap();
    }
    c
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Ty {
    Int,
    Float,
    Date,
    Text,
}

fn ty_of(d: DataType) -> Ty {
    match d {
        DataType::Int64 => Ty::Int,
        DataType::Float64 => Ty::Float,
        DataType::Date => Ty::Date,
        DataType::Text => Ty::Text,
    }
}

pub struct PlanGen<'r> {
    rng: &'r mut ChaCha8Rng,
    fresh: usize,
}

impl<'r> PlanGen<'r> {
    pub fn new(rng: &'r mut ChaCha8Rng) -> Self {
        PlanGen { rng, fresh: 0 }
    }

    fn name(&mut self, p: &str) -> String {
        self.fresh += 1;
        format!("{p}{}", self.fresh)
    }

    fn cols(schema: &Schema, t: Ty) -> Vec<String> {
        schema.columns().iter().filter(|c| ty_of(c.dtype) == t).map(|c| c.name.clone()).collect()
    }

    fn pick(&mut self, v: &[String]) -> Option<String> {
        v.choose(self.rng).cloned()
    }

    /// Numeric expression of roughly type `t`; division only when `div`.
    fn num(&mut self, s: &Schema, t: Ty, depth: usize, div: bool) -> Expr {
        let leaf = depth == 0 || self.rng.gen_bool(0.45);
        if leaf {
            let cs = Self::cols(s, t);
            if !cs.is_empty() && self.rng.gen_bool(0.75) {
                return col(&self.pick(&cs).unwrap());
            }
            return match t {
                Ty::Float => lit_f64(self.rng.gen_range(-16..=16) as f64 * 0.25),
                _ => lit_i64(self.rng.gen_range(-10..=10)),
            };
        }
        let a = self.num(s, t, depth - 1, div);
        match self.rng.gen_range(0..4) {
            0 => a + self.num(s, t, depth - 1, div),
            1 => a - self.num(s, t, depth - 1, div),
            2 => {
                if t == Ty::Float {
                    a * lit_f64([0.5, 2.0, -1.0, 0.25][self.rng.gen_range(0..4)])
                } else {
                    a * lit_i64(self.rng.gen_range(-3..=3))
                }
            }
            _ if div => a / self.num(s, t, depth - 1, div),
            _ => a + lit_i64(1),
        }
    }

    fn pred(&mut self, s: &Schema, depth: usize) -> Expr {
        if depth > 0 && self.rng.gen_bool(0.35) {
            let a = self.pred(s, depth - 1);
            return match self.rng.gen_range(0..3) {
                0 => a.and(self.pred(s, depth - 1)),
                1 => a.or(self.pred(s, depth - 1)),
                _ => a.not(),
            };
        }
        let mut choices = vec![Ty::Int, Ty::Float];
        for t in [Ty::Date, Ty::Text] {
            if !Self::cols(s, t).is_empty() {
                choices.push(t);
            }
        }
        match *choices.choose(self.rng).unwrap() {
            t @ (Ty::Int | Ty::Float) => {
                let a = self.num(s, t, 2, true);
                let b = self.num(s, t, 1, false);
                match self.rng.gen_range(0..7) {
                    0 => a.eq(b),
                    1 => a.not_eq(b),
                    2 => a.lt(b),
                    3 => a.lt_eq(b),
                    4 => a.gt(b),
                    5 => a.gt_eq(b),
                    _ => {
                        let lo = self.rng.gen_range(-30..10);
                        let hi = lo + self.rng.gen_range(0..40);
                        a.between(lit_i64(lo), lit_i64(hi))
                    }
                }
            }
            Ty::Date => {
                let c = col(&self.pick(&Self::cols(s, Ty::Date)).unwrap());
                let d = |r: &mut ChaCha8Rng| {
                    let v = flarelite::catalog::date::add_days(19930101, r.gen_range(0..1200));
                    lit_date(&flarelite::catalog::date::format(v))
                };
                match self.rng.gen_range(0..3) {
                    0 => c.lt(d(self.rng)),
                    1 => c.gt_eq(d(self.rng)),
                    _ => {
                        let (x, y) = (d(self.rng), d(self.rng));
                        c.between(x, y)
                    }
                }
            }
            Ty::Text => {
                let c = col(&self.pick(&Self::cols(s, Ty::Text)).unwrap());
                let w = *WORDS.choose(self.rng).unwrap();
                match self.rng.gen_range(0..4) {
                    0 => c.eq(lit_text(w)),
                    1 => c.not_eq(lit_text(w)),
                    2 => c.lt(lit_text(w)),
                    _ => c.starts_with(w),
                }
            }
        }
    }

    fn scan(&mut self, tables: &mut Vec<(&'static str, &'static str)>) -> LogicalPlan {
        let i = self.rng.gen_range(0..tables.len());
        let (name, p) = tables.remove(i);
        LogicalPlan::Scan { table: name.to_string(), schema: table_schema(p) }
    }

    /// A plan of depth at most `depth` over tables taken from `tables`.
    fn node(&mut self, depth: usize, tables: &mut Vec<(&'static str, &'static str)>) -> LogicalPlan {
        if depth <= 1 || self.rng.gen_bool(0.15) {
            return self.scan(tables);
        }
        let op = self.rng.gen_range(0..10);
        if op < 3 && !tables.is_empty() {
            let left = self.node(depth - 1, tables);
            if tables.is_empty() {
                return left;
            }
            let right = self.node(depth - 1, tables);
            return self.join(left, right).unwrap_or_else(|l| l);
        }
        let input = self.node(depth - 1, tables);
        let s = input.schema(&NoUdfs).unwrap();
        match op {
            0..=4 => LogicalPlan::Filter { predicate: self.pred(&s, 2), input: Box::new(input) },
            5 | 6 => self.project(input, &s),
            _ => self.aggregate(input, &s),
        }
    }

    fn join(&mut self, left: LogicalPlan, right: LogicalPlan) -> Result<LogicalPlan, LogicalPlan> {
        let (ls, rs) = (left.schema(&NoUdfs).unwrap(), right.schema(&NoUdfs).unwrap());
        let mut on = Vec::new();
        for t in [Ty::Int, Ty::Text, Ty::Date] {
            let (lc, rc) = (Self::cols(&ls, t), Self::cols(&rs, t));
            if !lc.is_empty() && !rc.is_empty() && (on.is_empty() || self.rng.gen_bool(0.2)) {
                on.push((col(&self.pick(&lc).unwrap()), col(&self.pick(&rc).unwrap())));
            }
        }
        if on.is_empty() {
            return Err(left);
        }
        let kind = [JoinKind::Inner, JoinKind::Inner, JoinKind::LeftOuter, JoinKind::LeftSemi, JoinKind::LeftAnti]
            [self.rng.gen_range(0..5)];
        Ok(LogicalPlan::Join { kind, on, left: Box::new(left), right: Box::new(right) })
    }

    fn project(&mut self, input: LogicalPlan, s: &Schema) -> LogicalPlan {
        let mut exprs = Vec::new();
        for c in s.columns() {
            if self.rng.gen_bool(0.6) {
                exprs.push((col(&c.name), c.name.clone()));
            }
        }
        for _ in 0..self.rng.gen_range(0..3) {
            let t = if self.rng.gen_bool(0.5) { Ty::Int } else { Ty::Float };
            let e = self.num(s, t, 2, false);
            exprs.push((e, self.name("p")));
        }
        if exprs.is_empty() {
            let c = &s.columns()[0];
            exprs.push((col(&c.name), c.name.clone()));
        }
        LogicalPlan::Project { exprs, input: Box::new(input) }
    }

    fn aggregate(&mut self, input: LogicalPlan, s: &Schema) -> LogicalPlan {
        let mut group_by = Vec::new();
        let keyable: Vec<String> =
            s.columns().iter().filter(|c| c.dtype != DataType::Float64).map(|c| c.name.clone()).collect();
        for _ in 0..self.rng.gen_range(0..3) {
            if let Some(k) = self.pick(&keyable) {
                if !group_by.iter().any(|(_, n): &(Expr, String)| *n == k) {
                    group_by.push((col(&k), k));
                }
            }
        }
        let mut aggs = Vec::new();
        for _ in 0..self.rng.gen_range(1..4) {
            let name = self.name("g");
            let f = [AggFunc::Sum, AggFunc::Count, AggFunc::Avg, AggFunc::Min, AggFunc::Max][self.rng.gen_range(0..5)];
            if f == AggFunc::Count && self.rng.gen_bool(0.4) {
                aggs.push(AggExpr::count_star(&name));
                continue;
            }
            let t = if self.rng.gen_bool(0.5) { Ty::Int } else { Ty::Float };
            let arg = match f {
                AggFunc::Min | AggFunc::Max if self.rng.gen_bool(0.2) && !Self::cols(s, Ty::Date).is_empty() => {
                    col(&self.pick(&Self::cols(s, Ty::Date)).unwrap())
                }
                _ => self.num(s, t, 1, false),
            };
            aggs.push(AggExpr::new(f, arg, &name));
        }
        LogicalPlan::Aggregate { group_by, aggs, input: Box::new(input) }
    }

    /// A random plan of depth at most `depth` (scan = 1).
    pub fn plan(&mut self, depth: usize) -> LogicalPlan {
        let mut tables = TABLES.to_vec();
        // 0: bare, 1: sorted, 2: sorted and limited
        let wrap = self.rng.gen_range(0..4).min(2).min(depth - 1);
        let wrap = if self.rng.gen_bool(0.4) { wrap } else { 0 };
        let p = self.node(depth - wrap, &mut tables);
        if wrap == 0 {
            return p;
        }
        let s = p.schema(&NoUdfs).unwrap();
        let mut keys: Vec<SortKey> = Vec::new();
        for c in s.columns() {
            if self.rng.gen_bool(0.4) {
                keys.push(if self.rng.gen_bool(0.5) { SortKey::desc(&c.name) } else { SortKey::asc(&c.name) });
            }
        }
        keys.shuffle(self.rng);
        let sorted = LogicalPlan::Sort { keys, input: Box::new(p) };
        if wrap == 2 {
            return LogicalPlan::Limit { n: self.rng.gen_range(0..20), input: Box::new(sorted) };
        }
        sorted
    }
}

pub fn depth(p: &LogicalPlan) -> usize {
    1 + children(p).iter().map(|c| depth(c)).max().unwrap_or(0)
}

pub fn children(p: &LogicalPlan) -> Vec<&LogicalPlan> {
    match p {
        LogicalPlan::Scan { .. } => vec![],
        LogicalPlan::Filter { input, .. }
        | LogicalPlan::Project { input, .. }
        | LogicalPlan::Aggregate { input, .. }
        | LogicalPlan::Sort { input, .. }
        | LogicalPlan::Limit { input, .. } => vec![input],
        LogicalPlan::Join { left, right, .. } => vec![left, right],
    }
}

/// Every plan obtained by replacing one node with one of its inputs.
pub fn one_step_smaller(p: &LogicalPlan) -> Vec<LogicalPlan> {
    let mut out: Vec<LogicalPlan> = children(p).into_iter().cloned().collect();
    let rebuild = |p: &LogicalPlan, i: usize, c: LogicalPlan| -> LogicalPlan {
        let mut q = p.clone();
        match &mut q {
            LogicalPlan::Scan { .. } => {}
            LogicalPlan::Filter { input, .. }
            | LogicalPlan::Project { input, .. }
            | LogicalPlan::Aggregate { input, .. }
            | LogicalPlan::Sort { input, .. }
            | LogicalPlan::Limit { input, .. } => **input = c,
            LogicalPlan::Join { left, right, .. } => {
                if i == 0 {
                    **left = c
                } else {
                    **right = c
                }
            }
        }
        q
    };
    for (i, c) in children(p).into_iter().enumerate() {
        for smaller in one_step_smaller(c) {
            out.push(rebuild(p, i, smaller));
        }
    }
    out.retain(|q| q.schema(&NoUdfs).is_ok());
    out
}
