use std::fmt;

use crate::catalog::{ColumnDef, DataType, Schema};
use crate::error::{Error, Result};

use super::expr::{Expr, ExprType, UdfSignatures};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum JoinKind {
    Inner,
    LeftOuter,
    LeftSemi,
    LeftAnti,
}

impl JoinKind {
    pub fn name(self) -> &'static str {
        match self {
            JoinKind::Inner => "inner",
            JoinKind::LeftOuter => "left_outer",
            JoinKind::LeftSemi => "left_semi",
            JoinKind::LeftAnti => "left_anti",
        }
    }

    /// Whether right-side columns appear in the output.
    pub fn emits_right(self) -> bool {
        matches!(self, JoinKind::Inner | JoinKind::LeftOuter)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum AggFunc {
    Sum,
    Count,
    Avg,
    Min,
    Max,
}

impl AggFunc {
    pub fn name(self) -> &'static str {
        match self {
            AggFunc::Sum => "sum",
            AggFunc::Count => "count",
            AggFunc::Avg => "avg",
            AggFunc::Min => "min",
            AggFunc::Max => "max",
        }
    }

    pub fn from_name(name: &str) -> Option<AggFunc> {
        Some(match name.to_ascii_lowercase().as_str() {
            "sum" => AggFunc::Sum,
            "count" => AggFunc::Count,
            "avg" => AggFunc::Avg,
            "min" => AggFunc::Min,
            "max" => AggFunc::Max,
            _ => return None,
        })
    }
}

/// One aggregate output column. `arg == None` is `count(*)`.
#[derive(Clone, Debug, PartialEq)]
pub struct AggExpr {
    pub func: AggFunc,
    pub arg: Option<Expr>,
    pub name: String,
}

impl AggExpr {
    pub fn new(func: AggFunc, arg: Expr, name: &str) -> Self {
        AggExpr { func, arg: Some(arg), name: name.to_string() }
    }

    pub fn count_star(name: &str) -> Self {
        AggExpr { func: AggFunc::Count, arg: None, name: name.to_string() }
    }

    /// Output column type given the argument type.
    pub fn output(&self, schema: &Schema, udfs: &dyn UdfSignatures) -> Result<ColumnDef> {
        let arg = match &self.arg {
            None if self.func == AggFunc::Count => return Ok(ColumnDef::new(&self.name, DataType::Int64)),
            None => return Err(Error::ty(format!("{} needs an argument", self.func.name()))),
            Some(a) => a.infer(schema, udfs)?,
        };
        let bad = || Error::ty(format!("{} is not defined for {}", self.func.name(), arg.ty));
        let dt = match arg.ty {
            ExprType::Value(t) => t,
            ExprType::Bool => return Err(bad()),
        };
        let out = match self.func {
            AggFunc::Count => return Ok(ColumnDef::new(&self.name, DataType::Int64)),
            AggFunc::Sum if dt.is_numeric() => dt,
            AggFunc::Avg if dt.is_numeric() => DataType::Float64,
            AggFunc::Min | AggFunc::Max if dt != DataType::Text => dt,
            _ => return Err(bad()),
        };
        Ok(ColumnDef::nullable(&self.name, out))
    }
}

impl fmt::Display for AggExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.arg {
            Some(a) => write!(f, "{}({a})", self.func.name()),
            None => write!(f, "{}(*)", self.func.name()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SortKey {
    pub column: String,
    pub desc: bool,
}

impl SortKey {
    pub fn asc(column: &str) -> Self {
        SortKey { column: column.to_string(), desc: false }
    }

    pub fn desc(column: &str) -> Self {
        SortKey { column: column.to_string(), desc: true }
    }
}

/// Relational operator tree. Expressions reference columns of the input
/// schema by name.
#[derive(Clone, Debug, PartialEq)]
pub enum LogicalPlan {
    /// `schema` is the set of columns read; the optimizer narrows it.
    Scan {
        table: String,
        schema: Schema,
    },
    Filter {
        predicate: Expr,
        input: Box<LogicalPlan>,
    },
    Project {
        exprs: Vec<(Expr, String)>,
        input: Box<LogicalPlan>,
    },
    /// Hash join; the right input is the build side.
    Join {
        kind: JoinKind,
        on: Vec<(Expr, Expr)>,
        left: Box<LogicalPlan>,
        right: Box<LogicalPlan>,
    },
    Aggregate {
        group_by: Vec<(Expr, String)>,
        aggs: Vec<AggExpr>,
        input: Box<LogicalPlan>,
    },
    /// Orders by `keys`, ties broken by all output columns ascending.
    Sort {
        keys: Vec<SortKey>,
        input: Box<LogicalPlan>,
    },
    Limit {
        n: u64,
        input: Box<LogicalPlan>,
    },
}

impl LogicalPlan {
    pub fn name(&self) -> &'static str {
        match self {
            LogicalPlan::Scan { .. } => "Scan",
            LogicalPlan::Filter { .. } => "Filter",
            LogicalPlan::Project { .. } => "Project",
            LogicalPlan::Join { .. } => "Join",
            LogicalPlan::Aggregate { .. } => "Aggregate",
            LogicalPlan::Sort { .. } => "Sort",
            LogicalPlan::Limit { .. } => "Limit",
        }
    }

    pub fn inputs(&self) -> Vec<&LogicalPlan> {
        match self {
            LogicalPlan::Scan { .. } => vec![],
            LogicalPlan::Join { left, right, .. } => vec![left, right],
            LogicalPlan::Filter { input, .. }
            | LogicalPlan::Project { input, .. }
            | LogicalPlan::Aggregate { input, .. }
            | LogicalPlan::Sort { input, .. }
            | LogicalPlan::Limit { input, .. } => vec![input],
        }
    }

    pub fn depth(&self) -> usize {
        1 + self.inputs().iter().map(|c| c.depth()).max().unwrap_or(0)
    }

    /// Applies `f` to every expression, rebuilding the tree.
    pub fn map_exprs(self, f: &mut dyn FnMut(Expr) -> Result<Expr>) -> Result<LogicalPlan> {
        let b = |p: LogicalPlan, f: &mut dyn FnMut(Expr) -> Result<Expr>| -> Result<Box<LogicalPlan>> {
            Ok(Box::new(p.map_exprs(f)?))
        };
        Ok(match self {
            s @ LogicalPlan::Scan { .. } => s,
            LogicalPlan::Filter { predicate, input } => {
                LogicalPlan::Filter { predicate: f(predicate)?, input: b(*input, f)? }
            }
            LogicalPlan::Project { exprs, input } => LogicalPlan::Project {
                exprs: exprs.into_iter().map(|(e, n)| Ok((f(e)?, n))).collect::<Result<_>>()?,
                input: b(*input, f)?,
            },
            LogicalPlan::Join { kind, on, left, right } => LogicalPlan::Join {
                kind,
                on: on.into_iter().map(|(l, r)| Ok((f(l)?, f(r)?))).collect::<Result<_>>()?,
                left: b(*left, f)?,
                right: b(*right, f)?,
            },
            LogicalPlan::Aggregate { group_by, aggs, input } => LogicalPlan::Aggregate {
                group_by: group_by.into_iter().map(|(e, n)| Ok((f(e)?, n))).collect::<Result<_>>()?,
                aggs: aggs
                    .into_iter()
                    .map(|a| Ok(AggExpr { arg: a.arg.map(&mut *f).transpose()?, ..a }))
                    .collect::<Result<_>>()?,
                input: b(*input, f)?,
            },
            LogicalPlan::Sort { keys, input } => LogicalPlan::Sort { keys, input: b(*input, f)? },
            LogicalPlan::Limit { n, input } => LogicalPlan::Limit { n, input: b(*input, f)? },
        })
    }

    pub fn any_expr(&self, pred: &impl Fn(&Expr) -> bool) -> bool {
        let here = match self {
            LogicalPlan::Scan { .. } | LogicalPlan::Sort { .. } | LogicalPlan::Limit { .. } => false,
            LogicalPlan::Filter { predicate, .. } => pred(predicate),
            LogicalPlan::Project { exprs, .. } => exprs.iter().any(|(e, _)| pred(e)),
            LogicalPlan::Join { on, .. } => on.iter().any(|(l, r)| pred(l) || pred(r)),
            LogicalPlan::Aggregate { group_by, aggs, .. } => {
                group_by.iter().any(|(e, _)| pred(e)) || aggs.iter().any(|a| a.arg.as_ref().is_some_and(pred))
            }
        };
        here || self.inputs().iter().any(|c| c.any_expr(pred))
    }

    /// Output schema of the subtree, type-checking every node on the way.
    pub fn schema(&self, udfs: &dyn UdfSignatures) -> Result<Schema> {
        match self {
            LogicalPlan::Scan { schema, .. } => Ok(schema.clone()),
            LogicalPlan::Filter { predicate, input } => {
                let s = input.schema(udfs)?;
                let t = predicate.infer(&s, udfs)?;
                if t.ty != ExprType::Bool {
                    return Err(Error::ty(format!("filter predicate {predicate} is {}, not boolean", t.ty)));
                }
                Ok(s)
            }
            LogicalPlan::Project { exprs, input } => {
                let s = input.schema(udfs)?;
                let cols = exprs.iter().map(|(e, n)| value_column(e, n, &s, udfs)).collect::<Result<Vec<_>>>()?;
                Schema::new(cols)
            }
            LogicalPlan::Join { kind, on, left, right } => {
                let (ls, rs) = (left.schema(udfs)?, right.schema(udfs)?);
                if on.is_empty() {
                    return Err(Error::Unsupported("join without equi-keys".into()));
                }
                for (l, r) in on {
                    let lt = value_column(l, "key", &ls, udfs)?;
                    let rt = value_column(r, "key", &rs, udfs)?;
                    if lt.dtype != rt.dtype {
                        return Err(Error::ty(format!(
                            "join key type mismatch: {l} is {} but {r} is {}",
                            lt.dtype, rt.dtype
                        )));
                    }
                }
                let mut cols = ls.columns().to_vec();
                match kind {
                    JoinKind::Inner => cols.extend(rs.columns().iter().cloned()),
                    JoinKind::LeftOuter => {
                        cols.extend(rs.columns().iter().map(|c| ColumnDef::nullable(&c.name, c.dtype)))
                    }
                    JoinKind::LeftSemi | JoinKind::LeftAnti => {}
                }
                Schema::new(cols)
            }
            LogicalPlan::Aggregate { group_by, aggs, input } => {
                let s = input.schema(udfs)?;
                let mut cols =
                    group_by.iter().map(|(e, n)| value_column(e, n, &s, udfs)).collect::<Result<Vec<_>>>()?;
                for a in aggs {
                    cols.push(a.output(&s, udfs)?);
                }
                if cols.is_empty() {
                    return Err(Error::Schema("aggregate without keys or aggregates".into()));
                }
                Schema::new(cols)
            }
            LogicalPlan::Sort { keys, input } => {
                let s = input.schema(udfs)?;
                for k in keys {
                    s.resolve(&k.column)?;
                }
                Ok(s)
            }
            LogicalPlan::Limit { input, .. } => input.schema(udfs),
        }
    }

    /// Tables scanned, left to right.
    pub fn tables(&self) -> Vec<String> {
        match self {
            LogicalPlan::Scan { table, .. } => vec![table.clone()],
            _ => self.inputs().iter().flat_map(|c| c.tables()).collect(),
        }
    }

    fn fmt_tree(&self, f: &mut fmt::Formatter<'_>, depth: usize) -> fmt::Result {
        let pad = "  ".repeat(depth);
        match self {
            LogicalPlan::Scan { table, schema } => {
                writeln!(f, "{pad}Scan {table} [{}]", schema.names().collect::<Vec<_>>().join(", "))?
            }
            LogicalPlan::Filter { predicate, .. } => writeln!(f, "{pad}Filter {predicate}")?,
            LogicalPlan::Project { exprs, .. } => writeln!(f, "{pad}Project {}", named_list(exprs))?,
            LogicalPlan::Join { kind, on, .. } => writeln!(f, "{pad}Join {} on {}", kind.name(), key_list(on))?,
            LogicalPlan::Aggregate { group_by, aggs, .. } => {
                writeln!(f, "{pad}Aggregate group=[{}] aggs=[{}]", named_list(group_by), agg_list(aggs))?
            }
            LogicalPlan::Sort { keys, .. } => writeln!(f, "{pad}Sort {}", sort_list(keys))?,
            LogicalPlan::Limit { n, .. } => writeln!(f, "{pad}Limit {n}")?,
        }
        for c in self.inputs() {
            c.fmt_tree(f, depth + 1)?;
        }
        Ok(())
    }
}

fn value_column(e: &Expr, name: &str, s: &Schema, udfs: &dyn UdfSignatures) -> Result<ColumnDef> {
    let t = e.infer(s, udfs)?;
    match t.ty {
        ExprType::Value(dt) => Ok(ColumnDef { name: name.to_string(), dtype: dt, nullable: t.nullable }),
        ExprType::Bool => Err(Error::ty(format!("boolean expression {e} cannot be used as a value"))),
    }
}

pub(crate) fn named_list(items: &[(Expr, String)]) -> String {
    items
        .iter()
        .map(|(e, n)| match e {
            Expr::Column(c) if c == n => n.clone(),
            _ => format!("{e} AS {n}"),
        })
        .collect::<Vec<_>>()
        .join(", ")
}

pub(crate) fn key_list(on: &[(Expr, Expr)]) -> String {
    on.iter().map(|(l, r)| format!("{l} = {r}")).collect::<Vec<_>>().join(", ")
}

pub(crate) fn agg_list(aggs: &[AggExpr]) -> String {
    aggs.iter().map(|a| format!("{a} AS {}", a.name)).collect::<Vec<_>>().join(", ")
}

pub(crate) fn sort_list(keys: &[SortKey]) -> String {
    keys.iter().map(|k| format!("{} {}", k.column, if k.desc { "desc" } else { "asc" })).collect::<Vec<_>>().join(", ")
}

impl fmt::Display for LogicalPlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_tree(f, 0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::expr::{col, lit_i64, NoUdfs};

    fn scan() -> LogicalPlan {
        LogicalPlan::Scan {
            table: "t".into(),
            schema: Schema::new(vec![ColumnDef::new("a", DataType::Int64), ColumnDef::new("b", DataType::Float64)])
                .unwrap(),
        }
    }

    #[test]
    fn aggregate_output_types() {
        let p = LogicalPlan::Aggregate {
            group_by: vec![(col("a"), "a".into())],
            aggs: vec![
                AggExpr::new(AggFunc::Sum, col("a"), "s"),
                AggExpr::new(AggFunc::Avg, col("a"), "m"),
                AggExpr::count_star("n"),
            ],
            input: Box::new(scan()),
        };
        let s = p.schema(&NoUdfs).unwrap();
        let dts: Vec<_> = s.columns().iter().map(|c| (c.dtype, c.nullable)).collect();
        assert_eq!(
            dts,
            [(DataType::Int64, false), (DataType::Int64, true), (DataType::Float64, true), (DataType::Int64, false)]
        );
    }

    #[test]
    fn join_key_mismatch_and_duplicates() {
        let j = |l: Expr, r: Expr| LogicalPlan::Join {
            kind: JoinKind::Inner,
            on: vec![(l, r)],
            left: Box::new(scan()),
            right: Box::new(scan()),
        };
        let err = j(col("a"), col("b")).schema(&NoUdfs).unwrap_err();
        assert!(err.to_string().contains("join key type mismatch"), "{err}");
        // inner join of a table with itself repeats names
        assert!(j(col("a"), col("a")).schema(&NoUdfs).is_err());
    }

    #[test]
    fn filter_must_be_boolean() {
        let p = LogicalPlan::Filter { predicate: col("a") + lit_i64(1), input: Box::new(scan()) };
        assert!(p.schema(&NoUdfs).is_err());
    }
}
