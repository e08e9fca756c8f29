//! Rule-based optimization and lowering to an annotated physical plan.
//!
//! Pipelines are numbered in execution order. A pipeline starts at a scan
//! (or at the output of a non-final aggregate) and ends at a breaker: a join
//! hash build, a non-final aggregate, or the query sink. Sort and Limit at the
//! root, together with an aggregate directly beneath them, finalize the last
//! pipeline instead of opening a new one.

pub mod rules;

use std::collections::BTreeSet;
use std::fmt;

use crate::catalog::Schema;
use crate::error::Result;
use crate::frontend::plan::{agg_list, key_list, named_list, sort_list};
use crate::frontend::{AggExpr, Expr, JoinKind, Literal, LogicalPlan, NoUdfs, SortKey};

pub use rules::{fold_expr, rewrite};

#[derive(Clone, Debug, PartialEq)]
pub enum PhysOp {
    Scan {
        table: String,
        columns: Vec<String>,
    },
    /// Produces no rows; what a constantly false filter becomes.
    Empty,
    Filter {
        predicate: Expr,
    },
    Project {
        exprs: Vec<(Expr, String)>,
    },
    HashJoin {
        kind: JoinKind,
        on: Vec<(Expr, Expr)>,
    },
    Aggregate {
        group_by: Vec<(Expr, String)>,
        aggs: Vec<AggExpr>,
    },
    Sort {
        keys: Vec<SortKey>,
    },
    Limit {
        n: u64,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Role {
    /// Part of a fused pipeline.
    Stream,
    /// Terminates pipeline `pipeline` and materializes (hash build of the
    /// right input, or an aggregate whose output feeds `output`).
    Breaker { output: Option<usize> },
    /// Final aggregate, sort or limit of the last pipeline.
    Sink,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PhysNode {
    pub op: PhysOp,
    pub inputs: Vec<PhysNode>,
    pub schema: Schema,
    /// `(table, column)` pairs read by scans below this node.
    pub required: BTreeSet<(String, String)>,
    pub pipeline: usize,
    pub role: Role,
    /// For hash joins: the pipeline that builds the table.
    pub build_pipeline: Option<usize>,
}

impl PhysNode {
    pub fn name(&self) -> &'static str {
        match self.op {
            PhysOp::Scan { .. } => "Scan",
            PhysOp::Empty => "Empty",
            PhysOp::Filter { .. } => "Filter",
            PhysOp::Project { .. } => "Project",
            PhysOp::HashJoin { .. } => "HashJoin",
            PhysOp::Aggregate { .. } => "Aggregate",
            PhysOp::Sort { .. } => "Sort",
            PhysOp::Limit { .. } => "Limit",
        }
    }

    pub fn walk<'a>(&'a self, f: &mut impl FnMut(&'a PhysNode)) {
        f(self);
        for c in &self.inputs {
            c.walk(f);
        }
    }

    fn fmt_tree(&self, f: &mut fmt::Formatter<'_>, depth: usize) -> fmt::Result {
        let body = match &self.op {
            PhysOp::Scan { table, columns } => format!("Scan {table} [{}]", columns.join(", ")),
            PhysOp::Empty => format!("Empty [{}]", self.schema.names().collect::<Vec<_>>().join(", ")),
            PhysOp::Filter { predicate } => format!("Filter {predicate}"),
            PhysOp::Project { exprs } => format!("Project {}", named_list(exprs)),
            PhysOp::HashJoin { kind, on } => {
                format!("HashJoin {} on {} build=right", kind.name(), key_list(on))
            }
            PhysOp::Aggregate { group_by, aggs } => {
                format!("Aggregate group=[{}] aggs=[{}]", named_list(group_by), agg_list(aggs))
            }
            PhysOp::Sort { keys } => format!("Sort {}", sort_list(keys)),
            PhysOp::Limit { n } => format!("Limit {n}"),
        };
        let mark = match (self.role, self.build_pipeline) {
            (Role::Breaker { .. }, Some(b)) => {
                format!("pipeline {}, breaker: hash build in pipeline {b}", self.pipeline)
            }
            (Role::Breaker { output: Some(o) }, None) => {
                format!("pipeline {}, breaker: materialize for pipeline {o}", self.pipeline)
            }
            (Role::Breaker { output: None }, None) => {
                format!("pipeline {}, breaker", self.pipeline)
            }
            (Role::Sink, _) => format!("pipeline {}, sink", self.pipeline),
            (Role::Stream, _) => format!("pipeline {}", self.pipeline),
        };
        writeln!(f, "{}{body}  ({mark})", "  ".repeat(depth))?;
        for c in &self.inputs {
            c.fmt_tree(f, depth + 1)?;
        }
        Ok(())
    }
}

/// Optimized, pipeline-annotated plan handed to code generation.
#[derive(Clone, Debug, PartialEq)]
pub struct PhysicalPlan {
    pub root: PhysNode,
    pub pipeline_count: usize,
}

impl PhysicalPlan {
    pub fn schema(&self) -> &Schema {
        &self.root.schema
    }

    /// Number of breakers (hash builds and non-final aggregates).
    pub fn breaker_count(&self) -> usize {
        let mut n = 0;
        self.root.walk(&mut |node| {
            if matches!(node.role, Role::Breaker { .. }) {
                n += 1;
            }
        });
        n
    }

    /// Columns each table must provide.
    pub fn scan_columns(&self) -> Vec<(String, Vec<String>)> {
        let mut out = Vec::new();
        self.root.walk(&mut |n| {
            if let PhysOp::Scan { table, columns } = &n.op {
                out.push((table.clone(), columns.clone()));
            }
        });
        out
    }
}

impl fmt::Display for PhysicalPlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.root.fmt_tree(f, 0)
    }
}

/// `(table, column)` set read beneath a node.
pub fn required_columns(node: &PhysNode) -> &BTreeSet<(String, String)> {
    &node.required
}

/// Rewrites `plan` and lowers it. UDF calls must already be inlined.
pub fn optimize(plan: &LogicalPlan) -> Result<PhysicalPlan> {
    plan.schema(&NoUdfs)?;
    let plan = rewrite(plan.clone())?;
    lower(&plan)
}

/// Lowers a logical plan without rewriting it.
pub fn lower(plan: &LogicalPlan) -> Result<PhysicalPlan> {
    let mut next = 0;
    let root = lower_node(plan, true, &mut next)?;
    Ok(PhysicalPlan { root, pipeline_count: next })
}

fn node(op: PhysOp, inputs: Vec<PhysNode>, schema: Schema, pipeline: usize, role: Role) -> PhysNode {
    let mut required = BTreeSet::new();
    if let PhysOp::Scan { table, columns } = &op {
        required.extend(columns.iter().map(|c| (table.clone(), c.clone())));
    }
    for c in &inputs {
        required.extend(c.required.iter().cloned());
    }
    PhysNode { op, inputs, schema, required, pipeline, role, build_pipeline: None }
}

// `final_chain`: only Sort/Limit nodes lie between this node and the root.
fn lower_node(plan: &LogicalPlan, final_chain: bool, next: &mut usize) -> Result<PhysNode> {
    let schema = plan.schema(&NoUdfs)?;
    let fresh = |next: &mut usize| {
        *next += 1;
        *next - 1
    };
    Ok(match plan {
        LogicalPlan::Scan { table, schema: s } => {
            let columns = s.names().map(str::to_string).collect();
            node(PhysOp::Scan { table: table.clone(), columns }, vec![], schema, fresh(next), Role::Stream)
        }
        LogicalPlan::Filter { predicate: Expr::Literal(Literal::Bool(false)), .. } => {
            node(PhysOp::Empty, vec![], schema, fresh(next), Role::Stream)
        }
        LogicalPlan::Filter { predicate, input } => {
            let c = lower_node(input, false, next)?;
            let p = c.pipeline;
            node(PhysOp::Filter { predicate: predicate.clone() }, vec![c], schema, p, Role::Stream)
        }
        LogicalPlan::Project { exprs, input } => {
            let c = lower_node(input, false, next)?;
            let p = c.pipeline;
            node(PhysOp::Project { exprs: exprs.clone() }, vec![c], schema, p, Role::Stream)
        }
        LogicalPlan::Join { kind, on, left, right } => {
            let r = lower_node(right, false, next)?;
            let l = lower_node(left, false, next)?;
            let (p, b) = (l.pipeline, r.pipeline);
            let mut n = node(
                PhysOp::HashJoin { kind: *kind, on: on.clone() },
                vec![l, r],
                schema,
                p,
                Role::Breaker { output: None },
            );
            n.build_pipeline = Some(b);
            n
        }
        LogicalPlan::Aggregate { group_by, aggs, input } => {
            let c = lower_node(input, false, next)?;
            let p = c.pipeline;
            let op = PhysOp::Aggregate { group_by: group_by.clone(), aggs: aggs.clone() };
            if final_chain {
                node(op, vec![c], schema, p, Role::Sink)
            } else {
                let mut n = node(op, vec![c], schema, p, Role::Stream);
                let out = fresh(next);
                n.role = Role::Breaker { output: Some(out) };
                n
            }
        }
        LogicalPlan::Sort { keys, input } if final_chain => {
            let c = lower_node(input, true, next)?;
            let p = c.pipeline;
            node(PhysOp::Sort { keys: keys.clone() }, vec![c], schema, p, Role::Sink)
        }
        LogicalPlan::Limit { n, input } if final_chain => {
            let c = lower_node(input, true, next)?;
            let p = c.pipeline;
            node(PhysOp::Limit { n: *n }, vec![c], schema, p, Role::Sink)
        }
        LogicalPlan::Sort { keys, input } => {
            let c = lower_node(input, false, next)?;
            let p = c.pipeline;
            let out = fresh(next);
            node(PhysOp::Sort { keys: keys.clone() }, vec![c], schema, p, Role::Breaker { output: Some(out) })
        }
        LogicalPlan::Limit { n, input } => {
            let c = lower_node(input, false, next)?;
            let p = c.pipeline;
            node(PhysOp::Limit { n: *n }, vec![c], schema, p, Role::Stream)
        }
    })
}

/// Whether a subtree holds operators the fused compiler cannot place
/// mid-pipeline (Sort or Limit below a join, aggregate or projection).
pub fn has_inner_order_ops(plan: &PhysicalPlan) -> bool {
    let mut found = false;
    plan.root.walk(&mut |n| {
        if matches!(n.op, PhysOp::Sort { .. } | PhysOp::Limit { .. }) && n.role != Role::Sink {
            found = true;
        }
    });
    found
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::Catalog;
    use crate::frontend::parse_sql;
    use crate::storage::ColumnTable;
    use crate::tpch::schema;

    fn catalog() -> Catalog {
        let mut c = Catalog::new();
        for t in ["lineitem", "orders"] {
            let s = schema::by_name(t).unwrap();
            c.register_table(t, s.clone(), ColumnTable::empty(s)).unwrap();
        }
        c
    }

    fn plan(sql: &str) -> PhysicalPlan {
        optimize(&parse_sql(sql, &catalog(), &NoUdfs).unwrap()).unwrap()
    }

    #[test]
    fn q6_is_one_pipeline_over_four_columns() {
        let p = plan(
            "select sum(l_extendedprice * l_discount) as revenue from lineitem where l_shipdate >= date '1994-01-01' \
             and l_shipdate < date '1995-01-01' and l_discount between 0.05 and 0.07 and l_quantity < 24",
        );
        assert_eq!(p.pipeline_count, 1);
        assert_eq!(p.breaker_count(), 0);
        let cols: BTreeSet<&str> = p.root.required.iter().map(|(_, c)| c.as_str()).collect();
        assert_eq!(cols, BTreeSet::from(["l_discount", "l_extendedprice", "l_quantity", "l_shipdate"]));
        assert_eq!(p.to_string().lines().count(), 3);
    }

    #[test]
    fn single_join_is_two_pipelines() {
        let p = plan("select l_orderkey, o_orderdate from lineitem join orders on l_orderkey = o_orderkey");
        assert_eq!(p.pipeline_count, 2);
        assert_eq!(p.breaker_count() + 1, p.pipeline_count);
    }

    #[test]
    fn constant_filters_fold_away() {
        let p = plan("select l_orderkey from lineitem where 1 = 1");
        assert_eq!(p.root.name(), "Scan");
        let p = plan("select count(*) from lineitem where 1 = 2");
        assert_eq!(p.root.inputs[0].name(), "Empty");
    }

    #[test]
    fn pushdown_reaches_join_sides() {
        let p = plan(
            "select l_orderkey from lineitem join orders on l_orderkey = o_orderkey \
             where o_orderdate < date '1995-01-01' and l_quantity > 3",
        );
        let text = p.to_string();
        let lines: Vec<&str> = text.lines().collect();
        assert!(lines[1].trim_start().starts_with("HashJoin"), "{text}");
        assert!(lines[2].trim_start().starts_with("Filter (l_quantity > 3)"), "{text}");
        assert!(lines[4].trim_start().starts_with("Filter (o_orderdate <"), "{text}");
    }

    #[test]
    fn count_star_reads_no_columns() {
        let p = plan("select count(*) from lineitem");
        assert!(p.root.required.is_empty());
    }
}
