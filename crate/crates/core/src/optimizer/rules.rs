//! Logical rewrites: constant folding, predicate pushdown, projection pruning.

use std::collections::{BTreeSet, HashMap};

use crate::error::Result;
use crate::frontend::{ArithOp, BoolOp, CmpOp, Expr, JoinKind, Literal, LogicalPlan, NoUdfs};

/// Folds literal-only subexpressions. Operations that would fail or yield
/// null at run time (integer overflow, integer division by zero) are kept.
pub fn fold_expr(e: Expr) -> Expr {
    e.transform(&mut |x| Ok(fold_node(x))).expect("folding is infallible")
}

fn fold_node(e: Expr) -> Expr {
    match e {
        Expr::Arith(op, l, r) => match (&*l, &*r) {
            (Expr::Literal(a), Expr::Literal(b)) => match fold_arith(op, a, b) {
                Some(v) => Expr::Literal(v),
                None => Expr::Arith(op, l, r),
            },
            _ => Expr::Arith(op, l, r),
        },
        Expr::Cmp(op, l, r) => match (&*l, &*r) {
            (Expr::Literal(a), Expr::Literal(b)) => match compare(op, a, b) {
                Some(v) => Expr::Literal(Literal::Bool(v)),
                None => Expr::Cmp(op, l, r),
            },
            _ => Expr::Cmp(op, l, r),
        },
        Expr::Between(e, lo, hi) => match (&*e, &*lo, &*hi) {
            (Expr::Literal(v), Expr::Literal(a), Expr::Literal(b)) => {
                match (compare(CmpOp::GtEq, v, a), compare(CmpOp::LtEq, v, b)) {
                    (Some(x), Some(y)) => Expr::Literal(Literal::Bool(x && y)),
                    _ => Expr::Between(e, lo, hi),
                }
            }
            _ => Expr::Between(e, lo, hi),
        },
        Expr::StartsWith(e, p) => match &*e {
            Expr::Literal(Literal::Text(t)) => Expr::Literal(Literal::Bool(t.starts_with(&p))),
            _ => Expr::StartsWith(e, p),
        },
        Expr::Bool(BoolOp::Not, mut args) => match args.pop().expect("NOT has one argument") {
            Expr::Literal(Literal::Bool(b)) => Expr::Literal(Literal::Bool(!b)),
            Expr::Bool(BoolOp::Not, mut inner) => inner.pop().expect("NOT has one argument"),
            a => Expr::Bool(BoolOp::Not, vec![a]),
        },
        Expr::Bool(op, args) => {
            let (absorbing, neutral) = (op == BoolOp::Or, op == BoolOp::And);
            let mut kept = Vec::new();
            for a in args {
                match a {
                    Expr::Literal(Literal::Bool(b)) if b == absorbing => return Expr::Literal(Literal::Bool(b)),
                    Expr::Literal(Literal::Bool(b)) if b == neutral => {}
                    a => kept.push(a),
                }
            }
            match kept.len() {
                0 => Expr::Literal(Literal::Bool(neutral)),
                1 => kept.pop().unwrap(),
                _ => Expr::Bool(op, kept),
            }
        }
        Expr::If(c, a, b) => match (&*c, &*a, &*b) {
            // only when both branches have the same literal type, so the
            // result type is unchanged
            (Expr::Literal(Literal::Bool(cond)), Expr::Literal(x), Expr::Literal(y)) if x.ty() == y.ty() => {
                if *cond {
                    *a
                } else {
                    *b
                }
            }
            _ => Expr::If(c, a, b),
        },
        other => other,
    }
}

fn fold_arith(op: ArithOp, a: &Literal, b: &Literal) -> Option<Literal> {
    match (a, b) {
        (Literal::Int64(x), Literal::Int64(y)) => {
            let v = match op {
                ArithOp::Add => x.checked_add(*y),
                ArithOp::Sub => x.checked_sub(*y),
                ArithOp::Mul => x.checked_mul(*y),
                ArithOp::Div => x.checked_div(*y),
            }?;
            Some(Literal::Int64(v))
        }
        _ => {
            let (x, y) = (as_f64(a)?, as_f64(b)?);
            Some(Literal::Float64(match op {
                ArithOp::Add => x + y,
                ArithOp::Sub => x - y,
                ArithOp::Mul => x * y,
                ArithOp::Div => x / y,
            }))
        }
    }
}

fn as_f64(l: &Literal) -> Option<f64> {
    match l {
        Literal::Int64(v) => Some(*v as f64),
        Literal::Float64(v) => Some(*v),
        _ => None,
    }
}

fn compare(op: CmpOp, a: &Literal, b: &Literal) -> Option<bool> {
    Some(match (a, b) {
        (Literal::Int64(x), Literal::Int64(y)) | (Literal::Date(x), Literal::Date(y)) => op.holds(x.cmp(y)),
        (Literal::Text(x), Literal::Text(y)) => op.holds(x.cmp(y)),
        _ => {
            let (x, y) = (as_f64(a)?, as_f64(b)?);
            match op {
                CmpOp::Eq => x == y,
                CmpOp::NotEq => x != y,
                CmpOp::Lt => x < y,
                CmpOp::LtEq => x <= y,
                CmpOp::Gt => x > y,
                CmpOp::GtEq => x >= y,
            }
        }
    })
}

pub fn fold_plan(plan: LogicalPlan) -> Result<LogicalPlan> {
    plan.map_exprs(&mut |e| Ok(fold_expr(e)))
}

fn is_true(e: &Expr) -> bool {
    matches!(e, Expr::Literal(Literal::Bool(true)))
}

fn filter(input: LogicalPlan, conjuncts: Vec<Expr>) -> LogicalPlan {
    let conjuncts: Vec<Expr> = conjuncts.into_iter().filter(|c| !is_true(c)).collect();
    match Expr::conjunction(conjuncts) {
        Some(predicate) => LogicalPlan::Filter { predicate, input: Box::new(input) },
        None => input,
    }
}

fn output_columns(p: &LogicalPlan) -> Result<BTreeSet<String>> {
    Ok(p.schema(&NoUdfs)?.names().map(str::to_string).collect())
}

fn substitute(e: Expr, map: &HashMap<&str, &Expr>) -> Expr {
    e.transform(&mut |x| {
        Ok(match &x {
            Expr::Column(c) => map.get(c.as_str()).map_or(x, |r| (*r).clone()),
            _ => x,
        })
    })
    .expect("substitution is infallible")
}

/// Moves filter conjuncts as close to the scans as their columns allow and
/// merges adjacent filters.
pub fn push_down(plan: LogicalPlan) -> Result<LogicalPlan> {
    push_into(plan, Vec::new())
}

fn push_into(plan: LogicalPlan, mut preds: Vec<Expr>) -> Result<LogicalPlan> {
    use LogicalPlan::*;
    Ok(match plan {
        Filter { predicate, input } => {
            // inner filter first keeps evaluation order stable
            let mut all = predicate.conjuncts();
            all.append(&mut preds);
            push_into(*input, all)?
        }
        Project { exprs, input } => {
            let map: HashMap<&str, &Expr> = exprs.iter().map(|(e, n)| (n.as_str(), e)).collect();
            let below: Vec<Expr> = preds.drain(..).map(|p| substitute(p, &map)).collect();
            let input = push_into(*input, below)?;
            Project { exprs, input: Box::new(input) }
        }
        Join { kind, on, left, right } => {
            let (lcols, rcols) = (output_columns(&left)?, output_columns(&right)?);
            let (mut to_left, mut to_right, mut keep) = (Vec::new(), Vec::new(), Vec::new());
            for p in preds {
                let cols = p.columns();
                if cols.is_subset(&lcols) {
                    to_left.push(p);
                } else if kind == JoinKind::Inner && cols.is_subset(&rcols) {
                    to_right.push(p);
                } else {
                    keep.push(p);
                }
            }
            let j = Join {
                kind,
                on,
                left: Box::new(push_into(*left, to_left)?),
                right: Box::new(push_into(*right, to_right)?),
            };
            filter(j, keep)
        }
        Aggregate { group_by, aggs, input } => {
            let map: HashMap<&str, &Expr> = group_by.iter().map(|(e, n)| (n.as_str(), e)).collect();
            let (mut below, mut keep) = (Vec::new(), Vec::new());
            for p in preds {
                let cols = p.columns();
                // a column-free predicate must stay above: an ungrouped
                // aggregate yields a row even for empty input
                if !cols.is_empty() && cols.iter().all(|c| map.contains_key(c.as_str())) {
                    below.push(substitute(p, &map));
                } else {
                    keep.push(p);
                }
            }
            let input = push_into(*input, below)?;
            filter(Aggregate { group_by, aggs, input: Box::new(input) }, keep)
        }
        Sort { keys, input } => Sort { keys, input: Box::new(push_into(*input, preds)?) },
        Limit { n, input } => filter(Limit { n, input: Box::new(push_into(*input, Vec::new())?) }, preds),
        scan @ Scan { .. } => filter(scan, preds),
    })
}

/// Narrows scans and projections to the columns some ancestor uses.
/// `None` means every output column is needed.
pub fn prune(plan: LogicalPlan, required: Option<&BTreeSet<String>>) -> Result<LogicalPlan> {
    use LogicalPlan::*;
    Ok(match plan {
        Scan { table, schema } => match required {
            None => Scan { table, schema },
            Some(req) => {
                let names: Vec<&str> = schema.names().filter(|n| req.contains(*n)).collect();
                Scan { schema: schema.project(&names)?, table }
            }
        },
        Filter { predicate, input } => {
            let mut req = match required {
                Some(r) => r.clone(),
                None => output_columns(&input)?,
            };
            req.extend(predicate.columns());
            Filter { predicate, input: Box::new(prune(*input, Some(&req))?) }
        }
        Project { exprs, input } => {
            let exprs: Vec<(Expr, String)> = match required {
                Some(r) => exprs.into_iter().filter(|(_, n)| r.contains(n)).collect(),
                None => exprs,
            };
            let req: BTreeSet<String> = exprs.iter().flat_map(|(e, _)| e.columns()).collect();
            Project { exprs, input: Box::new(prune(*input, Some(&req))?) }
        }
        Join { kind, on, left, right } => {
            let (lcols, rcols) = (output_columns(&left)?, output_columns(&right)?);
            let needed: BTreeSet<String> = match required {
                Some(r) => r.clone(),
                None => output_columns(&Join { kind, on: on.clone(), left: left.clone(), right: right.clone() })?,
            };
            let mut lreq: BTreeSet<String> = needed.intersection(&lcols).cloned().collect();
            let mut rreq: BTreeSet<String> =
                if kind.emits_right() { needed.intersection(&rcols).cloned().collect() } else { BTreeSet::new() };
            for (l, r) in &on {
                lreq.extend(l.columns());
                rreq.extend(r.columns());
            }
            Join { kind, on, left: Box::new(prune(*left, Some(&lreq))?), right: Box::new(prune(*right, Some(&rreq))?) }
        }
        Aggregate { group_by, aggs, input } => {
            let mut req: BTreeSet<String> = group_by.iter().flat_map(|(e, _)| e.columns()).collect();
            for a in &aggs {
                if let Some(arg) = &a.arg {
                    req.extend(arg.columns());
                }
            }
            Aggregate { group_by, aggs, input: Box::new(prune(*input, Some(&req))?) }
        }
        Sort { keys, input } => {
            let req = required.map(|r| {
                let mut r = r.clone();
                r.extend(keys.iter().map(|k| k.column.clone()));
                r
            });
            Sort { keys, input: Box::new(prune(*input, req.as_ref())?) }
        }
        Limit { n, input } => Limit { n, input: Box::new(prune(*input, required)?) },
    })
}

/// Drops projections that reproduce their input unchanged.
pub fn remove_identity_projects(plan: LogicalPlan) -> Result<LogicalPlan> {
    use LogicalPlan::*;
    Ok(match plan {
        Project { exprs, input } => {
            let input = remove_identity_projects(*input)?;
            let in_schema = input.schema(&NoUdfs)?;
            let identity = exprs.len() == in_schema.len()
                && exprs
                    .iter()
                    .zip(in_schema.names())
                    .all(|((e, n), c)| n == c && matches!(e, Expr::Column(x) if x == c));
            if identity {
                input
            } else {
                Project { exprs, input: Box::new(input) }
            }
        }
        Filter { predicate, input } => Filter { predicate, input: Box::new(remove_identity_projects(*input)?) },
        Join { kind, on, left, right } => Join {
            kind,
            on,
            left: Box::new(remove_identity_projects(*left)?),
            right: Box::new(remove_identity_projects(*right)?),
        },
        Aggregate { group_by, aggs, input } => {
            Aggregate { group_by, aggs, input: Box::new(remove_identity_projects(*input)?) }
        }
        Sort { keys, input } => Sort { keys, input: Box::new(remove_identity_projects(*input)?) },
        Limit { n, input } => Limit { n, input: Box::new(remove_identity_projects(*input)?) },
        s @ Scan { .. } => s,
    })
}

/// The full logical rewrite sequence.
pub fn rewrite(plan: LogicalPlan) -> Result<LogicalPlan> {
    let plan = fold_plan(plan)?;
    let plan = push_down(plan)?;
    let plan = fold_plan(plan)?;
    let plan = prune(plan, None)?;
    remove_identity_projects(plan)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::{col, lit_bool, lit_f64, lit_i64};

    #[test]
    fn folds_literals_but_not_errors() {
        assert_eq!(fold_expr(lit_i64(1).eq(lit_i64(1))), lit_bool(true));
        assert_eq!(fold_expr(lit_i64(2) * lit_f64(0.5)), lit_f64(1.0));
        let overflow = lit_i64(i64::MAX) + lit_i64(1);
        assert_eq!(fold_expr(overflow.clone()), overflow);
        let div0 = lit_i64(1) / lit_i64(0);
        assert_eq!(fold_expr(div0.clone()), div0);
        assert_eq!(fold_expr(col("a").gt(lit_i64(1)).and(lit_i64(1).lt(lit_i64(2)))), col("a").gt(lit_i64(1)));
        assert_eq!(fold_expr(col("a").gt(lit_i64(1)).or(lit_bool(true))), lit_bool(true));
    }
}
