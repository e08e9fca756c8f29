//! Deferred plan builder. Every method type-checks the extended plan and
//! returns a new handle; nothing reads table data.

use std::fmt;
use std::sync::Arc;

use super::{AggExpr, Expr, JoinKind, LogicalPlan, SortKey};
use crate::catalog::{Catalog, Schema};
use crate::error::Result;
use crate::optimizer::optimize;
use crate::udf::{inline_udfs, UdfRegistry};

#[derive(Clone)]
pub struct DataFrame {
    plan: LogicalPlan,
    schema: Schema,
    udfs: Arc<UdfRegistry>,
}

impl fmt::Debug for DataFrame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DataFrame").field("plan", &self.plan).finish()
    }
}

impl DataFrame {
    /// Wraps a plan after type-checking it against `udfs`.
    pub fn from_plan(plan: LogicalPlan, udfs: Arc<UdfRegistry>) -> Result<Self> {
        let schema = plan.schema(udfs.as_ref())?;
        Ok(DataFrame { plan, schema, udfs })
    }

    /// All columns of a catalog table. Only the schema is consulted.
    pub fn scan(catalog: &Catalog, table: &str, udfs: Arc<UdfRegistry>) -> Result<Self> {
        let schema = catalog.schema(table)?.clone();
        Self::from_plan(LogicalPlan::Scan { table: table.to_string(), schema }, udfs)
    }

    fn wrap(&self, plan: LogicalPlan) -> Result<Self> {
        Self::from_plan(plan, self.udfs.clone())
    }

    fn input(&self) -> Box<LogicalPlan> {
        Box::new(self.plan.clone())
    }

    pub fn filter(&self, predicate: Expr) -> Result<Self> {
        self.wrap(LogicalPlan::Filter { predicate, input: self.input() })
    }

    pub fn select(&self, exprs: Vec<(Expr, &str)>) -> Result<Self> {
        let exprs = exprs.into_iter().map(|(e, n)| (e, n.to_string())).collect();
        self.wrap(LogicalPlan::Project { exprs, input: self.input() })
    }

    /// Hash join with `other` as the build side.
    pub fn join(&self, other: &DataFrame, kind: JoinKind, on: Vec<(Expr, Expr)>) -> Result<Self> {
        self.wrap(LogicalPlan::Join { kind, on, left: self.input(), right: other.input() })
    }

    pub fn group_agg(&self, group_by: Vec<(Expr, &str)>, aggs: Vec<AggExpr>) -> Result<Self> {
        let group_by = group_by.into_iter().map(|(e, n)| (e, n.to_string())).collect();
        self.wrap(LogicalPlan::Aggregate { group_by, aggs, input: self.input() })
    }

    pub fn sort(&self, keys: Vec<SortKey>) -> Result<Self> {
        self.wrap(LogicalPlan::Sort { keys, input: self.input() })
    }

    pub fn limit(&self, n: u64) -> Result<Self> {
        self.wrap(LogicalPlan::Limit { n, input: self.input() })
    }

    pub fn plan(&self) -> &LogicalPlan {
        &self.plan
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn udfs(&self) -> &Arc<UdfRegistry> {
        &self.udfs
    }

    /// The plan with UDF calls inlined.
    pub fn inlined(&self) -> Result<LogicalPlan> {
        inline_udfs(self.plan.clone(), &self.udfs)
    }

    /// The optimized physical plan, one node per line with pipeline ids and
    /// breaker marks.
    pub fn explain(&self) -> String {
        match self.inlined().and_then(|p| optimize(&p)) {
            Ok(p) => p.to_string(),
            Err(e) => format!("<plan cannot be lowered: {e}>\n"),
        }
    }

    /// The logical plan as built.
    pub fn explain_logical(&self) -> String {
        self.plan.to_string()
    }
}
