//! Expressions, logical plans, the SQL parser and the deferred plan builder.

pub mod dataframe;
pub mod expr;
pub mod plan;
pub mod sql;

pub use dataframe::DataFrame;
pub use expr::{
    col, lit_bool, lit_date, lit_f64, lit_i64, lit_text, udf, ArithOp, BoolOp, CmpOp, Expr, ExprType, Literal, NoUdfs,
    TypeInfo, UdfSignature, UdfSignatures,
};
pub use plan::{AggExpr, AggFunc, JoinKind, LogicalPlan, SortKey};
pub use sql::{parse_sql, print_sql};
