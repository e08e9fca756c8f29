use std::collections::BTreeSet;
use std::fmt;

use crate::catalog::{date, DataType, Schema};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub enum Literal {
    Int64(i64),
    Float64(f64),
    Date(i64),
    Text(Vec<u8>),
    Bool(bool),
}

impl Literal {
    pub fn ty(&self) -> ExprType {
        match self {
            Literal::Int64(_) => ExprType::Value(DataType::Int64),
            Literal::Float64(_) => ExprType::Value(DataType::Float64),
            Literal::Date(_) => ExprType::Value(DataType::Date),
            Literal::Text(_) => ExprType::Value(DataType::Text),
            Literal::Bool(_) => ExprType::Bool,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl ArithOp {
    pub fn symbol(self) -> &'static str {
        match self {
            ArithOp::Add => "+",
            ArithOp::Sub => "-",
            ArithOp::Mul => "*",
            ArithOp::Div => "/",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CmpOp {
    Eq,
    NotEq,
    Lt,
    LtEq,
    Gt,
    GtEq,
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Eq => "=",
            CmpOp::NotEq => "<>",
            CmpOp::Lt => "<",
            CmpOp::LtEq => "<=",
            CmpOp::Gt => ">",
            CmpOp::GtEq => ">=",
        }
    }

    pub fn holds(self, ord: std::cmp::Ordering) -> bool {
        use std::cmp::Ordering::*;
        match self {
            CmpOp::Eq => ord == Equal,
            CmpOp::NotEq => ord != Equal,
            CmpOp::Lt => ord == Less,
            CmpOp::LtEq => ord != Greater,
            CmpOp::Gt => ord == Greater,
            CmpOp::GtEq => ord != Less,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BoolOp {
    And,
    Or,
    Not,
}

/// Scalar expression tree. Columns are referenced by name and resolved
/// against the input schema of the operator that owns the expression.
#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Column(String),
    Literal(Literal),
    Arith(ArithOp, Box<Expr>, Box<Expr>),
    Cmp(CmpOp, Box<Expr>, Box<Expr>),
    Bool(BoolOp, Vec<Expr>),
    /// Inclusive at both ends.
    Between(Box<Expr>, Box<Expr>, Box<Expr>),
    StartsWith(Box<Expr>, Vec<u8>),
    /// Conditional; only reachable through staged UDF bodies.
    If(Box<Expr>, Box<Expr>, Box<Expr>),
    Udf(String, Vec<Expr>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ExprType {
    Value(DataType),
    Bool,
}

impl fmt::Display for ExprType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExprType::Value(t) => t.fmt(f),
            ExprType::Bool => f.write_str("boolean"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TypeInfo {
    pub ty: ExprType,
    pub nullable: bool,
}

impl TypeInfo {
    pub fn value(&self) -> Option<DataType> {
        match self.ty {
            ExprType::Value(t) => Some(t),
            ExprType::Bool => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UdfSignature {
    pub params: Vec<DataType>,
    pub ret: ExprType,
}

/// Source of UDF signatures for type checking.
pub trait UdfSignatures {
    fn signature(&self, name: &str) -> Option<UdfSignature>;
}

/// No UDFs registered.
pub struct NoUdfs;

impl UdfSignatures for NoUdfs {
    fn signature(&self, _: &str) -> Option<UdfSignature> {
        None
    }
}

pub fn col(name: &str) -> Expr {
    Expr::Column(name.to_string())
}

pub fn lit_i64(v: i64) -> Expr {
    Expr::Literal(Literal::Int64(v))
}

pub fn lit_f64(v: f64) -> Expr {
    Expr::Literal(Literal::Float64(v))
}

pub fn lit_text(v: &str) -> Expr {
    Expr::Literal(Literal::Text(v.as_bytes().to_vec()))
}

pub fn lit_bool(v: bool) -> Expr {
    Expr::Literal(Literal::Bool(v))
}

/// Date literal from `YYYY-MM-DD`; panics on malformed input.
pub fn lit_date(ymd: &str) -> Expr {
    let v = date::parse(ymd.as_bytes()).unwrap_or_else(|| panic!("invalid date literal {ymd}"));
    Expr::Literal(Literal::Date(v))
}

pub fn udf(name: &str, args: Vec<Expr>) -> Expr {
    Expr::Udf(name.to_string(), args)
}

macro_rules! binop {
    ($trait:ident, $method:ident, $op:expr) => {
        impl std::ops::$trait for Expr {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                Expr::Arith($op, Box::new(self), Box::new(rhs))
            }
        }
    };
}

binop!(Add, add, ArithOp::Add);
binop!(Sub, sub, ArithOp::Sub);
binop!(Mul, mul, ArithOp::Mul);
binop!(Div, div, ArithOp::Div);

impl Expr {
    fn cmp(self, op: CmpOp, rhs: Expr) -> Expr {
        Expr::Cmp(op, Box::new(self), Box::new(rhs))
    }

    pub fn eq(self, rhs: Expr) -> Expr {
        self.cmp(CmpOp::Eq, rhs)
    }

    pub fn not_eq(self, rhs: Expr) -> Expr {
        self.cmp(CmpOp::NotEq, rhs)
    }

    pub fn lt(self, rhs: Expr) -> Expr {
        self.cmp(CmpOp::Lt, rhs)
    }

    pub fn lt_eq(self, rhs: Expr) -> Expr {
        self.cmp(CmpOp::LtEq, rhs)
    }

    pub fn gt(self, rhs: Expr) -> Expr {
        self.cmp(CmpOp::Gt, rhs)
    }

    pub fn gt_eq(self, rhs: Expr) -> Expr {
        self.cmp(CmpOp::GtEq, rhs)
    }

    pub fn and(self, rhs: Expr) -> Expr {
        Expr::Bool(BoolOp::And, vec![self, rhs])
    }

    pub fn or(self, rhs: Expr) -> Expr {
        Expr::Bool(BoolOp::Or, vec![self, rhs])
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(self) -> Expr {
        Expr::Bool(BoolOp::Not, vec![self])
    }

    pub fn between(self, lo: Expr, hi: Expr) -> Expr {
        Expr::Between(Box::new(self), Box::new(lo), Box::new(hi))
    }

    pub fn starts_with(self, prefix: &str) -> Expr {
        Expr::StartsWith(Box::new(self), prefix.as_bytes().to_vec())
    }

    /// Conjunction of `parts`; a single part is returned as is.
    pub fn conjunction(mut parts: Vec<Expr>) -> Option<Expr> {
        match parts.len() {
            0 => None,
            1 => parts.pop(),
            _ => Some(Expr::Bool(BoolOp::And, parts)),
        }
    }

    /// Top-level conjuncts of a predicate.
    pub fn conjuncts(self) -> Vec<Expr> {
        match self {
            Expr::Bool(BoolOp::And, args) => args,
            e => vec![e],
        }
    }

    pub fn children(&self) -> Vec<&Expr> {
        match self {
            Expr::Column(_) | Expr::Literal(_) => vec![],
            Expr::Arith(_, l, r) | Expr::Cmp(_, l, r) => vec![l, r],
            Expr::Bool(_, args) | Expr::Udf(_, args) => args.iter().collect(),
            Expr::Between(a, b, c) | Expr::If(a, b, c) => vec![a, b, c],
            Expr::StartsWith(e, _) => vec![e],
        }
    }

    /// Rebuilds the expression bottom-up through `f`.
    pub fn transform(self, f: &mut impl FnMut(Expr) -> Result<Expr>) -> Result<Expr> {
        let e = match self {
            e @ (Expr::Column(_) | Expr::Literal(_)) => e,
            Expr::Arith(op, l, r) => Expr::Arith(op, Box::new(l.transform(f)?), Box::new(r.transform(f)?)),
            Expr::Cmp(op, l, r) => Expr::Cmp(op, Box::new(l.transform(f)?), Box::new(r.transform(f)?)),
            Expr::Bool(op, args) => Expr::Bool(op, args.into_iter().map(|a| a.transform(f)).collect::<Result<_>>()?),
            Expr::Udf(name, args) => Expr::Udf(name, args.into_iter().map(|a| a.transform(f)).collect::<Result<_>>()?),
            Expr::Between(a, b, c) => {
                Expr::Between(Box::new(a.transform(f)?), Box::new(b.transform(f)?), Box::new(c.transform(f)?))
            }
            Expr::If(a, b, c) => {
                Expr::If(Box::new(a.transform(f)?), Box::new(b.transform(f)?), Box::new(c.transform(f)?))
            }
            Expr::StartsWith(e, p) => Expr::StartsWith(Box::new(e.transform(f)?), p),
        };
        f(e)
    }

    pub fn columns(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_columns(&mut out);
        out
    }

    fn collect_columns(&self, out: &mut BTreeSet<String>) {
        if let Expr::Column(c) = self {
            out.insert(c.clone());
        }
        for ch in self.children() {
            ch.collect_columns(out);
        }
    }

    pub fn contains_udf(&self) -> bool {
        matches!(self, Expr::Udf(..)) || self.children().iter().any(|c| c.contains_udf())
    }

    pub fn count_nodes(&self, pred: &impl Fn(&Expr) -> bool) -> usize {
        usize::from(pred(self)) + self.children().iter().map(|c| c.count_nodes(pred)).sum::<usize>()
    }

    pub fn is_literal(&self) -> bool {
        matches!(self, Expr::Literal(_))
    }

    /// Bottom-up type inference against an input schema.
    pub fn infer(&self, schema: &Schema, udfs: &dyn UdfSignatures) -> Result<TypeInfo> {
        use ExprType::*;
        let info = |ty, nullable| TypeInfo { ty, nullable };
        Ok(match self {
            Expr::Column(name) => {
                let def = schema.get(name).ok_or_else(|| schema.resolve(name).unwrap_err())?;
                info(Value(def.dtype), def.nullable)
            }
            Expr::Literal(l) => info(l.ty(), false),
            Expr::Arith(op, l, r) => {
                let (lt, rt) = (l.infer(schema, udfs)?, r.infer(schema, udfs)?);
                let (a, b) = match (lt.value(), rt.value()) {
                    (Some(a), Some(b)) if a.is_numeric() && b.is_numeric() => (a, b),
                    _ => {
                        return Err(Error::ty(format!(
                            "arithmetic {} needs numeric operands, got {} and {} in {self}",
                            op.symbol(),
                            lt.ty,
                            rt.ty
                        )))
                    }
                };
                let out =
                    if a == DataType::Float64 || b == DataType::Float64 { DataType::Float64 } else { DataType::Int64 };
                // integer division by zero yields null
                let div_null = *op == ArithOp::Div && out == DataType::Int64;
                info(Value(out), lt.nullable || rt.nullable || div_null)
            }
            Expr::Cmp(_, l, r) => {
                let (lt, rt) = (l.infer(schema, udfs)?, r.infer(schema, udfs)?);
                check_comparable(&lt, &rt, self)?;
                info(Bool, false)
            }
            Expr::Between(e, lo, hi) => {
                let et = e.infer(schema, udfs)?;
                check_comparable(&et, &lo.infer(schema, udfs)?, self)?;
                check_comparable(&et, &hi.infer(schema, udfs)?, self)?;
                info(Bool, false)
            }
            Expr::Bool(op, args) => {
                let arity_ok = match op {
                    BoolOp::Not => args.len() == 1,
                    _ => !args.is_empty(),
                };
                if !arity_ok {
                    return Err(Error::ty(format!("malformed boolean expression {self}")));
                }
                for a in args {
                    if a.infer(schema, udfs)?.ty != Bool {
                        return Err(Error::ty(format!("boolean operator applied to non-boolean {a}")));
                    }
                }
                info(Bool, false)
            }
            Expr::StartsWith(e, _) => {
                let t = e.infer(schema, udfs)?;
                if t.ty != Value(DataType::Text) {
                    return Err(Error::ty(format!("prefix match needs text, got {} in {self}", t.ty)));
                }
                info(Bool, false)
            }
            Expr::If(c, a, b) => {
                if c.infer(schema, udfs)?.ty != Bool {
                    return Err(Error::ty(format!("condition of {self} is not boolean")));
                }
                let (at, bt) = (a.infer(schema, udfs)?, b.infer(schema, udfs)?);
                let ty = match (at.ty, bt.ty) {
                    (x, y) if x == y => x,
                    (Value(x), Value(y)) if x.is_numeric() && y.is_numeric() => Value(DataType::Float64),
                    _ => return Err(Error::ty(format!("branches of {self} have types {} and {}", at.ty, bt.ty))),
                };
                info(ty, at.nullable || bt.nullable)
            }
            Expr::Udf(name, args) => {
                let sig = udfs.signature(name).ok_or_else(|| Error::UnknownUdf(name.clone()))?;
                if sig.params.len() != args.len() {
                    return Err(Error::Udf {
                        name: name.clone(),
                        message: format!("expects {} arguments, got {}", sig.params.len(), args.len()),
                    });
                }
                let mut nullable = false;
                for (pos, (a, p)) in args.iter().zip(&sig.params).enumerate() {
                    let t = a.infer(schema, udfs)?;
                    if t.ty != Value(*p) {
                        return Err(Error::Udf {
                            name: name.clone(),
                            message: format!("argument {pos} must be {p}, got {}", t.ty),
                        });
                    }
                    nullable |= t.nullable;
                }
                info(sig.ret, nullable)
            }
        })
    }
}

fn check_comparable(l: &TypeInfo, r: &TypeInfo, e: &Expr) -> Result<()> {
    match (l.value(), r.value()) {
        (Some(a), Some(b)) if a == b || (a.is_numeric() && b.is_numeric()) => Ok(()),
        _ => Err(Error::ty(format!("type mismatch in predicate {e}: {} vs {}", l.ty, r.ty))),
    }
}

pub(crate) fn quote_text(bytes: &[u8]) -> String {
    format!("'{}'", String::from_utf8_lossy(bytes).replace('\'', "''"))
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Literal::Int64(v) => write!(f, "{v}"),
            Literal::Float64(v) => write!(f, "{v:?}"),
            Literal::Date(v) => write!(f, "date '{}'", date::format(*v)),
            Literal::Text(v) => f.write_str(&quote_text(v)),
            Literal::Bool(v) => write!(f, "{v}"),
        }
    }
}

impl Expr {
    /// Display with some column references replaced by other text.
    pub(crate) fn render(&self, subst: &dyn Fn(&str) -> Option<String>) -> String {
        let mut out = String::new();
        self.write_to(&mut out, subst).expect("string write");
        out
    }

    fn write_to(&self, f: &mut impl fmt::Write, subst: &dyn Fn(&str) -> Option<String>) -> fmt::Result {
        fn list(
            f: &mut impl fmt::Write,
            args: &[&Expr],
            sep: &str,
            subst: &dyn Fn(&str) -> Option<String>,
        ) -> fmt::Result {
            for (i, a) in args.iter().enumerate() {
                if i > 0 {
                    f.write_str(sep)?;
                }
                a.write_to(f, subst)?;
            }
            Ok(())
        }
        match self {
            Expr::Column(c) => match subst(c) {
                Some(s) => f.write_str(&s),
                None => f.write_str(c),
            },
            Expr::Literal(l) => write!(f, "{l}"),
            Expr::Arith(op, l, r) => {
                f.write_char('(')?;
                l.write_to(f, subst)?;
                write!(f, " {} ", op.symbol())?;
                r.write_to(f, subst)?;
                f.write_char(')')
            }
            Expr::Cmp(op, l, r) => {
                f.write_char('(')?;
                l.write_to(f, subst)?;
                write!(f, " {} ", op.symbol())?;
                r.write_to(f, subst)?;
                f.write_char(')')
            }
            Expr::Bool(BoolOp::Not, args) => {
                f.write_str("(NOT ")?;
                args[0].write_to(f, subst)?;
                f.write_char(')')
            }
            Expr::Bool(op, args) => {
                f.write_char('(')?;
                list(f, &args.iter().collect::<Vec<_>>(), if *op == BoolOp::And { " AND " } else { " OR " }, subst)?;
                f.write_char(')')
            }
            Expr::Between(e, lo, hi) => {
                f.write_char('(')?;
                e.write_to(f, subst)?;
                f.write_str(" BETWEEN ")?;
                lo.write_to(f, subst)?;
                f.write_str(" AND ")?;
                hi.write_to(f, subst)?;
                f.write_char(')')
            }
            Expr::StartsWith(e, p) => {
                f.write_str("starts_with(")?;
                e.write_to(f, subst)?;
                write!(f, ", {})", quote_text(p))
            }
            Expr::If(c, a, b) => {
                f.write_str("if(")?;
                list(f, &[c, a, b], ", ", subst)?;
                f.write_char(')')
            }
            Expr::Udf(name, args) => {
                write!(f, "{name}(")?;
                list(f, &args.iter().collect::<Vec<_>>(), ", ", subst)?;
                f.write_char(')')
            }
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write_to(f, &|_| None)
    }
}
