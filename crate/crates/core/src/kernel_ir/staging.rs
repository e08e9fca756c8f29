//! Staged values: operations on a [`Rep`] build expression nodes instead of
//! computing anything. UDF bodies are written against this surface.

use std::ops;

use crate::frontend::{BoolOp, CmpOp, Expr, Literal};

/// A staged expression handle.
#[derive(Clone, Debug, PartialEq)]
pub struct Rep {
    expr: Expr,
}

impl Rep {
    pub fn from_expr(expr: Expr) -> Self {
        Rep { expr }
    }

    pub fn expr(&self) -> &Expr {
        &self.expr
    }

    pub fn into_expr(self) -> Expr {
        self.expr
    }

    fn cmp(self, op: CmpOp, rhs: impl Into<Rep>) -> Rep {
        Rep::from_expr(Expr::Cmp(op, Box::new(self.expr), Box::new(rhs.into().expr)))
    }

    pub fn eq(self, rhs: impl Into<Rep>) -> Rep {
        self.cmp(CmpOp::Eq, rhs)
    }

    pub fn ne(self, rhs: impl Into<Rep>) -> Rep {
        self.cmp(CmpOp::NotEq, rhs)
    }

    pub fn lt(self, rhs: impl Into<Rep>) -> Rep {
        self.cmp(CmpOp::Lt, rhs)
    }

    pub fn le(self, rhs: impl Into<Rep>) -> Rep {
        self.cmp(CmpOp::LtEq, rhs)
    }

    pub fn gt(self, rhs: impl Into<Rep>) -> Rep {
        self.cmp(CmpOp::Gt, rhs)
    }

    pub fn ge(self, rhs: impl Into<Rep>) -> Rep {
        self.cmp(CmpOp::GtEq, rhs)
    }

    pub fn and(self, rhs: impl Into<Rep>) -> Rep {
        Rep::from_expr(Expr::Bool(BoolOp::And, vec![self.expr, rhs.into().expr]))
    }

    pub fn or(self, rhs: impl Into<Rep>) -> Rep {
        Rep::from_expr(Expr::Bool(BoolOp::Or, vec![self.expr, rhs.into().expr]))
    }

    pub fn between(self, lo: impl Into<Rep>, hi: impl Into<Rep>) -> Rep {
        Rep::from_expr(Expr::Between(Box::new(self.expr), Box::new(lo.into().expr), Box::new(hi.into().expr)))
    }

    pub fn starts_with(self, prefix: &str) -> Rep {
        Rep::from_expr(Expr::StartsWith(Box::new(self.expr), prefix.as_bytes().to_vec()))
    }

    /// Staged conditional: `if self { then } else { otherwise }`.
    pub fn select(self, then: impl Into<Rep>, otherwise: impl Into<Rep>) -> Rep {
        Rep::from_expr(Expr::If(Box::new(self.expr), Box::new(then.into().expr), Box::new(otherwise.into().expr)))
    }

    /// Call of another registered UDF, resolved at inlining time.
    pub fn call(name: &str, args: Vec<Rep>) -> Rep {
        Rep::from_expr(Expr::Udf(name.to_string(), args.into_iter().map(Rep::into_expr).collect()))
    }
}

impl ops::Not for Rep {
    type Output = Rep;
    fn not(self) -> Rep {
        Rep::from_expr(Expr::Bool(BoolOp::Not, vec![self.expr]))
    }
}

impl From<i64> for Rep {
    fn from(v: i64) -> Rep {
        Rep::from_expr(Expr::Literal(Literal::Int64(v)))
    }
}

impl From<f64> for Rep {
    fn from(v: f64) -> Rep {
        Rep::from_expr(Expr::Literal(Literal::Float64(v)))
    }
}

impl From<bool> for Rep {
    fn from(v: bool) -> Rep {
        Rep::from_expr(Expr::Literal(Literal::Bool(v)))
    }
}

impl From<&str> for Rep {
    fn from(v: &str) -> Rep {
        Rep::from_expr(Expr::Literal(Literal::Text(v.as_bytes().to_vec())))
    }
}

impl From<&Rep> for Rep {
    fn from(v: &Rep) -> Rep {
        v.clone()
    }
}

macro_rules! staged_arith {
    ($trait:ident, $method:ident, $op:ident) => {
        impl<T: Into<Rep>> ops::$trait<T> for Rep {
            type Output = Rep;
            fn $method(self, rhs: T) -> Rep {
                Rep::from_expr(Expr::Arith(
                    crate::frontend::ArithOp::$op,
                    Box::new(self.expr),
                    Box::new(rhs.into().expr),
                ))
            }
        }

        impl<T: Into<Rep>> ops::$trait<T> for &Rep {
            type Output = Rep;
            fn $method(self, rhs: T) -> Rep {
                ops::$trait::$method(self.clone(), rhs)
            }
        }
    };
}

staged_arith!(Add, add, Add);
staged_arith!(Sub, sub, Sub);
staged_arith!(Mul, mul, Mul);
staged_arith!(Div, div, Div);
