//! Staged scalar UDFs: registration and inlining into logical plans.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use crate::catalog::{ColumnDef, DataType, Schema};
use crate::error::{Error, Result};
use crate::frontend::{AggFunc, Expr, ExprType, LogicalPlan, UdfSignature, UdfSignatures};
use crate::kernel_ir::staging::Rep;

pub type UdfBuilder = Arc<dyn Fn(&[Rep]) -> Rep + Send + Sync>;

/// A scalar UDF: a builder from staged arguments to a staged result.
#[derive(Clone)]
pub struct UdfDef {
    pub name: String,
    pub params: Vec<DataType>,
    pub builder: UdfBuilder,
}

impl UdfDef {
    pub fn new(name: &str, params: Vec<DataType>, builder: impl Fn(&[Rep]) -> Rep + Send + Sync + 'static) -> Self {
        UdfDef { name: name.to_string(), params, builder: Arc::new(builder) }
    }

    pub fn arity(&self) -> usize {
        self.params.len()
    }

    /// The body applied to `args`.
    pub fn expand(&self, args: Vec<Expr>) -> Result<Expr> {
        if args.len() != self.arity() {
            return Err(Error::Udf {
                name: self.name.clone(),
                message: format!("expects {} arguments, got {}", self.arity(), args.len()),
            });
        }
        let reps: Vec<Rep> = args.into_iter().map(Rep::from_expr).collect();
        Ok((self.builder)(&reps).into_expr())
    }
}

impl fmt::Debug for UdfDef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("UdfDef").field("name", &self.name).field("params", &self.params).finish()
    }
}

#[derive(Clone, Debug)]
struct Registered {
    def: UdfDef,
    ret: ExprType,
}

#[derive(Clone, Debug, Default)]
pub struct UdfRegistry {
    defs: BTreeMap<String, Registered>,
}

const MAX_INLINE_DEPTH: usize = 32;

fn param_name(i: usize) -> String {
    format!("$arg{i}")
}

impl UdfRegistry {
    pub fn new() -> Self {
        UdfRegistry::default()
    }

    /// Registers a new UDF; an existing name is an error.
    pub fn register(&mut self, def: UdfDef) -> Result<()> {
        if self.defs.contains_key(&def.name) {
            return Err(Error::Udf { name: def.name.clone(), message: "already registered".into() });
        }
        self.register_or_replace(def)
    }

    /// Registers a UDF, replacing an existing one of the same name.
    pub fn register_or_replace(&mut self, def: UdfDef) -> Result<()> {
        let fail = |message: String| Err(Error::Udf { name: def.name.clone(), message });
        let valid_ident = def.name.chars().next().is_some_and(|c| c.is_ascii_alphabetic() || c == '_')
            && def.name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_');
        if !valid_ident {
            return fail("name must be an identifier".into());
        }
        if AggFunc::from_name(&def.name).is_some() {
            return fail("aggregate UDFs are not supported".into());
        }
        // stage against placeholder parameters to learn the result type
        let placeholders: Vec<Expr> = (0..def.arity()).map(|i| Expr::Column(param_name(i))).collect();
        let body = def.expand(placeholders.clone())?;
        if def.expand(placeholders)? != body {
            return fail("builder is not deterministic".into());
        }
        if body.count_nodes(&|e| matches!(e, Expr::Udf(n, _) if *n == def.name)) > 0 {
            return fail("recursive UDFs are not supported".into());
        }
        let schema =
            Schema::new(def.params.iter().enumerate().map(|(i, t)| ColumnDef::new(param_name(i), *t)).collect())?;
        let info =
            body.infer(&schema, self).map_err(|e| Error::Udf { name: def.name.clone(), message: e.to_string() })?;
        if let Some(stray) = body.columns().into_iter().find(|c| !c.starts_with("$arg")) {
            return fail(format!("body references column {stray} that is not a parameter"));
        }
        self.defs.insert(def.name.clone(), Registered { def, ret: info.ty });
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&UdfDef> {
        self.defs.get(name).map(|r| &r.def)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.defs.keys().map(String::as_str)
    }

    /// Replaces every UDF call in `e` by its staged body.
    pub fn inline_expr(&self, e: Expr) -> Result<Expr> {
        self.inline_depth(e, 0)
    }

    fn inline_depth(&self, e: Expr, depth: usize) -> Result<Expr> {
        if depth > MAX_INLINE_DEPTH {
            return Err(Error::Unsupported("UDF inlining exceeded the nesting limit".into()));
        }
        e.transform(&mut |x| match x {
            Expr::Udf(name, args) => {
                let def = self.get(&name).ok_or_else(|| Error::UnknownUdf(name.clone()))?;
                let body = def.expand(args)?;
                if body.contains_udf() {
                    self.inline_depth(body, depth + 1)
                } else {
                    Ok(body)
                }
            }
            other => Ok(other),
        })
    }
}

impl UdfSignatures for UdfRegistry {
    fn signature(&self, name: &str) -> Option<UdfSignature> {
        self.defs.get(name).map(|r| UdfSignature { params: r.def.params.clone(), ret: r.ret })
    }
}

/// Plan with every UDF call replaced by its staged body.
pub fn inline_udfs(plan: LogicalPlan, registry: &UdfRegistry) -> Result<LogicalPlan> {
    plan.map_exprs(&mut |e| {
        if e.contains_udf() {
            registry.inline_expr(e)
        } else {
            Ok(e)
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::{col, lit_i64, udf};

    fn registry() -> UdfRegistry {
        let mut r = UdfRegistry::new();
        r.register(UdfDef::new("sqr", vec![DataType::Int64], |a| &a[0] * &a[0])).unwrap();
        r.register(UdfDef::new("id", vec![DataType::Int64], |a| a[0].clone())).unwrap();
        r.register(UdfDef::new("quad", vec![DataType::Int64], |a| {
            Rep::call("sqr", vec![Rep::call("sqr", vec![a[0].clone()])])
        }))
        .unwrap();
        r
    }

    #[test]
    fn inlines_nested_calls() {
        let r = registry();
        let e = r.inline_expr(udf("quad", vec![udf("id", vec![col("x")])])).unwrap();
        let sq = col("x") * col("x");
        assert_eq!(e, sq.clone() * sq);
    }

    #[test]
    fn signatures_and_errors() {
        let r = registry();
        assert_eq!(r.signature("sqr").unwrap().ret, ExprType::Value(DataType::Int64));
        assert_eq!(r.inline_expr(udf("foo", vec![])).unwrap_err().to_string(), "unknown UDF foo");
        let mut r2 = r.clone();
        assert!(r2.register(UdfDef::new("sqr", vec![DataType::Int64], |a| a[0].clone())).is_err());
        assert!(r2.register(UdfDef::new("sum", vec![DataType::Int64], |a| a[0].clone())).is_err());
        let err = r2.register(UdfDef::new("bad", vec![DataType::Text], |a| &a[0] + 1i64)).unwrap_err();
        assert!(err.to_string().contains("bad"), "{err}");
        assert_eq!(r.inline_expr(udf("sqr", vec![lit_i64(3)])).unwrap(), lit_i64(3) * lit_i64(3));
    }
}
