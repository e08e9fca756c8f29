//! SQL subset: lexer, recursive-descent parser and the inverse printer.
//!
//! ```text
//! query  := SELECT items FROM table ({"," table} | {join})
//!           [WHERE expr] [GROUP BY ident, ...] [ORDER BY ident [ASC|DESC], ...] [LIMIT int]
//! join   := [INNER] JOIN t ON expr | LEFT [OUTER] JOIN t ON expr
//!         | LEFT SEMI JOIN t ON expr | LEFT ANTI JOIN t ON expr
//! ```
//!
//! Comma joins take their keys from equality conjuncts of the WHERE clause.
//! `ON` conjuncts must either equate a left expression with a right one or
//! mention right-side columns only; the latter filter the right input.

use std::collections::BTreeSet;

use crate::catalog::{date, Catalog, Schema};
use crate::error::{Error, Result};

use super::expr::{BoolOp, CmpOp, Expr, Literal, UdfSignatures};
use super::plan::{AggExpr, AggFunc, JoinKind, LogicalPlan, SortKey};

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Ident(String),
    Number(String),
    Str(Vec<u8>),
    Sym(&'static str),
    Eof,
}

#[derive(Clone, Debug)]
struct Token {
    tok: Tok,
    offset: usize,
}

const SYMBOLS: [&str; 14] = ["<>", "!=", "<=", ">=", "<", ">", "=", ",", "(", ")", "*", "+", "-", "/"];

fn lex(text: &str) -> Result<Vec<Token>> {
    let b = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    let syntax = |offset: usize, message: String| Error::Syntax { offset, message };
    while i < b.len() {
        let c = b[i];
        if c.is_ascii_whitespace() || c == b';' {
            i += 1;
            continue;
        }
        if c == b'-' && b.get(i + 1) == Some(&b'-') {
            while i < b.len() && b[i] != b'\n' {
                i += 1;
            }
            continue;
        }
        let start = i;
        let tok = if c.is_ascii_alphabetic() || c == b'_' {
            while i < b.len() && (b[i].is_ascii_alphanumeric() || b[i] == b'_') {
                i += 1;
            }
            Tok::Ident(text[start..i].to_string())
        } else if c.is_ascii_digit() || (c == b'.' && b.get(i + 1).is_some_and(u8::is_ascii_digit)) {
            while i < b.len() && (b[i].is_ascii_digit() || b[i] == b'.') {
                i += 1;
            }
            if i < b.len() && (b[i] == b'e' || b[i] == b'E') {
                i += 1;
                if i < b.len() && (b[i] == b'+' || b[i] == b'-') {
                    i += 1;
                }
                while i < b.len() && b[i].is_ascii_digit() {
                    i += 1;
                }
            }
            Tok::Number(text[start..i].to_string())
        } else if c == b'\'' {
            let mut s = Vec::new();
            i += 1;
            loop {
                match b.get(i) {
                    None => return Err(syntax(start, "unterminated string literal".into())),
                    Some(b'\'') if b.get(i + 1) == Some(&b'\'') => {
                        s.push(b'\'');
                        i += 2;
                    }
                    Some(b'\'') => {
                        i += 1;
                        break;
                    }
                    Some(&x) => {
                        s.push(x);
                        i += 1;
                    }
                }
            }
            Tok::Str(s)
        } else if let Some(sym) = SYMBOLS.iter().find(|s| b[i..].starts_with(s.as_bytes())) {
            i += sym.len();
            Tok::Sym(sym)
        } else {
            return Err(syntax(i, format!("unexpected character '{}'", c as char)));
        };
        out.push(Token { tok, offset: start });
    }
    out.push(Token { tok: Tok::Eof, offset: text.len() });
    Ok(out)
}

const KEYWORDS: [&str; 28] = [
    "select",
    "from",
    "where",
    "group",
    "by",
    "order",
    "limit",
    "join",
    "inner",
    "left",
    "outer",
    "semi",
    "anti",
    "on",
    "and",
    "or",
    "not",
    "between",
    "like",
    "in",
    "as",
    "asc",
    "desc",
    "date",
    "true",
    "false",
    "to_date",
    "starts_with",
];

fn is_keyword(s: &str) -> bool {
    KEYWORDS.iter().any(|k| k.eq_ignore_ascii_case(s))
}

enum FromItem {
    Comma(String),
    Join(JoinKind, String, Expr),
}

struct Parser<'a> {
    toks: Vec<Token>,
    pos: usize,
    catalog: &'a Catalog,
    udfs: &'a dyn UdfSignatures,
    /// Aggregates collected while parsing the select list.
    aggs: Option<Vec<AggExpr>>,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        &self.toks[(self.pos + k).min(self.toks.len() - 1)].tok
    }

    fn offset(&self) -> usize {
        self.toks[self.pos].offset
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error<T>(&self, message: impl Into<String>) -> Result<T> {
        Err(Error::Syntax { offset: self.offset(), message: message.into() })
    }

    fn at_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s.eq_ignore_ascii_case(kw))
    }

    fn at_kw_at(&self, k: usize, kw: &str) -> bool {
        matches!(self.peek_at(k), Tok::Ident(s) if s.eq_ignore_ascii_case(kw))
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        let hit = self.at_kw(kw);
        if hit {
            self.bump();
        }
        hit
    }

    fn expect_kw(&mut self, kw: &str) -> Result<()> {
        if self.eat_kw(kw) {
            Ok(())
        } else {
            self.error(format!("expected {}", kw.to_uppercase()))
        }
    }

    fn eat_sym(&mut self, sym: &str) -> bool {
        let hit = matches!(self.peek(), Tok::Sym(s) if *s == sym);
        if hit {
            self.bump();
        }
        hit
    }

    fn expect_sym(&mut self, sym: &str) -> Result<()> {
        if self.eat_sym(sym) {
            Ok(())
        } else {
            self.error(format!("expected '{sym}'"))
        }
    }

    fn ident(&mut self) -> Result<String> {
        match self.peek().clone() {
            Tok::Ident(s) if !is_keyword(&s) => {
                self.bump();
                Ok(s)
            }
            _ => self.error("expected identifier"),
        }
    }

    fn string(&mut self) -> Result<Vec<u8>> {
        match self.peek().clone() {
            Tok::Str(s) => {
                self.bump();
                Ok(s)
            }
            _ => self.error("expected string literal"),
        }
    }

    fn query(&mut self) -> Result<LogicalPlan> {
        self.expect_kw("select")?;
        self.aggs = Some(Vec::new());
        let items = if self.eat_sym("*") { None } else { Some(self.select_items()?) };
        let aggs = self.aggs.take().unwrap_or_default();

        self.expect_kw("from")?;
        let first = self.ident()?;
        let mut from = Vec::new();
        loop {
            if self.eat_sym(",") {
                from.push(FromItem::Comma(self.ident()?));
                continue;
            }
            let kind = if self.at_kw("join") {
                JoinKind::Inner
            } else if self.at_kw("inner") && self.at_kw_at(1, "join") {
                self.bump();
                JoinKind::Inner
            } else if self.at_kw("left") {
                self.bump();
                if self.eat_kw("semi") {
                    JoinKind::LeftSemi
                } else if self.eat_kw("anti") {
                    JoinKind::LeftAnti
                } else {
                    self.eat_kw("outer");
                    JoinKind::LeftOuter
                }
            } else {
                break;
            };
            self.expect_kw("join")?;
            let t = self.ident()?;
            self.expect_kw("on")?;
            let on = self.expr()?;
            from.push(FromItem::Join(kind, t, on));
        }
        let selection = if self.eat_kw("where") { Some(self.expr()?) } else { None };
        let mut group_by = Vec::new();
        if self.eat_kw("group") {
            self.expect_kw("by")?;
            loop {
                group_by.push(self.ident()?);
                if !self.eat_sym(",") {
                    break;
                }
            }
        }
        let mut order_by = Vec::new();
        if self.eat_kw("order") {
            self.expect_kw("by")?;
            loop {
                let column = self.ident()?;
                let desc = if self.eat_kw("desc") {
                    true
                } else {
                    self.eat_kw("asc");
                    false
                };
                order_by.push(SortKey { column, desc });
                if !self.eat_sym(",") {
                    break;
                }
            }
        }
        let limit = if self.eat_kw("limit") {
            match self.bump() {
                Tok::Number(n) => match n.parse::<u64>() {
                    Ok(v) => Some(v),
                    Err(_) => return self.error(format!("invalid LIMIT {n}")),
                },
                _ => return self.error("expected row count after LIMIT"),
            }
        } else {
            None
        };
        if *self.peek() != Tok::Eof {
            return self.error("unexpected input after query");
        }

        let mut plan = self.build_from(&first, from, selection)?;
        if !aggs.is_empty() || !group_by.is_empty() {
            let Some(items) = items else {
                return Err(Error::Unsupported("SELECT * with aggregation".into()));
            };
            plan = self.aggregate(plan, items, aggs, group_by)?;
        } else {
            let schema = plan.schema(self.udfs)?;
            let exprs = match items {
                Some(items) => items,
                None => schema.names().map(|n| (Expr::Column(n.to_string()), n.to_string())).collect(),
            };
            plan = LogicalPlan::Project { exprs, input: Box::new(plan) };
        }
        if !order_by.is_empty() {
            plan = LogicalPlan::Sort { keys: order_by, input: Box::new(plan) };
        }
        if let Some(n) = limit {
            plan = LogicalPlan::Limit { n, input: Box::new(plan) };
        }
        plan.schema(self.udfs)?;
        Ok(plan)
    }

    fn select_items(&mut self) -> Result<Vec<(Expr, String)>> {
        let mut items = Vec::new();
        loop {
            let pos = items.len();
            let aggs_before = self.aggs.as_ref().map_or(0, Vec::len);
            let mut e = self.expr()?;
            let alias = if self.eat_kw("as") || matches!(self.peek(), Tok::Ident(s) if !is_keyword(s)) {
                Some(self.ident()?)
            } else {
                None
            };
            let aggs = self.aggs.as_mut().expect("select list");
            let bare_agg =
                aggs.len() == aggs_before + 1 && matches!(&e, Expr::Column(c) if *c == aggs[aggs_before].name);
            let name = match (&alias, &e) {
                (Some(a), _) => a.clone(),
                (None, _) if bare_agg => {
                    let a = &aggs[aggs_before];
                    match &a.arg {
                        None => a.func.name().to_string(),
                        Some(Expr::Column(c)) => format!("{}_{c}", a.func.name()),
                        Some(_) => format!("expr{pos}"),
                    }
                }
                (None, Expr::Column(c)) => c.clone(),
                (None, _) => format!("expr{pos}"),
            };
            if bare_agg {
                aggs[aggs_before].name = name.clone();
                e = Expr::Column(name.clone());
            }
            items.push((e, name));
            if !self.eat_sym(",") {
                return Ok(items);
            }
        }
    }

    fn build_from(&self, first: &str, from: Vec<FromItem>, selection: Option<Expr>) -> Result<LogicalPlan> {
        let mut plan = self.scan(first)?;
        let mut pending = selection.map(Expr::conjuncts).unwrap_or_default();
        for item in from {
            let left_cols = column_set(&plan.schema(self.udfs)?);
            match item {
                FromItem::Comma(t) => {
                    let right = self.scan(&t)?;
                    let right_cols = column_set(&right.schema(self.udfs)?);
                    let mut on = Vec::new();
                    pending.retain(|c| match equi_key(c, &left_cols, &right_cols) {
                        Some(k) => {
                            on.push(k);
                            false
                        }
                        None => true,
                    });
                    if on.is_empty() {
                        return Err(Error::Unsupported(format!(
                            "cross join with {t}: add an equality predicate between the inputs"
                        )));
                    }
                    plan =
                        LogicalPlan::Join { kind: JoinKind::Inner, on, left: Box::new(plan), right: Box::new(right) };
                }
                FromItem::Join(kind, t, cond) => {
                    let mut right = self.scan(&t)?;
                    let right_cols = column_set(&right.schema(self.udfs)?);
                    let mut on = Vec::new();
                    let mut right_filter = Vec::new();
                    for c in cond.conjuncts() {
                        let cols = c.columns();
                        if let Some(missing) = cols.iter().find(|n| !left_cols.contains(*n) && !right_cols.contains(*n))
                        {
                            return Err(Error::UnknownColumn { name: missing.clone(), candidates: Vec::new() });
                        }
                        if let Some(k) = equi_key(&c, &left_cols, &right_cols) {
                            on.push(k);
                        } else if !cols.is_empty() && cols.is_subset(&right_cols) {
                            right_filter.push(c);
                        } else {
                            return Err(Error::Unsupported(format!(
                                "join condition {c} must equate both inputs or reference {t} only"
                            )));
                        }
                    }
                    if let Some(predicate) = Expr::conjunction(right_filter) {
                        right = LogicalPlan::Filter { predicate, input: Box::new(right) };
                    }
                    plan = LogicalPlan::Join { kind, on, left: Box::new(plan), right: Box::new(right) };
                }
            }
        }
        if let Some(predicate) = Expr::conjunction(pending) {
            plan = LogicalPlan::Filter { predicate, input: Box::new(plan) };
        }
        Ok(plan)
    }

    fn scan(&self, table: &str) -> Result<LogicalPlan> {
        Ok(LogicalPlan::Scan { table: table.to_string(), schema: self.catalog.schema(table)?.clone() })
    }

    fn aggregate(
        &self,
        input: LogicalPlan,
        items: Vec<(Expr, String)>,
        aggs: Vec<AggExpr>,
        group_by: Vec<String>,
    ) -> Result<LogicalPlan> {
        let available: BTreeSet<String> = group_by.iter().cloned().chain(aggs.iter().map(|a| a.name.clone())).collect();
        for (e, _) in &items {
            if let Some(c) = e.columns().into_iter().find(|c| !available.contains(c)) {
                return Err(Error::ty(format!("column {c} must appear in GROUP BY or inside an aggregate")));
            }
        }
        let elide = items.len() == group_by.len() + aggs.len()
            && items
                .iter()
                .zip(group_by.iter().chain(aggs.iter().map(|a| &a.name)))
                .all(|((e, n), want)| matches!(e, Expr::Column(c) if c == want && n == want));
        let plan = LogicalPlan::Aggregate {
            group_by: group_by.into_iter().map(|g| (Expr::Column(g.clone()), g)).collect(),
            aggs,
            input: Box::new(input),
        };
        Ok(if elide { plan } else { LogicalPlan::Project { exprs: items, input: Box::new(plan) } })
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut args = vec![self.and_expr()?];
        while self.eat_kw("or") {
            args.push(self.and_expr()?);
        }
        Ok(if args.len() == 1 { args.pop().unwrap() } else { Expr::Bool(BoolOp::Or, args) })
    }

    fn and_expr(&mut self) -> Result<Expr> {
        let mut args = vec![self.not_expr()?];
        while self.eat_kw("and") {
            args.push(self.not_expr()?);
        }
        Ok(if args.len() == 1 { args.pop().unwrap() } else { Expr::Bool(BoolOp::And, args) })
    }

    fn not_expr(&mut self) -> Result<Expr> {
        if self.eat_kw("not") {
            return Ok(Expr::Bool(BoolOp::Not, vec![self.not_expr()?]));
        }
        self.predicate()
    }

    fn predicate(&mut self) -> Result<Expr> {
        let lhs = self.additive()?;
        let op = match self.peek() {
            Tok::Sym("=") => Some(CmpOp::Eq),
            Tok::Sym("<>") | Tok::Sym("!=") => Some(CmpOp::NotEq),
            Tok::Sym("<") => Some(CmpOp::Lt),
            Tok::Sym("<=") => Some(CmpOp::LtEq),
            Tok::Sym(">") => Some(CmpOp::Gt),
            Tok::Sym(">=") => Some(CmpOp::GtEq),
            _ => None,
        };
        if let Some(op) = op {
            self.bump();
            let rhs = self.additive()?;
            return Ok(Expr::Cmp(op, Box::new(lhs), Box::new(rhs)));
        }
        let negated =
            self.at_kw("not") && (self.at_kw_at(1, "between") || self.at_kw_at(1, "like") || self.at_kw_at(1, "in"));
        if negated {
            self.bump();
        }
        let e = if self.eat_kw("between") {
            let lo = self.additive()?;
            self.expect_kw("and")?;
            let hi = self.additive()?;
            Expr::Between(Box::new(lhs), Box::new(lo), Box::new(hi))
        } else if self.at_kw("like") {
            self.bump();
            let at = self.offset();
            let pat = self.string()?;
            match pat.split_last() {
                Some((b'%', prefix)) if !prefix.iter().any(|c| *c == b'%' || *c == b'_') => {
                    Expr::StartsWith(Box::new(lhs), prefix.to_vec())
                }
                _ => {
                    return Err(Error::Syntax {
                        offset: at,
                        message: "only prefix LIKE patterns ('abc%') are supported".into(),
                    })
                }
            }
        } else if self.eat_kw("in") {
            self.expect_sym("(")?;
            let mut alts = Vec::new();
            loop {
                let v = self.additive()?;
                alts.push(Expr::Cmp(CmpOp::Eq, Box::new(lhs.clone()), Box::new(v)));
                if !self.eat_sym(",") {
                    break;
                }
            }
            self.expect_sym(")")?;
            if alts.len() == 1 {
                alts.pop().unwrap()
            } else {
                Expr::Bool(BoolOp::Or, alts)
            }
        } else {
            return Ok(lhs);
        };
        Ok(if negated { Expr::Bool(BoolOp::Not, vec![e]) } else { e })
    }

    fn additive(&mut self) -> Result<Expr> {
        let mut e = self.multiplicative()?;
        loop {
            let op = if self.eat_sym("+") {
                super::ArithOp::Add
            } else if self.eat_sym("-") {
                super::ArithOp::Sub
            } else {
                return Ok(e);
            };
            e = Expr::Arith(op, Box::new(e), Box::new(self.multiplicative()?));
        }
    }

    fn multiplicative(&mut self) -> Result<Expr> {
        let mut e = self.unary()?;
        loop {
            let op = if self.eat_sym("*") {
                super::ArithOp::Mul
            } else if self.eat_sym("/") {
                super::ArithOp::Div
            } else {
                return Ok(e);
            };
            e = Expr::Arith(op, Box::new(e), Box::new(self.unary()?));
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.eat_sym("-") {
            if let Tok::Number(n) = self.peek().clone() {
                self.bump();
                return self.number(&format!("-{n}"));
            }
            let e = self.unary()?;
            return Ok(Expr::Arith(super::ArithOp::Sub, Box::new(Expr::Literal(Literal::Int64(0))), Box::new(e)));
        }
        self.primary()
    }

    fn number(&self, text: &str) -> Result<Expr> {
        let lit = if text.contains(['.', 'e', 'E']) {
            text.parse::<f64>().ok().map(Literal::Float64)
        } else {
            text.parse::<i64>().ok().map(Literal::Int64)
        };
        match lit {
            Some(l) => Ok(Expr::Literal(l)),
            None => {
                Err(Error::Syntax { offset: self.toks[self.pos - 1].offset, message: format!("invalid number {text}") })
            }
        }
    }

    fn date_literal(&mut self) -> Result<Expr> {
        let at = self.offset();
        let s = self.string()?;
        match date::parse(&s) {
            Some(v) => Ok(Expr::Literal(Literal::Date(v))),
            None => {
                Err(Error::Syntax { offset: at, message: format!("invalid date '{}'", String::from_utf8_lossy(&s)) })
            }
        }
    }

    fn primary(&mut self) -> Result<Expr> {
        match self.peek().clone() {
            Tok::Number(n) => {
                self.bump();
                self.number(&n)
            }
            Tok::Str(s) => {
                self.bump();
                Ok(Expr::Literal(Literal::Text(s)))
            }
            Tok::Sym("(") => {
                self.bump();
                let e = self.expr()?;
                self.expect_sym(")")?;
                Ok(e)
            }
            Tok::Ident(id) => {
                let lower = id.to_ascii_lowercase();
                match lower.as_str() {
                    "true" | "false" => {
                        self.bump();
                        Ok(Expr::Literal(Literal::Bool(lower == "true")))
                    }
                    "date" if matches!(self.peek_at(1), Tok::Str(_)) => {
                        self.bump();
                        self.date_literal()
                    }
                    "to_date" => {
                        self.bump();
                        self.expect_sym("(")?;
                        let e = self.date_literal()?;
                        self.expect_sym(")")?;
                        Ok(e)
                    }
                    "starts_with" => {
                        self.bump();
                        self.expect_sym("(")?;
                        let e = self.expr()?;
                        self.expect_sym(",")?;
                        let p = self.string()?;
                        self.expect_sym(")")?;
                        Ok(Expr::StartsWith(Box::new(e), p))
                    }
                    _ if is_keyword(&id) => self.error(format!("unexpected keyword {}", id.to_uppercase())),
                    _ if self.peek_at(1) == &Tok::Sym("(") => {
                        self.bump();
                        self.bump();
                        match AggFunc::from_name(&id) {
                            Some(func) => self.aggregate_call(func),
                            None => {
                                let mut args = Vec::new();
                                if !self.eat_sym(")") {
                                    loop {
                                        args.push(self.expr()?);
                                        if !self.eat_sym(",") {
                                            break;
                                        }
                                    }
                                    self.expect_sym(")")?;
                                }
                                Ok(Expr::Udf(id, args))
                            }
                        }
                    }
                    _ => {
                        self.bump();
                        Ok(Expr::Column(id))
                    }
                }
            }
            Tok::Eof => self.error("unexpected end of input"),
            t => self.error(format!("unexpected token {t:?}")),
        }
    }

    fn aggregate_call(&mut self, func: AggFunc) -> Result<Expr> {
        let Some(mut collected) = self.aggs.take() else {
            return self.error(format!("aggregate {} not allowed here", func.name()));
        };
        let arg = if func == AggFunc::Count && self.eat_sym("*") { None } else { Some(self.expr()?) };
        self.expect_sym(")")?;
        let name = format!("__agg{}", collected.len());
        collected.push(AggExpr { func, arg, name: name.clone() });
        self.aggs = Some(collected);
        Ok(Expr::Column(name))
    }
}

fn column_set(s: &Schema) -> BTreeSet<String> {
    s.names().map(str::to_string).collect()
}

/// `a = b` with one side over `left` only and the other over `right` only,
/// oriented (left, right).
fn equi_key(c: &Expr, left: &BTreeSet<String>, right: &BTreeSet<String>) -> Option<(Expr, Expr)> {
    let Expr::Cmp(CmpOp::Eq, a, b) = c else {
        return None;
    };
    let within = |e: &Expr, set: &BTreeSet<String>| {
        let cols = e.columns();
        !cols.is_empty() && cols.is_subset(set)
    };
    if within(a, left) && within(b, right) {
        Some(((**a).clone(), (**b).clone()))
    } else if within(b, left) && within(a, right) {
        Some(((**b).clone(), (**a).clone()))
    } else {
        None
    }
}

/// Parses and type-checks a query against the catalog.
pub fn parse_sql(text: &str, catalog: &Catalog, udfs: &dyn UdfSignatures) -> Result<LogicalPlan> {
    let mut p = Parser { toks: lex(text)?, pos: 0, catalog, udfs, aggs: None };
    p.query()
}

/// Renders a plan of the shape `parse_sql` produces back into SQL text.
pub fn print_sql(plan: &LogicalPlan) -> Result<String> {
    let not_expressible = |what: &str| Err(Error::Unsupported(format!("plan is not expressible in SQL: {what}")));
    let mut p = plan;
    let mut limit = None;
    let mut order = None;
    if let LogicalPlan::Limit { n, input } = p {
        limit = Some(*n);
        p = input;
    }
    if let LogicalPlan::Sort { keys, input } = p {
        order = Some(keys);
        p = input;
    }
    let mut items: Option<&[(Expr, String)]> = None;
    if let LogicalPlan::Project { exprs, input } = p {
        items = Some(exprs);
        p = input;
    }
    let mut select = Vec::new();
    let mut group = None;
    if let LogicalPlan::Aggregate { group_by, aggs, input } = p {
        let mut names = Vec::new();
        for (e, n) in group_by {
            match e {
                Expr::Column(c) if c == n => names.push(n.clone()),
                _ => return not_expressible("computed GROUP BY key"),
            }
        }
        let call = |name: &str| aggs.iter().find(|a| a.name == name);
        match items {
            Some(items) => {
                for (e, n) in items {
                    let text = e.render(&|c| call(c).map(ToString::to_string));
                    select.push(format!("{text} AS {n}"));
                }
            }
            None => {
                select.extend(names.iter().map(|n| format!("{n} AS {n}")));
                select.extend(aggs.iter().map(|a| format!("{a} AS {}", a.name)));
            }
        }
        group = Some(names);
        p = input;
    } else {
        match items {
            Some(items) => select.extend(items.iter().map(|(e, n)| format!("{e} AS {n}"))),
            None => return not_expressible("missing select list"),
        }
    }
    let mut selection = None;
    if let LogicalPlan::Filter { predicate, input } = p {
        selection = Some(predicate);
        p = input;
    }
    let mut sql = format!("SELECT {} FROM {}", select.join(", "), print_from(p)?);
    if let Some(pred) = selection {
        sql.push_str(&format!(" WHERE {pred}"));
    }
    if let Some(g) = group.filter(|g| !g.is_empty()) {
        sql.push_str(&format!(" GROUP BY {}", g.join(", ")));
    }
    if let Some(keys) = order {
        let parts: Vec<String> =
            keys.iter().map(|k| format!("{}{}", k.column, if k.desc { " DESC" } else { "" })).collect();
        sql.push_str(&format!(" ORDER BY {}", parts.join(", ")));
    }
    if let Some(n) = limit {
        sql.push_str(&format!(" LIMIT {n}"));
    }
    Ok(sql)
}

fn print_from(p: &LogicalPlan) -> Result<String> {
    match p {
        LogicalPlan::Scan { table, .. } => Ok(table.clone()),
        LogicalPlan::Join { kind, on, left, right } => {
            let (table, filter) = match right.as_ref() {
                LogicalPlan::Scan { table, .. } => (table, None),
                LogicalPlan::Filter { predicate, input } => match input.as_ref() {
                    LogicalPlan::Scan { table, .. } => (table, Some(predicate)),
                    _ => return Err(Error::Unsupported("plan is not expressible in SQL: nested join input".into())),
                },
                _ => return Err(Error::Unsupported("plan is not expressible in SQL: nested join input".into())),
            };
            let kw = match kind {
                JoinKind::Inner => "JOIN",
                JoinKind::LeftOuter => "LEFT JOIN",
                JoinKind::LeftSemi => "LEFT SEMI JOIN",
                JoinKind::LeftAnti => "LEFT ANTI JOIN",
            };
            let mut conds: Vec<String> = on.iter().map(|(l, r)| format!("({l} = {r})")).collect();
            conds.extend(filter.map(ToString::to_string));
            Ok(format!("{} {kw} {table} ON {}", print_from(left)?, conds.join(" AND ")))
        }
        other => Err(Error::Unsupported(format!("plan is not expressible in SQL: {} in FROM", other.name()))),
    }
}
